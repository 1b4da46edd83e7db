//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code paths it is used to check.
#![allow(dead_code)]

use omniflow::{NurbsCurve, Vec3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Cox-de Boor basis function `N_{i,p}(t)` by direct recursion, with the
/// half-open convention and the last span closed at the domain end.
pub fn basis(i: usize, p: usize, knots: &[f64], t: f64, end: f64) -> f64 {
    if p == 0 {
        let (a, b) = (knots[i], knots[i + 1]);
        let inside = (a <= t && t < b) || (t == end && a < b && b == end);
        return if inside { 1.0 } else { 0.0 };
    }
    let mut out = 0.0;
    let d1 = knots[i + p] - knots[i];
    if d1 > 0.0 {
        out += (t - knots[i]) / d1 * basis(i, p - 1, knots, t, end);
    }
    let d2 = knots[i + p + 1] - knots[i + 1];
    if d2 > 0.0 {
        out += (knots[i + p + 1] - t) / d2 * basis(i + 1, p - 1, knots, t, end);
    }
    out
}

/// `Σ N_i w_i P_i / Σ N_i w_i`.
pub fn basis_sum_eval(curve: &NurbsCurve, t: f64) -> Vec3 {
    let p = curve.degree();
    let knots = curve.knots();
    let end = knots[curve.control_points().len()];
    let mut num = [0.0; 3];
    let mut den = 0.0;
    for (i, (cp, &w)) in curve.control_points().iter().zip(curve.weights()).enumerate() {
        let n = basis(i, p, knots, t, end) * w;
        num[0] += n * cp.x;
        num[1] += n * cp.y;
        num[2] += n * cp.z;
        den += n;
    }
    Vec3::new(num[0] / den, num[1] / den, num[2] / den)
}

/// Speed `|dC/dt|` from central differences of point evaluations.
pub fn fd_speed(curve: &NurbsCurve, t: f64) -> f64 {
    let (a, b) = (curve.knots()[curve.degree()], curve.knots()[curve.control_points().len()]);
    let h = 1e-6 * (b - a);
    let (lo, hi) = ((t - h).max(a), (t + h).min(b));
    let d = curve.eval(hi).unwrap() - curve.eval(lo).unwrap();
    d.norm() / (hi - lo)
}

/// Arc length on `[t0, t1]` by composite Simpson with step <= `h`.
pub fn simpson_length(curve: &NurbsCurve, t0: f64, t1: f64, h: f64) -> f64 {
    if t1 <= t0 {
        return 0.0;
    }
    let mut n = ((t1 - t0) / h).ceil() as usize;
    n += n % 2;
    let step = (t1 - t0) / n as f64;
    let mut sum = fd_speed(curve, t0) + fd_speed(curve, t1);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * fd_speed(curve, t0 + k as f64 * step);
    }
    sum * step / 3.0
}

/// Parameter where the Simpson arc length from the domain start reaches `s`,
/// found by bisection.
pub fn simpson_param_at(curve: &NurbsCurve, s: f64, h: f64) -> f64 {
    let (a, b) = (curve.knots()[curve.degree()], curve.knots()[curve.control_points().len()]);
    let (mut lo, mut hi) = (a, b);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if simpson_length(curve, a, mid, h) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The textbook 9-point rational quadratic unit circle.
pub fn unit_circle() -> NurbsCurve {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let pts = [
        (1.0, 0.0),
        (1.0, 1.0),
        (0.0, 1.0),
        (-1.0, 1.0),
        (-1.0, 0.0),
        (-1.0, -1.0),
        (0.0, -1.0),
        (1.0, -1.0),
        (1.0, 0.0),
    ];
    NurbsCurve::new(
        2,
        pts.iter().map(|&(x, y)| Vec3::new(x, y, 0.0)).collect(),
        vec![1.0, r, 1.0, r, 1.0, r, 1.0, r, 1.0],
        vec![0.0, 0.0, 0.0, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 1.0, 1.0, 1.0],
    )
    .unwrap()
}

/// Naive per-pixel metric sums over a mask, straight from the formulas.
pub struct NaiveMetrics {
    pub aae_deg: f64,
    pub aepe: f64,
    pub fl_bg: Option<f64>,
    pub fl_fg: Option<f64>,
    pub fl_all: f64,
}

pub fn naive_metrics(est: &[(f64, f64)], gt: &[(f64, f64)], valid: &[bool], fg: &[bool]) -> NaiveMetrics {
    let (mut ae, mut epe, mut n) = (0.0, 0.0, 0usize);
    let (mut o_fg, mut n_fg, mut o_bg, mut n_bg) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..est.len() {
        if !valid[i] {
            continue;
        }
        let (u, v) = est[i];
        let (gu, gv) = gt[i];
        let c = (1.0 + u * gu + v * gv) / ((1.0 + u * u + v * v).sqrt() * (1.0 + gu * gu + gv * gv).sqrt());
        ae += c.clamp(-1.0, 1.0).acos();
        let e = ((u - gu) * (u - gu) + (v - gv) * (v - gv)).sqrt();
        epe += e;
        n += 1;
        let out = e > 3.0;
        if fg[i] {
            n_fg += 1;
            o_fg += out as usize;
        } else {
            n_bg += 1;
            o_bg += out as usize;
        }
    }
    let pct = |a: usize, b: usize| (b > 0).then(|| 100.0 * a as f64 / b as f64);
    NaiveMetrics {
        aae_deg: (ae / n as f64).to_degrees(),
        aepe: epe / n as f64,
        fl_bg: pct(o_bg, n_bg),
        fl_fg: pct(o_fg, n_fg),
        fl_all: 100.0 * (o_fg + o_bg) as f64 / n as f64,
    }
}

/// A clamped curve of random degree 1..=4 with random, possibly repeated,
/// interior knots; rational weights when `rational`.
pub fn random_curve(rng: &mut ChaCha8Rng, rational: bool) -> NurbsCurve {
    let degree = rng.gen_range(1..=4);
    let n = rng.gen_range(degree + 1..=degree + 8);
    let pts = (0..n)
        .map(|_| Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
        .collect();
    let weights = (0..n)
        .map(|_| if rational { rng.gen_range(0.2..3.0) } else { 1.0 })
        .collect();
    // Clamped, non-uniform interior knots (possibly repeated).
    let mut interior: Vec<f64> = (0..n - degree - 1).map(|_| rng.gen_range(0.0..1.0)).collect();
    if interior.len() >= 2 && rng.gen_bool(0.3) {
        interior[1] = interior[0];
    }
    interior.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut knots = vec![0.0; degree + 1];
    knots.extend(interior);
    knots.extend(vec![1.0; degree + 1]);
    NurbsCurve::new(degree, pts, weights, knots).unwrap()
}

