//! Rational B-spline curves in 3-D.
//!
//! Points are evaluated with de Boor's recursion on homogeneous
//! coordinates `(w·x, w·y, w·z, w)`. The arc-length table integrates the
//! curve speed with Gauss-Legendre quadrature on sub-intervals aligned to
//! the knot spans and inverts it with a safeguarded Newton step.

use thiserror::Error;

use crate::geom::Vec3;
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum NurbsError {
    #[error("degree must be at least 1")]
    InvalidDegree,
    #[error("degree {degree} needs at least {} control points, got {got}", degree + 1)]
    TooFewControlPoints { degree: usize, got: usize },
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("expected {expected} knots, got {got}")]
    KnotCount { expected: usize, got: usize },
    #[error("knot vector must be non-decreasing")]
    KnotsNotSorted,
    #[error("weights must be strictly positive")]
    NonPositiveWeight,
    #[error("curve data must be finite")]
    NonFinite,
    #[error("knot vector defines an empty parameter domain")]
    EmptyDomain,
    #[error("parameter {t} outside domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },
    #[error("arc length {s} outside [0, {total}]")]
    ArcLengthOutOfRange { s: f64, total: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NurbsCurve<T> {
    degree: usize,
    control_points: Vec<Vec3<T>>,
    weights: Vec<T>,
    knots: Vec<T>,
}

impl<T: Scalar> NurbsCurve<T> {
    pub fn new(
        degree: usize,
        control_points: Vec<Vec3<T>>,
        weights: Vec<T>,
        knots: Vec<T>,
    ) -> Result<Self, NurbsError> {
        if degree == 0 {
            return Err(NurbsError::InvalidDegree);
        }
        let n = control_points.len();
        if n < degree + 1 {
            return Err(NurbsError::TooFewControlPoints { degree, got: n });
        }
        if weights.len() != n {
            return Err(NurbsError::WeightCount {
                expected: n,
                got: weights.len(),
            });
        }
        if knots.len() != n + degree + 1 {
            return Err(NurbsError::KnotCount {
                expected: n + degree + 1,
                got: knots.len(),
            });
        }
        if !(control_points.iter().all(|p| p.is_finite())
            && weights.iter().all(|w| w.is_finite())
            && knots.iter().all(|k| k.is_finite()))
        {
            return Err(NurbsError::NonFinite);
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(NurbsError::KnotsNotSorted);
        }
        if weights.iter().any(|&w| w <= T::zero()) {
            return Err(NurbsError::NonPositiveWeight);
        }
        if !(knots[degree] < knots[n]) {
            return Err(NurbsError::EmptyDomain);
        }
        Ok(Self {
            degree,
            control_points,
            weights,
            knots,
        })
    }

    /// Clamped curve with uniformly spaced interior knots on `[0, 1]`.
    pub fn clamped_uniform(
        degree: usize,
        control_points: Vec<Vec3<T>>,
        weights: Vec<T>,
    ) -> Result<Self, NurbsError> {
        let n = control_points.len();
        if degree == 0 {
            return Err(NurbsError::InvalidDegree);
        }
        if n < degree + 1 {
            return Err(NurbsError::TooFewControlPoints { degree, got: n });
        }
        let spans = n - degree;
        let mut knots = vec![T::zero(); degree + 1];
        for i in 1..spans {
            knots.push(T::from_usize_lossy(i) / T::from_usize_lossy(spans));
        }
        knots.extend(std::iter::repeat(T::one()).take(degree + 1));
        Self::new(degree, control_points, weights, knots)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn control_points(&self) -> &[Vec3<T>] {
        &self.control_points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn domain(&self) -> (T, T) {
        (self.knots[self.degree], self.knots[self.control_points.len()])
    }

    /// Distinct knot values inside the domain, endpoints included.
    pub fn breakpoints(&self) -> Vec<T> {
        let (a, b) = self.domain();
        let mut out: Vec<T> = Vec::new();
        for &k in &self.knots {
            if k >= a && k <= b && out.last() != Some(&k) {
                out.push(k);
            }
        }
        out
    }

    fn check_domain(&self, t: T) -> Result<(), NurbsError> {
        let (a, b) = self.domain();
        if t >= a && t <= b {
            Ok(())
        } else {
            Err(NurbsError::OutOfDomain {
                t: t.to_f64_lossy(),
                start: a.to_f64_lossy(),
                end: b.to_f64_lossy(),
            })
        }
    }

    fn homogeneous(&self) -> Vec<[T; 4]> {
        self.control_points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| [p.x * w, p.y * w, p.z * w, w])
            .collect()
    }

    pub fn eval(&self, t: T) -> Result<Vec3<T>, NurbsError> {
        self.check_domain(t)?;
        let h = de_boor(self.degree, &self.knots, &self.homogeneous(), t);
        Ok(Vec3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]))
    }

    /// First derivative `dC/dt`.
    pub fn derivative(&self, t: T) -> Result<Vec3<T>, NurbsError> {
        self.check_domain(t)?;
        let pw = self.homogeneous();
        let p = self.degree;
        let h = de_boor(p, &self.knots, &pw, t);

        // Hodograph of the homogeneous curve: degree p-1 on the inner knots.
        let deg = T::from_usize_lossy(p);
        let dpw: Vec<[T; 4]> = (0..pw.len() - 1)
            .map(|i| {
                let span = self.knots[i + p + 1] - self.knots[i + 1];
                let mut q = [T::zero(); 4];
                if span > T::zero() {
                    for c in 0..4 {
                        q[c] = deg * (pw[i + 1][c] - pw[i][c]) / span;
                    }
                }
                q
            })
            .collect();
        let dh = de_boor(p - 1, &self.knots[1..self.knots.len() - 1], &dpw, t);

        let w = h[3];
        let c = Vec3::new(h[0] / w, h[1] / w, h[2] / w);
        let a = Vec3::new(dh[0], dh[1], dh[2]);
        Ok((a - c * dh[3]) * (T::one() / w))
    }
}

/// Index `k` with `knots[k] <= t < knots[k+1]`, restricted to the domain
/// spans `degree..n`; `t` at the domain end maps to the last non-empty span.
fn find_span<T: Scalar>(degree: usize, knots: &[T], n: usize, t: T) -> usize {
    if t >= knots[n] {
        let mut k = n - 1;
        while k > degree && !(knots[k] < knots[k + 1]) {
            k -= 1;
        }
        return k;
    }
    // Largest k in [degree, n-1] with knots[k] <= t.
    let (mut lo, mut hi) = (degree, n);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if knots[mid] <= t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn de_boor<T: Scalar>(degree: usize, knots: &[T], points: &[[T; 4]], t: T) -> [T; 4] {
    let n = points.len();
    let k = find_span(degree, knots, n, t);
    let mut d: Vec<[T; 4]> = (0..=degree).map(|j| points[j + k - degree]).collect();
    for r in 1..=degree {
        for j in (r..=degree).rev() {
            let lo = knots[j + k - degree];
            let hi = knots[j + 1 + k - r];
            let alpha = if hi > lo {
                (t - lo) / (hi - lo)
            } else {
                T::zero()
            };
            for c in 0..4 {
                d[j][c] = (T::one() - alpha) * d[j - 1][c] + alpha * d[j][c];
            }
        }
    }
    d[degree]
}

// 5-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

const MIN_SAMPLES: usize = 1024;
const SAMPLES_PER_SPAN: usize = 64;

/// Cumulative arc length of a curve, sampled densely over its domain.
#[derive(Debug, Clone)]
pub struct ArcLengthTable<T> {
    curve: NurbsCurve<T>,
    params: Vec<T>,
    lengths: Vec<T>,
}

impl<T: Scalar> ArcLengthTable<T> {
    pub fn new(curve: NurbsCurve<T>) -> Self {
        let breaks = curve.breakpoints();
        let spans = breaks.len() - 1;
        let per_span = SAMPLES_PER_SPAN.max(MIN_SAMPLES.div_ceil(spans));
        let mut params = vec![breaks[0]];
        for w in breaks.windows(2) {
            let step = (w[1] - w[0]) / T::from_usize_lossy(per_span);
            for i in 1..per_span {
                params.push(w[0] + step * T::from_usize_lossy(i));
            }
            params.push(w[1]);
        }
        let mut lengths = Vec::with_capacity(params.len());
        let mut acc = T::zero();
        lengths.push(acc);
        for w in params.windows(2) {
            acc = acc + gauss_length(&curve, w[0], w[1]);
            lengths.push(acc);
        }
        Self {
            curve,
            params,
            lengths,
        }
    }

    pub fn curve(&self) -> &NurbsCurve<T> {
        &self.curve
    }

    pub fn total_length(&self) -> T {
        *self.lengths.last().expect("table is non-empty")
    }

    /// Arc length from the domain start to parameter `t`.
    pub fn length_at(&self, t: T) -> Result<T, NurbsError> {
        self.curve.check_domain(t)?;
        let i = self.params.partition_point(|&p| p <= t).max(1) - 1;
        Ok(self.lengths[i] + gauss_length(&self.curve, self.params[i], t))
    }

    /// Parameter at which the arc length from the domain start equals `s`.
    pub fn param_at(&self, s: T) -> Result<T, NurbsError> {
        let total = self.total_length();
        if !(s >= T::zero() && s <= total) {
            return Err(NurbsError::ArcLengthOutOfRange {
                s: s.to_f64_lossy(),
                total: total.to_f64_lossy(),
            });
        }
        let i = (self.lengths.partition_point(|&l| l <= s).max(1) - 1).min(self.params.len() - 2);
        let (t0, t1) = (self.params[i], self.params[i + 1]);
        let (l0, l1) = (self.lengths[i], self.lengths[i + 1]);
        if l1 <= l0 {
            return Ok(t0);
        }
        // Linear guess inside the bracket, then Newton with bisection fallback.
        let (mut lo, mut hi) = (t0, t1);
        let mut t = t0 + (t1 - t0) * (s - l0) / (l1 - l0);
        let tol = T::epsilon() * T::lit(16.0) * (T::one() + total);
        for _ in 0..60 {
            let f = l0 + gauss_length(&self.curve, t0, t) - s;
            if f.abs() <= tol {
                break;
            }
            if f > T::zero() {
                hi = t;
            } else {
                lo = t;
            }
            let speed = self.curve.derivative(t)?.norm();
            let newton = t - f / speed;
            t = if speed > T::zero() && newton > lo && newton < hi {
                newton
            } else {
                (lo + hi) * T::lit(0.5)
            };
        }
        Ok(t)
    }
}

fn gauss_length<T: Scalar>(curve: &NurbsCurve<T>, a: T, b: T) -> T {
    if b <= a {
        return T::zero();
    }
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(&x, w)| {
            let t = mid + half * T::lit(x);
            let speed = curve
                .derivative(t)
                .expect("quadrature node inside domain")
                .norm();
            T::lit(w) * speed
        })
        .fold(T::zero(), |acc, v| acc + v)
        * half
}
