//! Coarse-to-fine Horn-Schunck optical flow with warping.
//!
//! Per pyramid level and warp: the second image is warped by the current
//! flow, derivatives come from central differences (spatial ones averaged
//! over both images), and the linearized Horn-Schunck equations are solved
//! with Jacobi iterations
//!
//! ```text
//! u ← ū − Ix·(Ix·ū + Iy·v̄ + It')/(α² + Ix² + Iy²)
//! v ← v̄ − Iy·(Ix·ū + Iy·v̄ + It')/(α² + Ix² + Iy²)
//! ```
//!
//! with `ū, v̄` the mean over the 4-neighbors inside the domain and
//! `It' = It − Ix·u₀ − Iy·v₀` the temporal derivative relative to the
//! warp flow `(u₀, v₀)`. Jacobi updates make every iteration independent
//! of the order pixels are visited in, so rows are updated in parallel.

use log::warn;
use rayon::prelude::*;
use thiserror::Error;

use crate::flowio::FlowField;
use crate::grid::Grid;
use crate::render::RgbImage;
use crate::Scalar;

/// Coarsest pyramid levels are not shrunk below this many pixels per side.
const MIN_LEVEL_SIZE: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum HsError {
    #[error("images and domain differ in size")]
    DimensionMismatch,
    #[error("empty image")]
    Empty,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsParams {
    /// Smoothness weight, in intensity units (images are 0..255).
    pub alpha: f64,
    /// Jacobi iterations per warp.
    pub iterations: usize,
    pub pyramid_levels: usize,
    pub warps_per_level: usize,
    /// Standard deviation in pixels of the Gaussian applied to both inputs
    /// before estimation; 0 disables it. Smoothing suppresses the aliased
    /// edges of point-sampled renderings that otherwise dominate the data
    /// term on textured surfaces.
    pub presmooth_sigma: f64,
}

impl Default for HsParams {
    fn default() -> Self {
        Self {
            alpha: 15.0,
            iterations: 400,
            pyramid_levels: 4,
            warps_per_level: 2,
            presmooth_sigma: 1.5,
        }
    }
}

impl HsParams {
    pub fn validate(&self) -> Result<(), HsError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(HsError::InvalidParams("alpha must be positive".into()));
        }
        if self.iterations == 0 || self.pyramid_levels == 0 || self.warps_per_level == 0 {
            return Err(HsError::InvalidParams(
                "iterations, pyramid_levels and warps_per_level must be at least 1".into(),
            ));
        }
        if !(self.presmooth_sigma.is_finite() && self.presmooth_sigma >= 0.0) {
            return Err(HsError::InvalidParams("presmooth_sigma must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok,
    /// Both images were constant over the domain; the flow is zero.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsEstimate<T> {
    /// Valid exactly on the domain.
    pub flow: FlowField<T>,
    pub status: HsStatus,
    /// Max-norm change of the last Jacobi iteration at the finest level.
    pub final_update: T,
}

/// ITU-R BT.601 luma, in 0..255.
pub fn rgb_to_luma<T: Scalar>(img: &RgbImage) -> Grid<T> {
    let (r, g, b) = (T::lit(0.299), T::lit(0.587), T::lit(0.114));
    img.map(|p| {
        r * T::lit(p[0] as f64) + g * T::lit(p[1] as f64) + b * T::lit(p[2] as f64)
    })
}

pub fn hs_estimate<T: Scalar>(
    img1: &Grid<T>,
    img2: &Grid<T>,
    params: &HsParams,
    domain: &Grid<bool>,
) -> Result<HsEstimate<T>, HsError> {
    params.validate()?;
    if img1.dims() != img2.dims() || img1.dims() != domain.dims() {
        return Err(HsError::DimensionMismatch);
    }
    let (w, h) = img1.dims();
    if w == 0 || h == 0 {
        return Err(HsError::Empty);
    }
    if is_constant(img1, domain) && is_constant(img2, domain) {
        warn!("Horn-Schunck input is constant over the domain; returning zero flow");
        let zero = Grid::filled(w, h, T::zero());
        return Ok(HsEstimate {
            flow: FlowField::new(zero.clone(), zero, domain.clone()).expect("same size"),
            status: HsStatus::Degenerate,
            final_update: T::zero(),
        });
    }

    let sigma = T::lit(params.presmooth_sigma);
    let mut pyramid = vec![(gaussian_blur(img1, sigma), gaussian_blur(img2, sigma), domain.clone())];
    while pyramid.len() < params.pyramid_levels {
        let (a, b, d) = pyramid.last().expect("non-empty");
        if a.width() / 2 < MIN_LEVEL_SIZE || a.height() / 2 < MIN_LEVEL_SIZE {
            break;
        }
        pyramid.push((downsample(a), downsample(b), downsample_mask(d)));
    }

    let alpha2 = T::lit(params.alpha * params.alpha);
    let mut flow: Option<(Grid<T>, Grid<T>)> = None;
    let mut final_update = T::zero();
    for (i1, i2, dom) in pyramid.iter().rev() {
        let (mut u, mut v) = match flow.take() {
            None => (
                Grid::filled(i1.width(), i1.height(), T::zero()),
                Grid::filled(i1.width(), i1.height(), T::zero()),
            ),
            Some((cu, cv)) => (upsample_flow(&cu, i1.dims()), upsample_flow(&cv, i1.dims())),
        };
        mask_out(&mut u, &mut v, dom);
        for _ in 0..params.warps_per_level {
            let system = LinearSystem::new(i1, i2, &u, &v, dom, alpha2);
            final_update = system.solve(&mut u, &mut v, params.iterations);
        }
        flow = Some((u, v));
    }
    let (u, v) = flow.expect("at least one level");
    Ok(HsEstimate {
        flow: FlowField::new(u, v, domain.clone()).expect("finite flow"),
        status: HsStatus::Ok,
        final_update,
    })
}

fn is_constant<T: Scalar>(img: &Grid<T>, domain: &Grid<bool>) -> bool {
    let mut vals = img.iter().zip(domain.iter()).filter(|(_, &d)| d).map(|(&x, _)| x);
    match vals.next() {
        None => true,
        Some(first) => vals.all(|x| x == first),
    }
}

/// Separable Gaussian blur with clamp-to-edge, truncated at 3σ.
fn gaussian_blur<T: Scalar>(img: &Grid<T>, sigma: T) -> Grid<T> {
    if sigma <= T::zero() {
        return img.clone();
    }
    let radius = (sigma * T::lit(3.0)).ceil().to_usize().unwrap_or(0);
    let two_var = T::lit(2.0) * sigma * sigma;
    let mut kernel: Vec<T> = (0..=2 * radius)
        .map(|j| {
            let d = T::from_usize_lossy(j) - T::from_usize_lossy(radius);
            (-(d * d) / two_var).exp()
        })
        .collect();
    let total = kernel.iter().fold(T::zero(), |a, &b| a + b);
    kernel.iter_mut().for_each(|k| *k = *k / total);
    let (w, h) = img.dims();
    let offset = |i: usize, j: usize, n: usize| (i + j).saturating_sub(radius).min(n - 1);
    let rows = Grid::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (j, &k)| acc + k * *img.get(offset(x, j, w), y))
    });
    Grid::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (j, &k)| acc + k * *rows.get(x, offset(y, j, h)))
    })
}

fn mask_out<T: Scalar>(u: &mut Grid<T>, v: &mut Grid<T>, domain: &Grid<bool>) {
    for (i, &d) in domain.iter().enumerate() {
        if !d {
            u.as_mut_slice()[i] = T::zero();
            v.as_mut_slice()[i] = T::zero();
        }
    }
}

/// Coefficients of one pixel's linearized equations.
#[derive(Debug, Clone, Copy)]
struct Coeff<T> {
    ix: T,
    iy: T,
    /// Temporal derivative relative to the warp flow.
    rt: T,
    inv_den: T,
    /// `1/k` for an in-domain pixel with `k` in-domain neighbors; 0 marks
    /// pixels that keep their value (outside the domain), -1 isolated ones.
    weight: T,
}

/// Per-pixel coefficients of the linearized equations at one warp, stored
/// interleaved so a sweep streams through a single array.
struct LinearSystem<T> {
    width: usize,
    height: usize,
    coeffs: Vec<Coeff<T>>,
}

impl<T: Scalar> LinearSystem<T> {
    fn new(i1: &Grid<T>, i2: &Grid<T>, u0: &Grid<T>, v0: &Grid<T>, domain: &Grid<bool>, alpha2: T) -> Self {
        let (w, h) = i1.dims();
        let warped = warp(i2, u0, v0);
        let half = T::lit(0.5);
        let mut coeffs = Vec::with_capacity(w * h);
        for y in 0..h {
            let (ym, yp) = (y.saturating_sub(1), (y + 1).min(h - 1));
            for x in 0..w {
                let (xm, xp) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let dx = |g: &Grid<T>| (*g.get(xp, y) - *g.get(xm, y)) * half;
                let dy = |g: &Grid<T>| (*g.get(x, yp) - *g.get(x, ym)) * half;
                let gx = (dx(i1) + dx(&warped)) * half;
                let gy = (dy(i1) + dy(&warped)) * half;
                let it = *warped.get(x, y) - *i1.get(x, y);
                coeffs.push(Coeff {
                    ix: gx,
                    iy: gy,
                    rt: it - gx * *u0.get(x, y) - gy * *v0.get(x, y),
                    inv_den: T::one() / (alpha2 + gx * gx + gy * gy),
                    weight: neighbor_weight(domain, x, y),
                });
            }
        }
        Self {
            width: w,
            height: h,
            coeffs,
        }
    }

    /// Runs `iterations` Jacobi sweeps in place; returns the max-norm
    /// change of the last one.
    ///
    /// Flow outside the domain must be zero on entry. It is never updated,
    /// so summing all in-image neighbors equals summing the in-domain ones
    /// and only the neighbor count depends on the domain.
    fn solve(&self, u: &mut Grid<T>, v: &mut Grid<T>, iterations: usize) -> T {
        let (w, h) = (self.width, self.height);
        let mut cur_u = std::mem::replace(u, Grid::filled(0, 0, T::zero())).into_vec();
        let mut cur_v = std::mem::replace(v, Grid::filled(0, 0, T::zero())).into_vec();
        let mut next_u = cur_u.clone();
        let mut next_v = cur_v.clone();
        let zeros = vec![T::zero(); w];
        let mut last = T::zero();
        for iteration in 0..iterations {
            let track = iteration + 1 == iterations;
            let (cu, cv) = (&cur_u[..], &cur_v[..]);
            let row = |buf, y| neighbor_row(buf, &zeros, y, h);
            last = next_u
                .par_chunks_mut(w)
                .zip(next_v.par_chunks_mut(w))
                .enumerate()
                .map(|(y, (row_u, row_v))| {
                    let above = y.checked_sub(1);
                    let (u_up, u_mid, u_down) = (row(cu, above), row(cu, Some(y)), row(cu, Some(y + 1)));
                    let (v_up, v_mid, v_down) = (row(cv, above), row(cv, Some(y)), row(cv, Some(y + 1)));
                    let coeffs = &self.coeffs[y * w..(y + 1) * w];
                    let mut delta = T::zero();
                    for x in 0..w {
                        let c = coeffs[x];
                        if c.weight == T::zero() {
                            continue;
                        }
                        let (ub, vb) = if c.weight < T::zero() {
                            (u_mid[x], v_mid[x])
                        } else {
                            let left = |r: &[T]| if x > 0 { r[x - 1] } else { T::zero() };
                            let right = |r: &[T]| if x + 1 < w { r[x + 1] } else { T::zero() };
                            (
                                (left(u_mid) + right(u_mid) + u_up[x] + u_down[x]) * c.weight,
                                (left(v_mid) + right(v_mid) + v_up[x] + v_down[x]) * c.weight,
                            )
                        };
                        let common = (c.ix * ub + c.iy * vb + c.rt) * c.inv_den;
                        let nu = ub - c.ix * common;
                        let nv = vb - c.iy * common;
                        if track {
                            delta = delta.max((nu - u_mid[x]).abs()).max((nv - v_mid[x]).abs());
                        }
                        row_u[x] = nu;
                        row_v[x] = nv;
                    }
                    delta
                })
                .reduce(T::zero, T::max);
            std::mem::swap(&mut cur_u, &mut next_u);
            std::mem::swap(&mut cur_v, &mut next_v);
        }
        *u = Grid::from_vec(w, h, cur_u).expect("same size");
        *v = Grid::from_vec(w, h, cur_v).expect("same size");
        last
    }
}

fn neighbor_weight<T: Scalar>(domain: &Grid<bool>, x: usize, y: usize) -> T {
    if !*domain.get(x, y) {
        return T::zero();
    }
    let (w, h) = domain.dims();
    let k = [
        x > 0 && *domain.get(x - 1, y),
        x + 1 < w && *domain.get(x + 1, y),
        y > 0 && *domain.get(x, y - 1),
        y + 1 < h && *domain.get(x, y + 1),
    ]
    .iter()
    .filter(|&&b| b)
    .count();
    if k == 0 {
        -T::one()
    } else {
        T::one() / T::from_usize_lossy(k)
    }
}

/// Row `y` of a row-major buffer, or the zero row beyond the image edge.
fn neighbor_row<'a, T>(buf: &'a [T], zeros: &'a [T], y: Option<usize>, height: usize) -> &'a [T] {
    let w = zeros.len();
    match y {
        Some(y) if y < height => &buf[y * w..(y + 1) * w],
        _ => zeros,
    }
}

/// Bilinear sample with clamp-to-edge.
fn sample<T: Scalar>(img: &Grid<T>, x: T, y: T) -> T {
    let (w, h) = img.dims();
    let x = x.max(T::zero()).min(T::from_usize_lossy(w - 1));
    let y = y.max(T::zero()).min(T::from_usize_lossy(h - 1));
    let x0 = x.floor().to_usize().unwrap_or(0).min(w - 1);
    let y0 = y.floor().to_usize().unwrap_or(0).min(h - 1);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let fx = x - T::from_usize_lossy(x0);
    let fy = y - T::from_usize_lossy(y0);
    let top = *img.get(x0, y0) + (*img.get(x1, y0) - *img.get(x0, y0)) * fx;
    let bot = *img.get(x0, y1) + (*img.get(x1, y1) - *img.get(x0, y1)) * fx;
    top + (bot - top) * fy
}

fn warp<T: Scalar>(img: &Grid<T>, u: &Grid<T>, v: &Grid<T>) -> Grid<T> {
    Grid::from_fn(img.width(), img.height(), |x, y| {
        sample(
            img,
            T::from_usize_lossy(x) + *u.get(x, y),
            T::from_usize_lossy(y) + *v.get(x, y),
        )
    })
}

/// 2×2 box average; odd trailing rows/columns average what exists.
fn downsample<T: Scalar>(img: &Grid<T>) -> Grid<T> {
    let (w, h) = img.dims();
    Grid::from_fn(w.div_ceil(2), h.div_ceil(2), |x, y| {
        let mut sum = T::zero();
        let mut n = 0usize;
        for yy in (2 * y)..(2 * y + 2).min(h) {
            for xx in (2 * x)..(2 * x + 2).min(w) {
                sum = sum + *img.get(xx, yy);
                n += 1;
            }
        }
        sum / T::from_usize_lossy(n)
    })
}

/// A coarse pixel is in the domain if any of its children is.
fn downsample_mask(mask: &Grid<bool>) -> Grid<bool> {
    let (w, h) = mask.dims();
    Grid::from_fn(w.div_ceil(2), h.div_ceil(2), |x, y| {
        ((2 * y)..(2 * y + 2).min(h)).any(|yy| ((2 * x)..(2 * x + 2).min(w)).any(|xx| *mask.get(xx, yy)))
    })
}

/// Bilinear ×2 upsampling of one flow component, values doubled.
fn upsample_flow<T: Scalar>(coarse: &Grid<T>, (w, h): (usize, usize)) -> Grid<T> {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    Grid::from_fn(w, h, |x, y| {
        let cx = (T::from_usize_lossy(x) + half) * half - half;
        let cy = (T::from_usize_lossy(y) + half) * half - half;
        sample(coarse, cx, cy) * two
    })
}
