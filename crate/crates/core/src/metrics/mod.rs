//! Flow error metrics: average angular error, average endpoint error and
//! outlier percentages over background, foreground and all pixels.
//!
//! All reductions run in row-major pixel order, so results are
//! reproducible bit for bit.

mod report;

pub use report::{build_report, mean_row, parse_csv, EvalReport, EvalRow, ExperimentGroup, ReportError, CSV_HEADER};

use thiserror::Error;

use crate::flowio::FlowField;
use crate::grid::Grid;
use crate::Scalar;

/// Endpoint errors strictly above this many pixels are outliers.
pub const OUTLIER_THRESHOLD_PX: f64 = 3.0;
/// Extra relative criterion of the full KITTI rule (EPE > 5% of |gt|).
pub const KITTI_RELATIVE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("flow fields and mask differ in size")]
    DimensionMismatch,
    #[error("evaluation mask selects no pixels")]
    EmptyMask,
}

/// Pixels taking part in an evaluation and the foreground among them.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalMask {
    valid: Grid<bool>,
    fg: Grid<bool>,
    n: usize,
}

impl EvalMask {
    /// Foreground pixels outside `valid` are dropped.
    pub fn new(valid: Grid<bool>, fg: &Grid<bool>) -> Result<Self, MetricsError> {
        if valid.dims() != fg.dims() {
            return Err(MetricsError::DimensionMismatch);
        }
        let fg = Grid::from_vec(
            valid.width(),
            valid.height(),
            valid.iter().zip(fg.iter()).map(|(&v, &f)| v && f).collect(),
        )
        .expect("same size");
        let n = valid.count_true();
        Ok(Self { valid, fg, n })
    }

    /// Every pixel valid, none foreground.
    pub fn all(width: usize, height: usize) -> Self {
        let fg = Grid::filled(width, height, false);
        Self::new(Grid::filled(width, height, true), &fg).expect("same size")
    }

    /// Pixels valid in both fields.
    pub fn for_fields<T: Scalar>(
        est: &FlowField<T>,
        gt: &FlowField<T>,
        fg: &Grid<bool>,
    ) -> Result<Self, MetricsError> {
        if est.dims() != gt.dims() {
            return Err(MetricsError::DimensionMismatch);
        }
        let valid = Grid::from_vec(
            gt.width(),
            gt.height(),
            est.valid().iter().zip(gt.valid().iter()).map(|(&a, &b)| a && b).collect(),
        )
        .expect("same size");
        Self::new(valid, fg)
    }

    pub fn valid(&self) -> &Grid<bool> {
        &self.valid
    }

    pub fn fg(&self) -> &Grid<bool> {
        &self.fg
    }

    /// Number of evaluated pixels.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fg_count(&self) -> usize {
        self.fg.count_true()
    }

    pub fn bg_count(&self) -> usize {
        self.n - self.fg_count()
    }
}

/// Angle in radians between `(u, v, 1)` and `(gu, gv, 1)`.
pub fn angular_error<T: Scalar>(u: T, v: T, gu: T, gv: T) -> T {
    // acos is ill-conditioned at 1; identical vectors must score exactly 0.
    if u == gu && v == gv {
        return T::zero();
    }
    let one = T::one();
    let num = one + u * gu + v * gv;
    let den = (one + u * u + v * v).sqrt() * (one + gu * gu + gv * gv).sqrt();
    (num / den).max(-one).min(one).acos()
}

pub fn endpoint_error<T: Scalar>(u: T, v: T, gu: T, gv: T) -> T {
    (u - gu).hypot(v - gv)
}

fn check<T: Scalar>(est: &FlowField<T>, gt: &FlowField<T>, mask: &EvalMask) -> Result<(), MetricsError> {
    if est.dims() != gt.dims() || est.dims() != mask.valid.dims() {
        return Err(MetricsError::DimensionMismatch);
    }
    if mask.n == 0 {
        return Err(MetricsError::EmptyMask);
    }
    Ok(())
}

/// Visits `(pixel index, est, gt)` for every masked pixel in row-major order.
fn masked_pixels<'a, T: Scalar>(
    est: &'a FlowField<T>,
    gt: &'a FlowField<T>,
    mask: &'a EvalMask,
) -> impl Iterator<Item = (usize, (T, T), (T, T))> + 'a {
    let (eu, ev) = (est.u().as_slice(), est.v().as_slice());
    let (gu, gv) = (gt.u().as_slice(), gt.v().as_slice());
    mask.valid
        .iter()
        .enumerate()
        .filter(|(_, &ok)| ok)
        .map(move |(i, _)| (i, (eu[i], ev[i]), (gu[i], gv[i])))
}

/// Average angular error in degrees.
pub fn aae<T: Scalar>(est: &FlowField<T>, gt: &FlowField<T>, mask: &EvalMask) -> Result<T, MetricsError> {
    check(est, gt, mask)?;
    let sum = masked_pixels(est, gt, mask)
        .fold(T::zero(), |acc, (_, (u, v), (gu, gv))| acc + angular_error(u, v, gu, gv));
    Ok((sum / T::from_usize_lossy(mask.n)).to_degrees())
}

/// Average endpoint error in pixels.
pub fn aepe<T: Scalar>(est: &FlowField<T>, gt: &FlowField<T>, mask: &EvalMask) -> Result<T, MetricsError> {
    check(est, gt, mask)?;
    let sum = masked_pixels(est, gt, mask)
        .fold(T::zero(), |acc, (_, (u, v), (gu, gv))| acc + endpoint_error(u, v, gu, gv));
    Ok(sum / T::from_usize_lossy(mask.n))
}

/// When a pixel counts as an outlier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierRule {
    pub threshold_px: f64,
    /// If set, the endpoint error must also exceed this fraction of the
    /// ground-truth magnitude (the full KITTI 2015 rule).
    pub relative: Option<f64>,
}

impl OutlierRule {
    pub const STRICT: OutlierRule = OutlierRule {
        threshold_px: OUTLIER_THRESHOLD_PX,
        relative: None,
    };
    pub const KITTI: OutlierRule = OutlierRule {
        threshold_px: OUTLIER_THRESHOLD_PX,
        relative: Some(KITTI_RELATIVE_THRESHOLD),
    };

    pub fn is_outlier<T: Scalar>(&self, (u, v): (T, T), (gu, gv): (T, T)) -> bool {
        let epe = endpoint_error(u, v, gu, gv);
        epe > T::lit(self.threshold_px)
            && self
                .relative
                .is_none_or(|r| epe > T::lit(r) * gu.hypot(gv))
    }
}

impl Default for OutlierRule {
    fn default() -> Self {
        Self::STRICT
    }
}

/// Outlier percentages; a region with no pixels is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlOutliers<T> {
    pub bg: Option<T>,
    pub fg: Option<T>,
    pub all: T,
    pub n_bg: usize,
    pub n_fg: usize,
    pub n: usize,
}

pub fn fl_outliers<T: Scalar>(
    est: &FlowField<T>,
    gt: &FlowField<T>,
    mask: &EvalMask,
) -> Result<FlOutliers<T>, MetricsError> {
    fl_outliers_with(est, gt, mask, OutlierRule::STRICT)
}

pub fn fl_outliers_with<T: Scalar>(
    est: &FlowField<T>,
    gt: &FlowField<T>,
    mask: &EvalMask,
    rule: OutlierRule,
) -> Result<FlOutliers<T>, MetricsError> {
    check(est, gt, mask)?;
    let fg = mask.fg.as_slice();
    let (mut out_fg, mut out_bg, mut n_fg) = (0usize, 0usize, 0usize);
    for (i, e, g) in masked_pixels(est, gt, mask) {
        let outlier = rule.is_outlier(e, g);
        if fg[i] {
            n_fg += 1;
            out_fg += usize::from(outlier);
        } else {
            out_bg += usize::from(outlier);
        }
    }
    let n = mask.n;
    let n_bg = n - n_fg;
    let pct = |k: usize, total: usize| {
        (total > 0).then(|| T::lit(100.0) * T::from_usize_lossy(k) / T::from_usize_lossy(total))
    };
    Ok(FlOutliers {
        bg: pct(out_bg, n_bg),
        fg: pct(out_fg, n_fg),
        all: pct(out_bg + out_fg, n).expect("mask is non-empty"),
        n_bg,
        n_fg,
        n,
    })
}

/// All metrics of one frame pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMetrics<T> {
    pub aae: T,
    pub aepe: T,
    pub fl: FlOutliers<T>,
}

pub fn evaluate_frame<T: Scalar>(
    est: &FlowField<T>,
    gt: &FlowField<T>,
    mask: &EvalMask,
    rule: OutlierRule,
) -> Result<FrameMetrics<T>, MetricsError> {
    Ok(FrameMetrics {
        aae: aae(est, gt, mask)?,
        aepe: aepe(est, gt, mask)?,
        fl: fl_outliers_with(est, gt, mask, rule)?,
    })
}
