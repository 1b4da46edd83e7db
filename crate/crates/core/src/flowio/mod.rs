//! Dense optical-flow fields, the Middlebury `.flo` codec and the
//! color-wheel visualization.

mod color;
mod flo;

pub use color::{color_wheel, encode_flow_pixel, flow_to_color, magnitude_percentile, FlowColoring, WHEEL_RINGS};
pub use flo::{decode_flo, encode_flo, read_flo, read_flo_file, write_flo, write_flo_file, FloError, FLO_MAGIC, UNKNOWN_FLOW, UNKNOWN_FLOW_THRESHOLD};

use thiserror::Error;

use crate::grid::Grid;
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum FlowFieldError {
    #[error("component grids differ in size")]
    DimensionMismatch,
    #[error("non-finite flow at valid pixel ({x}, {y})")]
    NonFinite { x: usize, y: usize },
}

/// Per-pixel displacement `(u, v)` in pixels (`v` points down) with a
/// validity mask. Invalid pixels always store `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField<T> {
    u: Grid<T>,
    v: Grid<T>,
    valid: Grid<bool>,
}

impl<T: Scalar> FlowField<T> {
    pub fn new(mut u: Grid<T>, mut v: Grid<T>, valid: Grid<bool>) -> Result<Self, FlowFieldError> {
        if u.dims() != v.dims() || u.dims() != valid.dims() {
            return Err(FlowFieldError::DimensionMismatch);
        }
        let w = u.width();
        for (i, &ok) in valid.iter().enumerate() {
            if ok {
                if !(u.as_slice()[i].is_finite() && v.as_slice()[i].is_finite()) {
                    return Err(FlowFieldError::NonFinite { x: i % w, y: i / w });
                }
            } else {
                u.as_mut_slice()[i] = T::zero();
                v.as_mut_slice()[i] = T::zero();
            }
        }
        Ok(Self { u, v, valid })
    }

    /// All-valid zero flow.
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            u: Grid::filled(width, height, T::zero()),
            v: Grid::filled(width, height, T::zero()),
            valid: Grid::filled(width, height, true),
        }
    }

    /// Builds a field from a per-pixel closure; `None` marks a pixel invalid.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Option<(T, T)>,
    ) -> Result<Self, FlowFieldError> {
        let mut u = Grid::filled(width, height, T::zero());
        let mut v = Grid::filled(width, height, T::zero());
        let mut valid = Grid::filled(width, height, false);
        for y in 0..height {
            for x in 0..width {
                if let Some((du, dv)) = f(x, y) {
                    u.set(x, y, du);
                    v.set(x, y, dv);
                    valid.set(x, y, true);
                }
            }
        }
        Self::new(u, v, valid)
    }

    pub fn width(&self) -> usize {
        self.u.width()
    }

    pub fn height(&self) -> usize {
        self.u.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.u.dims()
    }

    pub fn u(&self) -> &Grid<T> {
        &self.u
    }

    pub fn v(&self) -> &Grid<T> {
        &self.v
    }

    pub fn valid(&self) -> &Grid<bool> {
        &self.valid
    }

    /// `(u, v)` at a valid pixel, `None` otherwise.
    pub fn get(&self, x: usize, y: usize) -> Option<(T, T)> {
        (*self.valid.get(x, y)).then(|| (*self.u.get(x, y), *self.v.get(x, y)))
    }

    /// Applies `f` to every valid vector.
    pub fn map_vectors(&self, mut f: impl FnMut(T, T) -> (T, T)) -> Result<Self, FlowFieldError> {
        Self::from_fn(self.width(), self.height(), |x, y| {
            self.get(x, y).map(|(u, v)| f(u, v))
        })
    }

    pub fn with_valid(&self, valid: Grid<bool>) -> Result<Self, FlowFieldError> {
        Self::new(self.u.clone(), self.v.clone(), valid)
    }

    pub fn cast<U: Scalar>(&self) -> FlowField<U> {
        let conv = |g: &Grid<T>| g.map(|&x| U::lit(x.to_f64_lossy()));
        FlowField {
            u: conv(&self.u),
            v: conv(&self.v),
            valid: self.valid.clone(),
        }
    }

    /// Largest vector length over valid pixels (0 for an all-invalid field).
    pub fn max_magnitude(&self) -> T {
        self.magnitudes().into_iter().fold(T::zero(), T::max)
    }

    pub(crate) fn magnitudes(&self) -> Vec<T> {
        self.u
            .iter()
            .zip(self.v.iter())
            .zip(self.valid.iter())
            .filter(|(_, &ok)| ok)
            .map(|((&u, &v), _)| u.hypot(v))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invalid_pixels_are_zeroed() {
        let u = Grid::from_vec(2, 1, vec![1.5, f64::NAN]).unwrap();
        let v = Grid::from_vec(2, 1, vec![-2.0, 7.0]).unwrap();
        let valid = Grid::from_vec(2, 1, vec![true, false]).unwrap();
        let f = FlowField::new(u, v, valid).unwrap();
        assert_eq!(f.get(0, 0), Some((1.5, -2.0)));
        assert_eq!(f.get(1, 0), None);
        assert_eq!((*f.u().get(1, 0), *f.v().get(1, 0)), (0.0, 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = Grid::filled(2, 2, 0.0f64);
        let small = Grid::filled(1, 2, 0.0f64);
        assert_eq!(
            FlowField::new(g.clone(), small, Grid::filled(2, 2, true)),
            Err(FlowFieldError::DimensionMismatch)
        );
        let mut nan = g.clone();
        nan.set(1, 1, f64::INFINITY);
        assert_eq!(
            FlowField::new(nan, g, Grid::filled(2, 2, true)),
            Err(FlowFieldError::NonFinite { x: 1, y: 1 })
        );
    }

    #[test]
    fn max_magnitude_ignores_invalid() {
        let f = FlowField::<f64>::from_fn(3, 1, |x, _| (x != 2).then_some((3.0 * x as f64, 4.0 * x as f64))).unwrap();
        assert_eq!(f.max_magnitude(), 5.0);
    }
}
