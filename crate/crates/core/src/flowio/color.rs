//! Middlebury color-wheel coding: hue encodes direction, saturation grows
//! linearly with magnitude up to `max_mag`. Zero flow is white, invalid
//! pixels black.

use super::FlowField;
use crate::grid::Grid;
use crate::Scalar;

/// Ring sizes RY, YG, GC, CB, BM, MR of the 55-color wheel.
pub const WHEEL_RINGS: [usize; 6] = [15, 6, 4, 11, 13, 6];
const WHEEL_LEN: usize = 55;

/// The 55 fully saturated wheel colors, starting at red.
pub fn color_wheel() -> [[u8; 3]; WHEEL_LEN] {
    let mut wheel = [[0u8; 3]; WHEEL_LEN];
    let ramp = |i: usize, n: usize| (255 * i / n) as u8;
    let mut k = 0;
    let [ry, yg, gc, cb, bm, mr] = WHEEL_RINGS;
    for i in 0..ry {
        wheel[k] = [255, ramp(i, ry), 0];
        k += 1;
    }
    for i in 0..yg {
        wheel[k] = [255 - ramp(i, yg), 255, 0];
        k += 1;
    }
    for i in 0..gc {
        wheel[k] = [0, 255, ramp(i, gc)];
        k += 1;
    }
    for i in 0..cb {
        wheel[k] = [0, 255 - ramp(i, cb), 255];
        k += 1;
    }
    for i in 0..bm {
        wheel[k] = [ramp(i, bm), 0, 255];
        k += 1;
    }
    for i in 0..mr {
        wheel[k] = [255, 0, 255 - ramp(i, mr)];
        k += 1;
    }
    wheel
}

/// Unquantized color in `[0, 1]³` for one flow vector.
pub fn encode_flow_pixel<T: Scalar>(u: T, v: T, max_mag: T) -> [f64; 3] {
    let (u, v, max_mag) = (u.to_f64_lossy(), v.to_f64_lossy(), max_mag.to_f64_lossy());
    let rad = if max_mag > 0.0 {
        (u.hypot(v) / max_mag).min(1.0)
    } else {
        0.0
    };
    let wheel = color_wheel();
    let a = (-v).atan2(-u) / std::f64::consts::PI;
    let fk = (a + 1.0) / 2.0 * (WHEEL_LEN - 1) as f64;
    let k0 = (fk.floor() as usize).min(WHEEL_LEN - 1);
    let k1 = (k0 + 1) % WHEEL_LEN;
    let f = fk - k0 as f64;
    std::array::from_fn(|c| {
        let c0 = wheel[k0][c] as f64 / 255.0;
        let c1 = wheel[k1][c] as f64 / 255.0;
        let col = c0 + f * (c1 - c0);
        1.0 - rad * (1.0 - col)
    })
}

/// Magnitude at quantile `q` (nearest rank) over valid pixels.
pub fn magnitude_percentile<T: Scalar>(field: &FlowField<T>, q: f64) -> T {
    let mut mags = field.magnitudes();
    if mags.is_empty() {
        return T::zero();
    }
    mags.sort_by(|a, b| a.partial_cmp(b).expect("finite magnitudes"));
    let rank = ((q.clamp(0.0, 1.0) * mags.len() as f64).ceil() as usize).clamp(1, mags.len());
    mags[rank - 1]
}

/// Color image plus the normalization actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowColoring {
    pub image: Grid<[u8; 3]>,
    pub max_mag: f64,
}

/// Colors `field`. Without `max_mag` the 99th-percentile magnitude is used.
pub fn flow_to_color<T: Scalar>(field: &FlowField<T>, max_mag: Option<T>) -> FlowColoring {
    let max_mag = max_mag.unwrap_or_else(|| magnitude_percentile(field, 0.99));
    let image = Grid::from_fn(field.width(), field.height(), |x, y| match field.get(x, y) {
        None => [0, 0, 0],
        Some((u, v)) => encode_flow_pixel(u, v, max_mag).map(|c| (255.0 * c).floor() as u8),
    });
    FlowColoring {
        image,
        max_mag: max_mag.to_f64_lossy(),
    }
}
