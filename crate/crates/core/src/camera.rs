//! Omnidirectional camera with equidistant (`r = s·θ`) fish-eye projection.
//!
//! Conventions: the camera frame has `+z` along the optical axis, `+x`
//! along the image columns and `+y` along the image rows (downward in the
//! raster). The azimuth `φ` is measured from `+x` towards `+y`, so a pixel
//! is `(cx + s·θ·cos φ, cy + s·θ·sin φ)`. Pixel `(i, j)` covers
//! `[i, i+1) × [j, j+1)`; its center is `(i + 0.5, j + 0.5)`.
//!
//! The default camera hangs 2.5 m above the world origin looking straight
//! down (`-z`), with image `+x` along world `+x` (hence image `+y` along
//! world `-y`).

use thiserror::Error;

use crate::config::{format_list, ConfigError, KeyValues};
use crate::geom::{Mat3, Vec3};
use crate::grid::Grid;
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("invalid camera parameters: {0}")]
    InvalidParameters(String),
    #[error("ray angle θ = {theta} rad lies outside the [0, π/2] hemisphere")]
    BehindHemisphere { theta: f64 },
    #[error("pixel at radius {radius} lies outside the image circle of radius {rim}")]
    OutsideImageCircle { radius: f64, rim: f64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Incoming ray direction: `theta` from the optical axis, `phi` azimuth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalDirection<T> {
    pub theta: T,
    pub phi: T,
}

impl<T: Scalar> SphericalDirection<T> {
    /// Validates `theta ∈ [0, π/2]` and wraps `phi` into `[0, 2π)`.
    pub fn new(theta: T, phi: T) -> Result<Self, CameraError> {
        check_theta(theta)?;
        Ok(Self {
            theta,
            phi: normalize_azimuth(phi),
        })
    }

    /// Direction of a camera-frame vector. Fails if it points behind the lens.
    pub fn from_camera_vector(v: Vec3<T>) -> Result<Self, CameraError> {
        let rho = v.x.hypot(v.y);
        let theta = rho.atan2(v.z);
        check_theta(theta)?;
        let phi = if rho == T::zero() {
            T::zero()
        } else {
            normalize_azimuth(v.y.atan2(v.x))
        };
        Ok(Self { theta, phi })
    }

    /// Unit vector in the camera frame.
    pub fn to_camera_vector(self) -> Vec3<T> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vec3::new(st * cp, st * sp, ct)
    }
}

/// Continuous pixel position; `x` to the right, `y` downward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> PixelCoord<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    /// Center of integer pixel `(col, row)`.
    pub fn center_of(col: usize, row: usize) -> Self {
        let half = T::lit(0.5);
        Self::new(
            T::from_usize_lossy(col) + half,
            T::from_usize_lossy(row) + half,
        )
    }

    pub fn distance(self, other: Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Rigid placement of the camera: `orientation` maps camera-frame vectors
/// to world-frame vectors; its columns are the camera axes in world terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T> {
    pub position: Vec3<T>,
    pub orientation: Mat3<T>,
}

impl<T: Scalar> Pose<T> {
    /// 2.5 m above the origin, optical axis along world `-z`.
    pub fn looking_down(height: T) -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            position: Vec3::new(z, z, height),
            orientation: Mat3::from_columns(
                Vec3::new(o, z, z),
                Vec3::new(z, -o, z),
                Vec3::new(z, z, -o),
            ),
        }
    }

    pub fn world_to_camera(&self, p: Vec3<T>) -> Vec3<T> {
        self.orientation.transpose().mul_vec(p - self.position)
    }

    pub fn camera_to_world_dir(&self, d: Vec3<T>) -> Vec3<T> {
        self.orientation.mul_vec(d)
    }
}

impl<T: Scalar> Default for Pose<T> {
    fn default() -> Self {
        Self::looking_down(T::lit(2.5))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisheyeCamera<T> {
    width: u32,
    height: u32,
    cx: T,
    cy: T,
    rim_radius: T,
    pose: Pose<T>,
}

pub const CAMERA_KEYS: [&str; 7] = [
    "width",
    "height",
    "cx",
    "cy",
    "rim_radius",
    "position",
    "orientation",
];

impl<T: Scalar> FisheyeCamera<T> {
    pub fn new(
        width: u32,
        height: u32,
        cx: T,
        cy: T,
        rim_radius: T,
        pose: Pose<T>,
    ) -> Result<Self, CameraError> {
        let invalid = |msg: String| Err(CameraError::InvalidParameters(msg));
        if width == 0 || height == 0 {
            return invalid(format!("resolution {width}x{height} must be positive"));
        }
        if !(rim_radius.is_finite() && rim_radius > T::zero()) {
            return invalid(format!("rim_radius {rim_radius} must be positive"));
        }
        let (w, h) = (T::lit(width as f64), T::lit(height as f64));
        if !(cx > T::zero() && cx < w) || !(cy > T::zero() && cy < h) {
            return invalid(format!(
                "principal point ({cx}, {cy}) outside the {width}x{height} image"
            ));
        }
        if !pose.position.is_finite() {
            return invalid("camera position must be finite".into());
        }
        let tol = T::lit(1e-6);
        if !(pose.orientation.orthonormality_error() <= tol
            && pose.orientation.determinant() > T::zero())
        {
            return invalid("orientation must be a proper rotation matrix".into());
        }
        Ok(Self {
            width,
            height,
            cx,
            cy,
            rim_radius,
            pose,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn principal_point(&self) -> PixelCoord<T> {
        PixelCoord::new(self.cx, self.cy)
    }

    pub fn rim_radius(&self) -> T {
        self.rim_radius
    }

    pub fn pose(&self) -> &Pose<T> {
        &self.pose
    }

    /// Pixels per radian: `rim_radius / (π/2)`.
    pub fn radial_scale(&self) -> T {
        self.rim_radius / T::FRAC_PI_2()
    }

    pub fn project(&self, dir: SphericalDirection<T>) -> Result<PixelCoord<T>, CameraError> {
        check_theta(dir.theta)?;
        let r = self.radial_scale() * dir.theta;
        let (sp, cp) = dir.phi.sin_cos();
        Ok(PixelCoord::new(self.cx + r * cp, self.cy + r * sp))
    }

    pub fn unproject(&self, p: PixelCoord<T>) -> Result<SphericalDirection<T>, CameraError> {
        let (dx, dy) = (p.x - self.cx, p.y - self.cy);
        let r = dx.hypot(dy);
        if !(r <= self.rim_radius) {
            return Err(CameraError::OutsideImageCircle {
                radius: r.to_f64_lossy(),
                rim: self.rim_radius.to_f64_lossy(),
            });
        }
        let phi = if r == T::zero() {
            T::zero()
        } else {
            normalize_azimuth(dy.atan2(dx))
        };
        // r <= rim guarantees theta <= π/2 up to rounding.
        let theta = (r / self.radial_scale()).min(T::FRAC_PI_2());
        Ok(SphericalDirection { theta, phi })
    }

    /// Projects a world point. Fails if it lies behind the lens plane.
    pub fn project_world(&self, point: Vec3<T>) -> Result<PixelCoord<T>, CameraError> {
        let local = self.pose.world_to_camera(point);
        self.project(SphericalDirection::from_camera_vector(local)?)
    }

    /// Unit world-space ray direction through pixel position `p`.
    pub fn world_ray(&self, p: PixelCoord<T>) -> Result<Vec3<T>, CameraError> {
        let dir = self.unproject(p)?;
        Ok(self.pose.camera_to_world_dir(dir.to_camera_vector()))
    }

    pub fn contains(&self, p: PixelCoord<T>) -> bool {
        (p.x - self.cx).hypot(p.y - self.cy) <= self.rim_radius
    }

    /// `true` where the pixel center lies within the image circle.
    pub fn image_circle_mask(&self) -> Grid<bool> {
        Grid::from_fn(self.width as usize, self.height as usize, |x, y| {
            self.contains(PixelCoord::center_of(x, y))
        })
    }

    pub fn to_config(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        self.write_config(&mut kv);
        kv
    }

    pub fn write_config(&self, kv: &mut KeyValues) {
        kv.set("width", self.width);
        kv.set("height", self.height);
        kv.set("cx", self.cx);
        kv.set("cy", self.cy);
        kv.set("rim_radius", self.rim_radius);
        kv.set("position", format_list(&self.pose.position.to_array()));
        let rows: Vec<T> = self.pose.orientation.rows.iter().flatten().copied().collect();
        kv.set("orientation", format_list(&rows));
    }

    /// Reads camera keys from `kv`; absent keys keep their default value.
    pub fn from_config(kv: &KeyValues) -> Result<Self, CameraError> {
        let d = Self::default();
        let width = kv.parse_value("width")?.unwrap_or(d.width);
        let height = kv.parse_value("height")?.unwrap_or(d.height);
        // Principal point and rim follow a changed resolution unless given.
        let cx = kv
            .parse_value::<f64>("cx")?
            .map(T::lit)
            .unwrap_or_else(|| T::lit(width as f64 / 2.0));
        let cy = kv
            .parse_value::<f64>("cy")?
            .map(T::lit)
            .unwrap_or_else(|| T::lit(height as f64 / 2.0));
        let rim_radius = kv
            .parse_value::<f64>("rim_radius")?
            .map(T::lit)
            .unwrap_or_else(|| T::lit(width.min(height) as f64 / 2.0));
        let mut pose = d.pose;
        if let Some(p) = kv.parse_list::<f64>("position", 3)? {
            pose.position = Vec3::new(T::lit(p[0]), T::lit(p[1]), T::lit(p[2]));
        }
        if let Some(m) = kv.parse_list::<f64>("orientation", 9)? {
            let m: Vec<T> = m.into_iter().map(T::lit).collect();
            pose.orientation =
                Mat3::from_rows([[m[0], m[1], m[2]], [m[3], m[4], m[5]], [m[6], m[7], m[8]]]);
        }
        Self::new(width, height, cx, cy, rim_radius, pose)
    }
}

impl<T: Scalar> Default for FisheyeCamera<T> {
    /// 512×512, principal point at the image center, rim touching the edges.
    fn default() -> Self {
        let half = T::lit(256.0);
        Self::new(512, 512, half, half, half, Pose::default())
            .expect("default camera parameters are valid")
    }
}

fn check_theta<T: Scalar>(theta: T) -> Result<(), CameraError> {
    if theta >= T::zero() && theta <= T::FRAC_PI_2() {
        Ok(())
    } else {
        Err(CameraError::BehindHemisphere {
            theta: theta.to_f64_lossy(),
        })
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_azimuth<T: Scalar>(phi: T) -> T {
    let tau = T::TAU();
    let mut r = phi % tau;
    if r < T::zero() {
        r = r + tau;
    }
    if r >= tau {
        r = T::zero();
    }
    r
}
