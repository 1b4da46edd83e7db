//! Moving-cube scenes: motion paths, sequence descriptions and per-frame
//! cube poses.
//!
//! The cube translates (never rotates) with constant speed along its path
//! in the `z = 0` plane. Straight paths are symmetric about the point under
//! the camera, which the cube passes at frame `frame_count / 2` or, for
//! slow sequences, later: the cube always starts at least two half-extents
//! off-axis so the first frame shows it clear of the nadir. The spiral
//! starts under the camera at frame 0 and winds outward.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::camera::{CameraError, FisheyeCamera, CAMERA_KEYS};
use crate::config::{ConfigError, KeyValues};
use crate::geom::Vec3;
use crate::nurbs::{ArcLengthTable, NurbsCurve, NurbsError};
use crate::Scalar;

pub const DEFAULT_FPS: f64 = 24.0;
pub const DEFAULT_FRAME_COUNT: usize = 64;
pub const DEFAULT_HALF_EXTENT: f64 = 1.0;
pub const DEFAULT_LINE_OFFSET: f64 = 3.0;
pub const DEFAULT_SPEEDS: [f64; 3] = [1.0, 2.0, 4.0];
/// Outer radius of the spiral after two turns, meters.
pub const SPIRAL_OUTER_RADIUS: f64 = 8.0;
pub const SPIRAL_CONTROL_POINTS: usize = 33;
pub const CHECKER_CELLS: usize = 8;
pub const HOMOGENEOUS_COLOR: [u8; 3] = [128, 128, 128];
/// Suffix of canonical names selecting the untextured cube.
pub const HOMOGENEOUS_SUFFIX: &str = "-homog";

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid sequence spec: {0}")]
    InvalidSpec(String),
    #[error("unknown sequence name `{0}`")]
    UnknownSequence(String),
    #[error("frame {frame} out of range for a {count}-frame sequence")]
    FrameOutOfRange { frame: usize, count: usize },
    #[error("frame {frame} lies beyond the end of the path")]
    PathExhausted { frame: usize },
    #[error(transparent)]
    Nurbs(#[from] NurbsError),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathKind {
    /// Left to right through the point under the camera.
    Linec,
    /// Parallel to `Linec`, shifted along world `y`.
    Line,
    /// Two-turn Archimedean spiral from the image center outward.
    Spiral,
}

impl PathKind {
    pub const ALL: [PathKind; 3] = [PathKind::Linec, PathKind::Line, PathKind::Spiral];

    pub fn as_str(self) -> &'static str {
        match self {
            PathKind::Linec => "linec",
            PathKind::Line => "line",
            PathKind::Spiral => "spiral",
        }
    }
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PathKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linec" => Ok(PathKind::Linec),
            "line" => Ok(PathKind::Line),
            "spiral" => Ok(PathKind::Spiral),
            other => Err(format!("unknown path `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TextureMode {
    Homogeneous,
    PerFaceChecker,
}

impl TextureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TextureMode::Homogeneous => "homogeneous",
            TextureMode::PerFaceChecker => "checker",
        }
    }
}

impl fmt::Display for TextureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TextureMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "homogeneous" => Ok(TextureMode::Homogeneous),
            "checker" | "per_face_checker" => Ok(TextureMode::PerFaceChecker),
            other => Err(format!("unknown texture mode `{other}`")),
        }
    }
}

/// Surface appearance of the cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubeTexture {
    Flat([u8; 3]),
    /// `cells × cells` checkerboard per face, two colors per face, faces
    /// ordered `+x, -x, +y, -y, +z, -z`.
    Checker {
        cells: usize,
        palette: [[[u8; 3]; 2]; 6],
    },
}

impl CubeTexture {
    pub fn for_mode(mode: TextureMode, seed: u64) -> Self {
        match mode {
            TextureMode::Homogeneous => CubeTexture::Flat(HOMOGENEOUS_COLOR),
            TextureMode::PerFaceChecker => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut palette = [[[0u8; 3]; 2]; 6];
                for face in &mut palette {
                    // One bright and one dark color so every face has contrast.
                    face[0] = std::array::from_fn(|_| rng.gen_range(150..=250));
                    face[1] = std::array::from_fn(|_| rng.gen_range(10..=100));
                }
                CubeTexture::Checker {
                    cells: CHECKER_CELLS,
                    palette,
                }
            }
        }
    }
}

/// Pose and appearance of the cube at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubeState<T> {
    pub center: Vec3<T>,
    pub half_extent: T,
    pub texture: CubeTexture,
}

impl<T: Scalar> CubeState<T> {
    pub fn min_corner(&self) -> Vec3<T> {
        let h = self.half_extent;
        self.center - Vec3::new(h, h, h)
    }

    pub fn max_corner(&self) -> Vec3<T> {
        let h = self.half_extent;
        self.center + Vec3::new(h, h, h)
    }
}

/// Everything needed to reproduce one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec<T> {
    pub name: String,
    pub path: PathKind,
    /// World `y` of the `line` path, meters.
    pub line_offset: T,
    /// Meters per second along the path.
    pub speed: T,
    pub fps: T,
    pub frame_count: usize,
    pub texture: TextureMode,
    pub seed: u64,
    pub half_extent: T,
    pub camera: FisheyeCamera<T>,
}

pub const SEQUENCE_KEYS: [&str; 9] = [
    "name",
    "path",
    "speed",
    "fps",
    "frame_count",
    "texture",
    "seed",
    "line_offset",
    "half_extent",
];

impl<T: Scalar> SequenceSpec<T> {
    pub fn new(path: PathKind, speed: T, texture: TextureMode) -> Self {
        Self {
            name: canonical_name(path, speed.to_f64_lossy(), texture),
            path,
            line_offset: T::lit(DEFAULT_LINE_OFFSET),
            speed,
            fps: T::lit(DEFAULT_FPS),
            frame_count: DEFAULT_FRAME_COUNT,
            texture,
            seed: 0,
            half_extent: T::lit(DEFAULT_HALF_EXTENT),
            camera: FisheyeCamera::default(),
        }
    }

    /// Resolves names such as `linec-4`, `line-1` or `spiral-2-homog`.
    pub fn from_name(name: &str) -> Result<Self, SceneError> {
        let unknown = || SceneError::UnknownSequence(name.to_string());
        let (base, texture) = match name.strip_suffix(HOMOGENEOUS_SUFFIX) {
            Some(base) => (base, TextureMode::Homogeneous),
            None => (name, TextureMode::PerFaceChecker),
        };
        let (path, speed) = base.rsplit_once('-').ok_or_else(unknown)?;
        let path: PathKind = path.parse().map_err(|_| unknown())?;
        let speed: f64 = speed.parse().map_err(|_| unknown())?;
        if !(speed.is_finite() && speed > 0.0) {
            return Err(unknown());
        }
        let mut spec = Self::new(path, T::lit(speed), texture);
        spec.name = name.to_string();
        Ok(spec)
    }

    /// The 18 built-in sequences: every path × speed × texture mode.
    pub fn builtin_grid() -> Vec<Self> {
        let mut out = Vec::new();
        for texture in [TextureMode::PerFaceChecker, TextureMode::Homogeneous] {
            for path in PathKind::ALL {
                for speed in DEFAULT_SPEEDS {
                    out.push(Self::new(path, T::lit(speed), texture));
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: &str| Err(SceneError::InvalidSpec(m.to_string()));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name must be a non-empty file name");
        }
        // Zero speed is allowed as a stationary diagnostic sequence.
        if !(self.speed.is_finite() && self.speed >= T::zero()) {
            return bad("speed must be finite and non-negative");
        }
        if !(self.fps.is_finite() && self.fps > T::zero()) {
            return bad("fps must be positive");
        }
        if self.frame_count < 2 {
            return bad("frame_count must be at least 2");
        }
        if !(self.half_extent.is_finite() && self.half_extent > T::zero()) {
            return bad("half_extent must be positive");
        }
        if !self.line_offset.is_finite() {
            return bad("line_offset must be finite");
        }
        Ok(())
    }

    /// Arc length travelled by `frame`.
    pub fn distance_at(&self, frame: usize) -> T {
        self.speed * T::from_usize_lossy(frame) / self.fps
    }

    pub fn build(&self) -> Result<Sequence<T>, SceneError> {
        self.validate()?;
        let path = MotionPath::for_spec(self)?;
        let last = self.distance_at(self.frame_count - 1);
        if last > path.length() {
            return Err(SceneError::PathExhausted {
                frame: self.frame_count - 1,
            });
        }
        Ok(Sequence {
            spec: self.clone(),
            path,
            texture: CubeTexture::for_mode(self.texture, self.seed),
        })
    }

    pub fn to_config(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("name", &self.name);
        kv.set("path", self.path);
        kv.set("speed", self.speed);
        kv.set("fps", self.fps);
        kv.set("frame_count", self.frame_count);
        kv.set("texture", self.texture);
        kv.set("seed", self.seed);
        kv.set("line_offset", self.line_offset);
        kv.set("half_extent", self.half_extent);
        self.camera.write_config(&mut kv);
        kv
    }

    /// Reads a spec; a canonical `name` supplies defaults for absent keys.
    pub fn from_config(kv: &KeyValues) -> Result<Self, SceneError> {
        let allowed: Vec<&str> = SEQUENCE_KEYS.iter().chain(&CAMERA_KEYS).copied().collect();
        kv.check_keys(&allowed)?;
        let name = kv.require("name")?.to_string();
        let mut spec = match Self::from_name(&name) {
            Ok(spec) => spec,
            Err(_) => {
                let path = kv
                    .parse_value::<PathKind>("path")?
                    .ok_or_else(|| ConfigError::MissingKey("path".into()))?;
                let speed = kv
                    .parse_value::<f64>("speed")?
                    .ok_or_else(|| ConfigError::MissingKey("speed".into()))?;
                let mut spec = Self::new(path, T::lit(speed), TextureMode::PerFaceChecker);
                spec.name = name;
                spec
            }
        };
        if let Some(path) = kv.parse_value("path")? {
            spec.path = path;
        }
        if let Some(v) = kv.parse_value::<f64>("speed")? {
            spec.speed = T::lit(v);
        }
        if let Some(v) = kv.parse_value::<f64>("fps")? {
            spec.fps = T::lit(v);
        }
        if let Some(v) = kv.parse_value("frame_count")? {
            spec.frame_count = v;
        }
        if let Some(v) = kv.parse_value("texture")? {
            spec.texture = v;
        }
        if let Some(v) = kv.parse_value("seed")? {
            spec.seed = v;
        }
        if let Some(v) = kv.parse_value::<f64>("line_offset")? {
            spec.line_offset = T::lit(v);
        }
        if let Some(v) = kv.parse_value::<f64>("half_extent")? {
            spec.half_extent = T::lit(v);
        }
        spec.camera = FisheyeCamera::from_config(kv)?;
        spec.validate()?;
        Ok(spec)
    }
}

pub fn canonical_name(path: PathKind, speed: f64, texture: TextureMode) -> String {
    let suffix = match texture {
        TextureMode::PerFaceChecker => "",
        TextureMode::Homogeneous => HOMOGENEOUS_SUFFIX,
    };
    format!("{path}-{speed}{suffix}")
}

/// Arc-length parameterized trajectory of the cube center.
#[derive(Debug, Clone)]
pub struct MotionPath<T> {
    kind: PathKind,
    table: ArcLengthTable<T>,
}

impl<T: Scalar> MotionPath<T> {
    pub fn for_spec(spec: &SequenceSpec<T>) -> Result<Self, SceneError> {
        let curve = match spec.path {
            PathKind::Linec => straight_path(spec, T::zero())?,
            PathKind::Line => straight_path(spec, spec.line_offset)?,
            PathKind::Spiral => spiral_curve()?,
        };
        Ok(Self {
            kind: spec.path,
            table: ArcLengthTable::new(curve),
        })
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn curve(&self) -> &NurbsCurve<T> {
        self.table.curve()
    }

    pub fn arc_length(&self) -> &ArcLengthTable<T> {
        &self.table
    }

    pub fn length(&self) -> T {
        self.table.total_length()
    }

    pub fn position_at(&self, s: T) -> Result<Vec3<T>, SceneError> {
        let t = self.table.param_at(s)?;
        let mut p = self.curve().eval(t)?;
        p.z = T::zero();
        Ok(p)
    }
}

/// Segment along world `x` at height `y`, symmetric about `x = 0` and long
/// enough for the whole sequence. Its half-length is the distance covered
/// in `frame_count / 2` frames, but at least two half-extents.
fn straight_path<T: Scalar>(spec: &SequenceSpec<T>, y: T) -> Result<NurbsCurve<T>, NurbsError> {
    let half = straight_half_length(spec);
    let reach = half.max(spec.distance_at(spec.frame_count) - half);
    NurbsCurve::new(
        1,
        vec![Vec3::new(-reach, y, T::zero()), Vec3::new(reach, y, T::zero())],
        vec![T::one(), T::one()],
        vec![T::zero(), T::zero(), T::one(), T::one()],
    )
}

/// Distance from the start of a straight path to the point under the camera.
pub fn straight_half_length<T: Scalar>(spec: &SequenceSpec<T>) -> T {
    spec.distance_at(spec.frame_count / 2).max(T::lit(2.0) * spec.half_extent)
}

/// Clamped cubic through control points on `r = (8 / 4π)·α`, `α ∈ [0, 4π]`.
pub fn spiral_curve<T: Scalar>() -> Result<NurbsCurve<T>, NurbsError> {
    let n = SPIRAL_CONTROL_POINTS;
    let turns = 4.0 * std::f64::consts::PI;
    let points = (0..n)
        .map(|i| {
            let alpha = turns * i as f64 / (n - 1) as f64;
            let r = SPIRAL_OUTER_RADIUS / turns * alpha;
            Vec3::new(T::lit(r * alpha.cos()), T::lit(r * alpha.sin()), T::zero())
        })
        .collect();
    NurbsCurve::clamped_uniform(3, points, vec![T::one(); n])
}

/// A validated spec together with its prepared path.
#[derive(Debug, Clone)]
pub struct Sequence<T> {
    spec: SequenceSpec<T>,
    path: MotionPath<T>,
    texture: CubeTexture,
}

impl<T: Scalar> Sequence<T> {
    pub fn spec(&self) -> &SequenceSpec<T> {
        &self.spec
    }

    pub fn path(&self) -> &MotionPath<T> {
        &self.path
    }

    pub fn camera(&self) -> &FisheyeCamera<T> {
        &self.spec.camera
    }

    pub fn frame_count(&self) -> usize {
        self.spec.frame_count
    }

    pub fn cube_at(&self, frame: usize) -> Result<CubeState<T>, SceneError> {
        if frame >= self.spec.frame_count {
            return Err(SceneError::FrameOutOfRange {
                frame,
                count: self.spec.frame_count,
            });
        }
        let s = self.spec.distance_at(frame).min(self.path.length());
        Ok(CubeState {
            center: self.path.position_at(s)?,
            half_extent: self.spec.half_extent,
            texture: self.texture,
        })
    }
}

/// One-shot pose lookup; prefer [`Sequence::cube_at`] for repeated queries.
pub fn cube_pose_at_frame<T: Scalar>(
    spec: &SequenceSpec<T>,
    frame: usize,
) -> Result<CubeState<T>, SceneError> {
    spec.build()?.cube_at(frame)
}
