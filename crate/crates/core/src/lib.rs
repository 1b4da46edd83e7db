//! Synthetic fish-eye optical-flow ground truth and flow evaluation.
//!
//! A cube moves through the field of view of a downward-looking 180°
//! equidistant fish-eye camera. [`render`] ray-casts every frame and derives
//! exact ground-truth flow from the known motion; [`metrics`] scores any
//! flow field (read as `.flo`, or produced by the Horn-Schunck baseline in
//! [`hs`]) against it.
//!
//! The geometry and metric code is generic over [`Scalar`] (`f32` or
//! `f64`); the aliases below fix it to `f64`, which is what the dataset
//! pipeline uses.

pub mod camera;
pub mod config;
pub mod dataset;
pub mod flowio;
pub mod geom;
pub mod grid;
pub mod hs;
pub mod imageio;
pub mod metrics;
pub mod nurbs;
pub mod render;
mod scalar;
pub mod scene;

pub use scalar::Scalar;

pub use camera::{CameraError, PixelCoord, Pose, SphericalDirection};
pub use flowio::{read_flo, write_flo, FloError};
pub use grid::Grid;
pub use hs::{hs_estimate, HsParams};
pub use metrics::{aae, aepe, build_report, fl_outliers, EvalMask, EvalReport, EvalRow};
pub use render::{cast_ray, ground_truth_flow, render_frame, FrameBundle, Hit, HitKind};
pub use scene::{cube_pose_at_frame, PathKind, TextureMode};

pub type Vec3 = geom::Vec3<f64>;
pub type FisheyeCamera = camera::FisheyeCamera<f64>;
pub type FlowField = flowio::FlowField<f64>;
pub type NurbsCurve = nurbs::NurbsCurve<f64>;
pub type ArcLengthTable = nurbs::ArcLengthTable<f64>;
pub type SequenceSpec = scene::SequenceSpec<f64>;
pub type Sequence = scene::Sequence<f64>;
pub type CubeState = scene::CubeState<f64>;
pub type HsEstimate = hs::HsEstimate<f64>;
pub type FrameMetrics = metrics::FrameMetrics<f64>;
