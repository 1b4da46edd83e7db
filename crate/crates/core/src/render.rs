//! Analytic ray caster and ground-truth flow.
//!
//! One ray per pixel center. A ray hits the nearest of the axis-aligned
//! cube (slab test) and the floor plane `z = -1`; floor hits farther than
//! [`FAR_LIMIT`] fall through to the horizon. Ground-truth flow moves each
//! cube surface point with the cube and reprojects it; the background is
//! static, so its flow is exactly zero.

use thiserror::Error;

use crate::camera::{CameraError, FisheyeCamera, PixelCoord};
use crate::flowio::FlowField;
use crate::geom::Vec3;
use crate::grid::Grid;
use crate::scene::{CubeState, CubeTexture, SceneError, Sequence};
use crate::Scalar;

pub const FLOOR_Z: f64 = -1.0;
pub const FAR_LIMIT: f64 = 100.0;
/// Edge length of a floor checker cell, meters.
pub const FLOOR_CELL: f64 = 0.5;
pub const FLOOR_COLORS: [[u8; 3]; 2] = [[205, 200, 185], [70, 80, 95]];
pub const HORIZON_COLOR: [u8; 3] = [150, 190, 230];
pub const OUTSIDE_COLOR: [u8; 3] = [0, 0, 0];

pub type RgbImage = Grid<[u8; 3]>;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("frame {frame} has no successor in a {count}-frame sequence")]
    NoNextFrame { frame: usize, count: usize },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CubeFace {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl CubeFace {
    pub const ALL: [CubeFace; 6] = [
        CubeFace::PosX,
        CubeFace::NegX,
        CubeFace::PosY,
        CubeFace::NegY,
        CubeFace::PosZ,
        CubeFace::NegZ,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    fn from_axis(axis: usize, positive: bool) -> Self {
        match (axis, positive) {
            (0, true) => CubeFace::PosX,
            (0, false) => CubeFace::NegX,
            (1, true) => CubeFace::PosY,
            (1, false) => CubeFace::NegY,
            (_, true) => CubeFace::PosZ,
            (_, false) => CubeFace::NegZ,
        }
    }

    fn axis(self) -> usize {
        self.index() / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HitKind {
    Cube(CubeFace),
    Floor,
    Horizon,
}

/// Result of a ray cast. `point_local` is cube-relative for cube hits, the
/// world point for floor hits and the ray direction for the horizon (whose
/// distance is infinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit<T> {
    pub kind: HitKind,
    pub point_local: Vec3<T>,
    pub distance: T,
}

impl<T> Hit<T> {
    pub fn is_cube(&self) -> bool {
        matches!(self.kind, HitKind::Cube(_))
    }
}

/// Slab test against the cube; returns entry distance, face and the
/// cube-local hit point snapped onto that face.
pub fn intersect_cube<T: Scalar>(
    origin: Vec3<T>,
    dir: Vec3<T>,
    cube: &CubeState<T>,
) -> Option<(T, CubeFace, Vec3<T>)> {
    let lo = cube.min_corner().to_array();
    let hi = cube.max_corner().to_array();
    let o = origin.to_array();
    let d = dir.to_array();
    let mut t_near = T::neg_infinity();
    let mut t_far = T::infinity();
    let mut face = CubeFace::PosZ;
    for axis in 0..3 {
        if d[axis] == T::zero() {
            if o[axis] < lo[axis] || o[axis] > hi[axis] {
                return None;
            }
            continue;
        }
        let inv = T::one() / d[axis];
        let (mut t0, mut t1) = ((lo[axis] - o[axis]) * inv, (hi[axis] - o[axis]) * inv);
        // Entering through the min side means the face normal points to -axis.
        let mut positive = false;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
            positive = true;
        }
        if t0 > t_near {
            t_near = t0;
            face = CubeFace::from_axis(axis, positive);
        }
        t_far = t_far.min(t1);
    }
    if !(t_near <= t_far && t_near > T::zero()) {
        return None;
    }
    let h = cube.half_extent;
    let mut local = (origin + dir * t_near - cube.center).to_array();
    for c in &mut local {
        *c = c.max(-h).min(h);
    }
    let axis = face.axis();
    local[axis] = if face.index() % 2 == 0 { h } else { -h };
    Some((t_near, face, Vec3::from_array(local)))
}

/// Nearest surface seen through `pixel`.
pub fn cast_ray<T: Scalar>(
    cam: &FisheyeCamera<T>,
    pixel: PixelCoord<T>,
    cube: &CubeState<T>,
) -> Result<Hit<T>, CameraError> {
    let dir = cam.world_ray(pixel)?;
    Ok(cast_world_ray(cam.pose().position, dir, cube))
}

pub fn cast_world_ray<T: Scalar>(origin: Vec3<T>, dir: Vec3<T>, cube: &CubeState<T>) -> Hit<T> {
    if let Some((t, face, local)) = intersect_cube(origin, dir, cube) {
        return Hit {
            kind: HitKind::Cube(face),
            point_local: local,
            distance: t,
        };
    }
    if dir.z < T::zero() {
        let t = (T::lit(FLOOR_Z) - origin.z) / dir.z;
        if t > T::zero() && t <= T::lit(FAR_LIMIT) {
            let mut p = origin + dir * t;
            p.z = T::lit(FLOOR_Z);
            return Hit {
                kind: HitKind::Floor,
                point_local: p,
                distance: t,
            };
        }
    }
    Hit {
        kind: HitKind::Horizon,
        point_local: dir,
        distance: T::infinity(),
    }
}

fn checker_cell<T: Scalar>(coord: T, half: T, cells: usize) -> usize {
    let f = ((coord + half) / (half + half) * T::from_usize_lossy(cells))
        .floor()
        .to_f64_lossy();
    (f.max(0.0) as usize).min(cells - 1)
}

pub fn shade<T: Scalar>(hit: &Hit<T>, cube: &CubeState<T>) -> [u8; 3] {
    match hit.kind {
        HitKind::Cube(face) => match cube.texture {
            CubeTexture::Flat(c) => c,
            CubeTexture::Checker { cells, palette } => {
                let p = hit.point_local.to_array();
                let (a, b) = match face.axis() {
                    0 => (p[1], p[2]),
                    1 => (p[0], p[2]),
                    _ => (p[0], p[1]),
                };
                let h = cube.half_extent;
                let parity = (checker_cell(a, h, cells) + checker_cell(b, h, cells)) % 2;
                palette[face.index()][parity]
            }
        },
        HitKind::Floor => {
            let cell = T::lit(FLOOR_CELL);
            let i = (hit.point_local.x / cell).floor().to_i64().unwrap_or(0);
            let j = (hit.point_local.y / cell).floor().to_i64().unwrap_or(0);
            FLOOR_COLORS[(i + j).rem_euclid(2) as usize]
        }
        HitKind::Horizon => HORIZON_COLOR,
    }
}

/// Rendered frame `t` with ground-truth flow from `t` to `t + 1` when the
/// sequence has a next frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBundle<T> {
    pub image: RgbImage,
    pub fg_mask: Grid<bool>,
    pub gt_flow: Option<FlowField<T>>,
}

/// Rays through every pixel center; `None` outside the image circle.
fn trace<T: Scalar>(cam: &FisheyeCamera<T>, cube: &CubeState<T>) -> Grid<Option<Hit<T>>> {
    let origin = cam.pose().position;
    Grid::from_fn(cam.width() as usize, cam.height() as usize, |x, y| {
        cam.world_ray(PixelCoord::center_of(x, y))
            .ok()
            .map(|dir| cast_world_ray(origin, dir, cube))
    })
}

fn image_and_mask<T: Scalar>(hits: &Grid<Option<Hit<T>>>, cube: &CubeState<T>) -> (RgbImage, Grid<bool>) {
    let image = hits.map(|h| h.as_ref().map_or(OUTSIDE_COLOR, |h| shade(h, cube)));
    let mask = hits.map(|h| h.as_ref().is_some_and(Hit::is_cube));
    (image, mask)
}

fn flow_from_hits<T: Scalar>(
    cam: &FisheyeCamera<T>,
    hits: &Grid<Option<Hit<T>>>,
    next: &CubeState<T>,
) -> FlowField<T> {
    FlowField::from_fn(hits.width(), hits.height(), |x, y| {
        let hit = hits.get(x, y).as_ref()?;
        if !hit.is_cube() {
            return Some((T::zero(), T::zero()));
        }
        let p = PixelCoord::center_of(x, y);
        let moved = cam.project_world(next.center + hit.point_local).ok()?;
        Some((moved.x - p.x, moved.y - p.y))
    })
    .expect("projected positions are finite")
}

/// Image and foreground mask of `frame`.
pub fn render_frame<T: Scalar>(seq: &Sequence<T>, frame: usize) -> Result<FrameBundle<T>, RenderError> {
    let cube = seq.cube_at(frame)?;
    let hits = trace(seq.camera(), &cube);
    let (image, fg_mask) = image_and_mask(&hits, &cube);
    Ok(FrameBundle {
        image,
        fg_mask,
        gt_flow: None,
    })
}

/// Ground-truth flow from `frame` to `frame + 1`.
pub fn ground_truth_flow<T: Scalar>(seq: &Sequence<T>, frame: usize) -> Result<FlowField<T>, RenderError> {
    let next = next_cube(seq, frame)?;
    let cube = seq.cube_at(frame)?;
    let hits = trace(seq.camera(), &cube);
    Ok(flow_from_hits(seq.camera(), &hits, &next))
}

/// Image, mask and (if a next frame exists) ground-truth flow from a single
/// set of rays.
pub fn render_bundle<T: Scalar>(seq: &Sequence<T>, frame: usize) -> Result<FrameBundle<T>, RenderError> {
    let cube = seq.cube_at(frame)?;
    let hits = trace(seq.camera(), &cube);
    let (image, fg_mask) = image_and_mask(&hits, &cube);
    let gt_flow = if frame + 1 < seq.frame_count() {
        Some(flow_from_hits(seq.camera(), &hits, &seq.cube_at(frame + 1)?))
    } else {
        None
    };
    Ok(FrameBundle {
        image,
        fg_mask,
        gt_flow,
    })
}

fn next_cube<T: Scalar>(seq: &Sequence<T>, frame: usize) -> Result<CubeState<T>, RenderError> {
    if frame + 1 >= seq.frame_count() {
        return Err(RenderError::NoNextFrame {
            frame,
            count: seq.frame_count(),
        });
    }
    Ok(seq.cube_at(frame + 1)?)
}
