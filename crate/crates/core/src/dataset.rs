//! On-disk datasets and the generate / estimate / evaluate / visualize
//! pipelines built on them.
//!
//! A sequence directory `<name>/` holds `frame_%04d.png` (RGB),
//! `mask_%04d.png` (cube pixels 255, else 0), `flow_%04d.flo` (ground
//! truth from frame k to k+1) and `manifest.txt`: the sequence spec as
//! `key = value` lines followed by one `sha256.<file> = <hex>` line per
//! file. Estimated flow directories use the same `flow_%04d.flo` names.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use image::ImageError;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::flowio::{self, FloError, FlowField};
use crate::grid::Grid;
use crate::hs::{hs_estimate, rgb_to_luma, HsError, HsParams, HsStatus};
use crate::imageio;
use crate::metrics::{self, EvalMask, EvalRow, FrameMetrics, MetricsError, OutlierRule, ReportError};
use crate::render::{render_bundle, RenderError, RgbImage};
use crate::scene::{SceneError, SequenceSpec};

pub const MANIFEST_FILE: &str = "manifest.txt";
const HASH_PREFIX: &str = "sha256.";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Image { path: PathBuf, source: ImageError },
    #[error("{}: {source}", path.display())]
    Flo { path: PathBuf, source: FloError },
    #[error("{}: {source}", path.display())]
    Manifest { path: PathBuf, source: ConfigError },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Hs(#[from] HsError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Invalid(String),
}

impl DatasetError {
    /// True for failures of the file system rather than of the data.
    pub fn is_io(&self) -> bool {
        match self {
            DatasetError::Io { .. } => true,
            DatasetError::Image { source, .. } => matches!(source, ImageError::IoError(_)),
            DatasetError::Flo { source, .. } => matches!(source, FloError::Io(_)),
            _ => false,
        }
    }
}

type Result<T, E = DatasetError> = std::result::Result<T, E>;

pub fn frame_file(k: usize) -> String {
    format!("frame_{k:04}.png")
}

pub fn mask_file(k: usize) -> String {
    format!("mask_{k:04}.png")
}

pub fn flow_file(k: usize) -> String {
    format!("flow_{k:04}.flo")
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(io_err(path))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    imageio::decode_rgb_png(&read_bytes(path)?).map_err(|source| DatasetError::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_mask(path: &Path) -> Result<Grid<bool>> {
    imageio::decode_mask_png(&read_bytes(path)?).map_err(|source| DatasetError::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_flow(path: &Path) -> Result<FlowField<f64>> {
    flowio::read_flo_file(path).map_err(|source| DatasetError::Flo {
        path: path.to_path_buf(),
        source,
    })
}

fn encode_flow(path: &Path, flow: &FlowField<f64>) -> Result<Vec<u8>> {
    flowio::encode_flo(flow).map_err(|source| DatasetError::Flo {
        path: path.to_path_buf(),
        source,
    })
}

fn encoded<T>(path: &Path, r: std::result::Result<T, ImageError>) -> Result<T> {
    r.map_err(|source| DatasetError::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn run_frames<T: Send>(
    n: usize,
    parallel: bool,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Spec echo plus content hashes of every file in a sequence directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub spec: SequenceSpec<f64>,
    /// `(file name, sha256 hex)` in generation order.
    pub files: Vec<(String, String)>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut kv = self.spec.to_config();
        for (name, hash) in &self.files {
            kv.set(&format!("{HASH_PREFIX}{name}"), hash);
        }
        format!("# omniflow sequence manifest\n{}", kv.to_text())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let all = KeyValues::parse(text)?;
        let mut spec_kv = KeyValues::new();
        let mut files = Vec::new();
        for key in all.keys() {
            let value = all.get(key).expect("key listed");
            match key.strip_prefix(HASH_PREFIX) {
                Some(file) => files.push((file.to_string(), value.to_string())),
                None => spec_kv.set(key, value),
            }
        }
        let spec = SequenceSpec::from_config(&spec_kv).map_err(|e| match e {
            SceneError::Config(c) => c,
            other => ConfigError::InvalidValue {
                key: "name".into(),
                value: spec_kv.get("name").unwrap_or_default().into(),
                reason: other.to_string(),
            },
        })?;
        Ok(Self { spec, files })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        Self::parse(&text).map_err(|source| DatasetError::Manifest { path, source })
    }
}

/// Renders one sequence into `root/<name>/`. Returns the manifest written.
pub fn generate_sequence(spec: &SequenceSpec<f64>, root: &Path, parallel: bool) -> Result<Manifest> {
    let seq = spec.build()?;
    let dir = root.join(&spec.name);
    create_dir(&dir)?;
    let per_frame = run_frames(seq.frame_count(), parallel, |k| {
        let bundle = render_bundle(&seq, k)?;
        let mut files = Vec::with_capacity(3);
        let frame_path = dir.join(frame_file(k));
        let png = encoded(&frame_path, imageio::encode_rgb_png(&bundle.image))?;
        files.push((frame_file(k), png, frame_path));
        let mask_path = dir.join(mask_file(k));
        let png = encoded(&mask_path, imageio::encode_mask_png(&bundle.fg_mask))?;
        files.push((mask_file(k), png, mask_path));
        if let Some(flow) = &bundle.gt_flow {
            let flow_path = dir.join(flow_file(k));
            files.push((flow_file(k), encode_flow(&flow_path, flow)?, flow_path));
        }
        let mut hashes = Vec::with_capacity(files.len());
        for (name, bytes, path) in files {
            write_bytes(&path, &bytes)?;
            hashes.push((name, sha256_hex(&bytes)));
        }
        Ok(hashes)
    })?;
    let manifest = Manifest {
        spec: spec.clone(),
        files: per_frame.into_iter().flatten().collect(),
    };
    write_bytes(&dir.join(MANIFEST_FILE), manifest.to_text().as_bytes())?;
    Ok(manifest)
}

/// Files whose current content no longer matches the manifest (missing
/// files included).
pub fn verify_dataset(dir: &Path) -> Result<Vec<String>> {
    let manifest = Manifest::load(dir)?;
    let mut changed = Vec::new();
    for (name, hash) in &manifest.files {
        match fs::read(dir.join(name)) {
            Ok(bytes) if sha256_hex(&bytes) == *hash => {}
            _ => changed.push(name.clone()),
        }
    }
    Ok(changed)
}

/// Frame indices `k` with a `flow_%04d.flo` file in `dir`, ascending.
pub fn flow_indices(dir: &Path) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(k) = name
            .strip_prefix("flow_")
            .and_then(|s| s.strip_suffix(".flo"))
            .filter(|s| s.len() == 4 && s.bytes().all(|b| b.is_ascii_digit()))
        {
            out.push(k.parse().expect("four digits"));
        }
    }
    out.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSummary {
    pub written: usize,
    /// Frame pairs where the input was constant over the image circle.
    pub degenerate: Vec<usize>,
}

/// Runs Horn-Schunck on every consecutive frame pair of a sequence and
/// writes `flow_%04d.flo` files into `out_dir`.
pub fn estimate_dataset(
    dataset_dir: &Path,
    out_dir: &Path,
    params: &HsParams,
    parallel: bool,
) -> Result<EstimateSummary> {
    params.validate()?;
    let manifest = Manifest::load(dataset_dir)?;
    let n = manifest.spec.frame_count;
    let cam = &manifest.spec.camera;
    let domain = cam.image_circle_mask();
    for k in 0..n {
        let p = dataset_dir.join(frame_file(k));
        if !p.is_file() {
            return Err(DatasetError::Invalid(format!("missing frame {}", p.display())));
        }
    }
    create_dir(out_dir)?;
    let load = |k: usize| -> Result<Grid<f64>> {
        let img = read_rgb(&dataset_dir.join(frame_file(k)))?;
        if img.dims() != domain.dims() {
            return Err(DatasetError::Invalid(format!(
                "frame {k} is {}x{}, camera is {}x{}",
                img.width(),
                img.height(),
                domain.width(),
                domain.height()
            )));
        }
        Ok(rgb_to_luma(&img))
    };
    let statuses = run_frames(n - 1, parallel, |k| {
        let est = hs_estimate(&load(k)?, &load(k + 1)?, params, &domain)?;
        let path = out_dir.join(flow_file(k));
        write_bytes(&path, &encode_flow(&path, &est.flow)?)?;
        Ok(est.status)
    })?;
    Ok(EstimateSummary {
        written: statuses.len(),
        degenerate: statuses
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == HsStatus::Degenerate)
            .map(|(k, _)| k)
            .collect(),
    })
}

/// One method's results on one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodEvaluation {
    pub method: String,
    pub frames: Vec<(usize, FrameMetrics<f64>)>,
    pub row: EvalRow,
}

/// Compares each flow directory with the ground truth of `dataset_dir`.
/// Every ground-truth frame needs an estimate and vice versa.
pub fn evaluate_dataset(
    dataset_dir: &Path,
    methods: &[(String, PathBuf)],
    rule: OutlierRule,
) -> Result<Vec<MethodEvaluation>> {
    let manifest = Manifest::load(dataset_dir)?;
    let experiment = manifest.spec.name.clone();
    let gt_frames = flow_indices(dataset_dir)?;
    if gt_frames.is_empty() {
        return Err(DatasetError::Invalid(format!(
            "no ground-truth flow in {}",
            dataset_dir.display()
        )));
    }
    let gt: Vec<(FlowField<f64>, Grid<bool>)> = gt_frames
        .iter()
        .map(|&k| {
            Ok((
                read_flow(&dataset_dir.join(flow_file(k)))?,
                read_mask(&dataset_dir.join(mask_file(k)))?,
            ))
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (method, dir) in methods {
        let est_frames = flow_indices(dir)?;
        if est_frames != gt_frames {
            return Err(DatasetError::Invalid(format!(
                "{}: {} flow files do not match the {} ground-truth frames of {experiment}",
                dir.display(),
                est_frames.len(),
                gt_frames.len()
            )));
        }
        let mut frames = Vec::with_capacity(gt_frames.len());
        for (&k, (gt_flow, fg)) in gt_frames.iter().zip(&gt) {
            let path = dir.join(flow_file(k));
            let est = read_flow(&path)?;
            if est.dims() != gt_flow.dims() || fg.dims() != gt_flow.dims() {
                return Err(DatasetError::Invalid(format!(
                    "{}: resolution {}x{} differs from ground truth {}x{}",
                    path.display(),
                    est.width(),
                    est.height(),
                    gt_flow.width(),
                    gt_flow.height()
                )));
            }
            let mask = EvalMask::for_fields(&est, gt_flow, fg)?;
            frames.push((k, metrics::evaluate_frame(&est, gt_flow, &mask, rule)?));
        }
        let per_frame: Vec<FrameMetrics<f64>> = frames.iter().map(|(_, m)| *m).collect();
        let row = metrics::mean_row(&experiment, method, &per_frame).expect("at least one frame");
        out.push(MethodEvaluation {
            method: method.clone(),
            frames,
            row,
        });
    }
    Ok(out)
}

pub const FRAME_CSV_HEADER: &str = "experiment,method,frame,aae_deg,aepe_px,fl_bg_pct,fl_fg_pct,fl_all_pct";

/// Per-frame metrics as CSV lines (without header).
pub fn frame_csv_lines(experiment: &str, eval: &MethodEvaluation) -> Vec<String> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    eval.frames
        .iter()
        .map(|(k, m)| {
            format!(
                "{experiment},{},{k},{},{},{},{},{}",
                eval.method,
                m.aae,
                m.aepe,
                opt(m.fl.bg),
                opt(m.fl.fg),
                m.fl.all
            )
        })
        .collect()
}

/// Writes a color PNG for every `flow_%04d.flo` in `flow_dir` plus
/// `visualize.txt` recording the normalization of each image.
pub fn visualize_dir(flow_dir: &Path, out_dir: &Path, max_mag: Option<f64>) -> Result<Vec<PathBuf>> {
    let indices = flow_indices(flow_dir)?;
    if indices.is_empty() {
        return Err(DatasetError::Invalid(format!("no flow files in {}", flow_dir.display())));
    }
    create_dir(out_dir)?;
    let mut meta = KeyValues::new();
    meta.set("normalization", if max_mag.is_some() { "fixed" } else { "p99" });
    let mut written = Vec::new();
    for k in indices {
        let name = flow_file(k);
        let out = out_dir.join(format!("flow_{k:04}.png"));
        let used = visualize_file(&flow_dir.join(&name), &out, max_mag)?;
        meta.set(&format!("max_mag.{name}"), used);
        written.push(out);
    }
    write_bytes(&out_dir.join("visualize.txt"), meta.to_text().as_bytes())?;
    Ok(written)
}

/// Colors one `.flo` file; returns the normalization magnitude used.
pub fn visualize_file(flow_path: &Path, out_png: &Path, max_mag: Option<f64>) -> Result<f64> {
    let flow = read_flow(flow_path)?;
    let coloring = flowio::flow_to_color(&flow, max_mag);
    let png = encoded(out_png, imageio::encode_rgb_png(&coloring.image))?;
    write_bytes(out_png, &png)?;
    Ok(coloring.max_mag)
}

/// Side-by-side panel: blended input frames, ground truth, and optionally
/// an estimate, all colored with the ground truth's normalization unless
/// `max_mag` pins it.
pub fn panel(dataset_dir: &Path, frame: usize, estimate: Option<&Path>, max_mag: Option<f64>) -> Result<RgbImage> {
    let a = read_rgb(&dataset_dir.join(frame_file(frame)))?;
    let b = read_rgb(&dataset_dir.join(frame_file(frame + 1)))?;
    if a.dims() != b.dims() {
        return Err(DatasetError::Invalid("frames differ in size".into()));
    }
    let overlay = Grid::from_fn(a.width(), a.height(), |x, y| {
        let (p, q) = (a.get(x, y), b.get(x, y));
        std::array::from_fn(|c| ((p[c] as u16 + q[c] as u16) / 2) as u8)
    });
    let gt = read_flow(&dataset_dir.join(flow_file(frame)))?;
    let gt_color = flowio::flow_to_color(&gt, max_mag);
    let mut tiles = vec![overlay, gt_color.image];
    if let Some(path) = estimate {
        let est = read_flow(path)?;
        if est.dims() != gt.dims() {
            return Err(DatasetError::Invalid("estimate resolution differs from ground truth".into()));
        }
        tiles.push(flowio::flow_to_color(&est, Some(gt_color.max_mag)).image);
    }
    let (w, h) = a.dims();
    Ok(Grid::from_fn(w * tiles.len(), h, |x, y| *tiles[x / w].get(x % w, y)))
}

pub fn write_png(path: &Path, img: &RgbImage) -> Result<()> {
    let png = encoded(path, imageio::encode_rgb_png(img))?;
    write_bytes(path, &png)
}
