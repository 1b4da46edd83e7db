//! `omniflow` command-line entry point.
//!
//! Exit codes: 0 on success, 2 for invalid input or arguments, 3 for file
//! system failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use omniflow::FisheyeCamera;
use omniflow::config::KeyValues;
use omniflow::dataset::{self, DatasetError};
use omniflow::metrics::{build_report, parse_csv};
use omniflow::metrics::OutlierRule;
use omniflow::{HsParams, Pose, SequenceSpec};

const EXIT_INVALID: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "omniflow", version, about = "Synthetic fish-eye optical flow benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render sequences with ground-truth flow, masks and a manifest.
    Generate(GenerateArgs),
    /// Run the Horn-Schunck baseline on every consecutive frame pair.
    Estimate(EstimateArgs),
    /// Score one or more flow directories against a sequence's ground truth.
    Evaluate(EvaluateArgs),
    /// Color-code flow files as PNG images.
    Visualize(VisualizeArgs),
    /// Merge evaluation CSVs into one table with best values marked.
    Report(ReportArgs),
    /// Check a sequence directory against its manifest hashes.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Sequence names such as `linec-1` or `spiral-4-homog`.
    names: Vec<String>,
    /// Generate all 18 built-in sequences.
    #[arg(long)]
    all: bool,
    /// Sequence spec files in `key = value` form (repeatable).
    #[arg(long = "config", value_name = "FILE")]
    configs: Vec<PathBuf>,
    /// Output root; each sequence gets its own subdirectory.
    #[arg(long, short, value_name = "DIR")]
    out: PathBuf,
    /// Override the number of frames.
    #[arg(long)]
    frames: Option<usize>,
    /// Override the image size with a square image whose image circle
    /// touches the borders.
    #[arg(long, value_name = "PIXELS")]
    size: Option<u32>,
    /// Render frames one at a time.
    #[arg(long)]
    serial: bool,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Sequence directory containing frames and a manifest.
    dataset: PathBuf,
    /// Output directory for `flow_%04d.flo` files.
    #[arg(long, short, value_name = "DIR")]
    out: PathBuf,
    /// Estimator; only `hs` is built in.
    #[arg(long, default_value = "hs")]
    method: String,
    /// Smoothness weight.
    #[arg(long)]
    alpha: Option<f64>,
    /// Iterations per warp.
    #[arg(long)]
    iters: Option<usize>,
    /// Pyramid levels.
    #[arg(long)]
    levels: Option<usize>,
    /// Warps per pyramid level.
    #[arg(long)]
    warps: Option<usize>,
    /// Gaussian pre-smoothing in pixels (0 disables).
    #[arg(long)]
    sigma: Option<f64>,
    /// Process frame pairs one at a time.
    #[arg(long)]
    serial: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Sequence directory with ground truth.
    dataset: PathBuf,
    /// `METHOD=DIR` pairs (repeatable); a bare `DIR` is named after itself.
    #[arg(long = "flow", value_name = "METHOD=DIR", required = true)]
    flows: Vec<String>,
    /// Output directory for `eval.csv`, `eval_frames.csv` and `eval.txt`.
    #[arg(long, short, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also require a 5 % relative error for an outlier.
    #[arg(long)]
    kitti: bool,
}

#[derive(Debug, Args)]
struct VisualizeArgs {
    /// A `.flo` file or a directory of `flow_%04d.flo` files.
    input: PathBuf,
    /// Output PNG (for a file) or directory (for a directory).
    #[arg(long, short, value_name = "PATH")]
    out: PathBuf,
    /// Pin the normalization magnitude instead of using the 99th percentile.
    #[arg(long)]
    max_mag: Option<f64>,
    /// Write an overlay / ground truth / estimate panel for this frame of
    /// the sequence directory given as input.
    #[arg(long, value_name = "FRAME")]
    panel: Option<usize>,
    /// Estimated flow directory for the panel.
    #[arg(long, value_name = "DIR", requires = "panel")]
    estimate: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Evaluation CSV files to merge.
    #[arg(required = true)]
    csvs: Vec<PathBuf>,
    /// Write the merged CSV here.
    #[arg(long, value_name = "FILE")]
    csv_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    dataset: PathBuf,
}

/// A failure classified for the process exit code.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    Io(String),
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn square_camera(size: u32) -> Result<FisheyeCamera, Failure> {
    let half = size as f64 / 2.0;
    FisheyeCamera::new(size, size, half, half, half, Pose::default()).map_err(|e| invalid(e.to_string()))
}

fn generate(args: GenerateArgs) -> Result<(), Failure> {
    let mut specs: Vec<SequenceSpec> = Vec::new();
    if args.all {
        specs.extend(SequenceSpec::builtin_grid());
    }
    for name in &args.names {
        specs.push(SequenceSpec::from_name(name).map_err(|e| invalid(e.to_string()))?);
    }
    for path in &args.configs {
        let kv = KeyValues::parse(&read_text(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        specs.push(SequenceSpec::from_config(&kv).map_err(|e| invalid(format!("{}: {e}", path.display())))?);
    }
    if specs.is_empty() {
        return Err(invalid("nothing to generate: give sequence names, --all or --config"));
    }
    for spec in &mut specs {
        if let Some(n) = args.frames {
            spec.frame_count = n;
        }
        if let Some(size) = args.size {
            spec.camera = square_camera(size)?;
        }
        spec.validate().map_err(|e| invalid(format!("{}: {e}", spec.name)))?;
    }
    dataset::create_dir(&args.out)?;
    for spec in &specs {
        let manifest = dataset::generate_sequence(spec, &args.out, !args.serial)?;
        info!("{}: {} files", spec.name, manifest.files.len());
        println!("{}", args.out.join(&spec.name).display());
    }
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<(), Failure> {
    if args.method != "hs" {
        return Err(invalid(format!("unknown method {:?}; only `hs` is built in", args.method)));
    }
    let mut params = HsParams::default();
    if let Some(v) = args.alpha {
        params.alpha = v;
    }
    if let Some(v) = args.iters {
        params.iterations = v;
    }
    if let Some(v) = args.levels {
        params.pyramid_levels = v;
    }
    if let Some(v) = args.warps {
        params.warps_per_level = v;
    }
    if let Some(v) = args.sigma {
        params.presmooth_sigma = v;
    }
    let summary = dataset::estimate_dataset(&args.dataset, &args.out, &params, !args.serial)?;
    for k in &summary.degenerate {
        log::warn!("frame pair {k}: constant input, flow set to zero");
    }
    println!("wrote {} flow files to {}", summary.written, args.out.display());
    Ok(())
}

fn parse_flow_arg(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((method, dir)) if !method.is_empty() => (method.to_string(), PathBuf::from(dir)),
        _ => {
            let dir = PathBuf::from(arg);
            let method = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| arg.to_string());
            (method, dir)
        }
    }
}

fn evaluate(args: EvaluateArgs) -> Result<(), Failure> {
    let methods: Vec<(String, PathBuf)> = args.flows.iter().map(|f| parse_flow_arg(f)).collect();
    let rule = if args.kitti { OutlierRule::KITTI } else { OutlierRule::STRICT };
    let evals = dataset::evaluate_dataset(&args.dataset, &methods, rule)?;
    let experiment = evals[0].row.experiment.clone();
    let report = build_report(evals.iter().map(|e| e.row.clone()).collect()).map_err(|e| invalid(e.to_string()))?;
    let table = report.to_text();
    if let Some(out) = &args.out {
        dataset::create_dir(out)?;
        write_text(&out.join("eval.csv"), &report.to_csv())?;
        let mut frames = vec![dataset::FRAME_CSV_HEADER.to_string()];
        for e in &evals {
            frames.extend(dataset::frame_csv_lines(&experiment, e));
        }
        write_text(&out.join("eval_frames.csv"), &(frames.join("\n") + "\n"))?;
        write_text(&out.join("eval.txt"), &table)?;
    }
    print!("{table}");
    Ok(())
}

fn visualize(args: VisualizeArgs) -> Result<(), Failure> {
    if let Some(frame) = args.panel {
        let img = dataset::panel(&args.input, frame, args.estimate.as_deref().map(|d| d.join(dataset::flow_file(frame))).as_deref(), args.max_mag)?;
        dataset::write_png(&args.out, &img)?;
        println!("{}", args.out.display());
        return Ok(());
    }
    if args.input.is_dir() {
        let written = dataset::visualize_dir(&args.input, &args.out, args.max_mag)?;
        println!("wrote {} images to {}", written.len(), args.out.display());
    } else {
        let used = dataset::visualize_file(&args.input, &args.out, args.max_mag)?;
        println!("{} (max_mag = {used})", args.out.display());
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), Failure> {
    let mut rows = Vec::new();
    for path in &args.csvs {
        rows.extend(parse_csv(&read_text(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))?);
    }
    let report = build_report(rows).map_err(|e| invalid(e.to_string()))?;
    if let Some(out) = &args.csv_out {
        write_text(out, &report.to_csv())?;
    }
    print!("{}", report.to_text());
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<(), Failure> {
    let changed = dataset::verify_dataset(&args.dataset)?;
    if changed.is_empty() {
        println!("ok");
        Ok(())
    } else {
        Err(invalid(format!("changed since generation: {}", changed.join(", "))))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Estimate(a) => estimate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Visualize(a) => visualize(a),
        Command::Report(a) => report(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}
