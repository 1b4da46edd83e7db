use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use omniflow::dataset::{self, flow_file, frame_file, mask_file, MANIFEST_FILE};
use omniflow::flowio::write_flo_file;
use omniflow::imageio::decode_rgb_png;
use omniflow::{FlowField, Grid};

fn omniflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omniflow"))
        .args(args)
        .output()
        .expect("run omniflow")
}

fn ok(args: &[&str]) -> String {
    let out = omniflow(args);
    assert!(
        out.status.success(),
        "omniflow {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    omniflow(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small linec-2 sequence of `frames` frames at `size`² pixels.
fn mini(root: &Path, frames: usize, size: u32) -> PathBuf {
    ok(&[
        "generate",
        "linec-2",
        "--out",
        s(root),
        "--frames",
        &frames.to_string(),
        "--size",
        &size.to_string(),
    ]);
    root.join("linec-2")
}

fn count(dir: &Path, prefix: &str, ext: &str) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| {
            let name = e.as_ref().unwrap().file_name().into_string().unwrap();
            name.starts_with(prefix) && name.ends_with(ext)
        })
        .count()
}

/// `(experiment, method) -> [aae, aepe, fl_bg, fl_fg, fl_all]` from an
/// evaluation CSV; empty cells read as NaN.
fn read_csv(path: &Path) -> Vec<(String, String, [f64; 5])> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "experiment,method,aae_deg,aepe_px,fl_bg_pct,fl_fg_pct,fl_all_pct");
    lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            let num = |c: &str| if c.is_empty() { f64::NAN } else { c.parse().unwrap() };
            (
                cells[0].to_string(),
                cells[1].to_string(),
                std::array::from_fn(|i| num(cells[i + 2])),
            )
        })
        .collect()
}

fn copy_with(src: &Path, dst: &Path, f: impl Fn(f64, f64) -> (f64, f64)) {
    fs::create_dir_all(dst).unwrap();
    for k in dataset::flow_indices(src).unwrap() {
        let gt = dataset::read_flow(&src.join(flow_file(k))).unwrap();
        write_flo_file(&gt.map_vectors(&f).unwrap(), dst.join(flow_file(k))).unwrap();
    }
}

#[test]
fn generate_writes_frames_masks_flows_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = mini(tmp.path(), 5, 64);
    assert_eq!(count(&dir, "frame_", ".png"), 5);
    assert_eq!(count(&dir, "mask_", ".png"), 5);
    assert_eq!(count(&dir, "flow_", ".flo"), 4);
    assert!(dir.join(MANIFEST_FILE).is_file());
    assert!(dir.join(frame_file(4)).is_file() && !dir.join(flow_file(4)).exists());
    assert_eq!(ok(&["verify", s(&dir)]).trim(), "ok");
}

#[test]
fn regeneration_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = mini(&tmp.path().join("a"), 4, 48);
    let b = mini(&tmp.path().join("b"), 4, 48);
    // Parallel and serial rendering agree too.
    ok(&["generate", "linec-2", "--out", s(&tmp.path().join("c")), "--frames", "4", "--size", "48", "--serial"]);
    let c = tmp.path().join("c/linec-2");
    let manifest = fs::read(a.join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest, fs::read(b.join(MANIFEST_FILE)).unwrap());
    assert_eq!(manifest, fs::read(c.join(MANIFEST_FILE)).unwrap());
}

#[test]
fn generate_all_makes_eighteen_sequences() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(&["generate", "--all", "--out", s(tmp.path()), "--frames", "2", "--size", "32"]);
    assert_eq!(out.lines().count(), 18);
    let mut names: Vec<String> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 18);
    for path in ["linec", "line", "spiral"] {
        for speed in [1, 2, 4] {
            assert!(names.contains(&format!("{path}-{speed}")));
            assert!(names.contains(&format!("{path}-{speed}-homog")));
        }
    }
}

#[test]
fn generate_from_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("slow.cfg");
    fs::write(
        &cfg,
        "# slow custom sequence\nname = slowline\npath = line\nspeed = 0.5\nframe_count = 3\n\
         width = 40\nheight = 40\ncx = 20\ncy = 20\nrim_radius = 20\n",
    )
    .unwrap();
    ok(&["generate", "--config", s(&cfg), "--out", s(tmp.path())]);
    let dir = tmp.path().join("slowline");
    assert_eq!(count(&dir, "flow_", ".flo"), 2);
    let manifest = dataset::Manifest::load(&dir).unwrap();
    assert_eq!(manifest.spec.speed, 0.5);
    assert_eq!(manifest.spec.camera.width(), 40);
}

#[test]
fn estimate_on_two_frames_writes_one_flow_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = mini(tmp.path(), 2, 64);
    let (a, b) = (tmp.path().join("hs_a"), tmp.path().join("hs_b"));
    ok(&["estimate", s(&dir), "--out", s(&a), "--iters", "30", "--levels", "2"]);
    ok(&["estimate", s(&dir), "--out", s(&b), "--iters", "30", "--levels", "2", "--serial"]);
    assert_eq!(count(&a, "", ""), 1);
    assert_eq!(fs::read(a.join(flow_file(0))).unwrap(), fs::read(b.join(flow_file(0))).unwrap());
}

#[test]
fn ground_truth_against_itself_is_all_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = mini(tmp.path(), 4, 64);
    let out = tmp.path().join("eval");
    ok(&["evaluate", s(&dir), "--flow", &format!("gt={}", s(&dir)), "--out", s(&out)]);
    let rows = read_csv(&out.join("eval.csv"));
    assert_eq!(rows.len(), 1);
    let (exp, method, vals) = &rows[0];
    assert_eq!((exp.as_str(), method.as_str()), ("linec-2", "gt"));
    assert!(vals.iter().all(|v| v.is_nan() || *v == 0.0), "{vals:?}");
    assert_eq!((vals[0], vals[1], vals[4]), (0.0, 0.0, 0.0));
    assert!(out.join("eval.txt").is_file());
    let frames = fs::read_to_string(out.join("eval_frames.csv")).unwrap();
    assert_eq!(frames.lines().count(), 1 + 3);
}

#[test]
fn constant_offset_gives_five_pixel_endpoint_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = mini(tmp.path(), 4, 64);
    let shifted = tmp.path().join("shifted");
    copy_with(&dir, &shifted, |u, v| (u + 3.0, v + 4.0));
    let out = tmp.path().join("eval");
    let table = ok(&["evaluate", s(&dir), "--flow", &format!("offset={}", s(&shifted)), "--out", s(&out)]);
    let (_, _, vals) = &read_csv(&out.join("eval.csv"))[0];
    assert!((vals[1] - 5.0).abs() < 1e-5, "AEPE {}", vals[1]);
    assert_eq!(vals[4], 100.0);
    assert!(table.contains("5.00"));
}

/// Per-frame metrics from the definitions, averaged over frames.
fn scripted_oracle(dataset_dir: &Path, est_dir: &Path) -> [f64; 5] {
    let mut sums = [0.0; 5];
    let mut counts = [0usize; 5];
    for k in dataset::flow_indices(dataset_dir).unwrap() {
        let gt = dataset::read_flow(&dataset_dir.join(flow_file(k))).unwrap();
        let est = dataset::read_flow(&est_dir.join(flow_file(k))).unwrap();
        let fg = dataset::read_mask(&dataset_dir.join(mask_file(k))).unwrap();
        let (mut ae, mut epe, mut n) = (0.0, 0.0, 0usize);
        let mut out = [(0usize, 0usize); 2]; // (outliers, pixels) for bg, fg
        for y in 0..gt.height() {
            for x in 0..gt.width() {
                let (Some((gu, gv)), Some((u, v))) = (gt.get(x, y), est.get(x, y)) else { continue };
                let c = (1.0 + u * gu + v * gv) / ((1.0 + u * u + v * v) * (1.0 + gu * gu + gv * gv)).sqrt();
                ae += if (u, v) == (gu, gv) { 0.0 } else { c.clamp(-1.0, 1.0).acos() };
                let e = (u - gu).hypot(v - gv);
                epe += e;
                n += 1;
                let region = &mut out[usize::from(*fg.get(x, y))];
                region.1 += 1;
                region.0 += usize::from(e > 3.0);
            }
        }
        let frame = [
            Some(ae.to_degrees() / n as f64),
            Some(epe / n as f64),
            (out[0].1 > 0).then(|| 100.0 * out[0].0 as f64 / out[0].1 as f64),
            (out[1].1 > 0).then(|| 100.0 * out[1].0 as f64 / out[1].1 as f64),
            Some(100.0 * (out[0].0 + out[1].0) as f64 / n as f64),
        ];
        for (i, v) in frame.iter().enumerate() {
            if let Some(v) = v {
                sums[i] += v;
                counts[i] += 1;
            }
        }
    }
    std::array::from_fn(|i| if counts[i] == 0 { f64::NAN } else { sums[i] / counts[i] as f64 })
}

#[test]
fn external_flow_matches_scripted_recomputation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = mini(tmp.path(), 6, 64);
    // An "external" method: ground truth with a deterministic perturbation
    // that pushes some pixels past the outlier threshold.
    let ext = tmp.path().join("external");
    fs::create_dir_all(&ext).unwrap();
    for k in dataset::flow_indices(&dir).unwrap() {
        let gt = dataset::read_flow(&dir.join(flow_file(k))).unwrap();
        let est = FlowField::from_fn(gt.width(), gt.height(), |x, y| {
            let (u, v) = gt.get(x, y)?;
            let t = ((x * 7 + y * 13 + k * 5) % 17) as f64;
            Some((u + 0.4 * t - 2.0, v - 0.1 * t))
        })
        .unwrap();
        write_flo_file(&est, ext.join(flow_file(k))).unwrap();
    }
    let out = tmp.path().join("eval");
    ok(&["evaluate", s(&dir), "--flow", &format!("ext={}", s(&ext)), "--out", s(&out)]);
    let (_, _, got) = &read_csv(&out.join("eval.csv"))[0];
    let want = scripted_oracle(&dir, &ext);
    for i in 0..5 {
        assert!(
            (got[i] - want[i]).abs() <= 1e-9 || (got[i].is_nan() && want[i].is_nan()),
            "column {i}: {} vs {}",
            got[i],
            want[i]
        );
    }
    assert!(want[4] > 0.0 && want[4] < 100.0, "perturbation should make some outliers: {want:?}");
}

#[test]
fn multiple_methods_and_report_merge() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = mini(tmp.path(), 3, 48);
    let (near, far) = (tmp.path().join("near"), tmp.path().join("far"));
    copy_with(&dir, &near, |u, v| (u + 0.5, v));
    copy_with(&dir, &far, |u, v| (u + 4.0, v));
    let out = tmp.path().join("eval");
    let table = ok(&[
        "evaluate",
        s(&dir),
        "--flow",
        &format!("near={}", s(&near)),
        "--flow",
        &format!("far={}", s(&far)),
        "--out",
        s(&out),
    ]);
    let near_line = table.lines().find(|l| l.contains("near")).unwrap();
    assert!(near_line.contains('*'), "{table}");
    let far_line = table.lines().find(|l| l.contains("far")).unwrap();
    assert!(!far_line.contains('*'), "{table}");

    let merged = tmp.path().join("merged.csv");
    let report = ok(&["report", s(&out.join("eval.csv")), "--csv-out", s(&merged)]);
    assert_eq!(report, table);
    assert_eq!(fs::read_to_string(&merged).unwrap(), fs::read_to_string(out.join("eval.csv")).unwrap());
    // Merging the same rows twice is a duplicate.
    let csv = out.join("eval.csv");
    assert_eq!(code(&["report", s(&csv), s(&csv)]), 2);
}

#[test]
fn zero_flow_visualizes_as_white_disc_on_black() {
    let tmp = tempfile::tempdir().unwrap();
    let cam = omniflow::FisheyeCamera::new(64, 64, 32.0, 32.0, 32.0, omniflow::Pose::default()).unwrap();
    let circle = cam.image_circle_mask();
    let zero = FlowField::zeros(64, 64).with_valid(circle.clone()).unwrap();
    let flo = tmp.path().join("zero.flo");
    write_flo_file(&zero, &flo).unwrap();
    let png = tmp.path().join("zero.png");
    ok(&["visualize", s(&flo), "--out", s(&png)]);
    let img = decode_rgb_png(&fs::read(&png).unwrap()).unwrap();
    for (i, px) in img.iter().enumerate() {
        let expected = if circle.as_slice()[i] { [255; 3] } else { [0; 3] };
        assert_eq!(*px, expected, "pixel {i}");
    }
}

#[test]
fn ground_truth_color_is_white_off_the_cube() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = mini(tmp.path(), 4, 96);
    let png = tmp.path().join("gt.png");
    ok(&["visualize", s(&dir.join(flow_file(1))), "--out", s(&png)]);
    let img = decode_rgb_png(&fs::read(&png).unwrap()).unwrap();
    let fg = dataset::read_mask(&dir.join(mask_file(1))).unwrap();
    let gt = dataset::read_flow(&dir.join(flow_file(1))).unwrap();
    let mut colored_fg = 0;
    for y in 0..96 {
        for x in 0..96 {
            let px = *img.get(x, y);
            match (gt.get(x, y).is_some(), *fg.get(x, y)) {
                (true, false) => assert_eq!(px, [255; 3], "background pixel ({x},{y})"),
                (true, true) => colored_fg += usize::from(px != [255; 3]),
                (false, _) => assert_eq!(px, [0; 3]),
            }
        }
    }
    assert!(colored_fg > 0);
}

#[test]
fn fixed_normalization_is_recorded_for_every_frame() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = mini(tmp.path(), 4, 48);
    let out = tmp.path().join("vis");
    ok(&["visualize", s(&dir), "--out", s(&out), "--max-mag", "2.5"]);
    assert_eq!(count(&out, "flow_", ".png"), 3);
    let meta = fs::read_to_string(out.join("visualize.txt")).unwrap();
    assert!(meta.contains("normalization = fixed"), "{meta}");
    let mags: Vec<&str> = meta.lines().filter(|l| l.starts_with("max_mag.")).collect();
    assert_eq!(mags.len(), 3);
    assert!(mags.iter().all(|l| l.ends_with("= 2.5")), "{meta}");

    let auto = tmp.path().join("vis_auto");
    ok(&["visualize", s(&dir), "--out", s(&auto)]);
    assert!(fs::read_to_string(auto.join("visualize.txt")).unwrap().contains("normalization = p99"));
}

#[test]
fn panel_places_overlay_ground_truth_and_estimate_side_by_side() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = mini(tmp.path(), 3, 48);
    let png = tmp.path().join("panel.png");
    ok(&["visualize", s(&dir), "--panel", "0", "--out", s(&png)]);
    assert_eq!(decode_rgb_png(&fs::read(&png).unwrap()).unwrap().dims(), (96, 48));
    ok(&["visualize", s(&dir), "--panel", "0", "--estimate", s(&dir), "--out", s(&png)]);
    let img = decode_rgb_png(&fs::read(&png).unwrap()).unwrap();
    assert_eq!(img.dims(), (144, 48));
    // Estimate equal to the ground truth gives identical tiles.
    for y in 0..48 {
        for x in 0..48 {
            assert_eq!(img.get(48 + x, y), img.get(96 + x, y));
        }
    }
}

#[test]
fn full_pipeline_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let root = tmp.path().join(tag);
        let dir = mini(&root, 3, 48);
        let est = root.join("hs");
        ok(&["estimate", s(&dir), "--out", s(&est), "--iters", "20", "--levels", "2"]);
        let out = root.join("eval");
        ok(&["evaluate", s(&dir), "--flow", &format!("hs={}", s(&est)), "--out", s(&out)]);
        (
            fs::read(out.join("eval.csv")).unwrap(),
            fs::read(out.join("eval_frames.csv")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn exit_codes_separate_validation_from_io_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let out = s(tmp.path());
    // Validation errors.
    assert_eq!(code(&["generate", "zigzag-3", "--out", out]), 2);
    assert_eq!(code(&["generate", "--out", out]), 2);
    assert_eq!(code(&["generate", "linec-1", "--out", out, "--size", "0"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["estimate", out, "--out", out, "--method", "flownet"]), 2);
    assert_eq!(code(&["--help"]), 0);

    let dir = mini(&tmp.path().join("d"), 4, 32);
    assert_eq!(code(&["estimate", s(&dir), "--out", out, "--alpha", "-1"]), 2);
    // Frame-count mismatch: one estimate missing.
    let partial = tmp.path().join("partial");
    copy_with(&dir, &partial, |u, v| (u, v));
    fs::remove_file(partial.join(flow_file(2))).unwrap();
    assert_eq!(code(&["evaluate", s(&dir), "--flow", s(&partial)]), 2);
    // Resolution mismatch.
    let small = tmp.path().join("small");
    fs::create_dir_all(&small).unwrap();
    for k in 0..3 {
        write_flo_file(&FlowField::zeros(8, 8), small.join(flow_file(k))).unwrap();
    }
    assert_eq!(code(&["evaluate", s(&dir), "--flow", s(&small)]), 2);
    // A corrupted flow file is invalid data, not an I/O failure.
    fs::write(small.join(flow_file(0)), b"not a flow file").unwrap();
    assert_eq!(code(&["visualize", s(&small.join(flow_file(0))), "--out", s(&tmp.path().join("x.png"))]), 2);

    // I/O errors.
    let missing = tmp.path().join("missing");
    assert_eq!(code(&["estimate", s(&missing), "--out", out]), 3);
    assert_eq!(code(&["evaluate", s(&missing), "--flow", s(&dir)]), 3);
    assert_eq!(code(&["visualize", s(&missing.join("a.flo")), "--out", s(&tmp.path().join("y.png"))]), 3);
    let blocker = tmp.path().join("file");
    fs::write(&blocker, b"").unwrap();
    assert_eq!(code(&["generate", "linec-1", "--out", s(&blocker.join("sub")), "--frames", "2", "--size", "16"]), 3);
}

#[test]
fn verify_detects_on_disk_mutation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = mini(tmp.path(), 3, 32);
    assert_eq!(code(&["verify", s(&dir)]), 0);
    let mut bytes = fs::read(dir.join(flow_file(1))).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(dir.join(flow_file(1)), bytes).unwrap();
    let out = omniflow(&["verify", s(&dir)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&flow_file(1)));
}

#[test]
fn masks_written_by_generate_are_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = mini(tmp.path(), 2, 64);
    let mask: Grid<bool> = dataset::read_mask(&dir.join(mask_file(0))).unwrap();
    assert!(mask.count_true() > 0);
}
