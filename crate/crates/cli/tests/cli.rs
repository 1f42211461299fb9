use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spc_core::io::{png_to_tensor, read_mask, read_tensor, tensor_to_png, write_mask};
use spc_core::metrics::{psnr, sdr, ssim};
use spc_core::{DenseTensor, EvalRegion, Mask, Region};

fn spc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn spc")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let headers = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (headers, rows)
}

fn phantom_with_mask(dir: &Path, dims: &str, ratio: &str) {
    assert_eq!(code(&spc(&["synth", "--dims", dims, "--seed", "1", "--out", "p.spct"], dir)), 0);
    let out = spc(&["mask", "--input", "p.spct", "--ratio", ratio, "--seed", "1", "--out", "m.spct"], dir);
    assert_eq!(code(&out), 0);
}

#[test]
fn synth_is_deterministic_and_validates_dims() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a.spct", "b.spct"] {
        let out = spc(&["synth", "--dims", "30,30,30", "--seed", "7", "--out", name], d);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(std::fs::read(p(d, "a.spct")).unwrap(), std::fs::read(p(d, "b.spct")).unwrap());
    assert_eq!(read_tensor(p(d, "a.spct")).unwrap().dims(), &[30, 30, 30]);
    assert_eq!(code(&spc(&["synth", "--dims", "0,3", "--out", "c.spct"], d)), 2);
    assert!(!p(d, "c.spct").exists());
}

#[test]
fn mask_counts_reproducibility_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    phantom_with_mask(d, "30,30,30", "0.8");
    let m = read_mask(p(d, "m.spct")).unwrap();
    assert_eq!(m.observed_count(), 5400);
    let again = spc(&["mask", "--input", "p.spct", "--ratio", "0.8", "--seed", "1", "--out", "m2.spct"], d);
    assert_eq!(code(&again), 0);
    assert_eq!(std::fs::read(p(d, "m.spct")).unwrap(), std::fs::read(p(d, "m2.spct")).unwrap());
    assert_eq!(code(&spc(&["mask", "--input", "p.spct", "--ratio", "1", "--out", "x.spct"], d)), 2);

    let img = DenseTensor::filled(&[4, 5], 255.0).unwrap();
    tensor_to_png(&img, p(d, "mask.png")).unwrap();
    let out = spc(&["mask", "--input", "p.spct", "--mask-image", "mask.png", "--out", "x.spct"], d);
    assert_eq!(code(&out), 1);
}

#[test]
fn dead_pixels_and_mask_images_on_png_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let img = DenseTensor::from_fn(&[12, 10, 3], |i| (i[0] * 20 + i[1] * 5 + i[2] * 30) as f64).unwrap();
    tensor_to_png(&img, p(d, "img.png")).unwrap();
    let out = spc(&["mask", "--input", "img.png", "--ratio", "0.5", "--dead-pixels", "--out", "dp.spct"], d);
    assert_eq!(code(&out), 0);
    let m = read_mask(p(d, "dp.spct")).unwrap();
    assert_eq!(m.missing_count(), 60 * 3);

    let half = DenseTensor::from_fn(&[12, 10], |i| if i[0] < 6 { 0.0 } else { 200.0 }).unwrap();
    tensor_to_png(&half, p(d, "half.png")).unwrap();
    let out = spc(&["mask", "--input", "img.png", "--mask-image", "half.png", "--out", "h.spct"], d);
    assert_eq!(code(&out), 0);
    assert_eq!(read_mask(p(d, "h.spct")).unwrap().observed_count(), 60 * 3);

    let black = DenseTensor::zeros(&[12, 10]).unwrap();
    tensor_to_png(&black, p(d, "black.png")).unwrap();
    let out = spc(&["mask", "--input", "img.png", "--mask-image", "black.png", "--out", "b.spct"], d);
    assert_eq!(code(&out), 1);
}

#[test]
fn complete_phantom_reaches_fit_with_non_increasing_trace() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    phantom_with_mask(d, "30,30,30", "0.8");
    let out = spc(
        &[
            "complete", "--input", "p.spct", "--mask", "m.spct", "--p", "2", "--rho", "1,1,1", "--sdr", "30",
            "--nu", "0.01", "--out", "c.spct", "--trace-csv", "trace.csv",
        ],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let t = read_tensor(p(d, "p.spct")).unwrap();
    let m = read_mask(p(d, "m.spct")).unwrap();
    let c = read_tensor(p(d, "c.spct")).unwrap();
    let observed: Vec<usize> = (0..t.len()).filter(|&i| m.is_observed(i)).collect();
    assert!(observed.iter().all(|&i| c.as_slice()[i] == t.as_slice()[i]));

    let (headers, rows) = read_csv(&p(d, "trace.csv"));
    assert_eq!(headers, ["iter", "mu", "R", "switched"]);
    let mu: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let eps = 10f64.powf(-3.0) * t.masked_norm_sq(&m, Region::Observed).unwrap();
    assert!(*mu.last().unwrap() <= eps);
    let increases: Vec<(usize, f64)> = mu
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0] * (1.0 + 1e-10))
        .map(|(i, w)| (i + 1, (w[1] - w[0]) / w[0]))
        .collect();
    assert!(
        increases.is_empty(),
        "mu increased at {} of {} iterations, first (iter, relative increase): {:?}",
        increases.len(),
        mu.len() - 1,
        &increases[..increases.len().min(3)]
    );
}

#[test]
fn complete_usage_errors_and_caps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    phantom_with_mask(d, "10,10,10", "0.5");
    let base = ["complete", "--input", "p.spct", "--mask", "m.spct", "--out", "c.spct"];
    let with = |extra: &[&str]| {
        let mut args = base.to_vec();
        args.extend_from_slice(extra);
        code(&spc(&args, d))
    };
    assert_eq!(with(&["--rho", "1,1"]), 2);
    assert_eq!(with(&["--p", "3"]), 2);
    assert_eq!(with(&["--smooth", "chain,grid:3x3,none"]), 2);
    assert_eq!(with(&["--smooth", "chain,wiggle,none"]), 2);
    assert_eq!(with(&["--sdr", "60", "--max-rank", "2"]), 3);
    assert_eq!(with(&["--max-iters", "3"]), 4);

    let wrong = Mask::all_observed(&[10, 10]).unwrap();
    write_mask(p(d, "wrong.spct"), &wrong).unwrap();
    assert_eq!(code(&spc(&["complete", "--input", "p.spct", "--mask", "wrong.spct", "--out", "c.spct"], d)), 2);
}

#[test]
fn fixed_rank_and_simple_modes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    phantom_with_mask(d, "10,9,8", "0.5");
    let out = spc(
        &[
            "complete", "--input", "p.spct", "--mask", "m.spct", "--fixed-rank", "5", "--out", "f.spct", "--trace-csv",
            "f.csv",
        ],
        d,
    );
    assert_eq!(code(&out), 0);
    let (_, rows) = read_csv(&p(d, "f.csv"));
    assert!(rows.len() > 1);
    assert!(rows.iter().all(|r| r[2] == "5" && r[3] == "0"));

    let out = spc(
        &["complete", "--input", "p.spct", "--mask", "m.spct", "--simple", "--sdr", "20", "--out", "s.spct", "--trace-csv", "s.csv"],
        d,
    );
    assert_eq!(code(&out), 0);
    let (_, rows) = read_csv(&p(d, "s.csv"));
    let ranks: Vec<usize> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert_eq!(ranks, (1..=ranks.len()).collect::<Vec<_>>());
}

#[test]
fn complete_png_writes_png() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let img = DenseTensor::from_fn(&[16, 12, 3], |i| 100.0 + 5.0 * i[0] as f64 + 3.0 * i[1] as f64 + 10.0 * i[2] as f64)
        .unwrap();
    tensor_to_png(&img, p(d, "img.png")).unwrap();
    let out = spc(&["mask", "--input", "img.png", "--ratio", "0.5", "--dead-pixels", "--out", "m.spct"], d);
    assert_eq!(code(&out), 0);
    let out = spc(&["complete", "--input", "img.png", "--mask", "m.spct", "--out", "done.spct"], d);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(p(d, "done.spct").exists());
    assert!(p(d, "done.png").exists());
}

fn parse_metrics(text: &str) -> Vec<(String, f64)> {
    let mut lines = text.lines();
    let names: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let values: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    names.into_iter().zip(values).collect()
}

#[test]
fn eval_matches_library_and_handles_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let truth = DenseTensor::from_fn(&[12, 10, 3], |i| ((i[0] * 37 + i[1] * 11 + i[2] * 50) % 256) as f64).unwrap();
    let est = DenseTensor::from_fn(&[12, 10, 3], |i| truth.get(i) + ((i[0] + i[1]) % 3) as f64).unwrap();
    tensor_to_png(&truth, p(d, "t.png")).unwrap();
    tensor_to_png(&est, p(d, "e.png")).unwrap();
    let mask = Mask::from_vec(&[12, 10, 3], (0..360).map(|i| i % 4 != 0).collect()).unwrap();
    write_mask(p(d, "m.spct"), &mask).unwrap();

    let out = spc(&["eval", "--truth", "t.png", "--estimate", "t.png"], d);
    assert_eq!(code(&out), 0);
    let same = parse_metrics(&stdout(&out));
    assert_eq!(same[0], ("psnr".to_string(), f64::INFINITY));
    assert_eq!(same[1], ("ssim".to_string(), 1.0));

    let out = spc(&["eval", "--truth", "t.png", "--estimate", "e.png", "--mask", "m.spct", "--region", "missing"], d);
    assert_eq!(code(&out), 0);
    let got = parse_metrics(&stdout(&out));
    let truth = png_to_tensor(p(d, "t.png")).unwrap();
    let est = png_to_tensor(p(d, "e.png")).unwrap();
    let region = EvalRegion::Missing(&mask);
    let want = [
        psnr(&truth, &est, region).unwrap(),
        ssim(&truth, &est).unwrap(),
        sdr(&truth, &est, region).unwrap(),
    ];
    for ((_, g), w) in got.iter().zip(want) {
        assert!((g - w).abs() <= 1e-12 * w.abs(), "{g} vs {w}");
    }

    let full = Mask::all_observed(&[12, 10, 3]).unwrap();
    write_mask(p(d, "full.spct"), &full).unwrap();
    let out = spc(&["eval", "--truth", "t.png", "--estimate", "e.png", "--mask", "full.spct", "--region", "missing"], d);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
    let out = spc(&["eval", "--truth", "t.png", "--estimate", "e.png", "--region", "missing"], d);
    assert_eq!(code(&out), 2);
}

#[test]
fn run_experiment_rows_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let img = DenseTensor::from_fn(&[16, 16, 3], |i| {
        128.0 + 60.0 * ((i[0] as f64) / 5.0).sin() + 40.0 * ((i[1] as f64) / 4.0).cos() + 10.0 * i[2] as f64
    })
    .unwrap();
    tensor_to_png(&img, p(d, "img.png")).unwrap();
    let config = "inputs = [\"img.png\"]\nratios = [0.5, 0.7]\nmethods = [\"tv\", \"qv\"]\nseeds = [3]\n";
    std::fs::write(p(d, "a.toml"), format!("{config}output_dir = \"a\"\n")).unwrap();
    std::fs::write(p(d, "b.toml"), format!("{config}output_dir = \"b\"\n")).unwrap();
    for name in ["a.toml", "b.toml"] {
        let out = spc(&["run-experiment", "--config", name], d);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (headers, a) = read_csv(&p(d, "a/results.csv"));
    assert_eq!(
        headers,
        ["input", "ratio", "method", "seed", "psnr_all", "psnr_missing", "ssim", "sdr", "final_R", "iters", "seconds"]
    );
    assert_eq!(a.len(), 4);
    let (_, b) = read_csv(&p(d, "b/results.csv"));
    for (ra, rb) in a.iter().zip(&b) {
        assert_eq!(ra[..10], rb[..10]);
    }
    assert!(p(d, "a/img_r0.5_qv_s3.png").exists());

    std::fs::write(p(d, "bad.toml"), "inputs = 3\n").unwrap();
    assert_eq!(code(&spc(&["run-experiment", "--config", "bad.toml"], d)), 2);
}
