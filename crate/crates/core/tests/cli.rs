use std::path::Path;
use std::process::{Command, Output};

use echokit::pipeline::{InputSource, PipelineConfig};

const BIN: &str = env!("CARGO_BIN_EXE_echokit");
const CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/phantom.json");

fn echokit(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn same_bytes(a: &Path, b: &Path) {
    assert!(std::fs::read(a).unwrap() == std::fs::read(b).unwrap(), "{} != {}", a.display(), b.display());
}

#[test]
fn usage_errors_exit_one() {
    let out = echokit(&["evaluate", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    assert_eq!(echokit(&[]).status.code(), Some(1));
    assert_eq!(echokit(&["denoise", "--in", "x.pgm", "--out", "y.pgm", "--order", "abc"]).status.code(), Some(1));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(echokit(&["--help"]).status.code(), Some(0));
    assert_eq!(echokit(&["--version"]).status.code(), Some(0));
    assert_eq!(echokit(&["pipeline", "--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_two() {
    let out = echokit(&["evaluate", "--ref", "/nonexistent.pgm", "--proc", "/nonexistent.pgm"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("file not found"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    let mut v: serde_json::Value = serde_json::from_str(&PipelineConfig::default().to_json()).unwrap();
    v["knn"]["kk"] = 3.into();
    std::fs::write(&cfg, v.to_string()).unwrap();
    let out = echokit(&["pipeline", "--config", p(&cfg), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kk"));
}

#[test]
fn evaluate_identical_images_reports_cap() {
    let dir = tempfile::tempdir().unwrap();
    ok(&echokit(&["phantom", "--out", p(dir.path())]));
    let img = dir.path().join("phantom.pgm");
    let out = echokit(&["evaluate", "--ref", p(&img), "--proc", p(&img)]);
    ok(&out);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["psnr_db"], serde_json::json!(99.0));
    assert_eq!(v["mse"], serde_json::json!(0.0));
}

#[test]
fn segment_rejects_k_above_training_size() {
    let dir = tempfile::tempdir().unwrap();
    ok(&echokit(&["phantom", "--out", p(dir.path())]));
    let out = echokit(&[
        "segment",
        "--in",
        p(&dir.path().join("phantom.pgm")),
        "--train-mask",
        p(&dir.path().join("mask.pgm")),
        "--per-class",
        "10",
        "--k",
        "31",
        "--out",
        p(&dir.path().join("seg.pgm")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("k must be"));
}

#[test]
fn ksweep_writes_accuracy_table() {
    let dir = tempfile::tempdir().unwrap();
    let out_csv = dir.path().join("k.csv");
    ok(&echokit(&["ksweep", "--config", CONFIG, "--k", "1,5,9", "--out", p(&out_csv)]));
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,accuracy,accuracy_raw,sensitivity,specificity");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("5,"));
}

#[test]
fn pipeline_equals_manual_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = d.join("run");
    ok(&echokit(&["pipeline", "--config", CONFIG, "--out", p(&run)]));
    for name in [
        "report.json",
        "report.txt",
        "metrics.csv",
        "features.csv",
        "confusion.csv",
        "loss_trace.csv",
        "regression_points.csv",
    ] {
        assert!(run.join(name).exists(), "{name}");
    }

    let cfg = PipelineConfig::load(CONFIG).unwrap();
    let InputSource::Phantom { spec } = &cfg.input else { panic!("bundled config uses a phantom") };
    let spec_path = d.join("spec.json");
    std::fs::write(&spec_path, serde_json::to_string(spec).unwrap()).unwrap();
    let man = d.join("manual");
    ok(&echokit(&["phantom", "--spec", p(&spec_path), "--out", p(&man)]));
    same_bytes(&man.join("phantom.pgm"), &run.join("clean.pgm"));
    same_bytes(&man.join("mask.pgm"), &run.join("truth_mask.pgm"));

    let noisy = man.join("noisy.pgm");
    let (sigma, seed) = (cfg.speckle.sigma.to_string(), cfg.speckle.seed.to_string());
    ok(&echokit(&[
        "speckle",
        "--in",
        p(&man.join("phantom.pgm")),
        "--sigma",
        &sigma,
        "--seed",
        &seed,
        "--out",
        p(&noisy),
    ]));
    same_bytes(&noisy, &run.join("noisy.pgm"));

    let den = man.join("denoised.pgm");
    let (order, size) = (cfg.frac.order.to_string(), cfg.frac.mask_size.to_string());
    ok(&echokit(&["denoise", "--in", p(&noisy), "--order", &order, "--mask", &size, "--out", p(&den)]));
    same_bytes(&den, &run.join("denoised.pgm"));

    let knn = cfg.knn;
    let (k, per_class, kseed) = (knn.k.to_string(), knn.per_class.to_string(), knn.seed.to_string());
    let (levels, window) = (cfg.glcm.levels.to_string(), cfg.glcm.window.to_string());
    let (min_area, fg) = (knn.min_area.to_string(), knn.foreground.to_string());
    let metric = knn.metric.to_string();
    let seg_args = |out: &Path, post: bool| {
        let mut a = vec![
            "segment".to_string(),
            "--in".into(),
            p(&den).into(),
            "--train-mask".into(),
            p(&man.join("mask.pgm")).into(),
            "--k".into(),
            k.clone(),
            "--metric".into(),
            metric.clone(),
            "--per-class".into(),
            per_class.clone(),
            "--seed".into(),
            kseed.clone(),
            "--levels".into(),
            levels.clone(),
            "--window".into(),
            window.clone(),
            "--out".into(),
            p(out).into(),
        ];
        if post {
            a.extend(["--min-area".into(), min_area.clone(), "--foreground".into(), fg.clone()]);
        }
        a
    };
    let raw = man.join("knn_mask.pgm");
    ok(&Command::new(BIN).args(seg_args(&raw, false)).output().unwrap());
    same_bytes(&raw, &run.join("knn_mask.pgm"));
    let post = man.join("knn_mask_post.pgm");
    ok(&Command::new(BIN).args(seg_args(&post, true)).output().unwrap());
    same_bytes(&post, &run.join("knn_mask_post.pgm"));

    let feats = man.join("nn_features.csv");
    let labels = man.join("nn_labels.csv");
    let nn_levels = cfg.nn.features.levels.to_string();
    ok(&echokit(&[
        "features",
        "--in",
        p(&den),
        "--nn",
        "--levels",
        &nn_levels,
        "--mask",
        p(&man.join("mask.pgm")),
        "--labels-out",
        p(&labels),
        "--out",
        p(&feats),
    ]));
    let t = cfg.nn.train;
    let weights = man.join("nn_weights.bin");
    ok(&echokit(&[
        "train-nn",
        "--features",
        p(&feats),
        "--labels",
        p(&labels),
        "--epochs",
        &t.epochs.to_string(),
        "--lr",
        &t.learning_rate.to_string(),
        "--seed",
        &t.seed.to_string(),
        "--init-scale",
        &t.init_scale.to_string(),
        "--per-class",
        &cfg.nn.samples_per_class.to_string(),
        "--sample-seed",
        &cfg.nn.seed.to_string(),
        "--out",
        p(&weights),
    ]));
    same_bytes(&weights, &run.join("nn_weights.bin"));
}

#[test]
fn features_csv_has_header_and_one_row_per_pixel() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, serde_json::to_string(&echokit::imagecore::PhantomSpec::scaled(24, 1)).unwrap()).unwrap();
    ok(&echokit(&["phantom", "--spec", p(&spec), "--out", p(dir.path())]));
    let csv = dir.path().join("f.csv");
    ok(&echokit(&["features", "--in", p(&dir.path().join("phantom.pgm")), "--out", p(&csv)]));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,y,contrast,homogeneity,entropy,local_homogeneity");
    assert_eq!(lines.count(), 24 * 24);
}

#[test]
fn batch_writes_one_directory_per_image() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&echokit(&["phantom", "--out", p(&data)]));
    std::fs::rename(data.join("mask.pgm"), data.join("phantom_mask.pgm")).unwrap();
    let out = dir.path().join("out");
    let res = echokit(&["batch", "--config", CONFIG, "--dir", p(&data), "--out", p(&out)]);
    ok(&res);
    assert!(String::from_utf8_lossy(&res.stdout).starts_with("phantom"));
    assert!(out.join("phantom/knn_mask.pgm").exists());
    assert!(out.join("summary.csv").exists());
}
