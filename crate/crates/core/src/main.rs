use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use echokit::error::{Error, Result};
use echokit::fracfilter::{denoise, FracParams};
use echokit::glcm::{feature_field, GlcmConfig};
use echokit::imagecore::{generate_phantom, load_image, load_mask, save_image, save_mask, LabelMask, PhantomSpec};
use echokit::knnseg::{build_training_set, postprocess, segment_field, DistanceMetric, KnnModel};
use echokit::metrics::quality_report;
use echokit::nnclassifier::{
    fit, inter_intra_truth, nn_feature_field, Example, NnFeatureConfig, NnFeatureVector, TrainConfig, NN_INPUTS,
};
use echokit::noise::{SpeckleParams, DEFAULT_FLOOR, DEFAULT_LOG_EPS};
use echokit::pipeline::{execute, k_sweep, ksweep_csv, run_batch, write_outputs, PipelineConfig};

#[derive(Parser)]
#[command(name = "echokit", version, about = "Echocardiographic image denoising, texture features and segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic phantom image and its label mask.
    Phantom(PhantomArgs),
    /// Apply multiplicative speckle noise.
    Speckle(SpeckleArgs),
    /// Fractional-integral denoising in the log domain.
    Denoise(DenoiseArgs),
    /// Per-pixel texture features as CSV.
    Features(FeaturesArgs),
    /// KNN segmentation trained on a labelled image.
    Segment(SegmentArgs),
    /// Train the inter/intra network from feature and label CSVs.
    TrainNn(TrainNnArgs),
    /// Quality metrics of a processed image against a reference.
    Evaluate(EvaluateArgs),
    /// Run every stage from a JSON config.
    Pipeline(PipelineArgs),
    /// KNN accuracy for a list of k values.
    Ksweep(KsweepArgs),
    /// Run the pipeline on every image/mask pair in a directory.
    Batch(BatchArgs),
}

#[derive(Args)]
struct PhantomArgs {
    /// Phantom spec as JSON; built-in default when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpeckleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    seed: u64,
    /// Lower bound on the noise multiplier.
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    floor: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    order: f64,
    /// Mask side length, 3 or 5.
    #[arg(long, default_value_t = 3)]
    mask: usize,
    /// Offset added before the log transform.
    #[arg(long, default_value_t = DEFAULT_LOG_EPS)]
    eps: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 16)]
    levels: usize,
    #[arg(long, default_value_t = 9)]
    window: usize,
    /// Write the 108-value network descriptor (columns f0..f107) instead of the four texture features.
    #[arg(long)]
    nn: bool,
    /// Ground-truth mask used to derive inter/intra labels.
    #[arg(long, requires = "labels_out")]
    mask: Option<PathBuf>,
    /// Where to write the inter/intra labels, one row per pixel.
    #[arg(long, requires = "mask")]
    labels_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Label mask of the training image.
    #[arg(long)]
    train_mask: PathBuf,
    /// Training image; defaults to the input image.
    #[arg(long)]
    train_image: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// euclidean, chi_square, cosine or minkowski:<p>
    #[arg(long, default_value = "euclidean")]
    metric: DistanceMetric,
    #[arg(long, default_value_t = 200)]
    per_class: usize,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    levels: usize,
    #[arg(long, default_value_t = 9)]
    window: usize,
    /// Post-process components smaller than this; 0 skips post-processing.
    #[arg(long, default_value_t = 0)]
    min_area: usize,
    #[arg(long, default_value_t = 2)]
    foreground: u8,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainNnArgs {
    /// CSV with columns f0..f107.
    #[arg(long)]
    features: PathBuf,
    /// CSV with a `label` column (0 intra, 1 inter), rows aligned with the features.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    /// Weight initialization seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    init_scale: f64,
    /// Train on this many rows of each label instead of every row.
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long, default_value_t = 5)]
    sample_seed: u64,
    /// Optional per-epoch loss CSV.
    #[arg(long)]
    loss_out: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    proc: PathBuf,
    /// JSON output; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KsweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,7,9")]
    k: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BatchArgs {
    /// Pipeline config; its input is replaced by each image in turn.
    #[arg(long)]
    config: PathBuf,
    /// Directory holding `name.pgm` with `name_mask.pgm` (PNG also accepted).
    #[arg(long)]
    dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path.to_path_buf())
        } else {
            Error::Io { path: path.to_path_buf(), source: e }
        }
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Csv(format!("{}: {e}", path.display()))
}

fn phantom(a: PhantomArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => serde_json::from_reader(open(p)?).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => PhantomSpec::default(),
    };
    let (img, mask) = generate_phantom::<f64>(&spec)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io { path: a.out.clone(), source: e })?;
    save_image(&img, a.out.join("phantom.pgm"))?;
    save_mask(&mask, a.out.join("mask.pgm"))?;
    println!("wrote {}x{} phantom to {}", img.width(), img.height(), a.out.display());
    Ok(())
}

fn speckle(a: SpeckleArgs) -> Result<()> {
    let img = load_image::<f64>(&a.input)?;
    let params = SpeckleParams { sigma: a.sigma, seed: a.seed, floor: a.floor };
    save_image(&echokit::noise::apply_speckle(&img, &params)?, &a.out)
}

fn denoise_cmd(a: DenoiseArgs) -> Result<()> {
    let img = load_image::<f64>(&a.input)?;
    let params = FracParams { order: a.order, mask_size: a.mask, eps: a.eps };
    save_image(&denoise(&img, &params)?, &a.out)
}

fn features(a: FeaturesArgs) -> Result<()> {
    let img = load_image::<f64>(&a.input)?;
    if a.nn {
        let desc = nn_feature_field(&img, &NnFeatureConfig { levels: a.levels })?;
        let mut wtr = csv::Writer::from_writer(create(&a.out)?);
        let err = csv_err(&a.out);
        let mut header = vec!["x".to_string(), "y".to_string()];
        header.extend((0..NN_INPUTS).map(|i| format!("f{i}")));
        wtr.write_record(&header).map_err(&err)?;
        for (i, d) in desc.iter().enumerate() {
            let mut row = vec![(i % img.width()).to_string(), (i / img.width()).to_string()];
            row.extend(d.as_slice().iter().map(|v| v.to_string()));
            wtr.write_record(&row).map_err(&err)?;
        }
        wtr.flush().map_err(|e| Error::Io { path: a.out.clone(), source: e })?;
    } else {
        let cfg = GlcmConfig { levels: a.levels, window: a.window, ..GlcmConfig::default() };
        feature_field(&img, &cfg)?.save_csv(&a.out)?;
    }
    if let (Some(mask_path), Some(out)) = (&a.mask, &a.labels_out) {
        let mask = load_mask(mask_path)?;
        if mask.width() != img.width() || mask.height() != img.height() {
            return Err(Error::DimensionMismatch("mask and image sizes differ".into()));
        }
        let labels = inter_intra_truth(&mask);
        let mut wtr = csv::Writer::from_writer(create(out)?);
        let err = csv_err(out);
        wtr.write_record(["x", "y", "label"]).map_err(&err)?;
        for (i, l) in labels.labels().iter().enumerate() {
            wtr.write_record([(i % img.width()).to_string(), (i / img.width()).to_string(), l.to_string()])
                .map_err(&err)?;
        }
        wtr.flush().map_err(|e| Error::Io { path: out.clone(), source: e })?;
    }
    Ok(())
}

fn segment(a: SegmentArgs) -> Result<()> {
    let img = load_image::<f64>(&a.input)?;
    let train_img = match &a.train_image {
        Some(p) => load_image::<f64>(p)?,
        None => img.clone(),
    };
    let truth = load_mask(&a.train_mask)?;
    let cfg = GlcmConfig { levels: a.levels, window: a.window, ..GlcmConfig::default() };
    cfg.validate()?;
    if a.k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    let train_field = feature_field(&train_img, &cfg)?;
    let training = build_training_set(&train_field, &truth, a.per_class, a.seed)?;
    let model = KnnModel::new(training, a.k, a.metric)?;
    let field = if a.train_image.is_some() { feature_field(&img, &cfg)? } else { train_field };
    let mut mask = segment_field(&field, &model)?;
    if a.min_area > 0 {
        mask = postprocess(&mask, a.min_area, a.foreground)?;
    }
    save_mask(&mask, &a.out)
}

fn read_columns(path: &Path, wanted: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let err = csv_err(path);
    let headers = rdr.headers().map_err(&err)?.clone();
    let idx: Vec<usize> = wanted
        .iter()
        .map(|w| {
            headers
                .iter()
                .position(|h| h.trim() == w)
                .ok_or_else(|| Error::Csv(format!("{}: missing column `{w}`", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(&err)?;
        let row = idx
            .iter()
            .map(|&i| {
                let cell = rec.get(i).unwrap_or("").trim();
                cell.parse::<f64>()
                    .map_err(|_| Error::Csv(format!("{}: row {}: bad number `{cell}`", path.display(), line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn train_nn(a: TrainNnArgs) -> Result<()> {
    let names: Vec<String> = (0..NN_INPUTS).map(|i| format!("f{i}")).collect();
    let feats = read_columns(&a.features, &names)?;
    let labels: Vec<u8> = read_columns(&a.labels, &["label".to_string()])?
        .into_iter()
        .enumerate()
        .map(|(i, r)| match r[0] {
            v if v == 0.0 => Ok(0),
            v if v == 1.0 => Ok(1),
            v => Err(Error::Csv(format!("{}: row {}: label must be 0 or 1, got {v}", a.labels.display(), i + 1))),
        })
        .collect::<Result<_>>()?;
    if feats.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!("{} feature rows vs {} label rows", feats.len(), labels.len())));
    }
    if feats.is_empty() {
        return Err(Error::InsufficientSamples("no training rows".into()));
    }
    let rows: Vec<usize> = match a.per_class {
        Some(n) => LabelMask::new(labels.len(), 1, 2, labels.clone())?.sample_per_class(n, a.sample_seed)?,
        None => (0..labels.len()).collect(),
    };
    let data: Vec<Example<f64>> =
        rows.iter().map(|&r| Ok((NnFeatureVector::new(feats[r].clone())?, labels[r]))).collect::<Result<_>>()?;
    let cfg = TrainConfig { learning_rate: a.lr, epochs: a.epochs, seed: a.seed, init_scale: a.init_scale };
    let outcome = fit(&data, &cfg)?;
    outcome.network.save(&a.out)?;
    if let Some(path) = &a.loss_out {
        let mut wtr = csv::Writer::from_writer(create(path)?);
        let err = csv_err(path);
        wtr.write_record(["epoch", "loss"]).map_err(&err)?;
        for (i, l) in outcome.loss_trace.iter().enumerate() {
            wtr.write_record([i.to_string(), l.to_string()]).map_err(&err)?;
        }
        wtr.flush().map_err(|e| Error::Io { path: path.clone(), source: e })?;
    }
    println!("trained on {} samples, final loss {:.6}", data.len(), outcome.final_loss);
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let r = load_image::<f64>(&a.reference)?;
    let p = load_image::<f64>(&a.proc)?;
    let report = quality_report(&r, &p)?;
    let json = serde_json::to_string_pretty(&report).expect("report is serializable") + "\n";
    match &a.out {
        Some(path) => write_text(path, &json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn pipeline(a: PipelineArgs) -> Result<()> {
    let cfg = PipelineConfig::load(&a.config)?;
    let out = a
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))?;
    let run = execute(&cfg)?;
    write_outputs(&run, &out)?;
    print!("{}", run.report.to_text());
    Ok(())
}

fn ksweep(a: KsweepArgs) -> Result<()> {
    let cfg = PipelineConfig::load(&a.config)?;
    let rows = k_sweep(&cfg, &a.k)?;
    write_text(&a.out, &ksweep_csv(&rows)?)?;
    for r in &rows {
        println!("k={:<4} accuracy={:.4}", r.k, r.accuracy);
    }
    Ok(())
}

fn batch(a: BatchArgs) -> Result<()> {
    let cfg = PipelineConfig::load(&a.config)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io { path: a.out.clone(), source: e })?;
    for it in run_batch(&cfg, &a.dir, &a.out)? {
        println!(
            "{:<20} psnr {:.2} -> {:.2} dB  knn accuracy {:.4}",
            it.name, it.report.quality.noisy.psnr_db, it.report.quality.denoised.psnr_db, it.report.knn.pixel_accuracy
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Phantom(a) => phantom(a),
        Command::Speckle(a) => speckle(a),
        Command::Denoise(a) => denoise_cmd(a),
        Command::Features(a) => features(a),
        Command::Segment(a) => segment(a),
        Command::TrainNn(a) => train_nn(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Ksweep(a) => ksweep(a),
        Command::Batch(a) => batch(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
