//! End-to-end run: input, speckle, denoise, texture features, KNN
//! segmentation, inter/intra network, post-processing and the report.
//!
//! Every stage image is snapped to 8 bits before the next stage reads it, so
//! a run matches the same chain driven through image files.

mod batch;
mod config;
mod report;

pub use batch::{batch_csv, dataset_inputs, run_batch, BatchItem};

pub use config::{InputSource, KnnSettings, NnSettings, PipelineConfig};
pub use report::{
    ksweep_csv, ClassConfusion, ClassFeatures, KSweepRow, KnnReport, NnReport, QualitySummary, RunReport, StageTiming,
    Undefined,
};

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fracfilter::denoise;
use crate::glcm::{feature_field, FeatureField};
use crate::imagecore::{
    generate_checkerboard, generate_phantom, load_image, load_mask, save_mask, GrayImage, LabelMask,
};
use crate::knnseg::{build_training_set, postprocess, segment_field, KnnModel};
use crate::metrics::{confusion_stats, pixel_accuracy, quality_report};
use crate::nnclassifier::{
    fit, inter_intra_truth, nn_feature_field, regression_stats, threshold_scores, Example, MlpNetwork,
};
use crate::noise::apply_speckle;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything a run produces; `report` is what gets serialized.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: RunReport,
    pub clean: GrayImage<f64>,
    pub noisy: GrayImage<f64>,
    pub denoised: GrayImage<f64>,
    pub truth: LabelMask,
    pub knn_mask: LabelMask,
    pub knn_mask_post: LabelMask,
    pub features: FeatureField<f64>,
    pub nn: Option<NnArtifacts>,
}

#[derive(Debug, Clone)]
pub struct NnArtifacts {
    pub network: MlpNetwork<f64>,
    pub mask: LabelMask,
    pub truth: LabelMask,
    pub scores: Vec<f64>,
    pub loss_trace: Vec<f64>,
    pub final_loss: f64,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage { stage: name, source: Box::new(e) })
}

struct Clock {
    timings: Vec<StageTiming>,
    last: Instant,
}

impl Clock {
    fn start() -> Self {
        Self { timings: Vec::new(), last: Instant::now() }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.push(StageTiming { stage: stage.to_string(), seconds: (now - self.last).as_secs_f64() });
        self.last = now;
    }
}

/// Clean image and ground truth for the configured input.
pub fn acquire_input(input: &InputSource) -> Result<(GrayImage<f64>, LabelMask)> {
    let (img, truth) = match input {
        InputSource::Phantom { spec } => generate_phantom::<f64>(spec)?,
        InputSource::Checkerboard { width, height, tile, lo, hi } => {
            let img = generate_checkerboard(*width, *height, *tile, *lo, *hi)?;
            let labels = img.data().iter().map(|&v| (v == *hi) as u8).collect();
            let truth = LabelMask::ground_truth(*width, *height, labels)?;
            (img, truth)
        }
        InputSource::File { image, mask } => {
            let img = load_image::<f64>(image)?;
            let truth = load_mask(mask)?;
            if truth.width() != img.width() || truth.height() != img.height() {
                return Err(Error::DimensionMismatch(format!(
                    "image is {}x{}, mask is {}x{}",
                    img.width(),
                    img.height(),
                    truth.width(),
                    truth.height()
                )));
            }
            (img, truth)
        }
    };
    Ok((img.snap_to_8bit(), truth))
}

struct Prepared {
    clean: GrayImage<f64>,
    noisy: GrayImage<f64>,
    denoised: GrayImage<f64>,
    truth: LabelMask,
    features: FeatureField<f64>,
    model: KnnModel<f64>,
}

fn prepare(cfg: &PipelineConfig, clock: &mut Clock) -> Result<Prepared> {
    stage("config", cfg.validate())?;
    let (clean, truth) = stage("input", acquire_input(&cfg.input))?;
    clock.lap("input");
    let noisy = stage("speckle", apply_speckle(&clean, &cfg.speckle))?.snap_to_8bit();
    clock.lap("speckle");
    let denoised = stage("denoise", denoise(&noisy, &cfg.frac))?.snap_to_8bit();
    clock.lap("denoise");
    let features = stage("features", feature_field(&denoised, &cfg.glcm))?;
    clock.lap("features");
    let model = stage(
        "knn",
        build_training_set(&features, &truth, cfg.knn.per_class, cfg.knn.seed)
            .and_then(|ts| KnnModel::new(ts, cfg.knn.k, cfg.knn.metric)),
    )?;
    Ok(Prepared { clean, noisy, denoised, truth, features, model })
}

fn run_nn(cfg: &PipelineConfig, img: &GrayImage<f64>, truth: &LabelMask) -> Result<NnArtifacts> {
    let target = inter_intra_truth(truth);
    let descriptors = nn_feature_field(img, &cfg.nn.features)?;
    let picked = target.sample_per_class(cfg.nn.samples_per_class, cfg.nn.seed)?;
    let data: Vec<Example<f64>> = picked.iter().map(|&p| (descriptors[p].clone(), target.labels()[p])).collect();
    let outcome = fit(&data, &cfg.nn.train)?;
    let scores: Vec<f64> = descriptors.par_iter().map(|d| outcome.network.forward(d)).collect();
    let mask = threshold_scores(img.width(), img.height(), &scores)?;
    Ok(NnArtifacts {
        network: outcome.network,
        mask,
        truth: target,
        scores,
        loss_trace: outcome.loss_trace,
        final_loss: outcome.final_loss,
    })
}

fn class_confusions(pred: &LabelMask, truth: &LabelMask) -> Result<Vec<ClassConfusion>> {
    (0..truth.classes()).map(|c| Ok(ClassConfusion { class: c, stats: confusion_stats(pred, truth, c)? })).collect()
}

/// Runs every stage and keeps the intermediate images and masks.
pub fn execute(cfg: &PipelineConfig) -> Result<PipelineRun> {
    let mut clock = Clock::start();
    let p = prepare(cfg, &mut clock)?;
    let knn_mask = stage("knn", segment_field(&p.features, &p.model))?;
    clock.lap("knn");

    let nn = if cfg.nn.enabled { Some(stage("nn", run_nn(cfg, &p.denoised, &p.truth))?) } else { None };
    clock.lap("nn");

    let knn_mask_post = if cfg.knn.min_area > 0 {
        stage("postprocess", postprocess(&knn_mask, cfg.knn.min_area, cfg.knn.foreground))?
    } else {
        knn_mask.clone()
    };
    clock.lap("postprocess");

    let mut report = stage("report", assemble(cfg, &p, &knn_mask, &knn_mask_post, nn.as_ref()))?;
    clock.lap("report");
    report.timings = clock.timings;

    Ok(PipelineRun {
        report,
        clean: p.clean,
        noisy: p.noisy,
        denoised: p.denoised,
        truth: p.truth,
        knn_mask,
        knn_mask_post,
        features: p.features,
        nn,
    })
}

fn assemble(
    cfg: &PipelineConfig,
    p: &Prepared,
    knn_mask: &LabelMask,
    knn_mask_post: &LabelMask,
    nn: Option<&NnArtifacts>,
) -> Result<RunReport> {
    let mut undefined = Vec::new();
    let noisy = quality_report(&p.clean, &p.noisy)?;
    let denoised = quality_report(&p.clean, &p.denoised)?;
    for (name, q) in [("noisy", &noisy), ("denoised", &denoised)] {
        if q.lmse.is_none() {
            undefined.push(Undefined::new(format!("quality.{name}.lmse"), "reference image has no Laplacian energy"));
        }
    }

    let knn = KnnReport {
        k: p.model.k(),
        metric: p.model.metric().to_string(),
        training_samples: p.model.training().len(),
        pixel_accuracy_raw: pixel_accuracy(knn_mask, &p.truth)?,
        pixel_accuracy: pixel_accuracy(knn_mask_post, &p.truth)?,
        positive: cfg.knn.positive,
        confusion: confusion_stats(knn_mask_post, &p.truth, cfg.knn.positive)?,
        per_class: class_confusions(knn_mask_post, &p.truth)?,
    };
    undefined.extend(Undefined::rates("knn.confusion", &knn.confusion));
    for cc in &knn.per_class {
        undefined.extend(Undefined::rates(&format!("knn.per_class.{}", cc.class), &cc.stats));
    }

    let nn_report = match nn {
        Some(a) => {
            let targets: Vec<f64> = a.truth.labels().iter().map(|&l| l as f64).collect();
            let regression = match regression_stats(&a.scores, &targets) {
                Ok(r) => Some(r),
                Err(Error::RegressionUndefined(reason)) => {
                    undefined.push(Undefined::new("nn.regression", reason));
                    None
                }
                Err(e) => return Err(e),
            };
            let confusion = confusion_stats(&a.mask, &a.truth, 1)?;
            undefined.extend(Undefined::rates("nn.confusion", &confusion));
            Some(NnReport {
                training_samples: cfg.nn.samples_per_class * 2,
                epochs: cfg.nn.train.epochs,
                initial_loss: a.loss_trace[0],
                final_loss: a.final_loss,
                confusion,
                regression,
            })
        }
        None => {
            undefined.push(Undefined::new("nn", "inter/intra network disabled in config"));
            None
        }
    };

    Ok(RunReport {
        tool_version: TOOL_VERSION.to_string(),
        width: p.clean.width(),
        height: p.clean.height(),
        classes: p.truth.classes(),
        quality: QualitySummary { noisy, denoised },
        features: ClassFeatures::summarize(&p.features, &p.truth),
        knn,
        nn: nn_report,
        undefined,
        config: cfg.clone(),
        timings: Vec::new(),
    })
}

/// Runs the pipeline and returns only the report.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    execute(cfg).map(|run| run.report)
}

/// Accuracy of the configured KNN setup for each `k`, reusing one feature field.
pub fn k_sweep(cfg: &PipelineConfig, ks: &[usize]) -> Result<Vec<KSweepRow>> {
    if ks.is_empty() {
        return Err(Error::param("no k values given"));
    }
    let mut clock = Clock::start();
    let base = PipelineConfig { knn: KnnSettings { k: 1, ..cfg.knn }, ..cfg.clone() };
    let p = prepare(&base, &mut clock)?;
    ks.iter()
        .map(|&k| {
            stage(
                "knn",
                (|| {
                    let model = p.model.with_k(k)?;
                    let mask = segment_field(&p.features, &model)?;
                    let post = if cfg.knn.min_area > 0 {
                        postprocess(&mask, cfg.knn.min_area, cfg.knn.foreground)?
                    } else {
                        mask.clone()
                    };
                    let cs = confusion_stats(&post, &p.truth, cfg.knn.positive)?;
                    Ok(KSweepRow {
                        k,
                        accuracy_raw: pixel_accuracy(&mask, &p.truth)?,
                        accuracy: pixel_accuracy(&post, &p.truth)?,
                        sensitivity: cs.sensitivity,
                        specificity: cs.specificity,
                    })
                })(),
            )
        })
        .collect()
}

/// Writes the report, stage images and plot-data CSVs into `dir`.
pub fn write_outputs(run: &PipelineRun, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let put = |name: &str, bytes: &[u8]| {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(path, e))
    };
    put("report.json", run.report.to_json().as_bytes())?;
    put("report.txt", run.report.to_text().as_bytes())?;
    put("metrics.csv", run.report.metrics_csv()?.as_bytes())?;
    put("features.csv", run.report.features_csv()?.as_bytes())?;
    put("confusion.csv", run.report.confusion_csv()?.as_bytes())?;

    crate::imagecore::save_image(&run.clean, dir.join("clean.pgm"))?;
    crate::imagecore::save_image(&run.noisy, dir.join("noisy.pgm"))?;
    crate::imagecore::save_image(&run.denoised, dir.join("denoised.pgm"))?;
    save_mask(&run.truth, dir.join("truth_mask.pgm"))?;
    save_mask(&run.knn_mask, dir.join("knn_mask.pgm"))?;
    save_mask(&run.knn_mask_post, dir.join("knn_mask_post.pgm"))?;
    if let Some(nn) = &run.nn {
        save_mask(&nn.mask, dir.join("nn_mask.pgm"))?;
        save_mask(&nn.truth, dir.join("nn_truth.pgm"))?;
        nn.network.save(dir.join("nn_weights.bin"))?;
        put("loss_trace.csv", report::loss_csv(&nn.loss_trace)?.as_bytes())?;
        put("regression_points.csv", report::regression_csv(run.clean.width(), &nn.scores, &nn.truth)?.as_bytes())?;
    }
    Ok(())
}
