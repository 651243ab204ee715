use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glcm::{FeatureField, FeatureVector};
use crate::imagecore::LabelMask;
use crate::metrics::{ConfusionStats, QualityReport};
use crate::nnclassifier::RegressionStats;

use super::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualitySummary {
    /// Speckled input against the clean image.
    pub noisy: QualityReport<f64>,
    /// Filter output against the clean image.
    pub denoised: QualityReport<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassFeatures {
    pub class: u8,
    pub pixels: usize,
    pub mean: FeatureVector<f64>,
}

impl ClassFeatures {
    /// Mean texture vector over the pixels of each ground-truth class.
    pub fn summarize(field: &FeatureField<f64>, truth: &LabelMask) -> Vec<ClassFeatures> {
        let n = truth.classes() as usize;
        let mut sums = vec![[0.0f64; 4]; n];
        let mut counts = vec![0usize; n];
        for (f, &c) in field.data().iter().zip(truth.labels()) {
            let c = c as usize;
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(f.to_array()) {
                *s += v;
            }
        }
        (0..n)
            .map(|c| {
                let k = counts[c].max(1) as f64;
                ClassFeatures {
                    class: c as u8,
                    pixels: counts[c],
                    mean: FeatureVector::from_array(sums[c].map(|s| s / k)),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConfusion {
    pub class: u8,
    pub stats: ConfusionStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnReport {
    pub k: usize,
    pub metric: String,
    pub training_samples: usize,
    /// All-class agreement before post-processing.
    pub pixel_accuracy_raw: f64,
    /// All-class agreement of the final mask.
    pub pixel_accuracy: f64,
    pub positive: u8,
    pub confusion: ConfusionStats,
    /// One-vs-rest counts for every ground-truth class.
    pub per_class: Vec<ClassConfusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NnReport {
    pub training_samples: usize,
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Inter (boundary) pixels are the positive class.
    pub confusion: ConfusionStats,
    /// Network output regressed on the 0/1 target over every pixel.
    pub regression: Option<RegressionStats<f64>>,
}

/// A metric that could not be computed, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Undefined {
    pub metric: String,
    pub reason: String,
}

impl Undefined {
    pub fn new(metric: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { metric: metric.into(), reason: reason.into() }
    }

    pub(crate) fn rates(prefix: &str, cs: &ConfusionStats) -> Vec<Undefined> {
        let mut out = Vec::new();
        if cs.sensitivity.is_none() {
            out.push(Self::new(format!("{prefix}.sensitivity"), "no positive pixels in ground truth"));
        }
        if cs.specificity.is_none() {
            out.push(Self::new(format!("{prefix}.specificity"), "no negative pixels in ground truth"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub width: usize,
    pub height: usize,
    pub classes: u8,
    pub quality: QualitySummary,
    pub features: Vec<ClassFeatures>,
    pub knn: KnnReport,
    pub nn: Option<NnReport>,
    pub undefined: Vec<Undefined>,
    pub config: PipelineConfig,
    /// Wall-clock seconds per stage; the only part of a report that varies between identical runs.
    pub timings: Vec<StageTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepRow {
    pub k: usize,
    pub accuracy_raw: f64,
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

pub(super) fn csv_string(rows: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    rows(&mut wtr).map_err(|e| Error::Csv(e.to_string()))?;
    let bytes = wtr.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub(super) fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_fixed(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "n/a".into())
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is always serializable");
        s.push('\n');
        s
    }

    /// JSON with the timings block removed; identical for identical configs.
    pub fn deterministic_json(&self) -> String {
        Self { timings: Vec::new(), ..self.clone() }.to_json()
    }

    pub fn metrics_csv(&self) -> Result<String> {
        csv_string(|w| {
            w.write_record(["image", "mse", "psnr_db", "snr_db", "ssim", "lmse", "residual_variance"])?;
            for (name, q) in [("noisy", &self.quality.noisy), ("denoised", &self.quality.denoised)] {
                w.write_record([
                    name.to_string(),
                    q.mse.to_string(),
                    q.psnr_db.to_string(),
                    q.snr_db.to_string(),
                    q.ssim.to_string(),
                    opt(q.lmse),
                    q.residual_variance.to_string(),
                ])?;
            }
            Ok(())
        })
    }

    pub fn features_csv(&self) -> Result<String> {
        csv_string(|w| {
            w.write_record(["class", "pixels", "contrast", "homogeneity", "entropy", "local_homogeneity"])?;
            for f in &self.features {
                let mut row = vec![f.class.to_string(), f.pixels.to_string()];
                row.extend(f.mean.to_array().iter().map(|v| v.to_string()));
                w.write_record(row)?;
            }
            Ok(())
        })
    }

    pub fn confusion_csv(&self) -> Result<String> {
        csv_string(|w| {
            w.write_record(["classifier", "class", "tp", "tn", "fp", "fn", "accuracy", "sensitivity", "specificity"])?;
            let mut rows: Vec<(&str, u8, &ConfusionStats)> =
                self.knn.per_class.iter().map(|c| ("knn", c.class, &c.stats)).collect();
            if let Some(nn) = &self.nn {
                rows.push(("nn", 1, &nn.confusion));
            }
            for (name, class, s) in rows {
                w.write_record([
                    name.to_string(),
                    class.to_string(),
                    s.tp.to_string(),
                    s.tn.to_string(),
                    s.fp.to_string(),
                    s.fn_.to_string(),
                    opt(s.accuracy),
                    opt(s.sensitivity),
                    opt(s.specificity),
                ])?;
            }
            Ok(())
        })
    }

    /// Aligned plain-text tables.
    pub fn to_text(&self) -> String {
        let mut t = String::new();
        let _ = writeln!(t, "echokit {} pipeline report", self.tool_version);
        let _ = writeln!(t, "image {}x{}, {} classes", self.width, self.height, self.classes);
        let _ = writeln!(t);
        let _ = writeln!(t, "Image quality against the clean image");
        let _ = writeln!(
            t,
            "{:<10} {:>12} {:>10} {:>10} {:>8} {:>10} {:>12}",
            "image", "MSE", "PSNR dB", "SNR dB", "SSIM", "LMSE", "variance"
        );
        for (name, q) in [("noisy", &self.quality.noisy), ("denoised", &self.quality.denoised)] {
            let _ = writeln!(
                t,
                "{:<10} {:>12.4e} {:>10.3} {:>10.3} {:>8.4} {:>10} {:>12.4e}",
                name,
                q.mse,
                q.psnr_db,
                q.snr_db,
                q.ssim,
                opt_fixed(q.lmse, 4),
                q.residual_variance
            );
        }
        let _ = writeln!(t);
        let _ = writeln!(t, "Mean texture features per class (denoised image)");
        let _ = writeln!(
            t,
            "{:<6} {:>8} {:>10} {:>12} {:>10} {:>12}",
            "class", "pixels", "contrast", "homogeneity", "entropy", "local hom."
        );
        for f in &self.features {
            let _ = writeln!(
                t,
                "{:<6} {:>8} {:>10.4} {:>12.4} {:>10.4} {:>12.4}",
                f.class, f.pixels, f.mean.contrast, f.mean.homogeneity, f.mean.entropy, f.mean.local_homogeneity
            );
        }
        let _ = writeln!(t);
        let _ = writeln!(
            t,
            "KNN segmentation: k={} metric={} training={} accuracy={:.4} (before post-processing {:.4})",
            self.knn.k,
            self.knn.metric,
            self.knn.training_samples,
            self.knn.pixel_accuracy,
            self.knn.pixel_accuracy_raw
        );
        let _ = writeln!(
            t,
            "{:<10} {:<6} {:>10} {:>12} {:>12}",
            "classifier", "class", "accuracy", "sensitivity", "specificity"
        );
        let mut rows: Vec<(&str, u8, &ConfusionStats)> =
            self.knn.per_class.iter().map(|c| ("knn", c.class, &c.stats)).collect();
        if let Some(nn) = &self.nn {
            rows.push(("nn inter", 1, &nn.confusion));
        }
        for (name, class, s) in rows {
            let _ = writeln!(
                t,
                "{:<10} {:<6} {:>10} {:>12} {:>12}",
                name,
                class,
                opt_fixed(s.accuracy, 4),
                opt_fixed(s.sensitivity, 4),
                opt_fixed(s.specificity, 4)
            );
        }
        if let Some(nn) = &self.nn {
            let _ = writeln!(t);
            let _ = writeln!(
                t,
                "Inter/intra network: {} samples, {} epochs, loss {:.5} -> {:.5}",
                nn.training_samples, nn.epochs, nn.initial_loss, nn.final_loss
            );
            match &nn.regression {
                Some(r) => {
                    let _ = writeln!(t, "regression: slope {:.4} intercept {:.4} r {:.4}", r.slope, r.intercept, r.r);
                }
                None => {
                    let _ = writeln!(t, "regression: undefined");
                }
            }
        }
        if !self.undefined.is_empty() {
            let _ = writeln!(t);
            let _ = writeln!(t, "Undefined metrics");
            for u in &self.undefined {
                let _ = writeln!(t, "  {}: {}", u.metric, u.reason);
            }
        }
        let _ = writeln!(t);
        let _ = writeln!(t, "Timings (s)");
        for s in &self.timings {
            let _ = writeln!(t, "  {:<12} {:>9.3}", s.stage, s.seconds);
        }
        t
    }
}

pub(crate) fn loss_csv(trace: &[f64]) -> Result<String> {
    csv_string(|w| {
        w.write_record(["epoch", "loss"])?;
        for (i, l) in trace.iter().enumerate() {
            w.write_record([i.to_string(), l.to_string()])?;
        }
        Ok(())
    })
}

pub(crate) fn regression_csv(width: usize, scores: &[f64], truth: &LabelMask) -> Result<String> {
    csv_string(|w| {
        w.write_record(["x", "y", "predicted", "target"])?;
        for (i, (s, t)) in scores.iter().zip(truth.labels()).enumerate() {
            w.write_record([(i % width).to_string(), (i / width).to_string(), s.to_string(), t.to_string()])?;
        }
        Ok(())
    })
}

/// CSV rows of a k sweep.
pub fn ksweep_csv(rows: &[KSweepRow]) -> Result<String> {
    csv_string(|w| {
        w.write_record(["k", "accuracy", "accuracy_raw", "sensitivity", "specificity"])?;
        for r in rows {
            w.write_record([
                r.k.to_string(),
                r.accuracy.to_string(),
                r.accuracy_raw.to_string(),
                opt(r.sensitivity),
                opt(r.specificity),
            ])?;
        }
        Ok(())
    })
}
