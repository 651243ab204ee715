//! Dataset runs: one pipeline per image in a directory.
//!
//! An image `name.pgm` (or `.png`) is paired with the mask `name_mask.pgm`
//! (or `.png`). Each image gets its own output subdirectory `name/`, and a
//! `summary.csv` with one row per image goes to the top of the output tree.

use std::path::{Path, PathBuf};

use super::report::{csv_string, opt};
use super::{execute, write_outputs, InputSource, PipelineConfig, RunReport};
use crate::error::{Error, Result};

const EXTENSIONS: [&str; 2] = ["pgm", "png"];
const MASK_SUFFIX: &str = "_mask";

#[derive(Debug, Clone)]
pub struct BatchItem {
    pub name: String,
    pub report: RunReport,
}

fn image_stem(path: &Path) -> Option<&str> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    EXTENSIONS.contains(&ext.as_str()).then(|| path.file_stem()?.to_str()).flatten()
}

/// Image/mask pairs found in `dir`, sorted by name.
pub fn dataset_inputs(dir: impl AsRef<Path>) -> Result<Vec<(String, InputSource)>> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(dir.to_path_buf())
        } else {
            Error::io(dir, e)
        }
    })?;
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && image_stem(&path).is_some() {
            files.push(path);
        }
    }
    files.sort();
    let mask_for =
        |stem: &str| files.iter().find(|f| image_stem(f).and_then(|s| s.strip_suffix(MASK_SUFFIX)) == Some(stem));
    let mut pairs = Vec::new();
    for f in &files {
        let stem = image_stem(f).unwrap_or_default();
        if stem.ends_with(MASK_SUFFIX) {
            continue;
        }
        let mask = mask_for(stem)
            .ok_or_else(|| Error::Config(format!("{}: no `{stem}{MASK_SUFFIX}` mask next to it", f.display())))?;
        if pairs.iter().any(|(n, _)| n == stem) {
            return Err(Error::Config(format!("{}: more than one image named `{stem}`", dir.display())));
        }
        pairs.push((stem.to_string(), InputSource::File { image: f.clone(), mask: mask.clone() }));
    }
    if pairs.is_empty() {
        return Err(Error::Config(format!("{}: no image/mask pairs", dir.display())));
    }
    Ok(pairs)
}

/// Runs `cfg` on every pair in `dir`, replacing its input, and writes each
/// run under `out/<name>` plus `out/summary.csv`.
pub fn run_batch(cfg: &PipelineConfig, dir: impl AsRef<Path>, out: impl AsRef<Path>) -> Result<Vec<BatchItem>> {
    let out = out.as_ref();
    let mut items = Vec::new();
    for (name, input) in dataset_inputs(dir)? {
        let run_cfg = PipelineConfig { input, ..cfg.clone() };
        let wrap = |e| Error::Batch { image: name.clone(), source: Box::new(e) };
        let run = execute(&run_cfg).map_err(wrap)?;
        write_outputs(&run, out.join(&name)).map_err(wrap)?;
        items.push(BatchItem { name, report: run.report });
    }
    let summary = out.join("summary.csv");
    std::fs::write(&summary, batch_csv(&items)?).map_err(|e| Error::io(summary, e))?;
    Ok(items)
}

/// One row per image: quality before and after denoising, and accuracies.
pub fn batch_csv(items: &[BatchItem]) -> Result<String> {
    csv_string(|w| {
        w.write_record([
            "image",
            "noisy_mse",
            "noisy_psnr_db",
            "noisy_ssim",
            "denoised_mse",
            "denoised_psnr_db",
            "denoised_snr_db",
            "denoised_ssim",
            "denoised_residual_variance",
            "knn_accuracy",
            "nn_accuracy",
        ])?;
        for it in items {
            let (n, d) = (&it.report.quality.noisy, &it.report.quality.denoised);
            w.write_record([
                it.name.clone(),
                n.mse.to_string(),
                n.psnr_db.to_string(),
                n.ssim.to_string(),
                d.mse.to_string(),
                d.psnr_db.to_string(),
                d.snr_db.to_string(),
                d.ssim.to_string(),
                d.residual_variance.to_string(),
                it.report.knn.pixel_accuracy.to_string(),
                opt(it.report.nn.as_ref().and_then(|nn| nn.confusion.accuracy)),
            ])?;
        }
        Ok(())
    })
}
