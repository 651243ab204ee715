//! Image-quality metrics (MSE, PSNR, SNR, SSIM, LMSE, residual variance) and
//! binary classification rates (accuracy, sensitivity, specificity).
//!
//! PSNR and SNR are capped at [`DB_CAP`] and report the cap for zero error.
//! SSIM averages every 8×8 window (stride 1, uniform weights, `L = 1`,
//! `C1 = 0.01²`, `C2 = 0.03²`, population moments).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{GrayImage, LabelMask};
use crate::scalar::Scalar;

pub const DB_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 8;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport<T> {
    pub mse: T,
    pub psnr_db: T,
    pub snr_db: T,
    pub ssim: T,
    /// `None` when the reference has no Laplacian energy.
    pub lmse: Option<T>,
    pub residual_variance: T,
}

fn check_same<A: Scalar, B: Scalar>(a: &GrayImage<A>, b: &GrayImage<B>) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::DimensionMismatch(format!("{}x{} vs {}x{}", a.width(), a.height(), b.width(), b.height())));
    }
    Ok(())
}

fn capped_db<T: Scalar>(numerator: T, denominator: T) -> T {
    let cap = T::lit(DB_CAP);
    if denominator == T::zero() {
        return cap;
    }
    (T::lit(10.0) * (numerator / denominator).log10()).min(cap)
}

pub fn mse<T: Scalar>(a: &GrayImage<T>, b: &GrayImage<T>) -> Result<T> {
    check_same(a, b)?;
    let s: T = a.data().iter().zip(b.data()).map(|(x, y)| (*x - *y) * (*x - *y)).sum();
    Ok(s / T::from_count(a.len()))
}

/// `min(99, 10 log10(1 / mse))` for unit peak.
pub fn psnr_from_mse<T: Scalar>(mse: T) -> T {
    capped_db(T::one(), mse)
}

pub fn snr<T: Scalar>(reference: &GrayImage<T>, processed: &GrayImage<T>) -> Result<T> {
    check_same(reference, processed)?;
    let signal: T = reference.data().iter().map(|v| *v * *v).sum();
    let noise: T = reference.data().iter().zip(processed.data()).map(|(r, p)| (*r - *p) * (*r - *p)).sum();
    Ok(capped_db(signal, noise))
}

/// Mean SSIM over all 8×8 windows.
pub fn ssim<T: Scalar>(a: &GrayImage<T>, b: &GrayImage<T>) -> Result<T> {
    check_same(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}")));
    }
    let n = T::from_count(SSIM_WINDOW * SSIM_WINDOW);
    let (c1, c2, two) = (T::lit(SSIM_C1), T::lit(SSIM_C2), T::lit(2.0));
    let (ad, bd) = (a.data(), b.data());
    let mut total = T::zero();
    for y0 in 0..=h - SSIM_WINDOW {
        for x0 in 0..=w - SSIM_WINDOW {
            let rows = (y0..y0 + SSIM_WINDOW).map(|y| y * w + x0);
            let (mut sa, mut sb) = (T::zero(), T::zero());
            for r in rows.clone() {
                for i in r..r + SSIM_WINDOW {
                    sa = sa + ad[i];
                    sb = sb + bd[i];
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let (mut vaa, mut vbb, mut vab) = (T::zero(), T::zero(), T::zero());
            for r in rows {
                for i in r..r + SSIM_WINDOW {
                    let (da, db) = (ad[i] - ma, bd[i] - mb);
                    vaa = vaa + da * da;
                    vbb = vbb + db * db;
                    vab = vab + da * db;
                }
            }
            let (vaa, vbb, vab) = (vaa / n, vbb / n, vab / n);
            let num = (two * ma * mb + c1) * (two * vab + c2);
            let den = (ma * ma + mb * mb + c1) * (vaa + vbb + c2);
            total = total + num / den;
        }
    }
    let windows = (w - SSIM_WINDOW + 1) * (h - SSIM_WINDOW + 1);
    Ok(total / T::from_count(windows))
}

fn laplacian_at<T: Scalar>(img: &GrayImage<T>, x: usize, y: usize) -> T {
    img.get(x, y - 1) + img.get(x - 1, y) + img.get(x + 1, y) + img.get(x, y + 1) - T::lit(4.0) * img.get(x, y)
}

/// `Σ(Δref − Δproc)² / ΣΔref²` over interior pixels; `None` if the denominator is zero.
pub fn lmse<T: Scalar>(reference: &GrayImage<T>, processed: &GrayImage<T>) -> Result<Option<T>> {
    check_same(reference, processed)?;
    let (w, h) = (reference.width(), reference.height());
    let (mut num, mut den) = (T::zero(), T::zero());
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let lr = laplacian_at(reference, x, y);
            let lp = laplacian_at(processed, x, y);
            num = num + (lr - lp) * (lr - lp);
            den = den + lr * lr;
        }
    }
    Ok((den > T::zero()).then(|| num / den))
}

/// Population variance of `reference − processed`.
pub fn residual_variance<T: Scalar>(reference: &GrayImage<T>, processed: &GrayImage<T>) -> Result<T> {
    check_same(reference, processed)?;
    let n = T::from_count(reference.len());
    let resid: Vec<T> = reference.data().iter().zip(processed.data()).map(|(r, p)| *r - *p).collect();
    let mean = resid.iter().copied().sum::<T>() / n;
    Ok(resid.iter().map(|d| (*d - mean) * (*d - mean)).sum::<T>() / n)
}

pub fn quality_report<T: Scalar>(reference: &GrayImage<T>, processed: &GrayImage<T>) -> Result<QualityReport<T>> {
    let mse = mse(reference, processed)?;
    Ok(QualityReport {
        mse,
        psnr_db: psnr_from_mse(mse),
        snr_db: snr(reference, processed)?,
        ssim: ssim(reference, processed)?,
        lmse: lmse(reference, processed)?,
        residual_variance: residual_variance(reference, processed)?,
    })
}

/// Pixel-wise binary confusion counts; rates are `None` when their denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionStats {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

impl ConfusionStats {
    pub fn from_counts(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
        Self {
            tp,
            tn,
            fp,
            fn_,
            accuracy: ratio(tp + tn, tp + tn + fp + fn_),
            sensitivity: ratio(tp, tp + fn_),
            specificity: ratio(tn, tn + fp),
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Confusion counts treating `positive` as the positive class and every other label as negative.
pub fn confusion_stats(pred: &LabelMask, truth: &LabelMask, positive: u8) -> Result<ConfusionStats> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    if !truth.labels().contains(&positive) {
        return Err(Error::UnknownClass { class: positive, classes: truth.classes() });
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        match (p == positive, t == positive) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(ConfusionStats::from_counts(tp, tn, fp, fn_))
}

/// Fraction of pixels whose labels agree (all classes).
pub fn pixel_accuracy(pred: &LabelMask, truth: &LabelMask) -> Result<f64> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(Error::DimensionMismatch("mask sizes differ".into()));
    }
    let hits = pred.labels().iter().zip(truth.labels()).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.labels().len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize) -> GrayImage<f64> {
        GrayImage::from_fn(w, h, |x, y| ((x * 13 + y * 7 + x * y) % 17) as f64 / 16.0).unwrap()
    }

    #[test]
    fn identity_report() {
        let a = textured(12, 9);
        let r = quality_report(&a, &a).unwrap();
        assert_eq!(r.mse, 0.0);
        assert_eq!(r.psnr_db, 99.0);
        assert_eq!(r.snr_db, 99.0);
        assert_eq!(r.ssim, 1.0);
        assert_eq!(r.lmse, Some(0.0));
        assert_eq!(r.residual_variance, 0.0);
    }

    #[test]
    fn constant_offset() {
        let a = GrayImage::filled(16, 16, 0.5f64).unwrap();
        let b = GrayImage::filled(16, 16, 0.75).unwrap();
        let r = quality_report(&a, &b).unwrap();
        assert_eq!(r.mse, 0.0625);
        assert!((r.psnr_db - 12.041199826559248).abs() < 1e-12);
        assert_eq!(r.residual_variance, 0.0);
        // flat reference has no edges
        assert_eq!(r.lmse, None);
    }

    #[test]
    fn inverted_image_loses_structure() {
        let a = textured(10, 10);
        let inv = GrayImage::from_fn(10, 10, |x, y| 1.0 - a.get(x, y)).unwrap();
        assert!(ssim(&a, &inv).unwrap() < 1.0);
        assert!(ssim(&a, &inv).unwrap() < 0.0);
    }

    #[test]
    fn size_errors() {
        let a = textured(7, 9);
        assert!(matches!(quality_report(&a, &a), Err(Error::ImageTooSmall(_))));
        let b = textured(9, 9);
        assert!(matches!(quality_report(&a, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn psnr_cap_and_monotonicity() {
        assert_eq!(psnr_from_mse(0.0f64), 99.0);
        assert_eq!(psnr_from_mse(1e-12f64), 99.0);
        assert!(psnr_from_mse(0.01f64) > psnr_from_mse(0.02f64));
    }

    #[test]
    fn confusion_examples() {
        let truth = LabelMask::new(2, 2, 2, vec![1, 1, 0, 0]).unwrap();
        let s = confusion_stats(&truth, &truth, 1).unwrap();
        assert_eq!((s.accuracy, s.sensitivity, s.specificity), (Some(1.0), Some(1.0), Some(1.0)));

        let all_pos = LabelMask::new(2, 2, 2, vec![1; 4]).unwrap();
        let s = confusion_stats(&all_pos, &truth, 1).unwrap();
        assert_eq!((s.accuracy, s.sensitivity, s.specificity), (Some(0.5), Some(1.0), Some(0.0)));

        let pred = LabelMask::new(2, 2, 2, vec![1, 0, 1, 0]).unwrap();
        let s = confusion_stats(&pred, &truth, 1).unwrap();
        assert_eq!((s.tp, s.tn, s.fp, s.fn_), (1, 1, 1, 1));
        assert_eq!((s.accuracy, s.sensitivity, s.specificity), (Some(0.5), Some(0.5), Some(0.5)));

        let other = LabelMask::new(1, 4, 2, vec![1; 4]).unwrap();
        assert!(confusion_stats(&other, &truth, 1).is_err());
        assert!(confusion_stats(&truth, &all_pos, 0).is_err());
    }

    #[test]
    fn undefined_rates() {
        let s = ConfusionStats::from_counts(0, 4, 0, 0);
        assert_eq!(s.sensitivity, None);
        assert_eq!(s.specificity, Some(1.0));
        let json = serde_json::to_value(s).unwrap();
        assert!(json["sensitivity"].is_null());
        assert_eq!(json["fn"], 0);
    }

    #[test]
    fn json_field_names() {
        let a = textured(8, 8);
        let v = serde_json::to_value(quality_report(&a, &a).unwrap()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["lmse", "mse", "psnr_db", "residual_variance", "snr_db", "ssim"]);
    }
}
