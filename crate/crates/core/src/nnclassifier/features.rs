//! The 108-wide multi-scale texture descriptor fed to the network.
//!
//! 27 configurations (window ∈ {5, 9, 13} × distance ∈ {1, 2, 3} ×
//! orientation ∈ {0°, 45°, 90°}, iterated in that nesting order) each
//! contribute `(contrast / (m-1)², homogeneity, entropy, local_homogeneity)`
//! from a single symmetric offset.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glcm::{window_features, EntropyMode, Offset, WindowScratch};
use crate::imagecore::{check_levels, quantize, GrayImage, LabelMask, QuantizedImage};
use crate::scalar::Scalar;

use super::NN_INPUTS;

pub const NN_WINDOWS: [usize; 3] = [5, 9, 13];
pub const NN_DISTANCES: [i32; 3] = [1, 2, 3];
pub const NN_ORIENTATIONS: [u32; 3] = [0, 45, 90];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NnFeatureConfig {
    pub levels: usize,
}

impl Default for NnFeatureConfig {
    fn default() -> Self {
        Self { levels: 16 }
    }
}

/// `(window, offset)` for each of the 27 configurations, in descriptor order.
pub fn nn_configurations() -> Vec<(usize, Offset)> {
    let mut out = Vec::with_capacity(27);
    for &w in &NN_WINDOWS {
        for &d in &NN_DISTANCES {
            for &deg in &NN_ORIENTATIONS {
                out.push((w, Offset::polar(d, deg).expect("fixed orientation")));
            }
        }
    }
    out
}

/// Exactly 108 values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NnFeatureVector<T>(Vec<T>);

impl<T: Scalar> NnFeatureVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() != NN_INPUTS {
            return Err(Error::DimensionMismatch(format!(
                "network input needs {NN_INPUTS} values, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return Err(Error::param(format!("network input {v} outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

fn descriptor<T: Scalar>(
    q: &QuantizedImage,
    x: usize,
    y: usize,
    configs: &[(usize, Offset)],
    scratch: &mut WindowScratch<T>,
) -> NnFeatureVector<T> {
    let m1 = T::from_count(q.levels() - 1);
    let contrast_scale = (m1 * m1).recip();
    let mut v = Vec::with_capacity(NN_INPUTS);
    for (window, off) in configs {
        let f = window_features(q, x, y, *window, std::slice::from_ref(off), true, EntropyMode::Normalized, scratch);
        v.push((f.contrast * contrast_scale).min(T::one()));
        v.push(f.homogeneity);
        v.push(f.entropy);
        v.push(f.local_homogeneity);
    }
    NnFeatureVector(v)
}

pub fn pixel_nn_features<T: Scalar>(
    img: &GrayImage<T>,
    x: usize,
    y: usize,
    cfg: &NnFeatureConfig,
) -> Result<NnFeatureVector<T>> {
    check_levels(cfg.levels)?;
    if x >= img.width() || y >= img.height() {
        return Err(Error::param(format!("pixel ({x}, {y}) outside image")));
    }
    let q = quantize(img, cfg.levels)?;
    let mut scratch = WindowScratch::new(cfg.levels);
    Ok(descriptor(&q, x, y, &nn_configurations(), &mut scratch))
}

/// Descriptors for the listed pixel indices (row-major), computed in parallel.
pub fn nn_features_at<T: Scalar>(
    img: &GrayImage<T>,
    pixels: &[usize],
    cfg: &NnFeatureConfig,
) -> Result<Vec<NnFeatureVector<T>>> {
    check_levels(cfg.levels)?;
    if let Some(p) = pixels.iter().find(|&&p| p >= img.len()) {
        return Err(Error::param(format!("pixel index {p} outside image")));
    }
    let q = quantize(img, cfg.levels)?;
    let configs = nn_configurations();
    let w = img.width();
    Ok(pixels
        .par_iter()
        .map_init(|| WindowScratch::new(cfg.levels), |scratch, &p| descriptor(&q, p % w, p / w, &configs, scratch))
        .collect())
}

/// Descriptors for every pixel, row-major.
pub fn nn_feature_field<T: Scalar>(img: &GrayImage<T>, cfg: &NnFeatureConfig) -> Result<Vec<NnFeatureVector<T>>> {
    let all: Vec<usize> = (0..img.len()).collect();
    nn_features_at(img, &all, cfg)
}

/// 1 where the 8-neighborhood holds a different class (boundary), 0 otherwise.
pub fn inter_intra_truth(mask: &LabelMask) -> LabelMask {
    let (w, h) = (mask.width(), mask.height());
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let c = mask.get(x, y);
            let boundary = (y.saturating_sub(1)..=(y + 1).min(h - 1))
                .any(|yy| (x.saturating_sub(1)..=(x + 1).min(w - 1)).any(|xx| mask.get(xx, yy) != c));
            out[y * w + x] = boundary as u8;
        }
    }
    LabelMask::new(w, h, 2, out).expect("binary labels")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glcm::{pixel_features, GlcmConfig};

    #[test]
    fn constant_image_pattern() {
        let img = GrayImage::filled(15, 15, 0.6f64).unwrap();
        let v = pixel_nn_features(&img, 3, 11, &NnFeatureConfig::default()).unwrap();
        assert_eq!(v.as_slice().len(), 108);
        for chunk in v.as_slice().chunks(4) {
            assert_eq!(chunk, &[0.0, 1.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn matches_single_configuration_features() {
        let img = GrayImage::from_fn(20, 17, |x, y| ((x * 31 + y * 17 + x * y) % 23) as f64 / 22.0).unwrap();
        let cfg = NnFeatureConfig::default();
        let v = pixel_nn_features(&img, 6, 9, &cfg).unwrap();
        let configs = nn_configurations();
        for idx in [0usize, 5, 13, 21, 26] {
            let (window, off) = configs[idx];
            let f = pixel_features(&img, 6, 9, &GlcmConfig::single(16, window, off)).unwrap();
            let got = &v.as_slice()[idx * 4..idx * 4 + 4];
            assert_eq!(got[0], (f.contrast / 225.0).min(1.0));
            assert_eq!(&got[1..], &[f.homogeneity, f.entropy, f.local_homogeneity]);
        }
        assert!(v.as_slice().iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn vector_validation() {
        assert!(NnFeatureVector::new(vec![0.5f64; 107]).is_err());
        assert!(NnFeatureVector::new(vec![1.5f64; 108]).is_err());
        assert!(NnFeatureVector::new(vec![0.5f64; 108]).is_ok());
    }

    #[test]
    fn boundary_truth() {
        let mask = LabelMask::new(4, 3, 2, vec![0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0]).unwrap();
        let t = inter_intra_truth(&mask);
        assert_eq!(t.labels(), &[0, 1, 1, 0, 0, 1, 1, 1, 0, 1, 1, 1]);
    }
}
