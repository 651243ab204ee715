//! Inter (boundary) versus intra (interior) pixel classification with a
//! small logistic network over multi-scale texture descriptors, plus the
//! linear-regression summary used to judge its outputs.

mod features;
mod network;
mod regression;

pub use features::{
    inter_intra_truth, nn_configurations, nn_feature_field, nn_features_at, pixel_nn_features, NnFeatureConfig,
    NnFeatureVector, NN_DISTANCES, NN_ORIENTATIONS, NN_WINDOWS,
};
pub use network::{
    fit, gradient_check, gradient_check_params, gradient_check_seeded, sigmoid, train, Example, MlpNetwork,
    TrainConfig, TrainOutcome, GRADIENT_CHECK_PARAMS, GRADIENT_CHECK_STEP,
};
pub use regression::{regression_stats, RegressionStats};

use rayon::prelude::*;

use crate::error::Result;
use crate::imagecore::{GrayImage, LabelMask};
use crate::scalar::Scalar;

pub const NN_INPUTS: usize = 108;
pub const NN_HIDDEN: usize = 39;

/// Label 1 (inter) where the network output is `>= 0.5`.
pub const INTER_THRESHOLD: f64 = 0.5;

/// Network output for every pixel, row-major.
pub fn pixel_scores<T: Scalar>(net: &MlpNetwork<T>, img: &GrayImage<T>, cfg: &NnFeatureConfig) -> Result<Vec<T>> {
    let feats = nn_feature_field(img, cfg)?;
    Ok(feats.par_iter().map(|f| net.forward(f)).collect())
}

pub fn threshold_scores<T: Scalar>(width: usize, height: usize, scores: &[T]) -> Result<LabelMask> {
    let t = T::lit(INTER_THRESHOLD);
    LabelMask::new(width, height, 2, scores.iter().map(|&s| (s >= t) as u8).collect())
}

/// 0 = intra, 1 = inter.
pub fn classify_inter_intra<T: Scalar>(
    net: &MlpNetwork<T>,
    img: &GrayImage<T>,
    cfg: &NnFeatureConfig,
) -> Result<LabelMask> {
    let scores = pixel_scores(net, img, cfg)?;
    threshold_scores(img.width(), img.height(), &scores)
}
