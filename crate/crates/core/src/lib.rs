//! Speckle denoising, texture features and pixel classification for
//! echocardiographic images.
//!
//! Numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`.

pub mod error;
pub mod fracfilter;
pub mod glcm;
pub mod imagecore;
pub mod knnseg;
pub mod metrics;
pub mod nnclassifier;
pub mod noise;
pub mod pipeline;
pub mod scalar;

pub use error::{Error, Result};

pub type Image = imagecore::GrayImage<f64>;
pub type LogField = noise::LogField<f64>;
pub type Mask = fracfilter::Mask<f64>;
pub type Glcm = glcm::Glcm<f64>;
pub type FeatureVector = glcm::FeatureVector<f64>;
pub type FeatureField = glcm::FeatureField<f64>;
pub type TrainingSet = knnseg::TrainingSet<f64>;
pub type KnnModel = knnseg::KnnModel<f64>;
pub type NnFeatureVector = nnclassifier::NnFeatureVector<f64>;
pub type MlpNetwork = nnclassifier::MlpNetwork<f64>;
pub type QualityReport = metrics::QualityReport<f64>;
pub type RegressionStats = nnclassifier::RegressionStats<f64>;
