//! Multiplicative speckle synthesis and the log/exp pair that turns it additive.
//!
//! The generator is ChaCha8 keyed by the 64-bit seed, and normals come from
//! `rand_distr::StandardNormal` (ziggurat). One normal is drawn per pixel in
//! row-major order, so a given seed always yields the same noise field.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::GrayImage;
use crate::scalar::Scalar;

pub const DEFAULT_LOG_EPS: f64 = 1e-6;
pub const DEFAULT_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeckleParams {
    pub sigma: f64,
    pub seed: u64,
    #[serde(default = "default_floor")]
    pub floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_FLOOR
}

impl SpeckleParams {
    pub fn new(sigma: f64, seed: u64) -> Self {
        Self { sigma, seed, floor: DEFAULT_FLOOR }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::param(format!("speckle sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.floor > 0.0 && self.floor <= 1.0) {
            return Err(Error::param(format!("speckle floor must be in (0, 1], got {}", self.floor)));
        }
        Ok(())
    }
}

/// `f = clamp(g * n, 0, 1)` with `n = max(floor, 1 + sigma * u)`, `u ~ N(0, 1)`.
pub fn apply_speckle<T: Scalar>(img: &GrayImage<T>, params: &SpeckleParams) -> Result<GrayImage<T>> {
    params.validate()?;
    if params.sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let data = img
        .data()
        .iter()
        .map(|&g| {
            let u: f64 = StandardNormal.sample(&mut rng);
            let n = (1.0 + params.sigma * u).max(params.floor);
            (g * T::lit(n)).min(T::one()).max(T::zero())
        })
        .collect();
    Ok(GrayImage::from_raw(img.width(), img.height(), data))
}

/// Real-valued image in the log domain, remembering the offset used to get there.
#[derive(Debug, Clone, PartialEq)]
pub struct LogField<T> {
    width: usize,
    height: usize,
    eps: T,
    data: Vec<T>,
}

impl<T: Scalar> LogField<T> {
    pub fn new(width: usize, height: usize, eps: T, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || width * height != data.len() {
            return Err(Error::InvalidImage(format!("field of {} values cannot be {width}x{height}", data.len())));
        }
        if !(eps >= T::zero()) {
            return Err(Error::param("log offset must be >= 0"));
        }
        Ok(Self { width, height, eps, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    /// Same geometry and offset, new values.
    pub(crate) fn with_data(&self, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self { width: self.width, height: self.height, eps: self.eps, data }
    }
}

/// `ln(img + eps)`. `eps = 0` is allowed for strictly positive images.
pub fn log_transform<T: Scalar>(img: &GrayImage<T>, eps: T) -> Result<LogField<T>> {
    if !(eps >= T::zero() && eps.is_finite()) {
        return Err(Error::param(format!("log offset must be finite and >= 0, got {eps}")));
    }
    let data: Vec<T> = img.data().iter().map(|&v| (v + eps).ln()).collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("log of a zero pixel; use a positive offset"));
    }
    LogField::new(img.width(), img.height(), eps, data)
}

/// `clamp(exp(field) - eps, 0, 1)` with the field's own offset.
pub fn exp_transform<T: Scalar>(field: &LogField<T>) -> GrayImage<T> {
    let data = field
        .data
        .iter()
        .map(|&v| {
            let x = v.exp() - field.eps;
            if x.is_nan() {
                T::zero()
            } else {
                x.max(T::zero()).min(T::one())
            }
        })
        .collect();
    GrayImage::from_raw(field.width, field.height, data)
}
