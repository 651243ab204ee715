//! Fractional-order integral denoising.
//!
//! Grünwald–Letnikov integral weights `w_k = Γ(k+v) / (Γ(v) k!)` are laid out
//! along the eight compass directions of a 3×3 or 5×5 mask (the center cell
//! holds `w_0` once), the mask is normalized to unit sum, and the image is
//! filtered in the log domain so multiplicative speckle becomes additive.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::GrayImage;
use crate::noise::{exp_transform, log_transform, LogField, DEFAULT_LOG_EPS};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FracParams {
    pub order: f64,
    pub mask_size: usize,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    DEFAULT_LOG_EPS
}

impl Default for FracParams {
    fn default() -> Self {
        Self { order: 0.5, mask_size: 3, eps: DEFAULT_LOG_EPS }
    }
}

impl FracParams {
    pub fn new(order: f64, mask_size: usize) -> Self {
        Self { order, mask_size, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        check_order(self.order)?;
        if self.mask_size != 3 && self.mask_size != 5 {
            return Err(Error::param(format!("mask size must be 3 or 5, got {}", self.mask_size)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::param(format!("log offset must be > 0, got {}", self.eps)));
        }
        Ok(())
    }
}

fn check_order(order: f64) -> Result<()> {
    if !(order > 0.0 && order <= 1.0) {
        return Err(Error::param(format!("fractional order must be in (0, 1], got {order}")));
    }
    Ok(())
}

/// First `count` Grünwald–Letnikov integral weights for order `order`.
pub fn gl_coefficients<T: Scalar>(order: T, count: usize) -> Result<Vec<T>> {
    check_order(order.as_f64())?;
    if count == 0 {
        return Err(Error::param("coefficient count must be >= 1"));
    }
    let mut w = Vec::with_capacity(count);
    w.push(T::one());
    for k in 1..count {
        let kf = T::from_count(k);
        let prev = w[k - 1];
        w.push(prev * (kf - T::one() + order) / kf);
    }
    Ok(w)
}

/// Square, centrally symmetric filter kernel with unit sum.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask<T> {
    size: usize,
    weights: Vec<T>,
}

impl<T: Scalar> Mask<T> {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Weight at row `i`, column `j`.
    pub fn get(&self, i: usize, j: usize) -> T {
        self.weights[i * self.size + j]
    }

    pub fn sum(&self) -> T {
        self.weights.iter().copied().sum()
    }
}

const DIRECTIONS: [(isize, isize); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

pub fn build_mask<T: Scalar>(params: &FracParams) -> Result<Mask<T>> {
    params.validate()?;
    let size = params.mask_size;
    let radius = size / 2;
    let w = gl_coefficients(T::lit(params.order), radius + 1)?;
    let mut weights = vec![T::zero(); size * size];
    let c = radius as isize;
    weights[radius * size + radius] = w[0];
    for (dx, dy) in DIRECTIONS {
        for (k, &wk) in w.iter().enumerate().skip(1) {
            let i = (c + dy * k as isize) as usize;
            let j = (c + dx * k as isize) as usize;
            weights[i * size + j] = wk;
        }
    }
    let total: T = weights.iter().copied().sum();
    for v in &mut weights {
        *v = *v / total;
    }
    Ok(Mask { size, weights })
}

/// Correlates a log-domain field with `mask`, replicating edge samples.
///
/// Each output is accumulated in a fixed row-major kernel order, so row-parallel
/// evaluation gives the same bits as a serial pass.
pub fn convolve<T: Scalar>(field: &LogField<T>, mask: &Mask<T>) -> LogField<T> {
    let (w, h) = (field.width(), field.height());
    let r = (mask.size / 2) as isize;
    let src = field.data();
    let mut out = vec![T::zero(); w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = T::zero();
            for dy in -r..=r {
                let yy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                let krow = ((dy + r) as usize) * mask.size;
                for dx in -r..=r {
                    let xx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    acc = acc + mask.weights[krow + (dx + r) as usize] * src[yy * w + xx];
                }
            }
            *o = acc;
        }
    });
    field.with_data(out)
}

/// log → fractional mask → exp.
pub fn denoise<T: Scalar>(img: &GrayImage<T>, params: &FracParams) -> Result<GrayImage<T>> {
    params.validate()?;
    if img.width() < params.mask_size || img.height() < params.mask_size {
        return Err(Error::ImageTooSmall(format!(
            "{}x{} image is smaller than the {}x{} mask",
            img.width(),
            img.height(),
            params.mask_size,
            params.mask_size
        )));
    }
    let mask = build_mask::<T>(params)?;
    let logged = log_transform(img, T::lit(params.eps))?;
    Ok(exp_transform(&convolve(&logged, &mask)))
}
