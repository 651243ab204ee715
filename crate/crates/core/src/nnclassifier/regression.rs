use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Least-squares fit `target ≈ slope · predicted + intercept` and Pearson `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionStats<T> {
    pub slope: T,
    pub intercept: T,
    pub r: T,
}

pub fn regression_stats<T: Scalar>(predicted: &[T], target: &[T]) -> Result<RegressionStats<T>> {
    if predicted.len() != target.len() {
        return Err(Error::DimensionMismatch(format!("{} predictions vs {} targets", predicted.len(), target.len())));
    }
    if predicted.len() < 2 {
        return Err(Error::RegressionUndefined("need at least two points".into()));
    }
    let n = T::from_count(predicted.len());
    let mx = predicted.iter().copied().sum::<T>() / n;
    let my = target.iter().copied().sum::<T>() / n;
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in predicted.iter().zip(target) {
        let (dx, dy) = (x - mx, y - my);
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
        sxy = sxy + dx * dy;
    }
    if syy == T::zero() {
        return Err(Error::RegressionUndefined("target is constant".into()));
    }
    if sxx == T::zero() {
        return Err(Error::RegressionUndefined("predictions are constant".into()));
    }
    let slope = sxy / sxx;
    let r = (sxy / (sxx * syy).sqrt()).max(-T::one()).min(T::one());
    Ok(RegressionStats { slope, intercept: my - slope * mx, r })
}
