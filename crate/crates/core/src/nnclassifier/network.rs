//! 108 → 39 → 1 logistic network trained by full-batch gradient descent on
//! `½·mean((ŷ − y)²)`.
//!
//! Parameters are addressed by a flat index in the order `w1` (39×108,
//! row-major), `b1`, `w2`, `b2`; the weight file stores them in that order.
//!
//! Weight file layout (all little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `ECHOMLP\0` |
//! | 4     | format version, u32 = 1 |
//! | 12    | inputs, hidden, outputs as u32 (108, 39, 1) |
//! | 8·n   | parameters as f64 in flat-index order |

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::features::NnFeatureVector;
use super::{NN_HIDDEN, NN_INPUTS};

const MAGIC: &[u8; 8] = b"ECHOMLP\0";
const FORMAT_VERSION: u32 = 1;

#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork<T> {
    w1: Vec<T>,
    b1: Vec<T>,
    w2: Vec<T>,
    b2: T,
}

/// One labelled example: descriptor and 0 (intra) / 1 (inter).
pub type Example<T> = (NnFeatureVector<T>, u8);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

fn default_init_scale() -> f64 {
    0.1
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.5, epochs: 1000, seed: 1, init_scale: 0.1 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 10.0) {
            return Err(Error::param(format!("learning rate must be in (0, 10], got {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs must be >= 1"));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::param("init scale must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub network: MlpNetwork<T>,
    /// Loss at the start of each epoch.
    pub loss_trace: Vec<T>,
    /// Loss after the last update.
    pub final_loss: T,
}

impl<T: Scalar> MlpNetwork<T> {
    pub const PARAMS: usize = NN_HIDDEN * NN_INPUTS + NN_HIDDEN + NN_HIDDEN + 1;

    pub fn zeros() -> Self {
        Self {
            w1: vec![T::zero(); NN_HIDDEN * NN_INPUTS],
            b1: vec![T::zero(); NN_HIDDEN],
            w2: vec![T::zero(); NN_HIDDEN],
            b2: T::zero(),
        }
    }

    /// Every parameter uniform in `[-scale, scale]`, drawn from ChaCha8 in flat-index order.
    pub fn seeded(seed: u64, scale: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::zeros();
        for i in 0..Self::PARAMS {
            let u: f64 = rng.random_range(-1.0..=1.0);
            net.set_param(i, T::lit(u * scale));
        }
        net
    }

    pub fn param_count(&self) -> usize {
        Self::PARAMS
    }

    pub fn param(&self, i: usize) -> T {
        let n1 = self.w1.len();
        let h = NN_HIDDEN;
        if i < n1 {
            self.w1[i]
        } else if i < n1 + h {
            self.b1[i - n1]
        } else if i < n1 + 2 * h {
            self.w2[i - n1 - h]
        } else {
            assert_eq!(i, Self::PARAMS - 1, "parameter index out of range");
            self.b2
        }
    }

    pub fn set_param(&mut self, i: usize, v: T) {
        let n1 = self.w1.len();
        let h = NN_HIDDEN;
        if i < n1 {
            self.w1[i] = v;
        } else if i < n1 + h {
            self.b1[i - n1] = v;
        } else if i < n1 + 2 * h {
            self.w2[i - n1 - h] = v;
        } else {
            assert_eq!(i, Self::PARAMS - 1, "parameter index out of range");
            self.b2 = v;
        }
    }

    pub fn is_finite(&self) -> bool {
        (0..Self::PARAMS).all(|i| self.param(i).is_finite())
    }

    /// Flat index of `w1[hidden][input]`.
    pub fn w1_index(hidden: usize, input: usize) -> usize {
        hidden * NN_INPUTS + input
    }

    pub fn b1_index(hidden: usize) -> usize {
        NN_HIDDEN * NN_INPUTS + hidden
    }

    pub fn w2_index(hidden: usize) -> usize {
        NN_HIDDEN * NN_INPUTS + NN_HIDDEN + hidden
    }

    pub fn b2_index() -> usize {
        Self::PARAMS - 1
    }

    fn hidden(&self, x: &[T], out: &mut [T]) {
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.w1[j * NN_INPUTS..(j + 1) * NN_INPUTS];
            let z = row.iter().zip(x).fold(self.b1[j], |acc, (w, v)| acc + *w * *v);
            *o = sigmoid(z);
        }
    }

    fn output(&self, h: &[T]) -> T {
        sigmoid(self.w2.iter().zip(h).fold(self.b2, |acc, (w, v)| acc + *w * *v))
    }

    /// `σ(w2 · σ(w1 x + b1) + b2)`.
    pub fn forward(&self, x: &NnFeatureVector<T>) -> T {
        self.forward_slice(x.as_slice())
    }

    pub(crate) fn forward_slice(&self, x: &[T]) -> T {
        let mut h = [T::zero(); NN_HIDDEN];
        self.hidden(x, &mut h);
        self.output(&h)
    }

    pub fn loss(&self, data: &[Example<T>]) -> T {
        let n = T::from_count(data.len());
        let half = T::lit(0.5);
        data.iter()
            .map(|(x, y)| {
                let e = self.forward(x) - T::from_count(*y as usize);
                half * e * e
            })
            .sum::<T>()
            / n
    }

    /// Loss and its gradient in flat-index order.
    pub fn loss_and_gradient(&self, data: &[Example<T>]) -> (T, Vec<T>) {
        let n = T::from_count(data.len());
        let half = T::lit(0.5);
        let mut grad = vec![T::zero(); Self::PARAMS];
        let (g1, rest) = grad.split_at_mut(NN_HIDDEN * NN_INPUTS);
        let (gb1, rest) = rest.split_at_mut(NN_HIDDEN);
        let (gw2, gb2) = rest.split_at_mut(NN_HIDDEN);
        let mut loss = T::zero();
        let mut h = [T::zero(); NN_HIDDEN];
        for (x, y) in data {
            let x = x.as_slice();
            self.hidden(x, &mut h);
            let o = self.output(&h);
            let e = o - T::from_count(*y as usize);
            loss = loss + half * e * e;
            let d_out = e * o * (T::one() - o) / n;
            gb2[0] = gb2[0] + d_out;
            for j in 0..NN_HIDDEN {
                gw2[j] = gw2[j] + d_out * h[j];
                let d_h = d_out * self.w2[j] * h[j] * (T::one() - h[j]);
                gb1[j] = gb1[j] + d_h;
                let row = &mut g1[j * NN_INPUTS..(j + 1) * NN_INPUTS];
                for (g, v) in row.iter_mut().zip(x) {
                    *g = *g + d_h * *v;
                }
            }
        }
        (loss / n, grad)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        for dim in [NN_INPUTS, NN_HIDDEN, 1] {
            out.write_all(&(dim as u32).to_le_bytes())?;
        }
        for i in 0..Self::PARAMS {
            out.write_all(&self.param(i).as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParameter(format!("weight file: {msg}"));
        let mut buf = Vec::new();
        input.read_to_end(&mut buf).map_err(|e| bad(e.to_string()))?;
        let expected = 8 + 16 + 8 * Self::PARAMS;
        if buf.len() < 24 || &buf[..8] != MAGIC {
            return Err(bad("missing magic".into()));
        }
        let word = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().expect("4 bytes"));
        if word(8) != FORMAT_VERSION {
            return Err(bad(format!("unsupported version {}", word(8))));
        }
        let shape = (word(12) as usize, word(16) as usize, word(20) as usize);
        if shape != (NN_INPUTS, NN_HIDDEN, 1) {
            return Err(bad(format!("shape {shape:?}, expected ({NN_INPUTS}, {NN_HIDDEN}, 1)")));
        }
        if buf.len() != expected {
            return Err(bad(format!("{} bytes, expected {expected}", buf.len())));
        }
        let mut net = Self::zeros();
        for i in 0..Self::PARAMS {
            let o = 24 + 8 * i;
            let v = f64::from_le_bytes(buf[o..o + 8].try_into().expect("8 bytes"));
            if !v.is_finite() {
                return Err(bad(format!("parameter {i} is not finite")));
            }
            net.set_param(i, T::lit(v));
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn check_data<T: Scalar>(data: &[Example<T>]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InsufficientSamples("no training examples".into()));
    }
    if let Some((_, y)) = data.iter().find(|(_, y)| *y > 1) {
        return Err(Error::param(format!("label {y} is not 0 or 1")));
    }
    Ok(())
}

/// Full-batch gradient descent from `net` for `cfg.epochs` epochs.
pub fn train<T: Scalar>(net: MlpNetwork<T>, data: &[Example<T>], cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    check_data(data)?;
    let lr = T::lit(cfg.learning_rate);
    let mut net = net;
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, grad) = net.loss_and_gradient(data);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss: loss.as_f64() });
        }
        trace.push(loss);
        for (i, g) in grad.into_iter().enumerate() {
            net.set_param(i, net.param(i) - lr * g);
        }
    }
    let final_loss = net.loss(data);
    if !final_loss.is_finite() || !net.is_finite() {
        return Err(Error::Diverged { epoch: cfg.epochs, loss: final_loss.as_f64() });
    }
    Ok(TrainOutcome { network: net, loss_trace: trace, final_loss })
}

/// Seeded initialization followed by [`train`].
pub fn fit<T: Scalar>(data: &[Example<T>], cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    train(MlpNetwork::seeded(cfg.seed, cfg.init_scale), data, cfg)
}

pub const GRADIENT_CHECK_STEP: f64 = 1e-7;
pub const GRADIENT_CHECK_PARAMS: usize = 64;

/// `σ(a) − σ(b)` from `half = (a − b) / 2` without subtracting the two sigmoids.
fn sigmoid_difference<T: Scalar>(a: T, b: T, half: T) -> T {
    let two = T::lit(2.0);
    half.sinh() / (two * (a / two).cosh() * (b / two).cosh())
}

impl<T: Scalar> MlpNetwork<T> {
    /// `loss(θ + h·eᵢ) − loss(θ − h·eᵢ)` for parameter `i`.
    ///
    /// Each perturbation moves one pre-activation by a known amount, so the
    /// difference is carried through the layers in closed form instead of
    /// subtracting two nearly equal losses.
    pub fn loss_difference(&self, data: &[Example<T>], i: usize, h: T) -> T {
        let n1 = NN_HIDDEN * NN_INPUTS;
        let half = T::lit(0.5);
        let mut z = [T::zero(); NN_HIDDEN];
        let mut total = T::zero();
        for (x, y) in data {
            let x = x.as_slice();
            for (j, zj) in z.iter_mut().enumerate() {
                let row = &self.w1[j * NN_INPUTS..(j + 1) * NN_INPUTS];
                *zj = row.iter().zip(x).fold(self.b1[j], |acc, (w, v)| acc + *w * *v);
            }
            let act = z.map(sigmoid);
            let o = self.w2.iter().zip(&act).fold(self.b2, |acc, (w, v)| acc + *w * *v);
            // output pre-activation at +h and −h, and half their difference
            let (o_up, o_down, o_half) = if i < n1 + NN_HIDDEN {
                let (j, dz) = if i < n1 { (i / NN_INPUTS, h * x[i % NN_INPUTS]) } else { (i - n1, h) };
                let ds = sigmoid_difference(z[j] + dz, z[j] - dz, dz);
                let w = self.w2[j];
                let up = o + w * (sigmoid(z[j] + dz) - act[j]);
                let down = o + w * (sigmoid(z[j] - dz) - act[j]);
                (up, down, half * w * ds)
            } else {
                let d = if i < n1 + 2 * NN_HIDDEN { h * act[i - n1 - NN_HIDDEN] } else { h };
                (o + d, o - d, d)
            };
            let dy = sigmoid_difference(o_up, o_down, o_half);
            let target = T::from_count(*y as usize);
            total = total + half * dy * (sigmoid(o_up) + sigmoid(o_down) - target - target);
        }
        total / T::from_count(data.len())
    }
}

/// Max relative error between backprop and central differences over the given parameters,
/// with relative error `|analytic − numeric| / max(|analytic|, 1e-8)`.
pub fn gradient_check_params<T: Scalar>(net: &MlpNetwork<T>, data: &[Example<T>], params: &[usize]) -> T {
    let (_, grad) = net.loss_and_gradient(data);
    let h = T::lit(GRADIENT_CHECK_STEP);
    let floor = T::lit(1e-8);
    let mut worst = T::zero();
    for &i in params {
        let numeric = net.loss_difference(data, i, h) / (h + h);
        let err = (grad[i] - numeric).abs() / grad[i].abs().max(floor);
        worst = worst.max(err);
    }
    worst
}

/// [`gradient_check_params`] over [`GRADIENT_CHECK_PARAMS`] distinct parameters drawn with `seed`.
/// The output bias and one weight of each layer are always included.
pub fn gradient_check_seeded<T: Scalar>(net: &MlpNetwork<T>, data: &[Example<T>], seed: u64) -> T {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params: Vec<usize> =
        rand::seq::index::sample(&mut rng, MlpNetwork::<T>::PARAMS, GRADIENT_CHECK_PARAMS).into_vec();
    for extra in [MlpNetwork::<T>::b2_index(), MlpNetwork::<T>::w2_index(0), MlpNetwork::<T>::w1_index(0, 0)] {
        if !params.contains(&extra) {
            params.push(extra);
        }
    }
    gradient_check_params(net, data, &params)
}

pub fn gradient_check<T: Scalar>(net: &MlpNetwork<T>, data: &[Example<T>]) -> T {
    gradient_check_seeded(net, data, 0)
}
