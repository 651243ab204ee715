//! Gray-level co-occurrence matrices and the four texture features computed
//! from them: contrast, homogeneity (angular second moment), normalized
//! Shannon entropy and local homogeneity (inverse difference moment).
//!
//! Per-pixel features quantize an edge-replicated window around the pixel,
//! average the normalized matrices of every configured offset and evaluate
//! the features on that average.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{check_levels, quantize, GrayImage, QuantizedImage};
use crate::scalar::Scalar;

/// Translation vector `t = (dx, dy)` between the two pixels of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i32; 2]", into = "[i32; 2]")]
pub struct Offset {
    dx: i32,
    dy: i32,
}

impl Offset {
    pub fn new(dx: i32, dy: i32) -> Result<Self> {
        if dx == 0 && dy == 0 {
            return Err(Error::param("offset (0, 0) is not a translation"));
        }
        Ok(Self { dx, dy })
    }

    pub fn dx(&self) -> i32 {
        self.dx
    }

    pub fn dy(&self) -> i32 {
        self.dy
    }

    /// Offset at `distance` for orientation `degrees` ∈ {0, 45, 90, 135}, y pointing down.
    pub fn polar(distance: i32, degrees: u32) -> Result<Self> {
        match degrees {
            0 => Self::new(distance, 0),
            45 => Self::new(distance, -distance),
            90 => Self::new(0, -distance),
            135 => Self::new(-distance, -distance),
            _ => Err(Error::param(format!("unsupported orientation {degrees}"))),
        }
    }

    fn reach(&self) -> usize {
        self.dx.unsigned_abs().max(self.dy.unsigned_abs()) as usize
    }
}

impl TryFrom<[i32; 2]> for Offset {
    type Error = Error;
    fn try_from(v: [i32; 2]) -> Result<Self> {
        Self::new(v[0], v[1])
    }
}

impl From<Offset> for [i32; 2] {
    fn from(o: Offset) -> Self {
        [o.dx, o.dy]
    }
}

/// Co-occurrence counts and their normalized probabilities, both `levels × levels` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm<T> {
    levels: usize,
    counts: Vec<u64>,
    probs: Vec<T>,
}

impl<T: Scalar> Glcm<T> {
    /// Builds a matrix from probabilities alone (counts left empty).
    pub fn from_probs(levels: usize, probs: Vec<T>) -> Result<Self> {
        check_levels(levels)?;
        if probs.len() != levels * levels {
            return Err(Error::DimensionMismatch(format!("{} probabilities for {levels} levels", probs.len())));
        }
        Ok(Self { levels, counts: Vec::new(), probs })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts.get(i * self.levels + j).copied().unwrap_or(0)
    }

    pub fn prob(&self, i: usize, j: usize) -> T {
        self.probs[i * self.levels + j]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn transposed(&self) -> Self {
        let m = self.levels;
        let mut counts = self.counts.clone();
        let mut probs = self.probs.clone();
        for i in 0..m {
            for j in 0..m {
                if !counts.is_empty() {
                    counts[j * m + i] = self.counts[i * m + j];
                }
                probs[j * m + i] = self.probs[i * m + j];
            }
        }
        Self { levels: m, counts, probs }
    }
}

fn check_offset_fits(width: usize, height: usize, offset: Offset) -> Result<()> {
    if offset.dx.unsigned_abs() as usize >= width || offset.dy.unsigned_abs() as usize >= height {
        return Err(Error::param(format!(
            "offset ({}, {}) leaves no pixel pairs in a {width}x{height} image",
            offset.dx, offset.dy
        )));
    }
    Ok(())
}

/// Counts every in-bounds pair `(s, s + t)`; `symmetric` adds the transpose.
pub fn compute_glcm<T: Scalar>(qimg: &QuantizedImage, offset: Offset, symmetric: bool) -> Result<Glcm<T>> {
    let (w, h) = (qimg.width(), qimg.height());
    check_offset_fits(w, h, offset)?;
    let m = qimg.levels();
    let mut counts = vec![0u64; m * m];
    let (dx, dy) = (offset.dx as isize, offset.dy as isize);
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx.max(0)) as usize;
    let y0 = (-dy).max(0) as usize;
    let y1 = (h as isize - dy.max(0)) as usize;
    for y in y0..y1 {
        let y2 = (y as isize + dy) as usize;
        for x in x0..x1 {
            let x2 = (x as isize + dx) as usize;
            let i = qimg.get(x, y) as usize;
            let j = qimg.get(x2, y2) as usize;
            counts[i * m + j] += 1;
            if symmetric {
                counts[j * m + i] += 1;
            }
        }
    }
    let total: u64 = counts.iter().sum();
    let norm = T::from_u64(total).expect("count fits scalar");
    let probs = counts.iter().map(|&c| T::from_u64(c).expect("count fits scalar") / norm).collect();
    Ok(Glcm { levels: m, counts, probs })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    pub contrast: T,
    pub homogeneity: T,
    pub entropy: T,
    pub local_homogeneity: T,
}

impl<T: Scalar> FeatureVector<T> {
    pub const LEN: usize = 4;

    pub fn to_array(&self) -> [T; 4] {
        [self.contrast, self.homogeneity, self.entropy, self.local_homogeneity]
    }

    pub fn from_array(v: [T; 4]) -> Self {
        Self { contrast: v[0], homogeneity: v[1], entropy: v[2], local_homogeneity: v[3] }
    }
}

/// How the entropy feature is reported.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMode {
    /// `-Σ p log2 p / log2(m²)`, in `[0, 1]`.
    #[default]
    Normalized,
    /// `-Σ p ln p`, unbounded above by `ln(m²)`.
    Raw,
}

fn features_from_probs<T: Scalar>(levels: usize, probs: &[T], mode: EntropyMode) -> FeatureVector<T> {
    let mut contrast = T::zero();
    let mut homogeneity = T::zero();
    let mut entropy = T::zero();
    let mut lh = T::zero();
    for i in 0..levels {
        for j in 0..levels {
            let p = probs[i * levels + j];
            if p == T::zero() {
                continue;
            }
            let d = T::from_count(i.abs_diff(j));
            let d2 = d * d;
            contrast = contrast + d2 * p;
            homogeneity = homogeneity + p * p;
            entropy = entropy - p * p.ln();
            lh = lh + p / (T::one() + d2);
        }
    }
    let entropy = match mode {
        // log2 p / log2 m² = ln p / ln m²
        EntropyMode::Normalized => {
            let e = entropy / (T::from_count(levels * levels)).ln();
            e.max(T::zero()).min(T::one())
        }
        EntropyMode::Raw => entropy.max(T::zero()),
    };
    FeatureVector { contrast, homogeneity, entropy, local_homogeneity: lh }
}

/// Contrast, homogeneity, normalized entropy and local homogeneity of a normalized matrix.
pub fn glcm_features<T: Scalar>(glcm: &Glcm<T>) -> Result<FeatureVector<T>> {
    glcm_features_with(glcm, EntropyMode::Normalized)
}

pub fn glcm_features_with<T: Scalar>(glcm: &Glcm<T>, mode: EntropyMode) -> Result<FeatureVector<T>> {
    let sum: T = glcm.probs.iter().copied().sum();
    if !((sum - T::one()).abs() <= T::lit(1e-9)) || glcm.probs.iter().any(|p| *p < T::zero()) {
        return Err(Error::Unnormalized(sum.as_f64()));
    }
    Ok(features_from_probs(glcm.levels, &glcm.probs, mode))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlcmConfig {
    pub levels: usize,
    pub offsets: Vec<Offset>,
    pub window: usize,
    pub symmetric: bool,
    #[serde(default)]
    pub entropy: EntropyMode,
}

impl Default for GlcmConfig {
    fn default() -> Self {
        Self {
            levels: 16,
            offsets: [0, 45, 90, 135]
                .iter()
                .map(|&deg| Offset::polar(1, deg).expect("canonical orientation"))
                .collect(),
            window: 9,
            symmetric: true,
            entropy: EntropyMode::Normalized,
        }
    }
}

impl GlcmConfig {
    pub fn single(levels: usize, window: usize, offset: Offset) -> Self {
        Self { levels, offsets: vec![offset], window, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        check_levels(self.levels)?;
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::param(format!("window must be odd and >= 3, got {}", self.window)));
        }
        if self.offsets.is_empty() {
            return Err(Error::param("at least one offset is required"));
        }
        if let Some(o) = self.offsets.iter().find(|o| o.reach() >= self.window) {
            return Err(Error::param(format!("offset ({}, {}) does not fit in a {} window", o.dx, o.dy, self.window)));
        }
        Ok(())
    }
}

/// Reusable buffers for per-window matrix accumulation.
pub(crate) struct WindowScratch<T> {
    counts: Vec<u32>,
    probs: Vec<T>,
    levels: usize,
}

impl<T: Scalar> WindowScratch<T> {
    pub(crate) fn new(levels: usize) -> Self {
        Self { counts: vec![0; levels * levels], probs: vec![T::zero(); levels * levels], levels }
    }
}

/// Features of the `window`-sized neighborhood of `(x, y)` in an already quantized image.
pub(crate) fn window_features<T: Scalar>(
    qimg: &QuantizedImage,
    x: usize,
    y: usize,
    window: usize,
    offsets: &[Offset],
    symmetric: bool,
    mode: EntropyMode,
    scratch: &mut WindowScratch<T>,
) -> FeatureVector<T> {
    let m = qimg.levels();
    debug_assert_eq!(scratch.levels, m);
    let r = (window / 2) as isize;
    let (cx, cy) = (x as isize, y as isize);
    scratch.probs.iter_mut().for_each(|p| *p = T::zero());
    for off in offsets {
        scratch.counts.iter_mut().for_each(|c| *c = 0);
        let (dx, dy) = (off.dx as isize, off.dy as isize);
        // window-local coordinates u, v in [-r, r]; partner must stay in the window
        let u0 = (-r).max(-r - dx);
        let u1 = r.min(r - dx);
        let v0 = (-r).max(-r - dy);
        let v1 = r.min(r - dy);
        let mut pairs = 0u32;
        for v in v0..=v1 {
            for u in u0..=u1 {
                let i = qimg.get_clamped(cx + u, cy + v) as usize;
                let j = qimg.get_clamped(cx + u + dx, cy + v + dy) as usize;
                scratch.counts[i * m + j] += 1;
                if symmetric {
                    scratch.counts[j * m + i] += 1;
                }
                pairs += 1;
            }
        }
        let total = T::from_u32(if symmetric { 2 * pairs } else { pairs }).expect("pair count");
        for (p, &c) in scratch.probs.iter_mut().zip(&scratch.counts) {
            if c != 0 {
                *p = *p + T::from_u32(c).expect("count") / total;
            }
        }
    }
    if offsets.len() > 1 {
        let k = T::from_count(offsets.len());
        scratch.probs.iter_mut().for_each(|p| *p = *p / k);
    }
    features_from_probs(m, &scratch.probs, mode)
}

/// Texture features of the window centered on `(x, y)`.
pub fn pixel_features<T: Scalar>(img: &GrayImage<T>, x: usize, y: usize, cfg: &GlcmConfig) -> Result<FeatureVector<T>> {
    cfg.validate()?;
    if x >= img.width() || y >= img.height() {
        return Err(Error::param(format!("pixel ({x}, {y}) outside {}x{} image", img.width(), img.height())));
    }
    let q = quantize(img, cfg.levels)?;
    let mut scratch = WindowScratch::new(cfg.levels);
    Ok(window_features(&q, x, y, cfg.window, &cfg.offsets, cfg.symmetric, cfg.entropy, &mut scratch))
}

/// Per-pixel feature vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureField<T> {
    width: usize,
    height: usize,
    data: Vec<FeatureVector<T>>,
}

impl<T: Scalar> FeatureField<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[FeatureVector<T>] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> FeatureVector<T> {
        self.data[y * self.width + x]
    }

    /// One row per pixel: `x,y,contrast,homogeneity,entropy,local_homogeneity`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        wtr.write_record(["x", "y", "contrast", "homogeneity", "entropy", "local_homogeneity"]).map_err(csv_err)?;
        for (idx, f) in self.data.iter().enumerate() {
            let (x, y) = (idx % self.width, idx / self.width);
            wtr.write_record([
                x.to_string(),
                y.to_string(),
                f.contrast.to_string(),
                f.homogeneity.to_string(),
                f.entropy.to_string(),
                f.local_homogeneity.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::Csv(e.to_string()))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// [`pixel_features`] at every pixel; rows are evaluated in parallel.
pub fn feature_field<T: Scalar>(img: &GrayImage<T>, cfg: &GlcmConfig) -> Result<FeatureField<T>> {
    cfg.validate()?;
    let q = quantize(img, cfg.levels)?;
    let w = img.width();
    let mut data = vec![FeatureVector::default(); img.len()];
    data.par_chunks_mut(w).enumerate().for_each_init(
        || WindowScratch::new(cfg.levels),
        |scratch, (y, row)| {
            for (x, slot) in row.iter_mut().enumerate() {
                *slot = window_features(&q, x, y, cfg.window, &cfg.offsets, cfg.symmetric, cfg.entropy, scratch);
            }
        },
    );
    Ok(FeatureField { width: w, height: img.height(), data })
}
