//! Image containers, quantization, file I/O and synthetic test images.
//!
//! Intensities live in `[0, 1]` everywhere in the crate; 8-bit files are
//! mapped with `value / 255` on load and `round(value * 255)` on save.

mod io;
mod synth;

pub use io::{load_image, load_mask, save_image, save_mask};
pub use synth::{generate_checkerboard, generate_phantom, PhantomSpec, CLASS_BACKGROUND, CLASS_CHAMBER, CLASS_WALL};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major grayscale image with every intensity finite and in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!("dimensions must be positive, got {width}x{height}")));
    }
    if width.checked_mul(height) != Some(len) {
        return Err(Error::InvalidImage(format!("data length {len} does not match {width}x{height}")));
    }
    Ok(())
}

impl<T: Scalar> GrayImage<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < T::zero() || *v > T::one()) {
            return Err(Error::InvalidImage(format!("intensity {} at index {i} outside [0, 1]", data[i])));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width.saturating_mul(height)])
    }

    /// Builds an image from `f(x, y)`; values are validated like [`GrayImage::new`].
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(width.saturating_mul(height));
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Caller guarantees the invariants (used by kernels that clamp their output).
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(width * height, data.len());
        debug_assert!(data.iter().all(|v| *v >= T::zero() && *v <= T::one()));
        Self { width, height, data }
    }

    /// Decodes 8-bit samples with `v / 255`.
    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        check_dims(width, height, bytes.len())?;
        let scale = T::lit(255.0);
        Ok(Self::from_raw(width, height, bytes.iter().map(|&b| T::from_count(b as usize) / scale).collect()))
    }

    /// Encodes to 8-bit samples with `round(v * 255)`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8).collect()
    }

    /// The image as it will read back from an 8-bit file.
    pub fn snap_to_8bit(&self) -> Self {
        Self::from_u8(self.width, self.height, &self.to_u8()).expect("dimensions already valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    /// Pixel lookup with edge replication for out-of-range coordinates.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> T {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    pub fn same_dims<U>(&self, other: &GrayImage<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Element-wise product; stays inside `[0, 1]`.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        if !self.same_dims(other) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a * *b).collect();
        Ok(Self::from_raw(self.width, self.height, data))
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.data.chunks(self.width) {
            data.extend(row.iter().rev());
        }
        Self::from_raw(self.width, self.height, data)
    }

    /// Sum of absolute differences between 4-neighbours (anisotropic total variation).
    pub fn total_variation(&self) -> T {
        let mut tv = T::zero();
        for y in 0..self.height {
            for x in 0..self.width {
                let v = self.get(x, y);
                if x + 1 < self.width {
                    tv = tv + (self.get(x + 1, y) - v).abs();
                }
                if y + 1 < self.height {
                    tv = tv + (self.get(x, y + 1) - v).abs();
                }
            }
        }
        tv
    }

    pub fn mean(&self) -> T {
        self.data.iter().copied().sum::<T>() / T::from_count(self.data.len())
    }

    pub fn cast<U: Scalar>(&self) -> GrayImage<U> {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Image of discrete gray levels `0..levels`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedImage {
    width: usize,
    height: usize,
    levels: usize,
    data: Vec<u8>,
}

impl QuantizedImage {
    pub fn new(width: usize, height: usize, levels: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        check_levels(levels)?;
        if let Some(v) = data.iter().find(|&&v| v as usize >= levels) {
            return Err(Error::InvalidImage(format!("gray level {v} >= {levels}")));
        }
        Ok(Self { width, height, levels, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }
}

pub(crate) fn check_levels(levels: usize) -> Result<()> {
    if !(2..=256).contains(&levels) {
        return Err(Error::param(format!("levels must be in 2..=256, got {levels}")));
    }
    Ok(())
}

/// Bin index of one intensity: `min(floor(v * levels), levels - 1)`.
#[inline]
pub fn quantize_value<T: Scalar>(v: T, levels: usize) -> u8 {
    let bin = (v * T::from_count(levels)).floor().to_usize().unwrap_or(0);
    bin.min(levels - 1) as u8
}

/// Uniform binning of `[0, 1]` into `levels` equal bins.
pub fn quantize<T: Scalar>(img: &GrayImage<T>, levels: usize) -> Result<QuantizedImage> {
    check_levels(levels)?;
    Ok(QuantizedImage {
        width: img.width,
        height: img.height,
        levels,
        data: img.data.iter().map(|&v| quantize_value(v, levels)).collect(),
    })
}

/// Per-pixel class ids in `0..classes`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMask {
    width: usize,
    height: usize,
    classes: u8,
    labels: Vec<u8>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, classes: u8, labels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, labels.len())?;
        if classes == 0 {
            return Err(Error::InvalidImage("mask needs at least one class".into()));
        }
        if let Some(v) = labels.iter().find(|&&v| v >= classes) {
            return Err(Error::UnknownClass { class: *v, classes });
        }
        Ok(Self { width, height, classes, labels })
    }

    /// Ground-truth mask: class count inferred, every id in `0..=max` must occur.
    pub fn ground_truth(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        let max = labels.iter().copied().max().unwrap_or(0);
        let mask = Self::new(width, height, max + 1, labels)?;
        let counts = mask.class_counts();
        if let Some(c) = counts.iter().position(|&n| n == 0) {
            return Err(Error::InvalidImage(format!("class ids must be contiguous from 0; class {c} is absent")));
        }
        Ok(mask)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> u8 {
        self.classes
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.classes as usize];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Seeded draw of `per_class` pixel indices from every class without
    /// replacement, grouped by ascending class and sorted within a class.
    pub fn sample_per_class(&self, per_class: usize, seed: u64) -> Result<Vec<usize>> {
        if per_class == 0 {
            return Err(Error::param("per_class must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(per_class * self.classes as usize);
        for class in 0..self.classes {
            let pixels: Vec<usize> =
                self.labels.iter().enumerate().filter_map(|(i, &l)| (l == class).then_some(i)).collect();
            if pixels.len() < per_class {
                return Err(Error::InsufficientSamples(format!(
                    "class {class} has {} pixels, {per_class} requested",
                    pixels.len()
                )));
            }
            let mut picked: Vec<usize> =
                index::sample(&mut rng, pixels.len(), per_class).into_iter().map(|i| pixels[i]).collect();
            picked.sort_unstable();
            out.extend(picked);
        }
        Ok(out)
    }

    /// Gray level used when the mask is written as an image.
    pub fn display_level(&self, class: u8) -> u8 {
        if self.classes <= 1 {
            return 0;
        }
        ((class as f64) * 255.0 / (self.classes - 1) as f64).round() as u8
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_examples() {
        let img = GrayImage::new(3, 1, vec![0.0, 1.0, 0.5]).unwrap();
        let q = quantize(&img, 16).unwrap();
        assert_eq!(q.data(), &[0, 15, 8]);
        assert!(quantize(&img, 1).is_err());
        assert!(quantize(&img, 257).is_err());
        assert_eq!(quantize(&img, 256).unwrap().data(), &[0, 255, 128]);
    }

    #[test]
    fn rejects_out_of_range_and_bad_dims() {
        assert!(GrayImage::new(1, 1, vec![1.5f64]).is_err());
        assert!(GrayImage::new(1, 1, vec![f64::NAN]).is_err());
        assert!(GrayImage::new(2, 1, vec![0.5f64]).is_err());
        assert!(GrayImage::<f64>::new(0, 0, vec![]).is_err());
    }

    #[test]
    fn edge_replication() {
        let img = GrayImage::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(img.get_clamped(-5, -1), 0.1);
        assert_eq!(img.get_clamped(9, 0), 0.2);
        assert_eq!(img.get_clamped(1, 7), 0.4);
    }

    #[test]
    fn ground_truth_requires_contiguous_classes() {
        assert!(LabelMask::ground_truth(2, 1, vec![0, 2]).is_err());
        let m = LabelMask::ground_truth(3, 1, vec![0, 2, 1]).unwrap();
        assert_eq!(m.classes(), 3);
        assert_eq!(m.display_level(1), 128);
        assert!(LabelMask::new(1, 1, 2, vec![2]).is_err());
    }

    #[test]
    fn f32_images_work() {
        let img = GrayImage::<f32>::filled(4, 4, 0.25).unwrap();
        assert_eq!(quantize(&img, 4).unwrap().data()[0], 1);
        assert!((img.mean() - 0.25).abs() < 1e-7);
    }
}
