//! Synthetic inputs: checkerboards and a three-class echo-like phantom.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagecore::{GrayImage, LabelMask};
use crate::scalar::Scalar;

/// `hi` where `(x / tile + y / tile)` is even, `lo` elsewhere.
pub fn generate_checkerboard<T: Scalar>(
    width: usize,
    height: usize,
    tile: usize,
    lo: T,
    hi: T,
) -> Result<GrayImage<T>> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!("zero dimension {width}x{height}")));
    }
    if tile == 0 {
        return Err(Error::param("checkerboard tile must be >= 1"));
    }
    if !(lo >= T::zero() && lo < hi && hi <= T::one()) {
        return Err(Error::param(format!("need 0 <= lo < hi <= 1, got lo={lo} hi={hi}")));
    }
    GrayImage::from_fn(width, height, |x, y| if (x / tile + y / tile) % 2 == 0 { hi } else { lo })
}

pub const CLASS_BACKGROUND: u8 = 0;
pub const CLASS_WALL: u8 = 1;
pub const CLASS_CHAMBER: u8 = 2;

/// Elliptical bright wall ring around a dark chamber on a mid-gray background.
///
/// `axes` are the outer semi-axes of the wall; the chamber is the ellipse with
/// both semi-axes shrunk by `wall_thickness`. Each class gets its mean
/// intensity plus seeded Gaussian grain with the class's `texture` standard
/// deviation, ordered `[background, wall, chamber]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub width: usize,
    pub height: usize,
    pub center: [f64; 2],
    pub axes: [f64; 2],
    pub wall_thickness: f64,
    pub background: f64,
    pub wall: f64,
    pub chamber: f64,
    #[serde(default = "PhantomSpec::default_texture")]
    pub texture: [f64; 3],
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            width: 128,
            height: 128,
            center: [63.5, 63.5],
            axes: [44.0, 36.0],
            wall_thickness: 12.0,
            background: 0.5,
            wall: 0.8,
            chamber: 0.2,
            texture: Self::default_texture(),
            seed: 7,
        }
    }
}

impl PhantomSpec {
    fn default_texture() -> [f64; 3] {
        [0.04, 0.12, 0.0]
    }

    /// Square phantom of side `size` with geometry scaled from the 128-pixel default.
    pub fn scaled(size: usize, seed: u64) -> Self {
        let s = size as f64 / 128.0;
        let c = (size as f64 - 1.0) / 2.0;
        Self {
            width: size,
            height: size,
            center: [c, c],
            axes: [44.0 * s, 36.0 * s],
            wall_thickness: 12.0 * s,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::param("phantom dimensions must be positive"));
        }
        let [cx, cy] = self.center;
        let [ax, ay] = self.axes;
        if !(ax > 0.0 && ay > 0.0) {
            return Err(Error::param("phantom axes must be positive"));
        }
        if !(self.wall_thickness > 0.0 && self.wall_thickness < ax.min(ay)) {
            return Err(Error::param(format!("wall thickness {} must be in (0, {})", self.wall_thickness, ax.min(ay))));
        }
        if cx - ax < 0.0 || cy - ay < 0.0 || cx + ax > (self.width - 1) as f64 || cy + ay > (self.height - 1) as f64 {
            return Err(Error::param("phantom ring does not fit inside the image"));
        }
        let levels = [self.background, self.wall, self.chamber];
        if levels.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::param("class intensities must be in [0, 1]"));
        }
        for i in 0..3 {
            for j in i + 1..3 {
                if (levels[i] - levels[j]).abs() < 0.1 {
                    return Err(Error::param("class intensities must differ pairwise by >= 0.1"));
                }
            }
        }
        if self.texture.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::param("texture amplitudes must be finite and >= 0"));
        }
        Ok(())
    }

    /// Ground-truth class of pixel `(x, y)` (evaluated at the pixel center).
    pub fn class_at(&self, x: usize, y: usize) -> u8 {
        let dx = x as f64 - self.center[0];
        let dy = y as f64 - self.center[1];
        let [ax, ay] = self.axes;
        let outer = (dx / ax).powi(2) + (dy / ay).powi(2);
        let (ix, iy) = (ax - self.wall_thickness, ay - self.wall_thickness);
        let inner = (dx / ix).powi(2) + (dy / iy).powi(2);
        if inner <= 1.0 {
            CLASS_CHAMBER
        } else if outer <= 1.0 {
            CLASS_WALL
        } else {
            CLASS_BACKGROUND
        }
    }
}

/// Renders the phantom and its `{0: background, 1: wall, 2: chamber}` mask.
pub fn generate_phantom<T: Scalar>(spec: &PhantomSpec) -> Result<(GrayImage<T>, LabelMask)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means = [spec.background, spec.wall, spec.chamber];
    let n = spec.width * spec.height;
    let mut data = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for y in 0..spec.height {
        for x in 0..spec.width {
            let class = spec.class_at(x, y);
            // one draw per pixel keeps the stream independent of geometry
            let u: f64 = StandardNormal.sample(&mut rng);
            let v = (means[class as usize] + spec.texture[class as usize] * u).clamp(0.0, 1.0);
            data.push(T::lit(v));
            labels.push(class);
        }
    }
    let mask = LabelMask::new(spec.width, spec.height, 3, labels)?;
    Ok((GrayImage::new(spec.width, spec.height, data)?, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkerboard_definitions() {
        let cb = generate_checkerboard(2, 2, 1, 0.0, 1.0).unwrap();
        assert_eq!(cb.data(), &[1.0, 0.0, 0.0, 1.0]);

        let cb = generate_checkerboard(4, 4, 2, 0.0, 1.0).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                let block = (x / 2 + y / 2) % 2 == 0;
                assert_eq!(cb.get(x, y), if block { 1.0 } else { 0.0 });
            }
        }

        // tile == width: each row block is a single uniform band
        let cb = generate_checkerboard(4, 8, 4, 0.2, 0.7).unwrap();
        for y in 0..8 {
            let expect = if y < 4 { 0.7 } else { 0.2 };
            assert!((0..4).all(|x| cb.get(x, y) == expect));
        }

        assert!(generate_checkerboard(0, 2, 1, 0.0, 1.0).is_err());
        assert!(generate_checkerboard(2, 2, 0, 0.0, 1.0).is_err());
        assert!(generate_checkerboard(2, 2, 1, 0.6, 0.4).is_err());
    }

    #[test]
    fn phantom_classes_and_determinism() {
        let spec = PhantomSpec::default();
        let (img, mask) = generate_phantom::<f64>(&spec).unwrap();
        assert!(mask.class_counts().iter().all(|&c| c > 0));
        assert_eq!(mask.get(64, 64), CLASS_CHAMBER);
        assert_eq!(mask.get(0, 0), CLASS_BACKGROUND);
        let (img2, mask2) = generate_phantom::<f64>(&spec).unwrap();
        assert_eq!(img.data(), img2.data());
        assert_eq!(mask, mask2);
    }

    #[test]
    fn phantom_rejects_bad_specs() {
        let mut s = PhantomSpec::default();
        s.axes = [80.0, 20.0];
        assert!(generate_phantom::<f64>(&s).is_err());
        let mut s = PhantomSpec::default();
        s.chamber = 0.45;
        assert!(generate_phantom::<f64>(&s).is_err());
        let mut s = PhantomSpec::default();
        s.wall_thickness = 40.0;
        assert!(generate_phantom::<f64>(&s).is_err());
    }
}
