use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracfilter::FracParams;
use crate::glcm::GlcmConfig;
use crate::imagecore::{PhantomSpec, CLASS_CHAMBER, CLASS_WALL};
use crate::knnseg::DistanceMetric;
use crate::nnclassifier::{NnFeatureConfig, TrainConfig};
use crate::noise::SpeckleParams;

/// Where the clean image and its ground-truth labels come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSource {
    Phantom {
        spec: PhantomSpec,
    },
    /// Two classes: 0 on `lo` tiles, 1 on `hi` tiles.
    Checkerboard {
        width: usize,
        height: usize,
        tile: usize,
        lo: f64,
        hi: f64,
    },
    /// Clean image plus a label mask whose distinct gray levels are the classes.
    File {
        image: PathBuf,
        mask: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnSettings {
    pub k: usize,
    pub metric: DistanceMetric,
    pub per_class: usize,
    pub seed: u64,
    /// Foreground components below this many pixels are absorbed by their surroundings; 0 disables.
    pub min_area: usize,
    /// Class that post-processing cleans and hole-fills.
    pub foreground: u8,
    /// Class treated as positive in the binary confusion summary.
    pub positive: u8,
}

impl Default for KnnSettings {
    fn default() -> Self {
        Self {
            k: 5,
            metric: DistanceMetric::Euclidean,
            per_class: 200,
            seed: 11,
            min_area: 20,
            foreground: CLASS_CHAMBER,
            positive: CLASS_WALL,
        }
    }
}

impl KnnSettings {
    pub fn validate(&self) -> Result<()> {
        self.metric.validate()?;
        if self.k == 0 {
            return Err(Error::param("k must be >= 1"));
        }
        if self.per_class == 0 {
            return Err(Error::param("per_class must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NnSettings {
    pub enabled: bool,
    pub train: TrainConfig,
    /// Balanced sample of inter and intra pixels drawn for training.
    pub samples_per_class: usize,
    pub seed: u64,
    pub features: NnFeatureConfig,
}

impl Default for NnSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            train: TrainConfig { learning_rate: 2.0, epochs: 1000, seed: 1, init_scale: 0.1 },
            samples_per_class: 150,
            seed: 5,
            features: NnFeatureConfig::default(),
        }
    }
}

impl NnSettings {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.samples_per_class == 0 {
            return Err(Error::param("nn samples_per_class must be >= 1"));
        }
        crate::imagecore::check_levels(self.features.levels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputSource,
    pub speckle: SpeckleParams,
    pub frac: FracParams,
    pub glcm: GlcmConfig,
    pub knn: KnnSettings,
    pub nn: NnSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: InputSource::Phantom { spec: PhantomSpec::default() },
            speckle: SpeckleParams::new(0.2, 3),
            frac: FracParams::default(),
            glcm: GlcmConfig::default(),
            knn: KnnSettings::default(),
            nn: NnSettings::default(),
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        match &self.input {
            InputSource::Phantom { spec } => spec.validate()?,
            InputSource::Checkerboard { width, height, tile, lo, hi } => {
                if *width == 0 || *height == 0 || *tile == 0 {
                    return Err(Error::param("checkerboard width, height and tile must be >= 1"));
                }
                if !(*lo >= 0.0 && lo < hi && *hi <= 1.0) {
                    return Err(Error::param(format!("need 0 <= lo < hi <= 1, got lo={lo} hi={hi}")));
                }
            }
            InputSource::File { .. } => {}
        }
        self.speckle.validate()?;
        self.frac.validate()?;
        self.glcm.validate()?;
        self.knn.validate()?;
        self.nn.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    /// Reads a config file; relative input paths are taken relative to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::FileNotFound(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        let mut cfg = Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let InputSource::File { image, mask } = &mut cfg.input {
            if image.is_relative() {
                *image = base.join(&*image);
            }
            if mask.is_relative() {
                *mask = base.join(&*mask);
            }
        }
        Ok(cfg)
    }
}
