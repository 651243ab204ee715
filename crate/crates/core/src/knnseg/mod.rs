//! K-nearest-neighbor pixel classification over texture features.
//!
//! Features are min-max scaled to `[0, 1]` with bounds taken from the
//! training set; queries are scaled with the same bounds and clamped. Search
//! is an exhaustive scan. Distance ties go to the lower sample index, vote
//! ties to the class with the smaller mean neighbor distance, then to the
//! smaller class id.

mod postprocess;

pub use postprocess::postprocess;

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glcm::{feature_field, FeatureField, FeatureVector, GlcmConfig};
use crate::imagecore::{GrayImage, LabelMask};
use crate::scalar::Scalar;

const CHI_SQUARE_DELTA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    Euclidean,
    ChiSquare,
    Cosine,
    Minkowski(f64),
}

impl Default for DistanceMetric {
    fn default() -> Self {
        DistanceMetric::Euclidean
    }
}

impl DistanceMetric {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DistanceMetric::Minkowski(p) if !(p >= 1.0 && p.is_finite()) => {
                Err(Error::param(format!("minkowski exponent must be >= 1, got {p}")))
            }
            _ => Ok(()),
        }
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    /// `euclidean`, `chi_square` (or `chi-square`), `cosine`, `minkowski:<p>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let metric = match s.as_str() {
            "euclidean" => DistanceMetric::Euclidean,
            "chi_square" | "chi-square" | "chisquare" => DistanceMetric::ChiSquare,
            "cosine" => DistanceMetric::Cosine,
            _ => match s.strip_prefix("minkowski") {
                Some("") => DistanceMetric::Minkowski(2.0),
                Some(rest) => {
                    let p = rest
                        .trim_start_matches([':', '='])
                        .parse::<f64>()
                        .map_err(|_| Error::param(format!("bad minkowski exponent in `{s}`")))?;
                    DistanceMetric::Minkowski(p)
                }
                None => return Err(Error::param(format!("unknown metric `{s}`"))),
            },
        };
        metric.validate()?;
        Ok(metric)
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceMetric::Euclidean => write!(f, "euclidean"),
            DistanceMetric::ChiSquare => write!(f, "chi_square"),
            DistanceMetric::Cosine => write!(f, "cosine"),
            DistanceMetric::Minkowski(p) => write!(f, "minkowski:{p}"),
        }
    }
}

/// Distance between two equally sized feature vectors.
pub fn distance<T: Scalar>(a: &[T], b: &[T], metric: DistanceMetric) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} features", a.len(), b.len())));
    }
    metric.validate()?;
    Ok(distance_unchecked(a, b, metric))
}

#[inline]
fn distance_unchecked<T: Scalar>(a: &[T], b: &[T], metric: DistanceMetric) -> T {
    let pairs = a.iter().zip(b);
    match metric {
        DistanceMetric::Euclidean => pairs.map(|(x, y)| (*x - *y) * (*x - *y)).sum::<T>().sqrt(),
        DistanceMetric::Minkowski(p) => {
            let p = T::lit(p);
            pairs.map(|(x, y)| (*x - *y).abs().powf(p)).sum::<T>().powf(p.recip())
        }
        DistanceMetric::ChiSquare => {
            let delta = T::lit(CHI_SQUARE_DELTA);
            pairs.map(|(x, y)| (*x - *y) * (*x - *y) / (*x + *y + delta)).sum()
        }
        DistanceMetric::Cosine => {
            if a == b {
                return T::zero();
            }
            let (mut dot, mut na, mut nb) = (T::zero(), T::zero(), T::zero());
            for (x, y) in pairs {
                dot = dot + *x * *y;
                na = na + *x * *x;
                nb = nb + *y * *y;
            }
            if na == T::zero() || nb == T::zero() {
                return T::one();
            }
            (T::one() - dot / (na.sqrt() * nb.sqrt())).max(T::zero())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub features: Vec<T>,
    pub class: u8,
}

/// Labelled feature vectors plus per-dimension scaling bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T> {
    samples: Vec<Sample<T>>,
    feature_min: Vec<T>,
    feature_max: Vec<T>,
}

impl<T: Scalar> TrainingSet<T> {
    /// Bounds are the per-dimension min/max over `samples`.
    pub fn new(samples: Vec<Sample<T>>) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::InsufficientSamples("training set is empty".into()))?;
        let dim = first.features.len();
        if dim == 0 {
            return Err(Error::InsufficientSamples("feature vectors are empty".into()));
        }
        let mut lo = first.features.clone();
        let mut hi = first.features.clone();
        for s in &samples {
            if s.features.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "sample has {} features, expected {dim}",
                    s.features.len()
                )));
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("training features must be finite"));
            }
            for (d, &v) in s.features.iter().enumerate() {
                lo[d] = lo[d].min(v);
                hi[d] = hi[d].max(v);
            }
        }
        Ok(Self { samples, feature_min: lo, feature_max: hi })
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_min.len()
    }

    pub fn feature_min(&self) -> &[T] {
        &self.feature_min
    }

    pub fn feature_max(&self) -> &[T] {
        &self.feature_max
    }

    /// Min-max scaling with the stored bounds, clamped to `[0, 1]`; flat dimensions map to 0.
    pub fn scale(&self, v: &[T]) -> Vec<T> {
        v.iter()
            .zip(self.feature_min.iter().zip(&self.feature_max))
            .map(|(&x, (&lo, &hi))| {
                let span = hi - lo;
                if span > T::zero() {
                    ((x - lo) / span).max(T::zero()).min(T::one())
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    fn column_names(&self) -> Vec<String> {
        if self.dim() == FeatureVector::<T>::LEN {
            ["contrast", "homogeneity", "entropy", "local_homogeneity"].map(String::from).to_vec()
        } else {
            (0..self.dim()).map(|i| format!("f{i}")).collect()
        }
    }

    /// Raw (unscaled) feature columns followed by `class`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let err = |e: csv::Error| Error::Csv(e.to_string());
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = self.column_names();
        header.push("class".into());
        wtr.write_record(&header).map_err(err)?;
        for s in &self.samples {
            let mut row: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
            row.push(s.class.to_string());
            wtr.write_record(&row).map_err(err)?;
        }
        wtr.flush().map_err(|e| Error::Csv(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let err = |e: csv::Error| Error::Csv(e.to_string());
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers().map_err(err)?.clone();
        let class_col =
            headers.iter().position(|h| h == "class").ok_or_else(|| Error::Csv("missing `class` column".into()))?;
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(err)?;
            let mut features = Vec::with_capacity(rec.len() - 1);
            let mut class = 0u8;
            for (i, field) in rec.iter().enumerate() {
                if i == class_col {
                    class = field.trim().parse().map_err(|_| Error::Csv(format!("bad class `{field}`")))?;
                } else {
                    let v: f64 = field.trim().parse().map_err(|_| Error::Csv(format!("bad value `{field}`")))?;
                    features.push(T::lit(v));
                }
            }
            samples.push(Sample { features, class });
        }
        Self::new(samples)
    }
}

/// Samples `per_class` pixels of every class without replacement (seeded),
/// in ascending class order and ascending pixel order within a class.
pub fn build_training_set<T: Scalar>(
    features: &FeatureField<T>,
    mask: &LabelMask,
    per_class: usize,
    seed: u64,
) -> Result<TrainingSet<T>> {
    if features.width() != mask.width() || features.height() != mask.height() {
        return Err(Error::DimensionMismatch("feature field and mask sizes differ".into()));
    }
    let samples = mask
        .sample_per_class(per_class, seed)?
        .into_iter()
        .map(|p| Sample { features: features.data()[p].to_array().to_vec(), class: mask.labels()[p] })
        .collect();
    TrainingSet::new(samples)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub class: u8,
    /// Distances to the `k` selected neighbors, nearest first.
    pub distances: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct KnnModel<T> {
    training: TrainingSet<T>,
    k: usize,
    metric: DistanceMetric,
    scaled: Vec<Vec<T>>,
    classes: u8,
}

impl<T: Scalar> KnnModel<T> {
    pub fn new(training: TrainingSet<T>, k: usize, metric: DistanceMetric) -> Result<Self> {
        metric.validate()?;
        if k == 0 || k > training.len() {
            return Err(Error::param(format!("k must be in 1..={}, got {k}", training.len())));
        }
        let scaled = training.samples.iter().map(|s| training.scale(&s.features)).collect();
        let classes = training.samples.iter().map(|s| s.class).max().unwrap_or(0) + 1;
        Ok(Self { training, k, metric, scaled, classes })
    }

    pub fn training(&self) -> &TrainingSet<T> {
        &self.training
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    pub fn classes(&self) -> u8 {
        self.classes
    }

    /// Same training data, different `k`.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.training.len() {
            return Err(Error::param(format!("k must be in 1..={}, got {k}", self.training.len())));
        }
        Ok(Self { k, ..self.clone() })
    }

    pub fn predict(&self, query: &[T]) -> Result<Prediction<T>> {
        if query.len() != self.training.dim() {
            return Err(Error::DimensionMismatch(format!(
                "query has {} features, model expects {}",
                query.len(),
                self.training.dim()
            )));
        }
        let q = self.training.scale(query);
        let mut cand: Vec<(T, usize)> =
            self.scaled.iter().enumerate().map(|(i, s)| (distance_unchecked(&q, s, self.metric), i)).collect();
        let order = |a: &(T, usize), b: &(T, usize)| a.0.as_f64().total_cmp(&b.0.as_f64()).then(a.1.cmp(&b.1));
        if self.k < cand.len() {
            cand.select_nth_unstable_by(self.k - 1, order);
            cand.truncate(self.k);
        }
        cand.sort_unstable_by(order);

        let n = self.classes as usize;
        let mut votes = vec![0usize; n];
        let mut dist_sum = vec![T::zero(); n];
        for &(d, i) in &cand {
            let c = self.training.samples[i].class as usize;
            votes[c] += 1;
            dist_sum[c] = dist_sum[c] + d;
        }
        let mut best = 0usize;
        for c in 1..n {
            if votes[c] == 0 {
                continue;
            }
            let better = match votes[c].cmp(&votes[best]) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => {
                    let mc = dist_sum[c] / T::from_count(votes[c]);
                    let mb = dist_sum[best] / T::from_count(votes[best]);
                    mc < mb
                }
            };
            if better || votes[best] == 0 {
                best = c;
            }
        }
        Ok(Prediction { class: best as u8, distances: cand.into_iter().map(|(d, _)| d).collect() })
    }

    pub fn predict_features(&self, f: &FeatureVector<T>) -> Result<u8> {
        Ok(self.predict(&f.to_array())?.class)
    }
}

/// Classifies every pixel of a precomputed feature field.
pub fn segment_field<T: Scalar>(field: &FeatureField<T>, model: &KnnModel<T>) -> Result<LabelMask> {
    if model.training.dim() != FeatureVector::<T>::LEN {
        return Err(Error::DimensionMismatch(format!(
            "model has {} features, texture vectors have {}",
            model.training.dim(),
            FeatureVector::<T>::LEN
        )));
    }
    let labels: Vec<u8> =
        field.data().par_iter().map(|f| model.predict(&f.to_array()).map(|p| p.class)).collect::<Result<_>>()?;
    LabelMask::new(field.width(), field.height(), model.classes, labels)
}

/// Feature field followed by a per-pixel prediction.
pub fn segment<T: Scalar>(img: &GrayImage<T>, model: &KnnModel<T>, cfg: &GlcmConfig) -> Result<LabelMask> {
    segment_field(&feature_field(img, cfg)?, model)
}
