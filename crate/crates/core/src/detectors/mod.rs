//! Outlier detectors behind one contract: fit on a [`FeatureMatrix`], score rows,
//! larger score = more anomalous.
//!
//! Every detector is fitted once and can then score unseen rows. Training-row
//! scores exclude the row itself wherever a neighbourhood is involved.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::FeatureMatrix;

pub mod autoencoder;
pub mod cblof;
pub mod hbos;
pub mod iforest;
pub mod knn;
pub mod lof;
pub mod pca;
pub mod robustcov;

pub use autoencoder::autoencoder_scores;
pub use cblof::cblof_scores;
pub use hbos::hbos_scores;
pub use iforest::iforest_scores;
pub use knn::{knn_scores, KnnAggregate};
pub use lof::lof_scores;
pub use pca::pca_scores;
pub use robustcov::robustcov_scores;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("{algorithm} needs at least {needed} rows, got {got}")]
    TooFewRows {
        algorithm: Algorithm,
        needed: usize,
        got: usize,
    },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("covariance is singular even after ridge regularisation")]
    SingularCovariance,
    #[error("training loss became non-finite (learning rate too large?)")]
    NumericOverflow,
    #[error("k-means left an empty cluster at every cluster count down to 2")]
    ClusteringFailed,
    #[error("missing parameter {0:?}")]
    MissingParameter(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("feature width mismatch: fitted on {fitted} columns, scoring {got}")]
    WidthMismatch { fitted: usize, got: usize },
}

/// The detector roster. Closed in this version; adding a variant means adding
/// its module here and its domains in the search space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "LOF")]
    Lof,
    #[serde(rename = "HBOS")]
    Hbos,
    #[serde(rename = "IFOREST")]
    Iforest,
    #[serde(rename = "PCA")]
    Pca,
    #[serde(rename = "CBLOF")]
    Cblof,
    #[serde(rename = "ROBUSTCOV")]
    RobustCov,
    #[serde(rename = "AUTOENCODER")]
    Autoencoder,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Knn,
        Algorithm::Lof,
        Algorithm::Hbos,
        Algorithm::Iforest,
        Algorithm::Pca,
        Algorithm::Cblof,
        Algorithm::RobustCov,
        Algorithm::Autoencoder,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Knn => "KNN",
            Algorithm::Lof => "LOF",
            Algorithm::Hbos => "HBOS",
            Algorithm::Iforest => "IFOREST",
            Algorithm::Pca => "PCA",
            Algorithm::Cblof => "CBLOF",
            Algorithm::RobustCov => "ROBUSTCOV",
            Algorithm::Autoencoder => "AUTOENCODER",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&a| a == self).expect("in roster")
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

/// One detector instantiation: algorithm, its parameters and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub algorithm: Algorithm,
    pub discrete: BTreeMap<String, i64>,
    pub continuous: BTreeMap<String, f64>,
    pub seed: u64,
}

impl DetectorConfig {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        Self {
            algorithm,
            discrete: BTreeMap::new(),
            continuous: BTreeMap::new(),
            seed,
        }
    }

    pub fn with_discrete(mut self, name: &str, v: i64) -> Self {
        self.discrete.insert(name.to_string(), v);
        self
    }

    pub fn with_continuous(mut self, name: &str, v: f64) -> Self {
        self.continuous.insert(name.to_string(), v);
        self
    }

    fn int(&self, name: &str) -> Result<i64, DetectorError> {
        self.discrete
            .get(name)
            .copied()
            .ok_or_else(|| DetectorError::MissingParameter(name.to_string()))
    }

    fn usize(&self, name: &str) -> Result<usize, DetectorError> {
        let v = self.int(name)?;
        usize::try_from(v)
            .map_err(|_| DetectorError::InvalidParameter(format!("{name} = {v} must be non-negative")))
    }

    fn real(&self, name: &str) -> Result<f64, DetectorError> {
        self.continuous
            .get(name)
            .copied()
            .ok_or_else(|| DetectorError::MissingParameter(name.to_string()))
    }
}

/// Per-source-point outlier scores (larger = more anomalous).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector(pub Vec<f64>);

impl ScoreVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn argmax(&self) -> Option<usize> {
        (0..self.0.len()).reduce(|best, i| if self.0[i] > self.0[best] { i } else { best })
    }
}

/// A fitted detector that scores unseen rows of the same width.
pub trait OutlierModel: Send + Sync {
    fn score(&self, x: &FeatureMatrix) -> Vec<f64>;
}

/// A fitted model together with the scores of its own training rows.
pub struct FittedDetector {
    model: Box<dyn OutlierModel>,
    training_scores: Vec<f64>,
    width: usize,
}

impl FittedDetector {
    pub fn training_scores(&self) -> &[f64] {
        &self.training_scores
    }

    pub fn score(&self, x: &FeatureMatrix) -> Result<Vec<f64>, DetectorError> {
        if x.cols() != self.width {
            return Err(DetectorError::WidthMismatch {
                fitted: self.width,
                got: x.cols(),
            });
        }
        Ok(finite_or_max(self.model.score(x)))
    }
}

impl fmt::Debug for FittedDetector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FittedDetector")
            .field("width", &self.width)
            .field("training_rows", &self.training_scores.len())
            .finish()
    }
}

/// Saturates infinities to the largest finite score so the vector stays finite
/// and ordering is preserved. NaN maps to 0.
fn finite_or_max(mut s: Vec<f64>) -> Vec<f64> {
    let hi = s.iter().copied().filter(|v| v.is_finite()).fold(0.0_f64, f64::max);
    for v in &mut s {
        if v.is_nan() {
            *v = 0.0;
        } else if *v == f64::INFINITY {
            *v = hi.max(f64::MAX / 2.0);
        } else if *v == f64::NEG_INFINITY {
            *v = f64::MIN / 2.0;
        }
    }
    s
}

pub(crate) fn ensure_rows(
    algorithm: Algorithm,
    x: &FeatureMatrix,
    needed: usize,
) -> Result<(), DetectorError> {
    if x.rows() < needed {
        return Err(DetectorError::TooFewRows {
            algorithm,
            needed,
            got: x.rows(),
        });
    }
    Ok(())
}

/// Fits the configured detector on `x`.
///
/// The autoencoder's hidden width is capped at the feature width, and the
/// isolation-forest subsample at the row count, so every point of the search
/// space yields a runnable detector.
pub fn fit(cfg: &DetectorConfig, x: &FeatureMatrix) -> Result<FittedDetector, DetectorError> {
    if x.rows() == 0 {
        return Err(DetectorError::TooFewRows {
            algorithm: cfg.algorithm,
            needed: 1,
            got: 0,
        });
    }
    let (model, training_scores): (Box<dyn OutlierModel>, Vec<f64>) = match cfg.algorithm {
        Algorithm::Knn => {
            let agg = KnnAggregate::from_code(cfg.int("method")?)?;
            let (m, s) = knn::Knn::fit(x, cfg.usize("k")?, agg)?;
            (Box::new(m), s)
        }
        Algorithm::Lof => {
            let (m, s) = lof::Lof::fit(x, cfg.usize("k")?)?;
            (Box::new(m), s)
        }
        Algorithm::Hbos => {
            let (m, s) = hbos::Hbos::fit(x, cfg.usize("n_bins")?, cfg.real("alpha")?)?;
            (Box::new(m), s)
        }
        Algorithm::Iforest => {
            let subsample = cfg.usize("subsample")?.min(x.rows()).max(2);
            let (m, s) = iforest::IsolationForest::fit(x, cfg.usize("n_trees")?, subsample, cfg.seed)?;
            (Box::new(m), s)
        }
        Algorithm::Pca => {
            let (m, s) = pca::Pca::fit(x, cfg.real("variance_fraction")?)?;
            (Box::new(m), s)
        }
        Algorithm::Cblof => {
            let (m, s) = cblof::Cblof::fit(
                x,
                cfg.usize("n_clusters")?,
                cfg.real("alpha")?,
                cfg.real("beta")?,
                cfg.seed,
            )?;
            (Box::new(m), s)
        }
        Algorithm::RobustCov => {
            let (m, s) = robustcov::RobustCovariance::fit(x, cfg.real("support_fraction")?)?;
            (Box::new(m), s)
        }
        Algorithm::Autoencoder => {
            let hidden = cfg.usize("hidden")?.clamp(1, x.cols());
            let (m, s) = autoencoder::Autoencoder::fit(
                x,
                hidden,
                cfg.real("lr")?,
                cfg.usize("epochs")?,
                cfg.seed,
            )?;
            (Box::new(m), s)
        }
    };
    Ok(FittedDetector {
        model,
        training_scores: finite_or_max(training_scores),
        width: x.cols(),
    })
}

/// Fits on `x` and returns one score per source point, using the embedding
/// attribution of [`FeatureMatrix::attribute`].
pub fn fit_score(cfg: &DetectorConfig, x: &FeatureMatrix) -> Result<ScoreVector, DetectorError> {
    let fitted = fit(cfg, x)?;
    Ok(ScoreVector(x.attribute(fitted.training_scores())))
}

/// Top-scoring points flagged as outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryPrediction {
    pub bits: Vec<bool>,
    pub threshold: f64,
}

impl BinaryPrediction {
    pub fn flagged(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Flags exactly `max(1, ceil(c * n))` points with the highest scores; ties go
/// to the lower index. `threshold` is the smallest flagged score.
pub fn threshold_by_contamination(scores: &[f64], contamination: f64) -> BinaryPrediction {
    let n = scores.len();
    if n == 0 {
        return BinaryPrediction {
            bits: Vec::new(),
            threshold: f64::INFINITY,
        };
    }
    let m = crate::util::ceil_count(contamination, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut bits = vec![false; n];
    for &i in &order[..m] {
        bits[i] = true;
    }
    BinaryPrediction {
        bits,
        threshold: scores[order[m - 1]],
    }
}

/// k nearest rows of `train` to `query` as `(distance, index)`, ascending,
/// ties by index. `skip` excludes one training index (the query itself).
pub(crate) fn nearest(
    train: &FeatureMatrix,
    query: &[f64],
    k: usize,
    skip: Option<usize>,
) -> Vec<(f64, usize)> {
    let mut d: Vec<(f64, usize)> = train
        .iter_rows()
        .enumerate()
        .filter(|&(j, _)| Some(j) != skip)
        .map(|(j, r)| (crate::util::dist(query, r), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    d
}
