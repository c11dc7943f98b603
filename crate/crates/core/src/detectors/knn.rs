//! Distance to the k nearest neighbours.

use super::{ensure_rows, nearest, Algorithm, DetectorError, OutlierModel};
use crate::dataset::FeatureMatrix;
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnnAggregate {
    Largest,
    Mean,
    Median,
}

impl KnnAggregate {
    /// Search-space code: 0 = largest, 1 = mean, 2 = median.
    pub fn from_code(code: i64) -> Result<Self, DetectorError> {
        match code {
            0 => Ok(Self::Largest),
            1 => Ok(Self::Mean),
            2 => Ok(Self::Median),
            _ => Err(DetectorError::InvalidParameter(format!(
                "knn method code {code} (expected 0, 1 or 2)"
            ))),
        }
    }

    fn apply(self, dists: &[f64]) -> f64 {
        match self {
            Self::Largest => dists[dists.len() - 1],
            Self::Mean => util::mean(dists),
            Self::Median => util::median(dists),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Knn {
    train: FeatureMatrix,
    k: usize,
    aggregate: KnnAggregate,
}

impl Knn {
    pub fn fit(
        x: &FeatureMatrix,
        k: usize,
        aggregate: KnnAggregate,
    ) -> Result<(Self, Vec<f64>), DetectorError> {
        if k == 0 {
            return Err(DetectorError::InvalidParameter("knn k must be >= 1".into()));
        }
        ensure_rows(Algorithm::Knn, x, k + 1)?;
        let model = Self {
            train: x.clone(),
            k,
            aggregate,
        };
        let scores = (0..x.rows())
            .map(|i| model.score_one(x.row(i), Some(i)))
            .collect();
        Ok((model, scores))
    }

    fn score_one(&self, q: &[f64], skip: Option<usize>) -> f64 {
        let d: Vec<f64> = nearest(&self.train, q, self.k, skip)
            .into_iter()
            .map(|(d, _)| d)
            .collect();
        self.aggregate.apply(&d)
    }
}

impl OutlierModel for Knn {
    fn score(&self, x: &FeatureMatrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.score_one(r, None)).collect()
    }
}

/// Training-row scores: aggregate distance to the k nearest other rows.
pub fn knn_scores(
    x: &FeatureMatrix,
    k: usize,
    aggregate: KnnAggregate,
) -> Result<Vec<f64>, DetectorError> {
    Knn::fit(x, k, aggregate).map(|(_, s)| s)
}
