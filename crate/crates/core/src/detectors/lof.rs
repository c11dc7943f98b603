//! Local outlier factor.
//!
//! Neighbourhoods are exactly the k nearest other rows (ties by index).
//! A row whose mean reachability distance is zero sits inside a stack of at
//! least k duplicates; its local density is unbounded and its score is 1.0.
//! Elsewhere densities are `1 / max(mean_reach, 1e-10)`.

use super::{ensure_rows, nearest, Algorithm, DetectorError, OutlierModel};
use crate::dataset::FeatureMatrix;

const MIN_REACH: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Lof {
    train: FeatureMatrix,
    k: usize,
    k_distance: Vec<f64>,
    lrd: Vec<f64>,
}

impl Lof {
    pub fn fit(x: &FeatureMatrix, k: usize) -> Result<(Self, Vec<f64>), DetectorError> {
        if k < 2 {
            return Err(DetectorError::InvalidParameter("lof k must be >= 2".into()));
        }
        ensure_rows(Algorithm::Lof, x, k + 1)?;
        let neighbours: Vec<Vec<(f64, usize)>> = (0..x.rows())
            .map(|i| nearest(x, x.row(i), k, Some(i)))
            .collect();
        let k_distance: Vec<f64> = neighbours.iter().map(|nb| nb[k - 1].0).collect();
        let mean_reach: Vec<f64> = neighbours
            .iter()
            .map(|nb| reach_mean(nb, &k_distance))
            .collect();
        let lrd: Vec<f64> = mean_reach.iter().map(|&r| 1.0 / r.max(MIN_REACH)).collect();
        let scores = neighbours
            .iter()
            .zip(&mean_reach)
            .map(|(nb, &r)| factor(nb, r, &lrd))
            .collect();
        Ok((
            Self {
                train: x.clone(),
                k,
                k_distance,
                lrd,
            },
            scores,
        ))
    }
}

fn reach_mean(nb: &[(f64, usize)], k_distance: &[f64]) -> f64 {
    nb.iter().map(|&(d, j)| d.max(k_distance[j])).sum::<f64>() / nb.len() as f64
}

fn factor(nb: &[(f64, usize)], mean_reach: f64, lrd: &[f64]) -> f64 {
    if mean_reach == 0.0 {
        return 1.0;
    }
    let neighbour_lrd = nb.iter().map(|&(_, j)| lrd[j]).sum::<f64>() / nb.len() as f64;
    neighbour_lrd * mean_reach.max(MIN_REACH)
}

impl OutlierModel for Lof {
    fn score(&self, x: &FeatureMatrix) -> Vec<f64> {
        x.iter_rows()
            .map(|q| {
                let nb = nearest(&self.train, q, self.k, None);
                let r = reach_mean(&nb, &self.k_distance);
                factor(&nb, r, &self.lrd)
            })
            .collect()
    }
}

/// Training-row local outlier factors.
pub fn lof_scores(x: &FeatureMatrix, k: usize) -> Result<Vec<f64>, DetectorError> {
    Lof::fit(x, k).map(|(_, s)| s)
}
