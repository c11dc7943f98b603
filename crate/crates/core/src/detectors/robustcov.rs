//! Trimmed robust covariance and Mahalanobis scoring.
//!
//! Starting from the full-sample estimate, ten rounds keep the
//! `ceil(support_fraction * n)` rows with the smallest Mahalanobis distance and
//! re-estimate mean and covariance (plus a `1e-6 I` ridge). The score is the
//! squared Mahalanobis distance under the final estimate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{ensure_rows, Algorithm, DetectorError, OutlierModel};
use crate::dataset::FeatureMatrix;

pub const RIDGE: f64 = 1e-6;
pub const TRIM_ROUNDS: usize = 10;

#[derive(Debug, Clone)]
pub struct RobustCovariance {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl RobustCovariance {
    pub fn fit(x: &FeatureMatrix, support_fraction: f64) -> Result<(Self, Vec<f64>), DetectorError> {
        if !(0.5..=1.0).contains(&support_fraction) {
            return Err(DetectorError::InvalidParameter(format!(
                "support_fraction {support_fraction} outside [0.5, 1]"
            )));
        }
        ensure_rows(Algorithm::RobustCov, x, x.cols() + 1)?;
        let rows: Vec<DVector<f64>> = x.iter_rows().map(DVector::from_column_slice).collect();
        let h = crate::util::ceil_count(support_fraction, rows.len());

        let all: Vec<usize> = (0..rows.len()).collect();
        let mut model = estimate(&rows, &all)?;
        for _ in 0..TRIM_ROUNDS {
            let d = model.distances(&rows);
            let mut order = all.clone();
            order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
            order.truncate(h);
            order.sort_unstable();
            model = estimate(&rows, &order)?;
        }
        let scores = model.distances(&rows);
        Ok((model, scores))
    }

    fn distances(&self, rows: &[DVector<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.mahalanobis_sq(r)).collect()
    }

    pub fn mahalanobis_sq(&self, row: &DVector<f64>) -> f64 {
        let c = row - &self.mean;
        let y = self.chol.solve(&c);
        c.dot(&y)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }
}

fn estimate(rows: &[DVector<f64>], subset: &[usize]) -> Result<RobustCovariance, DetectorError> {
    let d = rows[0].len();
    let m = subset.len() as f64;
    let mean = subset.iter().fold(DVector::zeros(d), |acc, &i| acc + &rows[i]) / m;
    let mut cov = DMatrix::zeros(d, d);
    for &i in subset {
        let c = &rows[i] - &mean;
        cov += &c * c.transpose();
    }
    cov /= m;
    if cov.trace() <= 1e-12 * d as f64 {
        return Err(DetectorError::SingularCovariance);
    }
    for j in 0..d {
        cov[(j, j)] += RIDGE;
    }
    let chol = Cholesky::new(cov).ok_or(DetectorError::SingularCovariance)?;
    Ok(RobustCovariance { mean, chol })
}

impl OutlierModel for RobustCovariance {
    fn score(&self, x: &FeatureMatrix) -> Vec<f64> {
        x.iter_rows()
            .map(|r| self.mahalanobis_sq(&DVector::from_column_slice(r)))
            .collect()
    }
}

pub fn robustcov_scores(x: &FeatureMatrix, support_fraction: f64) -> Result<Vec<f64>, DetectorError> {
    RobustCovariance::fit(x, support_fraction).map(|(_, s)| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_point_is_singular() {
        let x = FeatureMatrix::from_rows(&vec![vec![1.0, 2.0]; 10]).unwrap();
        assert_eq!(robustcov_scores(&x, 0.75).unwrap_err(), DetectorError::SingularCovariance);
    }

    #[test]
    fn identity_covariance_reduces_to_euclidean() {
        // four corners of a square: mean 0, population covariance = I
        let rows = vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]];
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let s = robustcov_scores(&x, 1.0).unwrap();
        for v in s {
            assert!((v - 2.0 / (1.0 + RIDGE)).abs() < 1e-12);
        }
    }

    #[test]
    fn needs_more_rows_than_columns() {
        let x = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 1.0]]).unwrap();
        assert!(matches!(robustcov_scores(&x, 1.0), Err(DetectorError::TooFewRows { .. })));
    }
}
