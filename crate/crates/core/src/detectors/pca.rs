//! Principal-component reconstruction error.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{DetectorError, OutlierModel};
use crate::dataset::FeatureMatrix;

#[derive(Debug, Clone)]
pub struct Pca {
    mean: DVector<f64>,
    /// Columns span the discarded subspace; empty when everything is retained.
    residual_basis: DMatrix<f64>,
    retained: usize,
}

impl Pca {
    pub fn fit(x: &FeatureMatrix, variance_fraction: f64) -> Result<(Self, Vec<f64>), DetectorError> {
        if !(variance_fraction > 0.0 && variance_fraction <= 1.0) {
            return Err(DetectorError::InvalidParameter(format!(
                "pca variance_fraction {variance_fraction} outside (0, 1]"
            )));
        }
        let (n, d) = (x.rows(), x.cols());
        let data = DMatrix::from_row_iterator(n, d, x.iter_rows().flatten().copied());
        let mean = DVector::from_iterator(d, data.column_iter().map(|c| c.mean()));
        let mut centered = data;
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let cov = centered.transpose() * &centered / n as f64;
        let eig = SymmetricEigen::new(cov);

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let variances: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let total: f64 = variances.iter().sum();

        let retained = if total <= 0.0 {
            d
        } else {
            let target = variance_fraction * total * (1.0 - 1e-12);
            let mut acc = 0.0;
            let mut q = d;
            for (i, v) in variances.iter().enumerate() {
                acc += v;
                if acc >= target {
                    q = i + 1;
                    break;
                }
            }
            q
        };
        let dropped: Vec<_> = order[retained..]
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();
        let residual_basis = if dropped.is_empty() {
            DMatrix::zeros(d, 0)
        } else {
            DMatrix::from_columns(&dropped)
        };
        let model = Self {
            mean,
            residual_basis,
            retained,
        };
        let scores = model.score(x);
        Ok((model, scores))
    }

    pub fn retained_components(&self) -> usize {
        self.retained
    }
}

impl OutlierModel for Pca {
    fn score(&self, x: &FeatureMatrix) -> Vec<f64> {
        x.iter_rows()
            .map(|r| {
                let c = DVector::from_column_slice(r) - &self.mean;
                (self.residual_basis.transpose() * c).norm_squared()
            })
            .collect()
    }
}

/// Squared distance from each row to the smallest principal subspace that
/// explains at least `variance_fraction` of the variance.
pub fn pca_scores(x: &FeatureMatrix, variance_fraction: f64) -> Result<Vec<f64>, DetectorError> {
    Pca::fit(x, variance_fraction).map(|(_, s)| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_on_a_line_score_zero() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 2.0 * i as f64 + 1.0]).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let (m, s) = Pca::fit(&x, 0.9).unwrap();
        assert_eq!(m.retained_components(), 1);
        assert!(s.iter().all(|&v| v.abs() < 1e-12));
        let (_, s) = Pca::fit(&x, 1.0).unwrap();
        assert!(s.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn identical_rows_score_zero() {
        let x = FeatureMatrix::from_rows(&vec![vec![1.0, 2.0, 3.0]; 5]).unwrap();
        assert!(pca_scores(&x, 0.5).unwrap().iter().all(|&v| v == 0.0));
    }
}
