//! (mu/mu_w, lambda)-CMA-ES on the unit cube.
//!
//! Constants follow the usual tutorial defaults: log-rank recombination
//! weights over the best `mu = floor(lambda / 2)` samples, cumulative step-size
//! adaptation, and rank-one plus rank-mu covariance updates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::search_space::ContinuousCode;

pub const SIGMA_MIN: f64 = 1e-8;
pub const SIGMA_MAX: f64 = 1e2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CmaesError {
    #[error("update needs at least 2 ranked samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample has dimension {got}, state has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Default population size `4 + floor(3 ln d)`.
pub fn population_size(dim: usize) -> usize {
    4 + (3.0 * (dim.max(1) as f64).ln()).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaesState {
    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    p_sigma: DVector<f64>,
    p_c: DVector<f64>,
    generation: usize,
    // C = B diag(D^2) B^T
    basis: DMatrix<f64>,
    scales: DVector<f64>,
}

impl CmaesState {
    /// Mean at the cube centre, identity covariance.
    pub fn new(dim: usize, sigma: f64) -> Self {
        Self::with_mean(DVector::from_element(dim, 0.5), sigma)
    }

    pub fn with_mean(mean: DVector<f64>, sigma: f64) -> Self {
        let d = mean.len();
        Self {
            sigma: sigma.clamp(SIGMA_MIN, SIGMA_MAX),
            cov: DMatrix::identity(d, d),
            p_sigma: DVector::zeros(d),
            p_c: DVector::zeros(d),
            generation: 0,
            basis: DMatrix::identity(d, d),
            scales: DVector::from_element(d, 1.0),
            mean,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    /// `m + sigma C^{1/2} z` before clamping.
    pub fn sample_unclamped<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_iterator(self.dim(), (0..self.dim()).map(|_| rng.sample(StandardNormal)));
        let y = &self.basis * z.component_mul(&self.scales);
        &self.mean + y * self.sigma
    }

    /// A sample clamped to the unit cube.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ContinuousCode {
        ContinuousCode(
            self.sample_unclamped(rng)
                .iter()
                .map(|v| v.clamp(0.0, 1.0))
                .collect(),
        )
    }

    /// One generation update from samples sorted by loss, ascending (ties keep
    /// input order).
    pub fn update(&self, ranked: &[(Vec<f64>, f64)]) -> Result<Self, CmaesError> {
        let lambda = ranked.len();
        if lambda < 2 {
            return Err(CmaesError::TooFewSamples(lambda));
        }
        let n = self.dim();
        if let Some((x, _)) = ranked.iter().find(|(x, _)| x.len() != n) {
            return Err(CmaesError::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
        let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

        let ys: Vec<DVector<f64>> = ranked[..mu]
            .iter()
            .map(|(x, _)| (DVector::from_column_slice(x) - &self.mean) / self.sigma)
            .collect();
        let y_w = ys
            .iter()
            .zip(&weights)
            .fold(DVector::zeros(n), |acc, (y, &w)| acc + y * w);
        let mean = ranked[..mu]
            .iter()
            .zip(&weights)
            .fold(DVector::zeros(n), |acc, ((x, _), &w)| acc + DVector::from_column_slice(x) * w);

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let inv_sqrt_y = &self.basis * (self.basis.transpose() * &y_w).component_div(&self.scales);
        let p_sigma = &self.p_sigma * (1.0 - c_sigma) + inv_sqrt_y * (c_sigma * (2.0 - c_sigma) * mu_eff).sqrt();
        let gen = self.generation + 1;
        let ps_norm = p_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - c_sigma).powi(2 * gen as i32)).sqrt()
            < (1.4 + 2.0 / (nf + 1.0)) * chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };
        let p_c = &self.p_c * (1.0 - c_c) + &y_w * (h * (c_c * (2.0 - c_c) * mu_eff).sqrt());
        let delta_h = (1.0 - h) * c_c * (2.0 - c_c);

        let rank_mu = ys
            .iter()
            .zip(&weights)
            .fold(DMatrix::zeros(n, n), |acc, (y, &w)| acc + y * y.transpose() * w);
        let mut cov = &self.cov * (1.0 - c_1 - c_mu)
            + (&p_c * p_c.transpose() + &self.cov * delta_h) * c_1
            + rank_mu * c_mu;
        cov = (&cov + cov.transpose()) * 0.5;

        let sigma = (self.sigma * ((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0)).exp())
            .clamp(SIGMA_MIN, SIGMA_MAX);

        let eig = SymmetricEigen::new(cov.clone());
        let max_ev = eig.eigenvalues.max().max(1e-300);
        let floor = max_ev * 1e-14;
        let eigenvalues = eig.eigenvalues.map(|v| v.max(floor));
        if eig.eigenvalues.iter().any(|&v| v < floor) {
            cov = &eig.eigenvectors * DMatrix::from_diagonal(&eigenvalues) * eig.eigenvectors.transpose();
            cov = (&cov + cov.transpose()) * 0.5;
        }
        Ok(Self {
            mean,
            sigma,
            cov,
            p_sigma,
            p_c,
            generation: gen,
            basis: eig.eigenvectors,
            scales: eigenvalues.map(f64::sqrt),
        })
    }
}
