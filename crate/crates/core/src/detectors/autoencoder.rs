//! One-hidden-layer autoencoder (tanh hidden, linear output) trained by
//! full-batch gradient descent on the mean squared reconstruction error.
//! A row's score is its summed squared reconstruction error.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DetectorError, OutlierModel};
use crate::dataset::FeatureMatrix;

/// Network parameters. Weights map row vectors: `h = tanh(x W1 + b1)`,
/// `y = h W2 + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderParams {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

impl AutoencoderParams {
    /// Weights uniform in (-0.1, 0.1), biases zero.
    pub fn init(inputs: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |r, c| DMatrix::from_fn(r, c, |_, _| rng.random_range(-0.1..0.1));
        let w1 = draw(inputs, hidden);
        let w2 = draw(hidden, inputs);
        Self {
            w1,
            b1: DVector::zeros(hidden),
            w2,
            b2: DVector::zeros(inputs),
        }
    }

    /// All parameters as one flat vector (w1, b1, w2, b2; column-major).
    pub fn flatten(&self) -> Vec<f64> {
        [self.w1.as_slice(), self.b1.as_slice(), self.w2.as_slice(), self.b2.as_slice()].concat()
    }

    /// Inverse of [`flatten`](Self::flatten) with the shapes of `self`.
    pub fn unflatten_like(&self, flat: &[f64]) -> Self {
        let mut it = flat.iter().copied();
        let mut take = |r, c| DMatrix::from_iterator(r, c, it.by_ref().take(r * c));
        let w1 = take(self.w1.nrows(), self.w1.ncols());
        let b1 = take(self.b1.len(), 1).column(0).into_owned();
        let w2 = take(self.w2.nrows(), self.w2.ncols());
        let b2 = take(self.b2.len(), 1).column(0).into_owned();
        Self { w1, b1, w2, b2 }
    }

    fn forward(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut z = x * &self.w1;
        for mut row in z.row_iter_mut() {
            row += self.b1.transpose();
        }
        let h = z.map(f64::tanh);
        let mut y = &h * &self.w2;
        for mut row in y.row_iter_mut() {
            row += self.b2.transpose();
        }
        (h, y)
    }

    /// Mean squared reconstruction error over all `n * d` entries.
    pub fn loss(&self, x: &DMatrix<f64>) -> f64 {
        let (_, y) = self.forward(x);
        (y - x).norm_squared() / x.len() as f64
    }

    /// Loss and its analytic gradient (same layout as `self`).
    pub fn loss_and_gradient(&self, x: &DMatrix<f64>) -> (f64, AutoencoderParams) {
        let (h, y) = self.forward(x);
        let err = y - x;
        let scale = 2.0 / x.len() as f64;
        let dy = &err * scale;
        let dw2 = h.transpose() * &dy;
        let db2 = row_sums(&dy);
        let dh = &dy * self.w2.transpose();
        let dz = dh.component_mul(&h.map(|v| 1.0 - v * v));
        let dw1 = x.transpose() * &dz;
        let db1 = row_sums(&dz);
        (
            err.norm_squared() / x.len() as f64,
            AutoencoderParams {
                w1: dw1,
                b1: db1,
                w2: dw2,
                b2: db2,
            },
        )
    }

    fn step(&mut self, grad: &AutoencoderParams, lr: f64) {
        self.w1 -= &grad.w1 * lr;
        self.b1 -= &grad.b1 * lr;
        self.w2 -= &grad.w2 * lr;
        self.b2 -= &grad.b2 * lr;
    }
}

fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum()))
}

pub(crate) fn to_matrix(x: &FeatureMatrix) -> DMatrix<f64> {
    DMatrix::from_row_iterator(x.rows(), x.cols(), x.iter_rows().flatten().copied())
}

#[derive(Debug, Clone)]
pub struct Autoencoder {
    params: AutoencoderParams,
    initial_loss: f64,
    final_loss: f64,
}

impl Autoencoder {
    pub fn fit(
        x: &FeatureMatrix,
        hidden: usize,
        lr: f64,
        epochs: usize,
        seed: u64,
    ) -> Result<(Self, Vec<f64>), DetectorError> {
        if hidden == 0 || hidden > x.cols() {
            return Err(DetectorError::InvalidParameter(format!(
                "autoencoder hidden {hidden} must lie in 1..={}",
                x.cols()
            )));
        }
        if !(lr > 0.0) || epochs == 0 {
            return Err(DetectorError::InvalidParameter(
                "autoencoder needs lr > 0 and epochs >= 1".into(),
            ));
        }
        let data = to_matrix(x);
        let mut params = AutoencoderParams::init(x.cols(), hidden, seed);
        let initial_loss = params.loss(&data);
        for _ in 0..epochs {
            let (loss, grad) = params.loss_and_gradient(&data);
            if !loss.is_finite() {
                return Err(DetectorError::NumericOverflow);
            }
            params.step(&grad, lr);
        }
        let final_loss = params.loss(&data);
        if !final_loss.is_finite() || params.flatten().iter().any(|v| !v.is_finite()) {
            return Err(DetectorError::NumericOverflow);
        }
        let model = Self {
            params,
            initial_loss,
            final_loss,
        };
        let scores = model.score(x);
        Ok((model, scores))
    }

    pub fn params(&self) -> &AutoencoderParams {
        &self.params
    }

    pub fn initial_loss(&self) -> f64 {
        self.initial_loss
    }

    pub fn final_loss(&self) -> f64 {
        self.final_loss
    }
}

impl OutlierModel for Autoencoder {
    fn score(&self, x: &FeatureMatrix) -> Vec<f64> {
        let data = to_matrix(x);
        let (_, y) = self.params.forward(&data);
        (y - &data).row_iter().map(|r| r.norm_squared()).collect()
    }
}

pub fn autoencoder_scores(
    x: &FeatureMatrix,
    hidden: usize,
    lr: f64,
    epochs: usize,
    seed: u64,
) -> Result<Vec<f64>, DetectorError> {
    Autoencoder::fit(x, hidden, lr, epochs, seed).map(|(_, s)| s)
}
