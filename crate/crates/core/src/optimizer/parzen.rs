//! Non-parametric densities for the good/bad split of the history, and the
//! density-ratio ranking of candidates.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use thiserror::Error;

/// Floor applied to the "bad" density before taking the ratio.
pub const RATIO_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParzenError {
    #[error("no observations inside the range")]
    EmptyObservations,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParzenDensity {
    /// Mixture of Gaussian kernels truncated to `[low, high]`, each
    /// renormalised to unit mass on the range.
    Kde {
        centers: Vec<f64>,
        bandwidths: Vec<f64>,
        /// Kernel mass inside the range, per kernel.
        masses: Vec<f64>,
        low: f64,
        high: f64,
    },
    /// Smoothed category frequencies.
    Categorical { weights: Vec<f64> },
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z * FRAC_1_SQRT_2))
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Truncated-Gaussian mixture over `[low, high]`. Bandwidth per observation is
/// `max(width / min(100, m), distance to the nearest other observation)`.
pub fn fit_parzen(observations: &[f64], (low, high): (f64, f64)) -> Result<ParzenDensity, ParzenError> {
    let mut centers: Vec<f64> = observations
        .iter()
        .copied()
        .filter(|x| x.is_finite() && low <= *x && *x <= high)
        .collect();
    if centers.is_empty() {
        return Err(ParzenError::EmptyObservations);
    }
    centers.sort_by(f64::total_cmp);
    let m = centers.len();
    let min_bw = (high - low) / m.min(100) as f64;
    let bandwidths: Vec<f64> = (0..m)
        .map(|i| {
            let left = i.checked_sub(1).map(|j| centers[i] - centers[j]);
            let right = centers.get(i + 1).map(|c| c - centers[i]);
            let nearest = match (left, right) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => 0.0,
            };
            nearest.max(min_bw)
        })
        .collect();
    let masses = centers
        .iter()
        .zip(&bandwidths)
        .map(|(&c, &h)| (normal_cdf((high - c) / h) - normal_cdf((low - c) / h)).max(1e-300))
        .collect();
    Ok(ParzenDensity::Kde {
        centers,
        bandwidths,
        masses,
        low,
        high,
    })
}

/// `(count_k + eps) / (total + K eps)` per category.
pub fn fit_categorical(counts: &[usize], epsilon: f64) -> ParzenDensity {
    let total: usize = counts.iter().sum();
    let denom = total as f64 + counts.len() as f64 * epsilon;
    ParzenDensity::Categorical {
        weights: counts.iter().map(|&c| (c as f64 + epsilon) / denom).collect(),
    }
}

impl ParzenDensity {
    /// Density at `x` (for categorical densities, the weight of category `x as usize`).
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            ParzenDensity::Kde {
                centers,
                bandwidths,
                masses,
                low,
                high,
            } => {
                if !(*low <= x && x <= *high) {
                    return 0.0;
                }
                let sum: f64 = centers
                    .iter()
                    .zip(bandwidths)
                    .zip(masses)
                    .map(|((&c, &h), &z)| normal_pdf((x - c) / h) / (h * z))
                    .sum();
                sum / centers.len() as f64
            }
            ParzenDensity::Categorical { weights } => {
                if x < 0.0 {
                    return 0.0;
                }
                weights.get(x as usize).copied().unwrap_or(0.0)
            }
        }
    }

    pub fn weights(&self) -> Option<&[f64]> {
        match self {
            ParzenDensity::Categorical { weights } => Some(weights),
            ParzenDensity::Kde { .. } => None,
        }
    }
}

/// Product density over coordinates; an empty product is the uniform density 1.
pub fn product_pdf(densities: &[ParzenDensity], x: &[f64]) -> f64 {
    densities.iter().zip(x).map(|(d, &v)| d.pdf(v)).product()
}

/// `l(x) / max(g(x), 1e-12)` with per-coordinate product densities.
/// Maximising this ratio maximises expected improvement below the good/bad
/// threshold.
pub fn ei_rank(x: &[f64], good: &[ParzenDensity], bad: &[ParzenDensity]) -> f64 {
    product_pdf(good, x) / product_pdf(bad, x).max(RATIO_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trapezoid(d: &ParzenDensity, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * d.pdf(lo + i as f64 * h)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn single_observation_symmetric_and_normalised() {
        let d = fit_parzen(&[0.5], (0.0, 1.0)).unwrap();
        assert!((d.pdf(0.3) - d.pdf(0.7)).abs() < 1e-12);
        assert!((trapezoid(&d, 0.0, 1.0, 4000) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn bimodal_and_skewed() {
        let d = fit_parzen(&[0.1, 0.9], (0.0, 1.0)).unwrap();
        // bandwidth is 0.8 for both kernels; evaluate the mixture by hand
        let z = normal_cdf(0.9 / 0.8) - normal_cdf(-0.1 / 0.8);
        let by_hand = |x: f64| {
            0.5 * (normal_pdf((x - 0.1) / 0.8) + normal_pdf((x - 0.9) / 0.8)) / (0.8 * z)
        };
        for x in [0.1, 0.5, 0.9] {
            assert!((d.pdf(x) - by_hand(x)).abs() < 1e-12);
        }
        // a lone pair is never bimodal (bandwidth = separation), two groups are
        assert!(d.pdf(0.5) > d.pdf(0.1));
        let d = fit_parzen(&[0.1, 0.12, 0.88, 0.9], (0.0, 1.0)).unwrap();
        assert!(d.pdf(0.1) > d.pdf(0.5));
        assert!(d.pdf(0.9) > d.pdf(0.5));

        let d = fit_parzen(&[0.01, 0.02, 0.05, 0.07], (0.0, 1.0)).unwrap();
        assert!(d.pdf(0.0) > d.pdf(1.0));
    }

    #[test]
    fn empty_observations() {
        assert_eq!(fit_parzen(&[], (0.0, 1.0)), Err(ParzenError::EmptyObservations));
        assert_eq!(fit_parzen(&[2.0], (0.0, 1.0)), Err(ParzenError::EmptyObservations));
    }

    #[test]
    fn ratio_rules() {
        let d = fit_parzen(&[0.2, 0.4], (0.0, 1.0)).unwrap();
        assert!((ei_rank(&[0.3], std::slice::from_ref(&d), std::slice::from_ref(&d)) - 1.0).abs() < 1e-15);
        let half = ParzenDensity::Categorical { weights: vec![0.25, 0.75] };
        let full = ParzenDensity::Categorical { weights: vec![0.5, 1.0] };
        assert_eq!(ei_rank(&[1.0], &[full], &[half]), 4.0 / 3.0);
        let zero = ParzenDensity::Categorical { weights: vec![0.0] };
        let one = ParzenDensity::Categorical { weights: vec![0.5] };
        assert_eq!(ei_rank(&[0.0], &[one], &[zero]), 0.5 / 1e-12);
    }

    #[test]
    fn categorical_smoothing() {
        let d = fit_categorical(&[3, 0, 0, 0, 0, 0, 0, 0], 0.05);
        let w = d.weights().unwrap();
        assert!((w[0] - 3.05 / 3.4).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
