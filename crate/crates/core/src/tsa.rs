//! Additive decomposition and kernel density estimates.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util;

/// Grid size of every density curve.
pub const KDE_GRID_POINTS: usize = 512;
/// Grid margin beyond the data range, in bandwidths.
pub const KDE_MARGIN: f64 = 4.0;
pub const MIN_BANDWIDTH: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TsaError {
    #[error("period must be >= 2, got {0}")]
    InvalidPeriod(usize),
    #[error("series of length {n} is shorter than two periods of {period}")]
    SeriesTooShort { n: usize, period: usize },
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("no finite values")]
    Empty,
}

/// `value[i] = level + trend[i] + seasonal[i] + residual[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub level: f64,
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<f64>,
    pub period: usize,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.trend.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trend.is_empty()
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.level + self.trend[i] + self.seasonal[i] + self.residual[i])
            .collect()
    }
}

/// Centered moving average of width `period` (2 x MA for even widths).
/// Entries without a full window are `None`.
fn centered_moving_average(values: &[f64], period: usize) -> Vec<Option<f64>> {
    let n = values.len();
    let half = period / 2;
    (0..n)
        .map(|i| {
            if i < half || i + half >= n {
                return None;
            }
            if period % 2 == 1 {
                Some(values[i - half..=i + half].iter().sum::<f64>() / period as f64)
            } else {
                let inner: f64 = values[i + 1 - half..i + half].iter().sum();
                let edges = 0.5 * (values[i - half] + values[i + half]);
                Some((inner + edges) / period as f64)
            }
        })
        .collect()
}

/// Classical additive decomposition with the global mean split out as level.
pub fn decompose(values: &[f64], period: usize) -> Result<Decomposition, TsaError> {
    if period < 2 {
        return Err(TsaError::InvalidPeriod(period));
    }
    let n = values.len();
    if n < 2 * period {
        return Err(TsaError::SeriesTooShort { n, period });
    }
    let level = util::mean(values);
    let ma = centered_moving_average(values, period);
    let first = ma.iter().position(Option::is_some).expect("n >= 2 period");
    let last = ma.iter().rposition(Option::is_some).expect("n >= 2 period");
    let trend: Vec<f64> = (0..n)
        .map(|i| ma[i.clamp(first, last)].expect("interior") - level)
        .collect();

    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for (i, (&v, &t)) in values.iter().zip(&trend).enumerate() {
        sums[i % period] += v - level - t;
        counts[i % period] += 1;
    }
    let phase_means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let center = util::mean(&phase_means);
    let pattern: Vec<f64> = phase_means.iter().map(|m| m - center).collect();
    let seasonal: Vec<f64> = (0..n).map(|i| pattern[i % period]).collect();
    let residual = (0..n)
        .map(|i| values[i] - level - trend[i] - seasonal[i])
        .collect();
    Ok(Decomposition {
        level,
        trend,
        seasonal,
        residual,
        period,
    })
}

/// Density values on an ascending uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityCurve {
    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Linear interpolation; zero outside the grid.
    pub fn at(&self, x: f64) -> f64 {
        let (lo, hi) = (self.grid[0], self.grid[self.grid.len() - 1]);
        if !(lo..=hi).contains(&x) {
            return 0.0;
        }
        let j = self.grid.partition_point(|&g| g <= x).clamp(1, self.grid.len() - 1);
        let (x0, x1) = (self.grid[j - 1], self.grid[j]);
        let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        self.density[j - 1] * (1.0 - t) + self.density[j] * t
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `0.9 min(s, IQR / 1.34) n^(-1/5)` with the sample standard deviation; if
/// one spread is zero the other is used, and the result is floored at 1e-6.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return MIN_BANDWIDTH;
    }
    let m = util::mean(values);
    let s = (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = (quantile(&sorted, 0.75) - quantile(&sorted, 0.25)) / 1.34;
    let spread = match (s > 0.0, iqr > 0.0) {
        (true, true) => s.min(iqr),
        (true, false) => s,
        (false, true) => iqr,
        (false, false) => 0.0,
    };
    (0.9 * spread * (n as f64).powf(-0.2)).max(MIN_BANDWIDTH)
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z * FRAC_1_SQRT_2))
}

/// Gaussian kernel density estimate on a 512-point grid over
/// `[min - 4h, max + 4h]`.
///
/// Each grid value is the estimate's mean over the grid cell centred on that
/// point (end cells stop at the grid bounds), so the trapezoidal integral stays
/// within 1e-3 of one however narrow the kernels are relative to the grid
/// spacing. For kernels much wider than the spacing this equals the pointwise
/// estimate to within `O(spacing^2)`.
pub fn kde(values: &[f64], bandwidth: Option<f64>) -> Result<DensityCurve, TsaError> {
    let xs: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if xs.is_empty() {
        return Err(TsaError::Empty);
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(TsaError::InvalidBandwidth(h)),
        None => silverman_bandwidth(&xs),
    };
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min) - KDE_MARGIN * h;
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + KDE_MARGIN * h;
    let step = (hi - lo) / (KDE_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID_POINTS).map(|j| lo + j as f64 * step).collect();
    let n = xs.len() as f64;
    let density = grid
        .iter()
        .map(|&g| {
            let a = (g - 0.5 * step).max(lo);
            let b = (g + 0.5 * step).min(hi);
            let mass: f64 = xs
                .iter()
                .map(|&x| normal_cdf((b - x) / h) - normal_cdf((a - x) / h))
                .sum();
            (mass / (n * (b - a))).max(0.0)
        })
        .collect();
    Ok(DensityCurve {
        grid,
        density,
        bandwidth: h,
    })
}
