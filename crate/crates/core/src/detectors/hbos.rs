//! Histogram-based outlier score.
//!
//! Per column: equal-width histogram over the training `[min, max]`, bin
//! heights smoothed and normalised as `(count + alpha) / (max_count + alpha)`,
//! and the score is `sum_columns -ln(height)`. Constant columns contribute 0.
//! Unseen values outside the training range land in an empty bin.

use super::{DetectorError, OutlierModel};
use crate::dataset::FeatureMatrix;

const MIN_HEIGHT: f64 = 1e-12;

#[derive(Debug, Clone)]
struct ColumnHistogram {
    min: f64,
    max: f64,
    width: f64,
    /// `-ln(height)` per bin.
    cost: Vec<f64>,
    /// Cost of an empty bin, used for out-of-range values.
    empty_cost: f64,
}

impl ColumnHistogram {
    fn bin(&self, v: f64) -> Option<usize> {
        if !(self.min <= v && v <= self.max) {
            return None;
        }
        let pos = (v - self.min) / self.width;
        Some((pos.floor() as usize).min(self.cost.len() - 1))
    }

    fn cost_of(&self, v: f64) -> f64 {
        self.bin(v).map_or(self.empty_cost, |b| self.cost[b])
    }
}

#[derive(Debug, Clone)]
pub struct Hbos {
    // None for constant columns.
    columns: Vec<Option<ColumnHistogram>>,
}

impl Hbos {
    pub fn fit(x: &FeatureMatrix, n_bins: usize, alpha: f64) -> Result<(Self, Vec<f64>), DetectorError> {
        if n_bins < 2 {
            return Err(DetectorError::InvalidParameter("hbos n_bins must be >= 2".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(DetectorError::InvalidParameter(format!(
                "hbos alpha {alpha} outside [0, 1]"
            )));
        }
        let columns = (0..x.cols())
            .map(|c| {
                let col: Vec<f64> = x.iter_rows().map(|r| r[c]).collect();
                column_histogram(&col, n_bins, alpha)
            })
            .collect();
        let model = Self { columns };
        let scores = model.score(x);
        Ok((model, scores))
    }
}

fn column_histogram(col: &[f64], n_bins: usize, alpha: f64) -> Option<ColumnHistogram> {
    let min = col.iter().copied().fold(f64::INFINITY, f64::min);
    let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return None;
    }
    let mut hist = ColumnHistogram {
        min,
        max,
        width: (max - min) / n_bins as f64,
        cost: vec![0.0; n_bins],
        empty_cost: 0.0,
    };
    let mut counts = vec![0usize; n_bins];
    for &v in col {
        counts[hist.bin(v).expect("training value in range")] += 1;
    }
    let peak = *counts.iter().max().expect("n_bins >= 2") as f64 + alpha;
    let cost = |c: f64| -((c + alpha) / peak).max(MIN_HEIGHT).ln();
    hist.cost = counts.iter().map(|&c| cost(c as f64)).collect();
    hist.empty_cost = cost(0.0);
    Some(hist)
}

impl OutlierModel for Hbos {
    fn score(&self, x: &FeatureMatrix) -> Vec<f64> {
        x.iter_rows()
            .map(|r| {
                self.columns
                    .iter()
                    .zip(r)
                    .filter_map(|(h, &v)| h.as_ref().map(|h| h.cost_of(v)))
                    .sum()
            })
            .collect()
    }
}

pub fn hbos_scores(x: &FeatureMatrix, n_bins: usize, alpha: f64) -> Result<Vec<f64>, DetectorError> {
    Hbos::fit(x, n_bins, alpha).map(|(_, s)| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(v: &[f64]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&v.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn uniform_fill_scores_equal() {
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let s = hbos_scores(&line(&v), 10, 0.1).unwrap();
        assert!(s.iter().all(|&x| (x - s[0]).abs() < 1e-12));
    }

    #[test]
    fn lone_point_has_max() {
        let mut v = vec![0.0; 99];
        v.push(1.0);
        let s = hbos_scores(&line(&v), 2, 0.0).unwrap();
        assert!((s[99] - 99f64.ln()).abs() < 1e-12);
        assert!(s[..99].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_series_scores_zero() {
        let s = hbos_scores(&line(&[4.0; 10]), 5, 0.5).unwrap();
        assert!(s.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn out_of_range_is_empty_bin() {
        let v: Vec<f64> = (0..10).map(f64::from).collect();
        let (m, _) = Hbos::fit(&line(&v), 5, 0.5).unwrap();
        let s = m.score(&line(&[100.0, 4.5]));
        assert!((s[0] - -(0.5f64 / 2.5).ln()).abs() < 1e-12);
        assert!(s[1].abs() < 1e-12);
    }
}
