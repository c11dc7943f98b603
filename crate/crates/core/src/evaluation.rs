//! Detection metrics: point-wise confusion counts and F1, and the windowed
//! scaled-sigmoid score with its three application profiles.
//!
//! Windowed score, for a dataset whose windows cover index ranges `[s, e]`:
//!
//! - the earliest detection inside a window earns `a_tp * sigma(y)` with
//!   `y = (i - e) / (e - s)` (left edge -1, right edge 0; single-point windows
//!   use `y = -1`); later detections in the same window count for nothing;
//! - an undetected window costs `a_fn`;
//! - a detection outside every window adds `a_fp * sigma(y)` (negative), with
//!   `y` the distance past the nearest preceding window's right edge divided by
//!   that window's width; before the first window the cost is the full `a_fp`.
//!
//! The raw total is normalised to 0 for no detections and 100 for exactly one
//! detection at the first point of every window.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{LabelVector, TimeSeriesDataset};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {pred} predictions vs {labels} labels")]
    LengthMismatch { pred: usize, labels: usize },
    #[error("dataset has no anomaly windows")]
    NoWindows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(pred: &[bool], labels: &LabelVector) -> Result<ConfusionCounts, EvalError> {
    if pred.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            labels: labels.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&p, &l) in pred.iter().zip(&labels.0) {
        match (p, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// `2tp / (2tp + fp + fn)`, or 0 when the denominator is 0.
pub fn f1_score(c: &ConfusionCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * c.tp as f64 / denom as f64
    }
}

/// `2 / (1 + e^{5y}) - 1`, i.e. `-tanh(2.5 y)`.
pub fn scaled_sigmoid(y: f64) -> f64 {
    -(2.5 * y).tanh()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Standard,
    RewardLowFp,
    RewardLowFn,
}

impl ProfileName {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileName::Standard => "standard",
            ProfileName::RewardLowFp => "reward_low_fp",
            ProfileName::RewardLowFn => "reward_low_fn",
        }
    }
}

impl std::str::FromStr for ProfileName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Self::Standard, Self::RewardLowFp, Self::RewardLowFn]
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown profile {s:?}"))
    }
}

/// Relative weights of detections, false alarms and misses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NabProfile {
    pub name: ProfileName,
    pub a_tp: f64,
    pub a_fp: f64,
    pub a_fn: f64,
}

impl NabProfile {
    pub const STANDARD: Self = Self {
        name: ProfileName::Standard,
        a_tp: 1.0,
        a_fp: 0.11,
        a_fn: 1.0,
    };
    pub const REWARD_LOW_FP: Self = Self {
        name: ProfileName::RewardLowFp,
        a_tp: 1.0,
        a_fp: 0.22,
        a_fn: 1.0,
    };
    pub const REWARD_LOW_FN: Self = Self {
        name: ProfileName::RewardLowFn,
        a_tp: 1.0,
        a_fp: 0.11,
        a_fn: 2.0,
    };

    pub const ALL: [Self; 3] = [Self::STANDARD, Self::REWARD_LOW_FP, Self::REWARD_LOW_FN];

    pub fn by_name(name: ProfileName) -> Self {
        match name {
            ProfileName::Standard => Self::STANDARD,
            ProfileName::RewardLowFp => Self::REWARD_LOW_FP,
            ProfileName::RewardLowFn => Self::REWARD_LOW_FN,
        }
    }
}

fn relative_position(i: usize, (s, e): (usize, usize)) -> f64 {
    if e == s {
        -1.0
    } else {
        (i as f64 - e as f64) / (e - s) as f64
    }
}

/// Unnormalised windowed score.
pub fn nab_raw_score(ranges: &[(usize, usize)], detections: &[bool], profile: &NabProfile) -> f64 {
    let mut raw = 0.0;
    let mut detected = vec![false; ranges.len()];
    // index of the window at or before the current point
    let mut w = 0usize;
    for (i, _) in detections.iter().enumerate().filter(|(_, &d)| d) {
        while w < ranges.len() && ranges[w].1 < i {
            w += 1;
        }
        if w < ranges.len() && ranges[w].0 <= i {
            if !detected[w] {
                detected[w] = true;
                raw += profile.a_tp * scaled_sigmoid(relative_position(i, ranges[w]));
            }
        } else if w == 0 {
            raw -= profile.a_fp;
        } else {
            let (s, e) = ranges[w - 1];
            let width = (e - s).max(1) as f64;
            raw += profile.a_fp * scaled_sigmoid((i - e) as f64 / width);
        }
    }
    raw - profile.a_fn * detected.iter().filter(|&&d| !d).count() as f64
}

/// Windowed score normalised so that no detections give 0 and one detection at
/// the start of every window gives 100.
pub fn nab_score(
    ds: &TimeSeriesDataset,
    detections: &[bool],
    profile: &NabProfile,
) -> Result<f64, EvalError> {
    if detections.len() != ds.len() {
        return Err(EvalError::LengthMismatch {
            pred: detections.len(),
            labels: ds.len(),
        });
    }
    let ranges = ds.window_index_ranges();
    if ranges.is_empty() {
        return Err(EvalError::NoWindows);
    }
    let null = -profile.a_fn * ranges.len() as f64;
    let perfect = profile.a_tp * scaled_sigmoid(-1.0) * ranges.len() as f64;
    let raw = nab_raw_score(&ranges, detections, profile);
    Ok(100.0 * (raw - null) / (perfect - null))
}

/// One detection at the first point of every window.
pub fn perfect_detections(ds: &TimeSeriesDataset) -> Vec<bool> {
    let mut bits = vec![false; ds.len()];
    for (s, _) in ds.window_index_ranges() {
        bits[s] = true;
    }
    bits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AnomalyWindow;

    #[test]
    fn confusion_examples() {
        let labels = LabelVector(vec![true, true, false, false]);
        let c = confusion(&[true, false, true, false], &labels).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (1, 1, 1, 1));
        let c = confusion(&[true; 4], &LabelVector(vec![false; 4])).unwrap();
        assert_eq!(c.fp, 4);
        assert!(confusion(&[true], &labels).is_err());
    }

    #[test]
    fn f1_examples() {
        let c = |tp, fp, fn_| ConfusionCounts { tp, fp, fn_, tn: 0 };
        assert_eq!(f1_score(&c(3, 0, 0)), 1.0);
        assert_eq!(f1_score(&c(0, 5, 2)), 0.0);
        assert_eq!(f1_score(&c(0, 0, 0)), 0.0);
        assert!((f1_score(&c(2, 1, 1)) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(scaled_sigmoid(0.0), 0.0);
        assert!((scaled_sigmoid(-1.0) - 0.986_614_298_151_430_3).abs() < 1e-12);
        let direct = |y: f64| 2.0 / (1.0 + (5.0 * y).exp()) - 1.0;
        for y in [-3.0, -0.4, 0.2, 1.1] {
            assert!((scaled_sigmoid(y) - direct(y)).abs() < 1e-14);
        }
    }

    fn fixture() -> TimeSeriesDataset {
        TimeSeriesDataset::new(
            "f",
            (0..100).collect(),
            vec![0.0; 100],
            vec![AnomalyWindow::new(20, 29), AnomalyWindow::new(60, 69)],
        )
        .unwrap()
    }

    #[test]
    fn perfect_and_null() {
        let ds = fixture();
        for p in NabProfile::ALL {
            let s = nab_score(&ds, &perfect_detections(&ds), &p).unwrap();
            assert!((s - 100.0).abs() < 1e-9);
            assert!(nab_score(&ds, &[false; 100], &p).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn fp_before_first_window_costs_full_weight() {
        let ds = fixture();
        let mut d = perfect_detections(&ds);
        d[5] = true;
        let raw = nab_raw_score(&ds.window_index_ranges(), &d, &NabProfile::STANDARD);
        let expect = 2.0 * scaled_sigmoid(-1.0) - 0.11;
        assert!((raw - expect).abs() < 1e-12);
    }

    #[test]
    fn fp_after_window_scaled_by_width() {
        let ds = fixture();
        let mut d = vec![false; 100];
        d[38] = true; // 9 past the right edge of a window of width 9
        let raw = nab_raw_score(&ds.window_index_ranges(), &d, &NabProfile::STANDARD);
        let expect = 0.11 * scaled_sigmoid(1.0) - 2.0;
        assert!((raw - expect).abs() < 1e-12);
    }

    #[test]
    fn only_earliest_detection_counts() {
        let ds = fixture();
        let mut d = perfect_detections(&ds);
        d[25] = true;
        d[29] = true;
        let s = nab_score(&ds, &d, &NabProfile::STANDARD).unwrap();
        assert!((s - 100.0).abs() < 1e-9);
    }

    #[test]
    fn no_windows_is_an_error() {
        let ds = TimeSeriesDataset::new("e", vec![1, 2], vec![0.0; 2], vec![]).unwrap();
        assert_eq!(nab_score(&ds, &[true, false], &NabProfile::STANDARD), Err(EvalError::NoWindows));
    }
}
