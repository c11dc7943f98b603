//! Validated time-series datasets and the mechanics shared by every stage:
//! window labels, chronological splits and sliding-window embedding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("length mismatch: {timestamps} timestamps vs {values} values")]
    LengthMismatch { timestamps: usize, values: usize },
    #[error("dataset must contain at least one point")]
    Empty,
    #[error("timestamps not strictly increasing at index {0}")]
    NonMonotonicTimestamps(usize),
    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),
    #[error("anomaly window [{start}, {end}] lies outside the series range")]
    WindowOutOfRange { start: i64, end: i64 },
    #[error("anomaly windows must be well-formed, sorted and disjoint (window {0})")]
    InvalidWindow(usize),
    #[error("dataset has {0} points; at least 4 are required to split")]
    DatasetTooSmall(usize),
    #[error("split ratio {0} must lie strictly between 0 and 1")]
    InvalidRatio(f64),
    #[error("embedding width {w} exceeds series length {n}")]
    WindowTooLarge { w: usize, n: usize },
    #[error("embedding width must be at least 1")]
    ZeroWidth,
    #[error("feature rows must be non-empty and of equal width")]
    RaggedRows,
}

/// A labeled anomaly interval, inclusive on both ends (epoch milliseconds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyWindow {
    pub start: i64,
    pub end: i64,
}

impl AnomalyWindow {
    pub fn new(start: i64, end: i64) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t <= self.end
    }

    /// Intersection with `[lo, hi]`, if non-empty.
    pub fn clip(&self, lo: i64, hi: i64) -> Option<Self> {
        let start = self.start.max(lo);
        let end = self.end.min(hi);
        (start <= end).then_some(Self { start, end })
    }
}

/// An ordered, timestamped univariate series with optional anomaly windows.
///
/// Fields are private; every constructor enforces the invariants, so a value of
/// this type is always valid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    name: String,
    timestamps: Vec<i64>,
    values: Vec<f64>,
    windows: Vec<AnomalyWindow>,
}

impl TimeSeriesDataset {
    pub fn new(
        name: impl Into<String>,
        timestamps: Vec<i64>,
        values: Vec<f64>,
        windows: Vec<AnomalyWindow>,
    ) -> Result<Self, DatasetError> {
        if timestamps.len() != values.len() {
            return Err(DatasetError::LengthMismatch {
                timestamps: timestamps.len(),
                values: values.len(),
            });
        }
        if timestamps.is_empty() {
            return Err(DatasetError::Empty);
        }
        if let Some(i) = timestamps.windows(2).position(|p| p[1] <= p[0]) {
            return Err(DatasetError::NonMonotonicTimestamps(i + 1));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFiniteValue(i));
        }
        let (lo, hi) = (timestamps[0], timestamps[timestamps.len() - 1]);
        for (i, w) in windows.iter().enumerate() {
            if w.start > w.end {
                return Err(DatasetError::InvalidWindow(i));
            }
            if w.start < lo || w.end > hi {
                return Err(DatasetError::WindowOutOfRange {
                    start: w.start,
                    end: w.end,
                });
            }
            if i > 0 && windows[i - 1].end >= w.start {
                return Err(DatasetError::InvalidWindow(i));
            }
        }
        Ok(Self {
            name: name.into(),
            timestamps,
            values,
            windows,
        })
    }

    /// The empty dataset, returned by range queries that match nothing.
    pub fn empty(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            timestamps: Vec::new(),
            values: Vec::new(),
            windows: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn windows(&self) -> &[AnomalyWindow] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn has_labels(&self) -> bool {
        !self.windows.is_empty()
    }

    pub fn time_range(&self) -> Option<(i64, i64)> {
        Some((*self.timestamps.first()?, *self.timestamps.last()?))
    }

    /// Point-wise labels: 1 where the timestamp falls inside any window.
    pub fn labels(&self) -> LabelVector {
        let mut bits = vec![false; self.len()];
        for w in &self.windows {
            let from = self.timestamps.partition_point(|&t| t < w.start);
            let to = self.timestamps.partition_point(|&t| t <= w.end);
            bits[from..to].iter_mut().for_each(|b| *b = true);
        }
        LabelVector(bits)
    }

    /// Index range `[first, last]` of the points covered by each window.
    /// Windows that happen to contain no sample are skipped.
    pub fn window_index_ranges(&self) -> Vec<(usize, usize)> {
        self.windows
            .iter()
            .filter_map(|w| {
                let from = self.timestamps.partition_point(|&t| t < w.start);
                let to = self.timestamps.partition_point(|&t| t <= w.end);
                (to > from).then_some((from, to - 1))
            })
            .collect()
    }

    /// Points with `start <= t <= end`, windows clipped to the slice.
    pub fn slice_time(&self, start: i64, end: i64) -> Self {
        let from = self.timestamps.partition_point(|&t| t < start);
        let to = self.timestamps.partition_point(|&t| t <= end);
        self.slice_index(from, to)
    }

    /// Points `from..to` with windows clipped to the covered time span.
    pub fn slice_index(&self, from: usize, to: usize) -> Self {
        if from >= to {
            return Self::empty(self.name.clone());
        }
        let (lo, hi) = (self.timestamps[from], self.timestamps[to - 1]);
        Self {
            name: self.name.clone(),
            timestamps: self.timestamps[from..to].to_vec(),
            values: self.values[from..to].to_vec(),
            windows: self.windows.iter().filter_map(|w| w.clip(lo, hi)).collect(),
        }
    }

    /// Train/validation split: the first `floor(ratio * n)` points train.
    pub fn chronological_split(&self, ratio: f64) -> Result<DataSplit, DatasetError> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(DatasetError::InvalidRatio(ratio));
        }
        let n = self.len();
        if n < 4 {
            return Err(DatasetError::DatasetTooSmall(n));
        }
        let cut = ((ratio * n as f64).floor() as usize).clamp(1, n - 1);
        Ok(DataSplit {
            train: self.slice_index(0, cut),
            val: self.slice_index(cut, n),
            ratio,
        })
    }
}

/// One bit per data point; `true` inside an anomaly window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector(pub Vec<bool>);

impl LabelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: TimeSeriesDataset,
    pub val: TimeSeriesDataset,
    pub ratio: f64,
}

/// Row-major feature matrix. Row `i` is attributed to source index
/// `i + window - 1`; matrices built from explicit rows use `window = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
    window: usize,
}

impl FeatureMatrix {
    /// Sliding windows of width `w` over `values`.
    pub fn embed(values: &[f64], w: usize) -> Result<Self, DatasetError> {
        if w == 0 {
            return Err(DatasetError::ZeroWidth);
        }
        let n = values.len();
        if w > n {
            return Err(DatasetError::WindowTooLarge { w, n });
        }
        let rows = n - w + 1;
        let mut data = Vec::with_capacity(rows * w);
        for win in values.windows(w) {
            data.extend_from_slice(win);
        }
        Ok(Self {
            data,
            rows,
            cols: w,
            window: w,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DatasetError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(DatasetError::RaggedRows);
        }
        Ok(Self {
            data: rows.concat(),
            rows: rows.len(),
            cols,
            window: 1,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Embedding width (1 for matrices not produced by [`FeatureMatrix::embed`]).
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn origin_index(&self, row: usize) -> usize {
        row + self.window - 1
    }

    /// Number of source points the rows were derived from.
    pub fn source_len(&self) -> usize {
        self.rows + self.window - 1
    }

    /// Rows `from..to`, keeping the embedding width.
    pub fn select_rows(&self, from: usize, to: usize) -> Self {
        Self {
            data: self.data[from * self.cols..to * self.cols].to_vec(),
            rows: to - from,
            cols: self.cols,
            window: self.window,
        }
    }

    /// Expands per-row scores to one score per source point: row `i` lands on
    /// `i + w - 1` and the first `w - 1` points repeat the first row's score.
    pub fn attribute(&self, row_scores: &[f64]) -> Vec<f64> {
        debug_assert_eq!(row_scores.len(), self.rows);
        let mut out = Vec::with_capacity(self.source_len());
        out.extend(std::iter::repeat_n(row_scores[0], self.window - 1));
        out.extend_from_slice(row_scores);
        out
    }

    /// Per-column z-score with statistics from `self`.
    pub fn standardized(&self) -> Self {
        let mut out = self.clone();
        for c in 0..self.cols {
            let col: Vec<f64> = self.iter_rows().map(|r| r[c]).collect();
            let m = crate::util::mean(&col);
            let s = crate::util::std_dev(&col);
            let s = if s > 0.0 { s } else { 1.0 };
            for r in 0..self.rows {
                out.data[r * self.cols + c] = (self.data[r * self.cols + c] - m) / s;
            }
        }
        out
    }
}
