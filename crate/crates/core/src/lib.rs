//! Automated outlier-detection pipeline search for labeled time series.
//!
//! The crate is organised around the stages of the pipeline:
//!
//! - [`dataset`]: validated series, anomaly windows, labels, splits and window embedding.
//! - [`store`]: an embedded, file-backed dataset store with time-range queries.
//! - [`detectors`]: eight outlier detectors behind one scoring contract.
//! - [`search_space`]: the conditional space of algorithms and hyperparameters.
//! - [`optimizer`]: sequential model-based search (Parzen-ratio ranking, EDA, CMA-ES).
//! - [`evaluation`]: F1 and windowed sigmoid scoring under three application profiles.
//! - [`tsa`]: additive decomposition and kernel density estimates.
//! - [`plot`]: deterministic SVG rendering of the analytic panels.
//! - [`pipeline`]: policy execution (standardise, embed, fit, score).

pub mod dataset;
pub mod detectors;
pub mod evaluation;
pub mod optimizer;
pub mod pipeline;
pub mod plot;
pub mod search_space;
pub mod store;
pub mod tsa;

mod util;

pub use dataset::{AnomalyWindow, DataSplit, DatasetError, FeatureMatrix, LabelVector, TimeSeriesDataset};
pub use detectors::{Algorithm, BinaryPrediction, DetectorConfig, DetectorError, ScoreVector};
pub use search_space::{PipelinePolicy, SearchSpace};
