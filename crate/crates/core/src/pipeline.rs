//! Policy → scores: standardise with training statistics, embed, fit, score.

use thiserror::Error;

use crate::dataset::{DatasetError, FeatureMatrix, TimeSeriesDataset};
use crate::detectors::{self, DetectorError, ScoreVector};
use crate::search_space::{PipelinePolicy, CONTAMINATION, WINDOW_W};
use crate::util;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("policy lacks {0}")]
    MissingShared(&'static str),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
}

/// Affine z-score map fitted on one series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    pub mean: f64,
    pub scale: f64,
}

impl Standardizer {
    /// Population mean and standard deviation; a zero deviation becomes 1.
    pub fn fit(values: &[f64]) -> Self {
        let scale = util::std_dev(values);
        Self {
            mean: util::mean(values),
            scale: if scale > 0.0 { scale } else { 1.0 },
        }
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| (v - self.mean) / self.scale).collect()
    }
}

fn shared(policy: &PipelinePolicy) -> Result<(usize, f64), PipelineError> {
    let w = policy.window_w().ok_or(PipelineError::MissingShared(WINDOW_W))?;
    let c = policy
        .contamination()
        .ok_or(PipelineError::MissingShared(CONTAMINATION))?;
    Ok((w, c))
}

/// Scores of the validation points for a detector fitted on the training
/// points only. Validation windows reach back into the end of the training
/// segment, so exactly one row lands on each validation point.
pub fn validation_scores(
    policy: &PipelinePolicy,
    train: &TimeSeriesDataset,
    val: &TimeSeriesDataset,
) -> Result<Vec<f64>, PipelineError> {
    let (w, _) = shared(policy)?;
    let z = Standardizer::fit(train.values());
    let joined: Vec<f64> = z
        .apply(train.values())
        .into_iter()
        .chain(z.apply(val.values()))
        .collect();
    if train.len() < w {
        return Err(DatasetError::WindowTooLarge { w, n: train.len() }.into());
    }
    let all = FeatureMatrix::embed(&joined, w)?;
    let train_rows = train.len() - w + 1;
    let fitted = detectors::fit(&policy.detector_config(), &all.select_rows(0, train_rows))?;
    Ok(fitted.score(&all.select_rows(train_rows, all.rows()))?)
}

/// Fits on the whole series and returns one raw score per point.
pub fn detect_scores(
    policy: &PipelinePolicy,
    ds: &TimeSeriesDataset,
) -> Result<ScoreVector, PipelineError> {
    let (w, _) = shared(policy)?;
    let z = Standardizer::fit(ds.values());
    let x = FeatureMatrix::embed(&z.apply(ds.values()), w)?;
    Ok(detectors::fit_score(&policy.detector_config(), &x)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_standardises_to_zero() {
        let z = Standardizer::fit(&[3.0; 5]);
        assert_eq!(z.apply(&[3.0, 4.0]), vec![0.0, 1.0]);
    }
}
