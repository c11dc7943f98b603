//! Sequential model-based search over the pipeline space.
//!
//! Each iteration after the random warm start:
//!
//! 1. split the history into good (lowest `gamma` fraction of losses) and bad;
//! 2. draw the algorithm from the EDA model fitted on the good trials;
//! 3. draw its discrete parameters from the same model;
//! 4. draw `n_candidates` continuous codes from that algorithm's CMA-ES state
//!    and keep the one with the largest good/bad Parzen density ratio (a
//!    uniform code while the algorithm has fewer than two good trials);
//! 5. evaluate once, append to the history, and feed the algorithm's CMA-ES
//!    state once a full population of its trials has accumulated.
//!
//! The search minimises `loss = 1 - F1` on the validation segment.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DataSplit, DatasetError, TimeSeriesDataset};
use crate::detectors::{threshold_by_contamination, Algorithm};
use crate::evaluation::{confusion, f1_score};
use crate::pipeline::{self, PipelineError};
use crate::search_space::{PipelinePolicy, SearchSpace};

pub mod cmaes;
pub mod eda;
pub mod parzen;

pub use cmaes::{population_size, CmaesError, CmaesState};
pub use eda::EdaState;
pub use parzen::{ei_rank, fit_categorical, fit_parzen, ParzenDensity, ParzenError};

/// Initial CMA-ES step size on the unit cube.
pub const INITIAL_SIGMA: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("NoLabels: dataset has no anomaly windows; F1 needs labeled positives")]
    NoLabels,
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("history has {0} trials; at least 2 are needed to split")]
    HistoryTooSmall(usize),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// One evaluated policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub iteration: usize,
    pub policy: PipelinePolicy,
    /// Validation F1 in `[0, 1]`.
    pub objective: f64,
    /// `1 - objective`.
    pub loss: f64,
    pub elapsed_ms: u64,
    /// Set when the detector failed; the objective is then 0.
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn new(
        iteration: usize,
        policy: PipelinePolicy,
        objective: f64,
        elapsed_ms: u64,
        error: Option<String>,
    ) -> Self {
        Self {
            iteration,
            policy,
            objective,
            loss: 1.0 - objective,
            elapsed_ms,
            error,
        }
    }

    pub fn trace_line(&self) -> TraceLine {
        TraceLine {
            iter: self.iteration,
            algorithm: self.policy.algorithm,
            discrete: self.policy.discrete.clone(),
            continuous: self.policy.continuous.clone(),
            f1: self.objective,
            loss: self.loss,
            elapsed_ms: self.elapsed_ms,
        }
    }
}

/// One line of the JSONL search trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub iter: usize,
    pub algorithm: Algorithm,
    pub discrete: BTreeMap<String, i64>,
    pub continuous: BTreeMap<String, f64>,
    pub f1: f64,
    pub loss: f64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchHistory {
    pub trials: Vec<TrialRecord>,
}

impl SearchHistory {
    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Lowest loss; ties go to the earliest trial.
    pub fn best(&self) -> Option<&TrialRecord> {
        self.trials
            .iter()
            .reduce(|best, t| if t.loss < best.loss { t } else { best })
    }

    /// Running best objective after each trial.
    pub fn incumbent_curve(&self) -> Vec<f64> {
        self.trials
            .iter()
            .scan(f64::NEG_INFINITY, |best, t| {
                *best = best.max(t.objective);
                Some(*best)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBudget {
    pub max_trials: usize,
    pub n_init: usize,
    pub gamma: f64,
    pub n_candidates: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            max_trials: 50,
            n_init: 10,
            gamma: 0.15,
            n_candidates: 24,
        }
    }
}

impl SearchBudget {
    pub fn with_max_trials(max_trials: usize) -> Self {
        Self {
            max_trials,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), SearchError> {
        if self.max_trials == 0 {
            return Err(SearchError::InvalidBudget("max_trials must be >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(SearchError::InvalidBudget(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if self.n_candidates == 0 {
            return Err(SearchError::InvalidBudget("n_candidates must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// EDA + Parzen ratio + CMA-ES.
    Guided,
    /// Uniform sampling for every trial (baseline).
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    F1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub budget: SearchBudget,
    pub split_ratio: f64,
    pub eda_epsilon: f64,
    pub strategy: Strategy,
    pub metric: Metric,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            budget: SearchBudget::default(),
            split_ratio: 0.7,
            eda_epsilon: eda::DEFAULT_EPSILON,
            strategy: Strategy::Guided,
            metric: Metric::F1,
        }
    }
}

/// Validation F1 of one policy; detector failures give objective 0 with the
/// error recorded. The returned record has iteration 0.
pub fn evaluate_policy(policy: &PipelinePolicy, split: &DataSplit, metric: Metric) -> TrialRecord {
    let started = Instant::now();
    let outcome = objective(policy, split, metric);
    let elapsed_ms = started.elapsed().as_millis() as u64;
    match outcome {
        Ok(f1) => TrialRecord::new(0, policy.clone(), f1, elapsed_ms, None),
        Err(e) => TrialRecord::new(0, policy.clone(), 0.0, elapsed_ms, Some(e.to_string())),
    }
}

fn objective(policy: &PipelinePolicy, split: &DataSplit, metric: Metric) -> Result<f64, PipelineError> {
    let scores = pipeline::validation_scores(policy, &split.train, &split.val)?;
    let c = policy
        .contamination()
        .ok_or(PipelineError::MissingShared(crate::search_space::CONTAMINATION))?;
    let pred = threshold_by_contamination(&scores, c);
    match metric {
        Metric::F1 => {
            let counts = confusion(&pred.bits, &split.val.labels()).expect("aligned by construction");
            Ok(f1_score(&counts))
        }
    }
}

/// Good = the `max(1, ceil(gamma n))` lowest-loss trials (ties by iteration),
/// bad = the rest. Also returns the threshold `y*`, the largest good loss.
pub fn split_history(
    history: &SearchHistory,
    gamma: f64,
) -> Result<(Vec<TrialRecord>, Vec<TrialRecord>, f64), SearchError> {
    let n = history.len();
    if n < 2 {
        return Err(SearchError::HistoryTooSmall(n));
    }
    let mut sorted = history.trials.clone();
    sorted.sort_by(|a, b| a.loss.total_cmp(&b.loss).then(a.iteration.cmp(&b.iteration)));
    let n_good = crate::util::ceil_count(gamma, n);
    let bad = sorted.split_off(n_good);
    let y_star = sorted.last().map_or(f64::NAN, |t| t.loss);
    Ok((sorted, bad, y_star))
}

#[derive(Debug, Clone)]
struct AlgorithmModel {
    cmaes: CmaesState,
    pending: Vec<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: TrialRecord,
    pub history: SearchHistory,
}

/// Runs exactly `budget.max_trials` evaluations and returns the best trial.
/// Deterministic for a fixed `seed`. `on_trial` sees every record as soon as it
/// is committed.
pub fn run_search(
    ds: &TimeSeriesDataset,
    space: &SearchSpace,
    config: &SearchConfig,
    seed: u64,
    mut on_trial: impl FnMut(&TrialRecord),
) -> Result<SearchOutcome, SearchError> {
    if !ds.has_labels() {
        return Err(SearchError::NoLabels);
    }
    config.budget.validate()?;
    let split = ds.chronological_split(config.split_ratio)?;
    let budget = config.budget;
    let n_init = budget.n_init.min(budget.max_trials);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut models: BTreeMap<Algorithm, AlgorithmModel> = space
        .algorithms()
        .iter()
        .map(|a| {
            let dim = space.continuous_dim(a.algorithm);
            let model = AlgorithmModel {
                cmaes: CmaesState::new(dim, INITIAL_SIGMA),
                pending: Vec::new(),
            };
            (a.algorithm, model)
        })
        .collect();
    let eda_prior = EdaState::uniform(space);
    let mut history = SearchHistory::default();

    for iteration in 1..=budget.max_trials {
        let guided = config.strategy == Strategy::Guided && iteration > n_init && history.len() >= 2;
        let policy = if guided {
            propose(space, &history, &models, &eda_prior, config, &mut rng)
        } else {
            space.sample_uniform(&mut rng)
        };
        let mut record = evaluate_policy(&policy, &split, config.metric);
        record.iteration = iteration;

        let model = models.get_mut(&policy.algorithm).expect("policy drawn from space");
        let code = space
            .encode_continuous(&policy)
            .expect("policy drawn from space")
            .0;
        model.pending.push((code, record.loss));
        if model.pending.len() >= population_size(model.cmaes.dim()) {
            let mut ranked = std::mem::take(&mut model.pending);
            ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
            model.cmaes = model.cmaes.update(&ranked).expect("population >= 2");
        }

        on_trial(&record);
        history.trials.push(record);
    }
    let best = history.best().expect("max_trials >= 1").clone();
    Ok(SearchOutcome { best, history })
}

fn propose(
    space: &SearchSpace,
    history: &SearchHistory,
    models: &BTreeMap<Algorithm, AlgorithmModel>,
    eda_prior: &EdaState,
    config: &SearchConfig,
    rng: &mut ChaCha8Rng,
) -> PipelinePolicy {
    let (good, bad, _) = split_history(history, config.budget.gamma).expect("history >= 2");
    let eda = eda_prior.update(&good, config.eda_epsilon);
    let algorithm = eda.sample_algorithm(rng);
    let discrete = eda.propose(algorithm, rng);

    let codes_of = |trials: &[TrialRecord]| -> Vec<Vec<f64>> {
        trials
            .iter()
            .filter(|t| t.policy.algorithm == algorithm)
            .filter_map(|t| space.encode_continuous(&t.policy).ok())
            .map(|c| c.0)
            .collect()
    };
    let good_codes = codes_of(&good);
    let bad_codes = codes_of(&bad);
    let dim = space.continuous_dim(algorithm);

    let code: Vec<f64> = if good_codes.len() < 2 {
        (0..dim).map(|_| rng.random()).collect()
    } else {
        let per_dim = |codes: &[Vec<f64>]| -> Vec<ParzenDensity> {
            if codes.is_empty() {
                return Vec::new();
            }
            (0..dim)
                .map(|j| {
                    let col: Vec<f64> = codes.iter().map(|c| c[j]).collect();
                    fit_parzen(&col, (0.0, 1.0)).expect("codes lie in the unit cube")
                })
                .collect()
        };
        let l = per_dim(&good_codes);
        let g = per_dim(&bad_codes);
        let cmaes = &models[&algorithm].cmaes;
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..config.budget.n_candidates {
            let cand = cmaes.sample(rng).0;
            let r = ei_rank(&cand, &l, &g);
            if best.as_ref().is_none_or(|(br, _)| r > *br) {
                best = Some((r, cand));
            }
        }
        best.expect("n_candidates >= 1").1
    };
    let continuous = space
        .decode_continuous(algorithm, &code)
        .expect("dimension from space");
    PipelinePolicy {
        algorithm,
        discrete,
        continuous,
        seed: u64::from(rng.random::<u32>()),
    }
}
