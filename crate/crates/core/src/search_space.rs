//! Conditional search space: which algorithm, its discrete and continuous
//! hyperparameters, and the shared pipeline parameters (contamination ratio and
//! embedding width).
//!
//! A [`PipelinePolicy`] always carries exactly the chosen algorithm's
//! parameters plus the shared ones. Continuous parameters are mapped to the unit
//! cube for CMA-ES; integer parameters stay discrete.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detectors::{Algorithm, DetectorConfig};

pub const CONTAMINATION: &str = "contamination";
pub const WINDOW_W: &str = "window_w";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("algorithm {0} is not in the search space")]
    UnknownAlgorithm(Algorithm),
    #[error("code has {got} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid search space: {0}")]
    Invalid(String),
    #[error("policy is invalid: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

/// Closed interval `[low, high]` with its interpolation scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuousRange {
    pub low: f64,
    pub high: f64,
    pub scale: Scale,
}

impl ContinuousRange {
    pub const fn linear(low: f64, high: f64) -> Self {
        Self { low, high, scale: Scale::Linear }
    }

    pub const fn log(low: f64, high: f64) -> Self {
        Self { low, high, scale: Scale::Log }
    }

    pub fn contains(&self, v: f64) -> bool {
        v.is_finite() && self.low <= v && v <= self.high
    }

    /// Unit-cube coordinate to value; the coordinate is clamped to `[0, 1]`.
    pub fn decode(&self, u: f64) -> f64 {
        let u = if u.is_nan() { 0.5 } else { u.clamp(0.0, 1.0) };
        if u == 0.0 {
            return self.low;
        }
        if u == 1.0 {
            return self.high;
        }
        match self.scale {
            Scale::Linear => self.low + u * (self.high - self.low),
            Scale::Log => (self.low.ln() + u * (self.high.ln() - self.low.ln())).exp(),
        }
        .clamp(self.low, self.high)
    }

    pub fn encode(&self, v: f64) -> f64 {
        let u = match self.scale {
            Scale::Linear => (v - self.low) / (self.high - self.low),
            Scale::Log => (v.ln() - self.low.ln()) / (self.high.ln() - self.low.ln()),
        };
        u.clamp(0.0, 1.0)
    }

    fn is_valid(&self) -> bool {
        self.low.is_finite()
            && self.high.is_finite()
            && self.low < self.high
            && (self.scale == Scale::Linear || self.low > 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteParam {
    pub name: String,
    pub choices: Vec<i64>,
}

impl DiscreteParam {
    pub fn new(name: &str, choices: impl IntoIterator<Item = i64>) -> Self {
        Self {
            name: name.to_string(),
            choices: choices.into_iter().collect(),
        }
    }

    pub fn position(&self, v: i64) -> Option<usize> {
        self.choices.iter().position(|&c| c == v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousParam {
    pub name: String,
    pub range: ContinuousRange,
}

impl ContinuousParam {
    pub fn new(name: &str, range: ContinuousRange) -> Self {
        Self {
            name: name.to_string(),
            range,
        }
    }
}

/// One algorithm's own hyperparameter domains, in declared order.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSpec {
    pub algorithm: Algorithm,
    pub discrete: Vec<DiscreteParam>,
    pub continuous: Vec<ContinuousParam>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    algorithms: Vec<AlgorithmSpec>,
    shared_discrete: Vec<DiscreteParam>,
    shared_continuous: Vec<ContinuousParam>,
}

impl SearchSpace {
    pub fn new(
        algorithms: Vec<AlgorithmSpec>,
        shared_discrete: Vec<DiscreteParam>,
        shared_continuous: Vec<ContinuousParam>,
    ) -> Result<Self, SpaceError> {
        if algorithms.is_empty() {
            return Err(SpaceError::Invalid("no algorithms".into()));
        }
        for (i, a) in algorithms.iter().enumerate() {
            if algorithms[..i].iter().any(|b| b.algorithm == a.algorithm) {
                return Err(SpaceError::Invalid(format!("duplicate algorithm {}", a.algorithm)));
            }
        }
        let discrete = algorithms.iter().flat_map(|a| &a.discrete).chain(&shared_discrete);
        for p in discrete {
            if p.choices.is_empty() {
                return Err(SpaceError::Invalid(format!("empty choice set for {}", p.name)));
            }
        }
        let continuous = algorithms.iter().flat_map(|a| &a.continuous).chain(&shared_continuous);
        for p in continuous {
            if !p.range.is_valid() {
                return Err(SpaceError::Invalid(format!("bad range for {}", p.name)));
            }
        }
        Ok(Self {
            algorithms,
            shared_discrete,
            shared_continuous,
        })
    }

    pub fn algorithms(&self) -> &[AlgorithmSpec] {
        &self.algorithms
    }

    pub fn shared_discrete(&self) -> &[DiscreteParam] {
        &self.shared_discrete
    }

    pub fn shared_continuous(&self) -> &[ContinuousParam] {
        &self.shared_continuous
    }

    pub fn spec(&self, algorithm: Algorithm) -> Option<&AlgorithmSpec> {
        self.algorithms.iter().find(|a| a.algorithm == algorithm)
    }

    fn spec_or_err(&self, algorithm: Algorithm) -> Result<&AlgorithmSpec, SpaceError> {
        self.spec(algorithm).ok_or(SpaceError::UnknownAlgorithm(algorithm))
    }

    /// The algorithm's discrete parameters followed by the shared ones.
    pub fn discrete_params(&self, algorithm: Algorithm) -> Vec<&DiscreteParam> {
        self.spec(algorithm)
            .map(|s| s.discrete.iter().chain(&self.shared_discrete).collect())
            .unwrap_or_default()
    }

    /// The algorithm's continuous parameters followed by the shared ones; this
    /// is the coordinate order of a [`ContinuousCode`].
    pub fn continuous_params(&self, algorithm: Algorithm) -> Vec<&ContinuousParam> {
        self.spec(algorithm)
            .map(|s| s.continuous.iter().chain(&self.shared_continuous).collect())
            .unwrap_or_default()
    }

    pub fn continuous_dim(&self, algorithm: Algorithm) -> usize {
        self.continuous_params(algorithm).len()
    }

    /// Uniform over algorithms, discrete choices, and each continuous range in
    /// its own scale.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> PipelinePolicy {
        let algorithm = self.algorithms[rng.random_range(0..self.algorithms.len())].algorithm;
        let discrete = self
            .discrete_params(algorithm)
            .into_iter()
            .map(|p| (p.name.clone(), p.choices[rng.random_range(0..p.choices.len())]))
            .collect();
        let code: Vec<f64> = (0..self.continuous_dim(algorithm)).map(|_| rng.random()).collect();
        let continuous = self
            .decode_continuous(algorithm, &code)
            .expect("dimension matches by construction");
        PipelinePolicy {
            algorithm,
            discrete,
            continuous,
            seed: u64::from(rng.random::<u32>()),
        }
    }

    /// Every way `policy` falls outside the space; empty means valid.
    pub fn validate(&self, policy: &PipelinePolicy) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.spec(policy.algorithm).is_none() {
            out.push(Violation::new(policy.algorithm.as_str(), "algorithm not in search space"));
            return out;
        }
        let discrete = self.discrete_params(policy.algorithm);
        for p in &discrete {
            match policy.discrete.get(&p.name) {
                None => out.push(Violation::new(&p.name, "missing")),
                Some(&v) if p.position(v).is_none() => {
                    out.push(Violation::new(&p.name, &format!("{} out of domain ({v})", p.name)))
                }
                Some(_) => {}
            }
        }
        for name in policy.discrete.keys() {
            if !discrete.iter().any(|p| &p.name == name) {
                out.push(Violation::new(name, "not a parameter of this algorithm"));
            }
        }
        let continuous = self.continuous_params(policy.algorithm);
        for p in &continuous {
            match policy.continuous.get(&p.name) {
                None => out.push(Violation::new(&p.name, "missing")),
                Some(&v) if !p.range.contains(v) => {
                    out.push(Violation::new(&p.name, &format!("{} out of domain ({v})", p.name)))
                }
                Some(_) => {}
            }
        }
        for name in policy.continuous.keys() {
            if !continuous.iter().any(|p| &p.name == name) {
                out.push(Violation::new(name, "not a parameter of this algorithm"));
            }
        }
        out
    }

    pub fn encode_continuous(&self, policy: &PipelinePolicy) -> Result<ContinuousCode, SpaceError> {
        self.spec_or_err(policy.algorithm)?;
        self.continuous_params(policy.algorithm)
            .into_iter()
            .map(|p| {
                policy
                    .continuous
                    .get(&p.name)
                    .map(|&v| p.range.encode(v))
                    .ok_or_else(|| SpaceError::InvalidPolicy(format!("missing {}", p.name)))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(ContinuousCode)
    }

    /// Maps a unit-cube code (clamped first) to named continuous values.
    pub fn decode_continuous(
        &self,
        algorithm: Algorithm,
        code: &[f64],
    ) -> Result<BTreeMap<String, f64>, SpaceError> {
        self.spec_or_err(algorithm)?;
        let params = self.continuous_params(algorithm);
        if params.len() != code.len() {
            return Err(SpaceError::DimensionMismatch {
                expected: params.len(),
                got: code.len(),
            });
        }
        Ok(params
            .into_iter()
            .zip(code)
            .map(|(p, &u)| (p.name.clone(), p.range.decode(u)))
            .collect())
    }
}

/// The default eight-algorithm space.
pub fn default_space() -> SearchSpace {
    use Algorithm::*;
    fn d(name: &str, choices: impl IntoIterator<Item = i64>) -> DiscreteParam {
        DiscreteParam::new(name, choices)
    }
    let c = ContinuousParam::new;
    let algorithms = vec![
        AlgorithmSpec {
            algorithm: Knn,
            discrete: vec![d("k", 1..=50), d("method", 0..=2)],
            continuous: vec![],
        },
        AlgorithmSpec {
            algorithm: Lof,
            discrete: vec![d("k", 2..=50)],
            continuous: vec![],
        },
        AlgorithmSpec {
            algorithm: Hbos,
            discrete: vec![d("n_bins", 5..=100)],
            continuous: vec![c("alpha", ContinuousRange::linear(0.0, 1.0))],
        },
        AlgorithmSpec {
            algorithm: Iforest,
            discrete: vec![d("n_trees", 10..=200), d("subsample", [32, 64, 128, 256])],
            continuous: vec![],
        },
        AlgorithmSpec {
            algorithm: Pca,
            discrete: vec![],
            continuous: vec![c("variance_fraction", ContinuousRange::linear(0.5, 1.0))],
        },
        AlgorithmSpec {
            algorithm: Cblof,
            discrete: vec![d("n_clusters", 2..=20)],
            continuous: vec![
                c("alpha", ContinuousRange::linear(0.51, 0.99)),
                c("beta", ContinuousRange::log(1.01, 20.0)),
            ],
        },
        AlgorithmSpec {
            algorithm: RobustCov,
            discrete: vec![],
            continuous: vec![c("support_fraction", ContinuousRange::linear(0.5, 1.0))],
        },
        AlgorithmSpec {
            algorithm: Autoencoder,
            discrete: vec![d("hidden", 2..=32), d("epochs", [50, 100, 200])],
            continuous: vec![c("lr", ContinuousRange::log(1e-4, 1e-1))],
        },
    ];
    SearchSpace::new(
        algorithms,
        vec![d(WINDOW_W, [1, 5, 10, 20])],
        vec![c(CONTAMINATION, ContinuousRange::log(0.001, 0.25))],
    )
    .expect("default space is well-formed")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub param: String,
    pub message: String,
}

impl Violation {
    fn new(param: &str, message: &str) -> Self {
        Self {
            param: param.to_string(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.param, self.message)
    }
}

/// Unit-cube image of a policy's continuous parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousCode(pub Vec<f64>);

/// One point of the search space. Serialises as
/// `{"algorithm":"HBOS","discrete":{...},"continuous":{...},"seed":0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelinePolicy {
    pub algorithm: Algorithm,
    pub discrete: BTreeMap<String, i64>,
    pub continuous: BTreeMap<String, f64>,
    pub seed: u64,
}

impl PipelinePolicy {
    pub fn contamination(&self) -> Option<f64> {
        self.continuous.get(CONTAMINATION).copied()
    }

    pub fn window_w(&self) -> Option<usize> {
        self.discrete.get(WINDOW_W).and_then(|&w| usize::try_from(w).ok())
    }

    /// The detector part of the policy (shared parameters stripped).
    pub fn detector_config(&self) -> DetectorConfig {
        DetectorConfig {
            algorithm: self.algorithm,
            discrete: self
                .discrete
                .iter()
                .filter(|(k, _)| k.as_str() != WINDOW_W)
                .map(|(k, &v)| (k.clone(), v))
                .collect(),
            continuous: self
                .continuous
                .iter()
                .filter(|(k, _)| k.as_str() != CONTAMINATION)
                .map(|(k, &v)| (k.clone(), v))
                .collect(),
            seed: self.seed,
        }
    }
}
