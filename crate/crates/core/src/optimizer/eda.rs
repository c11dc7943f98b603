//! Estimation-of-distribution model over the discrete block: one smoothed
//! categorical over the algorithm roster and one per (algorithm, discrete
//! parameter), each refitted from the good trials.

use std::collections::BTreeMap;

use rand::Rng;

use super::parzen::{fit_categorical, ParzenDensity};
use super::TrialRecord;
use crate::detectors::Algorithm;
use crate::search_space::SearchSpace;

pub const DEFAULT_EPSILON: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
struct ParamDistribution {
    choices: Vec<i64>,
    density: ParzenDensity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdaState {
    algorithms: Vec<Algorithm>,
    algorithm_density: ParzenDensity,
    params: BTreeMap<Algorithm, Vec<(String, ParamDistribution)>>,
}

impl EdaState {
    pub fn uniform(space: &SearchSpace) -> Self {
        let algorithms: Vec<Algorithm> = space.algorithms().iter().map(|a| a.algorithm).collect();
        let params = algorithms
            .iter()
            .map(|&a| {
                let dists = space
                    .discrete_params(a)
                    .into_iter()
                    .map(|p| {
                        let dist = ParamDistribution {
                            choices: p.choices.clone(),
                            density: fit_categorical(&vec![0; p.choices.len()], 1.0),
                        };
                        (p.name.clone(), dist)
                    })
                    .collect();
                (a, dists)
            })
            .collect();
        Self {
            algorithm_density: fit_categorical(&vec![0; algorithms.len()], 1.0),
            algorithms,
            params,
        }
    }

    /// Refits every distribution from `good` with additive smoothing
    /// `(count + eps) / (m + K eps)`. Parameter distributions of algorithm `a`
    /// count only the good trials that chose `a`.
    pub fn update(&self, good: &[TrialRecord], epsilon: f64) -> Self {
        let mut counts = vec![0usize; self.algorithms.len()];
        for t in good {
            if let Some(i) = self.algorithms.iter().position(|&a| a == t.policy.algorithm) {
                counts[i] += 1;
            }
        }
        let params = self
            .params
            .iter()
            .map(|(&a, dists)| {
                let chose_a: Vec<&TrialRecord> =
                    good.iter().filter(|t| t.policy.algorithm == a).collect();
                let refit = dists
                    .iter()
                    .map(|(name, d)| {
                        let mut c = vec![0usize; d.choices.len()];
                        for t in &chose_a {
                            if let Some(k) = t
                                .policy
                                .discrete
                                .get(name)
                                .and_then(|v| d.choices.iter().position(|x| x == v))
                            {
                                c[k] += 1;
                            }
                        }
                        let dist = ParamDistribution {
                            choices: d.choices.clone(),
                            density: fit_categorical(&c, epsilon),
                        };
                        (name.clone(), dist)
                    })
                    .collect();
                (a, refit)
            })
            .collect();
        Self {
            algorithms: self.algorithms.clone(),
            algorithm_density: fit_categorical(&counts, epsilon),
            params,
        }
    }

    pub fn algorithm_probability(&self, a: Algorithm) -> f64 {
        self.algorithms
            .iter()
            .position(|&x| x == a)
            .map_or(0.0, |i| self.algorithm_density.pdf(i as f64))
    }

    /// Category weights of one discrete parameter of `a`, aligned with its choices.
    pub fn param_weights(&self, a: Algorithm, name: &str) -> Option<(&[i64], &[f64])> {
        let (_, d) = self.params.get(&a)?.iter().find(|(n, _)| n == name)?;
        Some((&d.choices, d.density.weights()?))
    }

    pub fn sample_algorithm<R: Rng + ?Sized>(&self, rng: &mut R) -> Algorithm {
        let w = self.algorithm_density.weights().expect("categorical");
        self.algorithms[draw(w, rng)]
    }

    /// Independent draw for every discrete parameter of `a` (shared ones included).
    pub fn propose<R: Rng + ?Sized>(&self, a: Algorithm, rng: &mut R) -> BTreeMap<String, i64> {
        self.params
            .get(&a)
            .map(|dists| {
                dists
                    .iter()
                    .map(|(name, d)| {
                        let w = d.density.weights().expect("categorical");
                        (name.clone(), d.choices[draw(w, rng)])
                    })
                    .collect()
            })
            .unwrap_or_default()
    }
}

fn draw<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search_space::{default_space, PipelinePolicy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trial(a: Algorithm, discrete: &[(&str, i64)]) -> TrialRecord {
        TrialRecord::new(
            1,
            PipelinePolicy {
                algorithm: a,
                discrete: discrete.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
                continuous: BTreeMap::new(),
                seed: 0,
            },
            0.5,
            0,
            None,
        )
    }

    #[test]
    fn hbos_concentration_formula() {
        let s = default_space();
        let good = vec![trial(Algorithm::Hbos, &[]); 3];
        let e = EdaState::uniform(&s).update(&good, 0.05);
        assert!((e.algorithm_probability(Algorithm::Hbos) - 3.05 / 3.4).abs() < 1e-12);
        assert!((e.algorithm_probability(Algorithm::Knn) - 0.05 / 3.4).abs() < 1e-12);
    }

    #[test]
    fn empty_good_is_uniform() {
        let s = default_space();
        let e = EdaState::uniform(&s).update(&[], 0.05);
        for a in Algorithm::ALL {
            assert!((e.algorithm_probability(a) - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn near_degenerate_distribution_draws_its_atom() {
        let s = default_space();
        let good = vec![trial(Algorithm::Lof, &[("k", 7), ("window_w", 10)]); 4];
        let e = EdaState::uniform(&s).update(&good, 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            assert_eq!(e.sample_algorithm(&mut rng), Algorithm::Lof);
            let p = e.propose(Algorithm::Lof, &mut rng);
            assert_eq!(p["k"], 7);
            assert_eq!(p["window_w"], 10);
        }
    }

    #[test]
    fn proposals_are_deterministic() {
        let s = default_space();
        let e = EdaState::uniform(&s);
        let a = e.propose(Algorithm::Autoencoder, &mut ChaCha8Rng::seed_from_u64(3));
        let b = e.propose(Algorithm::Autoencoder, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }
}
