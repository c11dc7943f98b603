//! Isolation forest.
//!
//! Each tree isolates a subsample without replacement, splitting on a random
//! non-constant column at a uniform cut inside the node's range, up to depth
//! `ceil(log2(subsample))`. Score is `2^(-E[h(x)] / c(subsample))`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ensure_rows, Algorithm, DetectorError, OutlierModel};
use crate::dataset::FeatureMatrix;

/// Average unsuccessful-search path length in a binary search tree of `n`
/// nodes: `2 H(n-1) - 2 (n-1) / n` with the exact harmonic number.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let harmonic: f64 = (1..n).map(|i| 1.0 / i as f64).sum();
    2.0 * harmonic - 2.0 * (n - 1) as f64 / n as f64
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { size: usize },
    Split { col: usize, cut: f64, left: Box<Node>, right: Box<Node> },
}

impl Node {
    fn path_length(&self, x: &[f64], depth: usize) -> f64 {
        match self {
            Node::Leaf { size } => depth as f64 + average_path_length(*size),
            Node::Split { col, cut, left, right } => {
                if x[*col] < *cut {
                    left.path_length(x, depth + 1)
                } else {
                    right.path_length(x, depth + 1)
                }
            }
        }
    }
}

fn grow(x: &FeatureMatrix, idx: &mut [usize], depth: usize, limit: usize, rng: &mut ChaCha8Rng) -> Node {
    if idx.len() <= 1 || depth >= limit {
        return Node::Leaf { size: idx.len() };
    }
    let ranges: Vec<(usize, f64, f64)> = (0..x.cols())
        .filter_map(|c| {
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = x.row(i)[c];
                (lo.min(v), hi.max(v))
            });
            (hi > lo).then_some((c, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return Node::Leaf { size: idx.len() };
    }
    let (col, lo, hi) = ranges[rng.random_range(0..ranges.len())];
    let mut cut = rng.random_range(lo..hi);
    if cut <= lo {
        cut = 0.5 * (lo + hi);
    }
    let mut split = 0;
    for i in 0..idx.len() {
        if x.row(idx[i])[col] < cut {
            idx.swap(i, split);
            split += 1;
        }
    }
    let (l, r) = idx.split_at_mut(split);
    Node::Split {
        col,
        cut,
        left: Box::new(grow(x, l, depth + 1, limit, rng)),
        right: Box::new(grow(x, r, depth + 1, limit, rng)),
    }
}

#[derive(Debug, Clone)]
pub struct IsolationForest {
    trees: Vec<Node>,
    normaliser: f64,
}

impl IsolationForest {
    pub fn fit(
        x: &FeatureMatrix,
        n_trees: usize,
        subsample: usize,
        seed: u64,
    ) -> Result<(Self, Vec<f64>), DetectorError> {
        if n_trees == 0 {
            return Err(DetectorError::InvalidParameter("iforest n_trees must be >= 1".into()));
        }
        if subsample < 2 {
            return Err(DetectorError::InvalidParameter("iforest subsample must be >= 2".into()));
        }
        ensure_rows(Algorithm::Iforest, x, subsample)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let limit = (subsample as f64).log2().ceil() as usize;
        let trees = (0..n_trees)
            .map(|_| {
                let mut idx = sample(&mut rng, x.rows(), subsample).into_vec();
                grow(x, &mut idx, 0, limit, &mut rng)
            })
            .collect();
        let model = Self {
            trees,
            normaliser: average_path_length(subsample),
        };
        let scores = model.score(x);
        Ok((model, scores))
    }

    pub fn mean_path_length(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.path_length(row, 0)).sum::<f64>() / self.trees.len() as f64
    }
}

impl OutlierModel for IsolationForest {
    fn score(&self, x: &FeatureMatrix) -> Vec<f64> {
        x.iter_rows()
            .map(|r| 2f64.powf(-self.mean_path_length(r) / self.normaliser))
            .collect()
    }
}

pub fn iforest_scores(
    x: &FeatureMatrix,
    n_trees: usize,
    subsample: usize,
    seed: u64,
) -> Result<Vec<f64>, DetectorError> {
    IsolationForest::fit(x, n_trees, subsample, seed).map(|(_, s)| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normaliser_values() {
        assert_eq!(average_path_length(1), 0.0);
        assert_eq!(average_path_length(2), 1.0);
        // 2 (1 + 1/2) - 4/3
        assert!((average_path_length(3) - (3.0 - 4.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn expected_depth_equal_to_normaliser_scores_half() {
        let f = IsolationForest {
            trees: vec![Node::Leaf { size: 2 }],
            normaliser: 1.0,
        };
        let x = FeatureMatrix::from_rows(&[vec![0.0]]).unwrap();
        assert_eq!(f.score(&x), vec![0.5]);
    }

    #[test]
    fn deterministic_per_seed() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 * 0.37).sin()]).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        assert_eq!(iforest_scores(&x, 20, 16, 3).unwrap(), iforest_scores(&x, 20, 16, 3).unwrap());
        assert_ne!(iforest_scores(&x, 20, 16, 3).unwrap(), iforest_scores(&x, 20, 16, 4).unwrap());
    }
}
