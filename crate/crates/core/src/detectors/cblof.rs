//! Cluster-based local outlier factor.
//!
//! k-means (k-means++ seeding, 10 restarts, at most 100 Lloyd iterations,
//! lowest inertia wins) followed by the large/small split: clusters sorted by
//! size descending, the boundary is the first `b` where either the cumulative
//! size reaches `alpha * n` or `|C_b| / |C_{b+1}| >= beta`. Clusters of the
//! same size as the last large cluster are large as well, so equal-sized
//! clusters are never split by the boundary.
//!
//! Score: distance to the own centroid for large-cluster members, distance to
//! the nearest large centroid otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ensure_rows, Algorithm, DetectorError, OutlierModel};
use crate::dataset::FeatureMatrix;
use crate::util::{dist, sq_dist};

pub const KMEANS_RESTARTS: usize = 10;
pub const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
}

fn nearest_centroid(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(j, c)| (j, sq_dist(row, c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn plus_plus_init(x: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut centroids = vec![x.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = x.iter_rows().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = x.row(pick).to_vec();
        for (i, r) in x.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// One seeded Lloyd run; `None` if a cluster ends up empty.
fn lloyd(x: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng) -> Option<KMeans> {
    let mut centroids = plus_plus_init(x, k, rng);
    let mut assignment = vec![usize::MAX; x.rows()];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, r) in x.iter_rows().enumerate() {
            let (j, _) = nearest_centroid(r, &centroids);
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; x.cols()]; k];
        let mut counts = vec![0usize; k];
        for (i, r) in x.iter_rows().enumerate() {
            counts[assignment[i]] += 1;
            for (s, v) in sums[assignment[i]].iter_mut().zip(r) {
                *s += v;
            }
        }
        if counts.contains(&0) {
            return None;
        }
        for ((c, s), &m) in centroids.iter_mut().zip(sums).zip(&counts) {
            *c = s.into_iter().map(|v| v / m as f64).collect();
        }
        if !changed {
            break;
        }
    }
    let inertia = x
        .iter_rows()
        .zip(&assignment)
        .map(|(r, &j)| sq_dist(r, &centroids[j]))
        .sum();
    Some(KMeans {
        centroids,
        assignment,
        inertia,
    })
}

/// Best of [`KMEANS_RESTARTS`] seeded runs, or `None` if every run emptied a cluster.
pub fn kmeans(x: &FeatureMatrix, k: usize, seed: u64) -> Option<KMeans> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..KMEANS_RESTARTS)
        .filter_map(|_| lloyd(x, k, &mut rng))
        .reduce(|best, cur| if cur.inertia < best.inertia { cur } else { best })
}

/// Large-cluster flags for the given cluster sizes.
pub fn large_clusters(sizes: &[usize], alpha: f64, beta: f64) -> Vec<bool> {
    let n: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    let mut boundary = order.len() - 1;
    let mut cum = 0usize;
    for (pos, &c) in order.iter().enumerate() {
        cum += sizes[c];
        let next = order.get(pos + 1).map(|&j| sizes[j]);
        let enough_mass = cum as f64 >= alpha * n as f64;
        let big_gap = next.is_some_and(|s| sizes[c] as f64 >= beta * s as f64);
        if enough_mass || big_gap {
            boundary = pos;
            break;
        }
    }
    let cutoff = sizes[order[boundary]];
    sizes.iter().map(|&s| s >= cutoff).collect()
}

#[derive(Debug, Clone)]
pub struct Cblof {
    centroids: Vec<Vec<f64>>,
    large: Vec<bool>,
}

impl Cblof {
    pub fn fit(
        x: &FeatureMatrix,
        n_clusters: usize,
        alpha: f64,
        beta: f64,
        seed: u64,
    ) -> Result<(Self, Vec<f64>), DetectorError> {
        if n_clusters < 2 {
            return Err(DetectorError::InvalidParameter("cblof n_clusters must be >= 2".into()));
        }
        if !(alpha > 0.5 && alpha < 1.0) || !(beta > 1.0) {
            return Err(DetectorError::InvalidParameter(format!(
                "cblof alpha {alpha} must lie in (0.5, 1) and beta {beta} exceed 1"
            )));
        }
        ensure_rows(Algorithm::Cblof, x, 2)?;
        let mut k = n_clusters.min(x.rows());
        let km = loop {
            if let Some(km) = kmeans(x, k, seed) {
                break km;
            }
            if k <= 2 {
                return Err(DetectorError::ClusteringFailed);
            }
            k -= 1;
        };
        let mut sizes = vec![0usize; k];
        for &j in &km.assignment {
            sizes[j] += 1;
        }
        let model = Self {
            large: large_clusters(&sizes, alpha, beta),
            centroids: km.centroids,
        };
        let scores = x
            .iter_rows()
            .zip(&km.assignment)
            .map(|(r, &j)| model.score_assigned(r, j))
            .collect();
        Ok((model, scores))
    }

    fn score_assigned(&self, row: &[f64], cluster: usize) -> f64 {
        if self.large[cluster] {
            return dist(row, &self.centroids[cluster]);
        }
        self.centroids
            .iter()
            .zip(&self.large)
            .filter(|(_, &l)| l)
            .map(|(c, _)| dist(row, c))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn large_flags(&self) -> &[bool] {
        &self.large
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }
}

impl OutlierModel for Cblof {
    fn score(&self, x: &FeatureMatrix) -> Vec<f64> {
        x.iter_rows()
            .map(|r| self.score_assigned(r, nearest_centroid(r, &self.centroids).0))
            .collect()
    }
}

pub fn cblof_scores(
    x: &FeatureMatrix,
    n_clusters: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
) -> Result<Vec<f64>, DetectorError> {
    Cblof::fit(x, n_clusters, alpha, beta, seed).map(|(_, s)| s)
}
