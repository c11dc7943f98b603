use odsearch_core::detectors::{
    self, cblof, hbos_scores, knn_scores, lof_scores, pca::Pca, threshold_by_contamination, Algorithm,
    DetectorConfig, KnnAggregate,
};
use odsearch_core::FeatureMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
    FeatureMatrix::from_rows(rows).unwrap()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Distances from row `i` to every other row, ascending, with index ties.
fn neighbours(rows: &[Vec<f64>], i: usize) -> Vec<(f64, usize)> {
    let mut d: Vec<(f64, usize)> = (0..rows.len())
        .filter(|&j| j != i)
        .map(|j| (euclid(&rows[i], &rows[j]), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d
}

fn knn_oracle(rows: &[Vec<f64>], k: usize, agg: KnnAggregate) -> Vec<f64> {
    (0..rows.len())
        .map(|i| {
            let d: Vec<f64> = neighbours(rows, i).into_iter().take(k).map(|p| p.0).collect();
            match agg {
                KnnAggregate::Largest => d[k - 1],
                KnnAggregate::Mean => d.iter().sum::<f64>() / k as f64,
                KnnAggregate::Median => {
                    if k % 2 == 1 {
                        d[k / 2]
                    } else {
                        0.5 * (d[k / 2 - 1] + d[k / 2])
                    }
                }
            }
        })
        .collect()
}

fn lof_oracle(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = rows.len();
    let nb: Vec<Vec<(f64, usize)>> = (0..n).map(|i| neighbours(rows, i)[..k].to_vec()).collect();
    let kdist: Vec<f64> = nb.iter().map(|v| v[k - 1].0).collect();
    let lrd: Vec<f64> = (0..n)
        .map(|p| {
            let reach: f64 = nb[p].iter().map(|&(d, o)| d.max(kdist[o])).sum();
            k as f64 / reach
        })
        .collect();
    (0..n)
        .map(|p| nb[p].iter().map(|&(_, o)| lrd[o]).sum::<f64>() / (k as f64 * lrd[p]))
        .collect()
}

fn rows_strategy(max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=3).prop_flat_map(move |d| {
        prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), 6..=max_n)
    })
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        assert!((x - y).abs() <= tol * (1.0 + y.abs()), "index {i}: {x} vs {y}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn knn_matches_brute_force(rows in rows_strategy(30), k_seed in 0usize..1000, method in 0i64..3) {
        let k = 1 + k_seed % (rows.len() - 1);
        let agg = KnnAggregate::from_code(method).unwrap();
        let got = knn_scores(&matrix(&rows), k, agg).unwrap();
        assert_close(&got, &knn_oracle(&rows, k, agg), 1e-9);
    }

    #[test]
    fn lof_matches_brute_force(rows in rows_strategy(30), k_seed in 0usize..1000) {
        let k = 2 + k_seed % (rows.len() - 2);
        let got = lof_scores(&matrix(&rows), k).unwrap();
        assert_close(&got, &lof_oracle(&rows, k), 1e-9);
    }

    #[test]
    fn contamination_flags_exact_count(scores in prop::collection::vec(-5.0f64..5.0, 1..300), c in 0.0001f64..0.5) {
        let p = threshold_by_contamination(&scores, c);
        let expected = ((c * scores.len() as f64).ceil() as usize).clamp(1, scores.len());
        prop_assert_eq!(p.flagged(), expected);
        let lowest_flagged = scores.iter().zip(&p.bits).filter(|(_, &b)| b).map(|(s, _)| *s).fold(f64::INFINITY, f64::min);
        let highest_unflagged = scores.iter().zip(&p.bits).filter(|(_, &b)| !b).map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lowest_flagged >= highest_unflagged);
    }

    #[test]
    fn permutation_equivariance(rows in rows_strategy(25), shift in 1usize..24) {
        let n = rows.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        for cfg in exchangeable_configs() {
            let a = detectors::fit_score(&cfg, &matrix(&rows));
            let b = detectors::fit_score(&cfg, &matrix(&permuted));
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    let expected: Vec<f64> = perm.iter().map(|&i| a.0[i]).collect();
                    assert_close(&b.0, &expected, 1e-9);
                }
                (Err(_), Err(_)) => {}
                (a, b) => panic!("{:?}: {a:?} vs {b:?}", cfg.algorithm),
            }
        }
    }

    #[test]
    fn translation_invariance(rows in rows_strategy(25), offset in -50.0f64..50.0) {
        let moved: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + offset).collect()).collect();
        let mut configs = exchangeable_configs();
        configs.retain(|c| c.algorithm != Algorithm::Hbos);
        configs.push(mid_config(Algorithm::Cblof, 3).with_discrete("n_clusters", 3));
        for cfg in configs {
            let a = detectors::fit_score(&cfg, &matrix(&rows));
            let b = detectors::fit_score(&cfg, &matrix(&moved));
            if let (Ok(a), Ok(b)) = (a, b) {
                for (x, y) in a.0.iter().zip(&b.0) {
                    prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{:?}: {x} vs {y}", cfg.algorithm);
                }
            }
        }
    }
}

fn exchangeable_configs() -> Vec<DetectorConfig> {
    vec![
        DetectorConfig::new(Algorithm::Knn, 0).with_discrete("k", 3).with_discrete("method", 1),
        DetectorConfig::new(Algorithm::Lof, 0).with_discrete("k", 4),
        DetectorConfig::new(Algorithm::Hbos, 0).with_discrete("n_bins", 7).with_continuous("alpha", 0.3),
        DetectorConfig::new(Algorithm::Pca, 0).with_continuous("variance_fraction", 0.8),
        DetectorConfig::new(Algorithm::RobustCov, 0).with_continuous("support_fraction", 1.0),
    ]
}

/// Hand histogram: `floor((v - min) / (max - min) * bins)` clamped into range,
/// height `(count + alpha) / (max count + alpha)`.
fn hbos_oracle(rows: &[Vec<f64>], bins: usize, alpha: f64) -> Vec<f64> {
    let d = rows[0].len();
    let mut scores = vec![0.0; rows.len()];
    for c in 0..d {
        let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi == lo {
            continue;
        }
        let bin_of = |v: f64| (((v - lo) / (hi - lo) * bins as f64).floor() as usize).min(bins - 1);
        let mut counts = vec![0.0; bins];
        for &v in &col {
            counts[bin_of(v)] += 1.0;
        }
        let peak = counts.iter().cloned().fold(0.0, f64::max);
        for (s, &v) in scores.iter_mut().zip(&col) {
            *s -= ((counts[bin_of(v)] + alpha) / (peak + alpha)).ln();
        }
    }
    scores
}

#[test]
fn hbos_matches_hand_histograms() {
    for fixture in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(fixture);
        let n = rng.random_range(10..80);
        let d = rng.random_range(1..4);
        let bins = rng.random_range(2..20);
        let alpha = [0.0, 0.1, 0.5, 1.0][fixture as usize % 4];
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0).collect())
            .collect();
        if fixture % 5 == 0 {
            for r in &mut rows {
                r[0] = 2.5;
            }
        }
        let got = hbos_scores(&matrix(&rows), bins, alpha).unwrap();
        assert_close(&got, &hbos_oracle(&rows, bins, alpha), 1e-12);
    }
}

#[test]
fn hbos_tiny_hand_example() {
    // bins over [0, 4] width 2: [0, 1] in bin 0, [3, 4] in bin 1, heights equal
    let rows = vec![vec![0.0], vec![1.0], vec![3.0], vec![4.0]];
    let s = hbos_scores(&matrix(&rows), 2, 0.0).unwrap();
    assert!(s.iter().all(|&v| v.abs() < 1e-15));
    // three in bin 0 and one in bin 1
    let rows = vec![vec![0.0], vec![0.5], vec![1.0], vec![4.0]];
    let s = hbos_scores(&matrix(&rows), 2, 0.0).unwrap();
    assert!((s[3] - 3f64.ln()).abs() < 1e-12);
    assert_eq!(s[0], 0.0);
}

#[test]
fn pca_matches_explicit_two_by_two_eigendecomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rows: Vec<Vec<f64>> = (0..50)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            vec![2.0 * a + 0.3 * b, 0.5 * b - 0.2 * a]
        })
        .collect();
    let n = rows.len() as f64;
    let mx = rows.iter().map(|r| r[0]).sum::<f64>() / n;
    let my = rows.iter().map(|r| r[1]).sum::<f64>() / n;
    let sxx = rows.iter().map(|r| (r[0] - mx).powi(2)).sum::<f64>() / n;
    let syy = rows.iter().map(|r| (r[1] - my).powi(2)).sum::<f64>() / n;
    let sxy = rows.iter().map(|r| (r[0] - mx) * (r[1] - my)).sum::<f64>() / n;
    // closed-form eigenpairs of [[sxx, sxy], [sxy, syy]]
    let tr = sxx + syy;
    let disc = ((sxx - syy).powi(2) / 4.0 + sxy * sxy).sqrt();
    let (big, small) = (tr / 2.0 + disc, tr / 2.0 - disc);
    let v = [sxy, small - sxx];
    let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let minor = [v[0] / norm, v[1] / norm];
    let fraction = big / tr - 1e-6;

    let (pca, scores) = Pca::fit(&matrix(&rows), fraction).unwrap();
    assert_eq!(pca.retained_components(), 1);
    for (r, s) in rows.iter().zip(&scores) {
        let proj = (r[0] - mx) * minor[0] + (r[1] - my) * minor[1];
        assert!((s - proj * proj).abs() < 1e-10, "{s} vs {}", proj * proj);
    }
}

fn gaussian_rows(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

#[test]
fn iforest_isolates_a_ten_sigma_point() {
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = gaussian_rows(256, 2, &mut rng);
        rows[77] = vec![10.0, 10.0];
        let cfg = DetectorConfig::new(Algorithm::Iforest, seed)
            .with_discrete("n_trees", 100)
            .with_discrete("subsample", 256);
        let s = detectors::fit_score(&cfg, &matrix(&rows)).unwrap();
        assert_eq!(s.argmax(), Some(77), "seed {seed}");
        assert!(s.0.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}

#[test]
fn cblof_separates_blobs_and_scores_stray_point_highest() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rows = Vec::new();
    for (cx, cy, n) in [(0.0, 0.0, 60), (10.0, 0.0, 50), (0.0, 10.0, 40)] {
        for _ in 0..n {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            rows.push(vec![cx + 0.5 * a, cy + 0.5 * b]);
        }
    }
    rows.push(vec![25.0, 25.0]);
    let x = matrix(&rows);
    let km = cblof::kmeans(&x, 3, 0).unwrap();
    let blob_ids = [km.assignment[0], km.assignment[60], km.assignment[110]];
    assert!(blob_ids[0] != blob_ids[1] && blob_ids[1] != blob_ids[2] && blob_ids[0] != blob_ids[2]);
    for (i, &j) in km.assignment[..150].iter().enumerate() {
        let blob = if i < 60 { 0 } else if i < 110 { 1 } else { 2 };
        assert_eq!(j, blob_ids[blob], "row {i}");
    }
    let cfg = DetectorConfig::new(Algorithm::Cblof, 0)
        .with_discrete("n_clusters", 3)
        .with_continuous("alpha", 0.9)
        .with_continuous("beta", 5.0);
    let s = detectors::fit_score(&cfg, &x).unwrap();
    assert_eq!(s.argmax(), Some(rows.len() - 1));
}

#[test]
fn large_cluster_rules() {
    // alpha rule: 50 + 30 >= 0.9 * 100 fails, 50 + 30 + 15 passes at position 2
    assert_eq!(cblof::large_clusters(&[50, 30, 15, 5], 0.9, 5.0), vec![true, true, true, false]);
    // beta rule fires first: 50 / 10 >= 5 at position 0
    assert_eq!(cblof::large_clusters(&[50, 10, 5, 5], 0.99, 5.0), vec![true, false, false, false]);
}

#[test]
fn robust_covariance_ignores_contaminants() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rows = gaussian_rows(200, 2, &mut rng);
    for r in rows.iter_mut().take(20) {
        r[0] += 30.0;
        r[1] -= 30.0;
    }
    let cfg = DetectorConfig::new(Algorithm::RobustCov, 0).with_continuous("support_fraction", 0.75);
    let s = detectors::fit_score(&cfg, &matrix(&rows)).unwrap();
    let min_contaminated = s.0[..20].iter().cloned().fold(f64::INFINITY, f64::min);
    let max_clean = s.0[20..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(min_contaminated > max_clean);
}

fn mid_config(a: Algorithm, seed: u64) -> DetectorConfig {
    let c = DetectorConfig::new(a, seed);
    match a {
        Algorithm::Knn => c.with_discrete("k", 5).with_discrete("method", 0),
        Algorithm::Lof => c.with_discrete("k", 5),
        Algorithm::Hbos => c.with_discrete("n_bins", 10).with_continuous("alpha", 0.5),
        Algorithm::Iforest => c.with_discrete("n_trees", 50).with_discrete("subsample", 64),
        Algorithm::Pca => c.with_continuous("variance_fraction", 0.9),
        Algorithm::Cblof => c
            .with_discrete("n_clusters", 4)
            .with_continuous("alpha", 0.9)
            .with_continuous("beta", 5.0),
        Algorithm::RobustCov => c.with_continuous("support_fraction", 0.75),
        Algorithm::Autoencoder => c
            .with_discrete("hidden", 2)
            .with_discrete("epochs", 50)
            .with_continuous("lr", 0.01),
    }
}

#[test]
fn every_detector_is_deterministic_and_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = matrix(&gaussian_rows(60, 3, &mut rng));
    for a in Algorithm::ALL {
        let cfg = mid_config(a, 42);
        let s1 = detectors::fit_score(&cfg, &x).unwrap();
        let s2 = detectors::fit_score(&cfg, &x).unwrap();
        assert_eq!(s1.0.len(), 60, "{a}");
        assert!(s1.0.iter().all(|v| v.is_finite()), "{a}");
        assert_eq!(
            s1.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            s2.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            "{a}"
        );
    }
}

#[test]
fn out_of_sample_width_is_checked() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = matrix(&gaussian_rows(40, 2, &mut rng));
    let q = matrix(&gaussian_rows(5, 3, &mut rng));
    for a in Algorithm::ALL {
        let fitted = detectors::fit(&mid_config(a, 1), &x).unwrap();
        assert!(fitted.score(&q).is_err(), "{a}");
    }
}
