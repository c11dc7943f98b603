use odsearch_core::evaluation::{
    confusion, f1_score, nab_score, perfect_detections, scaled_sigmoid, ConfusionCounts, NabProfile,
};
use odsearch_core::{AnomalyWindow, LabelVector, TimeSeriesDataset};
use proptest::prelude::*;

/// 100 points with one 30-point window at indices 40..=69.
fn fixture() -> TimeSeriesDataset {
    TimeSeriesDataset::new("f", (0..100).collect(), vec![0.0; 100], vec![AnomalyWindow::new(40, 69)]).unwrap()
}

fn windowed(n: usize, windows: &[(usize, usize)]) -> TimeSeriesDataset {
    let w = windows.iter().map(|&(s, e)| AnomalyWindow::new(s as i64, e as i64)).collect();
    TimeSeriesDataset::new("w", (0..n as i64).collect(), vec![0.0; n], w).unwrap()
}

fn single(n: usize, i: usize) -> Vec<bool> {
    let mut d = vec![false; n];
    d[i] = true;
    d
}

/// Non-overlapping, non-touching windows inside `0..n`.
fn windows_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (20usize..200).prop_flat_map(|n| {
        prop::collection::vec((0usize..n, 0usize..15), 1..6).prop_map(move |raw| {
            let mut starts: Vec<(usize, usize)> = raw.into_iter().map(|(s, w)| (s, (s + w).min(n - 1))).collect();
            starts.sort_unstable();
            let mut out: Vec<(usize, usize)> = Vec::new();
            for (s, e) in starts {
                if out.last().is_none_or(|&(_, pe)| s > pe + 1) {
                    out.push((s, e));
                }
            }
            (n, out)
        })
    })
}

#[test]
fn perfect_and_null_calibrate_every_profile() {
    let ds = fixture();
    for p in NabProfile::ALL {
        let perfect = nab_score(&ds, &perfect_detections(&ds), &p).unwrap();
        let null = nab_score(&ds, &[false; 100], &p).unwrap();
        assert!((perfect - 100.0).abs() < 1e-9, "{:?}: {perfect}", p.name);
        assert!(null.abs() < 1e-9, "{:?}: {null}", p.name);
    }
}

#[test]
fn shifting_one_detection_inside_the_window_moves_little() {
    let ds = fixture();
    for p in NabProfile::ALL {
        for i in 40..69 {
            let a = nab_score(&ds, &single(100, i), &p).unwrap();
            let b = nab_score(&ds, &single(100, i + 1), &p).unwrap();
            assert!((a - b).abs() < 5.0, "{:?} at {i}: {a} -> {b}", p.name);
        }
    }
}

#[test]
fn shifting_one_false_alarm_moves_little() {
    let ds = fixture();
    for p in NabProfile::ALL {
        for i in (0..39).chain(70..99) {
            let a = nab_score(&ds, &single(100, i), &p).unwrap();
            let b = nab_score(&ds, &single(100, i + 1), &p).unwrap();
            assert!((a - b).abs() < 5.0, "{:?} at {i}: {a} -> {b}", p.name);
        }
    }
}

#[test]
fn earliest_detection_only() {
    let ds = fixture();
    let mut d = single(100, 45);
    let once = nab_score(&ds, &d, &NabProfile::STANDARD).unwrap();
    d[60] = true;
    assert_eq!(nab_score(&ds, &d, &NabProfile::STANDARD).unwrap(), once);
}

#[test]
fn hand_computed_raw_values() {
    // window [40, 69]: detection at 69 sits at y = 0, sigma = 0
    let ds = fixture();
    let p = NabProfile::STANDARD;
    let s = nab_score(&ds, &single(100, 69), &p).unwrap();
    let perfect = scaled_sigmoid(-1.0);
    let expected = 100.0 * (0.0 + 1.0) / (perfect + 1.0);
    assert!((s - expected).abs() < 1e-9);
    // false alarm before any window: raw = -a_fp - a_fn
    let s = nab_score(&ds, &single(100, 10), &p).unwrap();
    let expected = 100.0 * (-0.11 - 1.0 + 1.0) / (perfect + 1.0);
    assert!((s - expected).abs() < 1e-9);
}

proptest! {
    #[test]
    fn calibration_on_random_windows((n, w) in windows_strategy()) {
        let ds = windowed(n, &w);
        for p in NabProfile::ALL {
            let perfect = nab_score(&ds, &perfect_detections(&ds), &p).unwrap();
            let null = nab_score(&ds, &vec![false; n], &p).unwrap();
            prop_assert!((perfect - 100.0).abs() < 1e-9);
            prop_assert!(null.abs() < 1e-9);
        }
    }

    #[test]
    fn detecting_an_undetected_window_never_hurts(
        (n, w) in windows_strategy(),
        bits in prop::collection::vec(any::<bool>(), 200),
        pick in 0usize..1000,
        offset in 0usize..1000,
    ) {
        let ds = windowed(n, &w);
        let mut d: Vec<bool> = bits[..n].to_vec();
        let (s, e) = w[pick % w.len()];
        for b in &mut d[s..=e] {
            *b = false;
        }
        let i = s + offset % (e - s + 1);
        for p in NabProfile::ALL {
            let before = nab_score(&ds, &d, &p).unwrap();
            let mut after_d = d.clone();
            after_d[i] = true;
            let after = nab_score(&ds, &after_d, &p).unwrap();
            prop_assert!(after >= before - 1e-9, "{:?}: {before} -> {after}", p.name);
        }
    }

    #[test]
    fn sigmoid_shape(a in -5.0f64..5.0, b in -5.0f64..5.0) {
        prop_assert!(scaled_sigmoid(a).abs() < 1.0 || a.abs() > 7.0);
        prop_assert_eq!(scaled_sigmoid(-a), -scaled_sigmoid(a));
        if a < b && b - a > 1e-6 {
            prop_assert!(scaled_sigmoid(a) > scaled_sigmoid(b));
        }
    }

    #[test]
    fn f1_properties(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
        let c = |tp, fp, fn_| ConfusionCounts { tp, fp, fn_, tn: 0 };
        let f = f1_score(&c(tp, fp, fn_));
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(f, f1_score(&c(tp, fn_, fp)));
        prop_assert!(f1_score(&c(tp + 1, fp, fn_)) >= f);
    }

    #[test]
    fn confusion_totals(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 0..100)) {
        let pred: Vec<bool> = pairs.iter().map(|p| p.0).collect();
        let labels = LabelVector(pairs.iter().map(|p| p.1).collect());
        let c = confusion(&pred, &labels).unwrap();
        prop_assert_eq!(c.total(), pairs.len());
        prop_assert_eq!(c.tp + c.fn_, labels.positives());
    }
}
