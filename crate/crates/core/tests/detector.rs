use flowsentry::detector::{calibrate_top_n, detect_events, merge_marks, ScoreSeries, DEFAULT_GAP};
use flowsentry::diff::seeded_rng;
use proptest::prelude::*;
use rand::Rng;

fn series(flow: usize, scores: Vec<f64>) -> ScoreSeries {
    ScoreSeries { flow: Some(flow), method: "m".into(), offset: 0, scores, delta: 1.0 }
}

/// Independent grouping: walk the samples and close a run after `gap`
/// consecutive unmarked samples.
fn naive_events(scores: &[f64], threshold: f64, gap: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    let mut open: Option<(usize, usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s > threshold {
            open = match open {
                Some((a, b, p)) if i - b < gap => Some((a, i, p.max(s))),
                Some(run) => {
                    out.push(run);
                    Some((i, i, s))
                }
                None => Some((i, i, s)),
            };
        }
    }
    out.extend(open);
    out
}

#[test]
fn thirty_minute_gap_at_five_minute_cadence() {
    assert_eq!(DEFAULT_GAP * 300, 30 * 60);
    assert_eq!(merge_marks(&[10, 15], DEFAULT_GAP), vec![(10, 15)]);
    assert_eq!(merge_marks(&[10, 16], DEFAULT_GAP), vec![(10, 10), (16, 16)]);
}

#[test]
fn calibration_agrees_with_brute_force_sweep() {
    let mut rng = seeded_rng(37);
    let mut all = Vec::new();
    let mut peaks = Vec::new();
    for flow in 0..4 {
        let mut s: Vec<f64> = (0..600).map(|_| rng.random_range(0.0..0.4)).collect();
        let count = if flow < 3 { 9 } else { 10 };
        for e in 0..count {
            let start = 20 + e * 60;
            let len = rng.random_range(1..6);
            for v in &mut s[start..start + len] {
                *v = rng.random_range(1.0..2.0);
            }
            let peak = rng.random_range(2.0..50.0);
            s[start + rng.random_range(0..len)] = peak;
            peaks.push((peak, flow));
        }
        all.push(series(flow, s));
    }
    assert_eq!(peaks.len(), 37);
    let mut levels: Vec<f64> = all.iter().flat_map(|s| s.scores.iter().copied()).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    for n in [1, 10, 37] {
        let brute = levels
            .iter()
            .map(|&d| all.iter().map(|s| naive_events(&s.scores, d * (1.0 - 1e-12), 6).len()).sum::<usize>())
            .find(|&c| c >= n)
            .unwrap();
        assert_eq!(brute, n);
        let c = calibrate_top_n(&all, n, 6).unwrap();
        assert_eq!(c.events.len(), n);
        assert_eq!(c.trimmed, 0);
        let mut got: Vec<f64> = c.events.iter().map(|e| e.peak_score * c.delta).collect();
        got.sort_by(|a, b| b.total_cmp(a));
        let mut want: Vec<f64> = peaks.iter().map(|p| p.0).collect();
        want.sort_by(|a, b| b.total_cmp(a));
        want.truncate(n);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12 * w, "{g} vs {w}");
        }
    }
}

#[test]
fn raising_delta_can_split_an_event() {
    // The bridging mark at 14 drops out first, turning one event into two.
    let mut s = vec![0.0; 30];
    s[10] = 3.0;
    s[14] = 1.5;
    s[18] = 3.0;
    let base = series(0, s);
    assert_eq!(detect_events(&base.with_delta(1.0), 6).len(), 1);
    assert_eq!(detect_events(&base.with_delta(2.0), 6).len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn grouping_is_idempotent(raw in proptest::collection::btree_set(0usize..400, 0..60), gap in 1usize..12) {
        let marks: Vec<usize> = raw.into_iter().collect();
        let runs = merge_marks(&marks, gap);
        let covered: Vec<usize> = runs.iter().flat_map(|&(a, b)| a..=b).collect();
        prop_assert_eq!(merge_marks(&covered, gap), runs.clone());
        for w in runs.windows(2) {
            prop_assert!(w[1].0 - w[0].1 >= gap);
        }
    }

    #[test]
    fn grouping_matches_naive_walk(scores in proptest::collection::vec(0.0f64..2.0, 1..200), gap in 1usize..10) {
        let events = detect_events(&series(0, scores.clone()), gap);
        let naive = naive_events(&scores, 1.0, gap);
        prop_assert_eq!(events.len(), naive.len());
        for (e, (a, b, p)) in events.iter().zip(naive) {
            prop_assert_eq!((e.start, e.end), (a, b));
            prop_assert_eq!(e.peak_score, p);
        }
    }

    #[test]
    fn doubling_delta_never_adds_marks(scores in proptest::collection::vec(0.0f64..4.0, 1..120), delta in 0.1f64..3.0) {
        let s = series(0, scores);
        let marks = |d: f64| s.with_delta(d).scores.iter().filter(|&&v| v > 1.0).count();
        prop_assert!(marks(2.0 * delta) <= marks(delta));
        // Without merging every mark is its own event, so the event count follows.
        prop_assert!(detect_events(&s.with_delta(2.0 * delta), 1).len() <= detect_events(&s.with_delta(delta), 1).len());
    }
}
