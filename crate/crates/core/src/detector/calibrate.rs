use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{detect_events, AnomalyEvent, ScoreSeries};
use crate::error::{Error, Result};

/// Outcome of fitting a threshold to an event budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub delta: f64,
    /// Exactly `N` events, ordered by `(flow, start)`.
    pub events: Vec<AnomalyEvent>,
    /// Events at `delta` before trimming to `N`.
    pub count_at_delta: usize,
    /// Number of lowest-peak events dropped to reach `N`.
    pub trimmed: usize,
}

fn flow_key(flow: Option<usize>) -> (bool, usize) {
    (flow.is_some(), flow.unwrap_or(0))
}

/// Finds the threshold that yields `n` grouped events across all series.
///
/// Every mark appears at `delta < Err / mae_tr`, so the exact event count is
/// tracked while lowering `delta` through the distinct ratio levels, adding
/// one mark at a time. The first level reaching `n` wins; `delta` is placed
/// halfway to the next lower level. When a level jumps past `n` (ties), the
/// lowest-peak events are dropped, breaking ties by `(flow, start)`.
pub fn calibrate_top_n(series: &[ScoreSeries], n: usize, gap: usize) -> Result<Calibration> {
    if n == 0 {
        return Err(Error::Contract("event budget must be >= 1".into()));
    }
    let mut marks: Vec<(f64, usize, usize)> = Vec::new();
    for (k, s) in series.iter().enumerate() {
        for (i, r) in s.ratios().enumerate() {
            if !r.is_finite() {
                return Err(Error::Calibration(format!("non-finite score in series {k} at sample {i}")));
            }
            if r > 0.0 {
                marks.push((r, k, i));
            }
        }
    }
    marks.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); series.len()];
    let mut count: usize = 0;
    let mut best = 0;
    let mut i = 0;
    while i < marks.len() {
        let level = marks[i].0;
        while i < marks.len() && marks[i].0 == level {
            let (_, k, p) = marks[i];
            let set = &mut sets[k];
            let left = set.range(..p).next_back().copied();
            let right = set.range(p + 1..).next().copied();
            let l_close = left.is_some_and(|a| p - a < gap);
            let r_close = right.is_some_and(|b| b - p < gap);
            let joined = matches!((left, right), (Some(a), Some(b)) if b - a < gap);
            count = count + 1 + usize::from(l_close && r_close && joined) - usize::from(l_close) - usize::from(r_close);
            set.insert(p);
            i += 1;
        }
        best = best.max(count);
        if count >= n {
            let next = if i < marks.len() { marks[i].0 } else { 0.0 };
            let delta = 0.5 * (level + next);
            return Ok(finish(series, delta, n, gap));
        }
    }
    Err(Error::Infeasible { requested: n, max_achievable: best })
}

fn finish(series: &[ScoreSeries], delta: f64, n: usize, gap: usize) -> Calibration {
    let mut events: Vec<AnomalyEvent> =
        series.iter().flat_map(|s| detect_events(&s.with_delta(delta), gap)).collect();
    let count_at_delta = events.len();
    events.sort_by(|a, b| {
        b.peak_score
            .total_cmp(&a.peak_score)
            .then(flow_key(a.flow).cmp(&flow_key(b.flow)))
            .then(a.start.cmp(&b.start))
    });
    events.truncate(n);
    events.sort_by(|a, b| flow_key(a.flow).cmp(&flow_key(b.flow)).then(a.start.cmp(&b.start)));
    let trimmed = count_at_delta - events.len();
    if trimmed > 0 {
        log::info!("calibration: {count_at_delta} events at delta {delta:.6}; trimmed {trimmed} lowest-peak events");
    }
    Calibration { delta, events, count_at_delta, trimmed }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(scores: Vec<f64>) -> Vec<ScoreSeries> {
        vec![ScoreSeries { flow: Some(0), method: "m".into(), offset: 0, scores, delta: 1.0 }]
    }

    #[test]
    fn exact_count_and_midpoint() {
        let mut s = vec![0.0; 60];
        for (i, v) in [(5, 5.0), (20, 4.0), (35, 3.0), (50, 2.0)] {
            s[i] = v;
        }
        let c = calibrate_top_n(&one(s), 2, 6).unwrap();
        assert_eq!(c.events.len(), 2);
        assert_eq!(c.delta, 3.5);
        assert_eq!(c.events.iter().map(|e| e.start).collect::<Vec<_>>(), vec![5, 20]);
        assert_eq!(c.trimmed, 0);
    }

    #[test]
    fn ties_are_trimmed_by_position() {
        let mut s = vec![0.0; 60];
        for i in [5, 20, 35] {
            s[i] = 3.0;
        }
        let c = calibrate_top_n(&one(s), 2, 6).unwrap();
        assert_eq!((c.count_at_delta, c.trimmed), (3, 1));
        assert_eq!(c.events.iter().map(|e| e.start).collect::<Vec<_>>(), vec![5, 20]);
    }

    #[test]
    fn merging_reduces_count_mid_sweep() {
        // Marks at 10 and 18 are separate until 14 bridges them.
        let mut s = vec![0.0; 40];
        s[10] = 3.0;
        s[18] = 3.0;
        s[14] = 1.5;
        let c = calibrate_top_n(&one(s.clone()), 2, 6).unwrap();
        assert_eq!(c.events.len(), 2);
        assert!(c.delta > 1.5 && c.delta < 3.0);
        let err = calibrate_top_n(&one(s), 3, 6).unwrap_err();
        assert!(matches!(err, Error::Infeasible { requested: 3, max_achievable: 2 }));
    }

    #[test]
    fn all_distinct_events_boundary() {
        let s = vec![0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.7];
        let c = calibrate_top_n(&one(s), 2, 6).unwrap();
        assert_eq!(c.events.len(), 2);
        assert!(c.delta < 0.5);
    }
}
