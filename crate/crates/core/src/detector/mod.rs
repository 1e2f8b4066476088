//! Error-based anomaly scores, thresholding and event grouping.
//!
//! A sample's score is `|actual - predicted| / (mae_tr * delta)`; scores above
//! 1 are marks, and marks closer than `gap` samples merge into one event.

mod calibrate;
mod export;

pub use calibrate::{calibrate_top_n, Calibration};
pub use export::{read_events_jsonl, write_events_jsonl, EventRecord};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::TrainedPredictor;

/// 30 minutes at a 5-minute cadence.
pub const DEFAULT_GAP: usize = 6;
pub const DEFAULT_MRE_MAX: f64 = 0.30;
pub const DEFAULT_TOP_N: usize = 600;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreDomain {
    /// Errors and `mae_tr` in log-normalized units.
    #[default]
    Normalized,
    Bps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub delta: f64,
    /// Marks closer than this many samples belong to one event.
    pub gap: usize,
    pub mre_max: f64,
    pub top_n: usize,
    pub domain: ScoreDomain,
    /// Fit `delta` to the `top_n` budget; when false, `delta` is used as given.
    pub calibrate: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { delta: 1.0, gap: DEFAULT_GAP, mre_max: DEFAULT_MRE_MAX, top_n: DEFAULT_TOP_N, domain: ScoreDomain::Normalized, calibrate: true }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::Contract(format!("delta must be > 0, got {}", self.delta)));
        }
        if self.top_n == 0 {
            return Err(Error::Contract("top_n must be >= 1".into()));
        }
        Ok(())
    }
}

/// Scores of one flow (or of the whole network when `flow` is `None`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub flow: Option<usize>,
    pub method: String,
    /// Sample index of `scores[0]` within the scored matrix.
    pub offset: usize,
    pub scores: Vec<f64>,
    pub delta: f64,
}

impl ScoreSeries {
    /// Scores rescaled to a different threshold.
    pub fn with_delta(&self, delta: f64) -> ScoreSeries {
        let k = self.delta / delta;
        ScoreSeries { scores: self.scores.iter().map(|s| s * k).collect(), delta, ..self.clone() }
    }

    /// `score * delta`: the error in units of `mae_tr`.
    pub fn ratios(&self) -> impl Iterator<Item = f64> + '_ {
        self.scores.iter().map(move |s| s * self.delta)
    }
}

/// `|actual - predicted| / (mae_tr * delta)`, elementwise.
pub fn score(predictions: &[f64], actuals: &[f64], mae_tr: f64, delta: f64) -> Result<Vec<f64>> {
    if predictions.len() != actuals.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} actuals",
            predictions.len(),
            actuals.len()
        )));
    }
    if !(mae_tr > 0.0) {
        return Err(Error::Calibration(format!("mae_tr must be > 0, got {mae_tr}")));
    }
    if !(delta > 0.0) {
        return Err(Error::Contract(format!("delta must be > 0, got {delta}")));
    }
    let denom = mae_tr * delta;
    Ok(predictions.iter().zip(actuals).map(|(p, a)| (a - p).abs() / denom).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEvent {
    pub method: String,
    /// `None` for network-wide events.
    pub flow: Option<usize>,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    pub peak_score: f64,
}

impl AnomalyEvent {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.start <= end && start <= self.end
    }
}

/// Merges sorted, distinct positions into `(first, last)` runs; a position
/// joins the current run when it is fewer than `gap` samples after the last.
pub fn merge_marks(marks: &[usize], gap: usize) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for &p in marks {
        match runs.last_mut() {
            Some(run) if p - run.1 < gap => run.1 = p,
            _ => runs.push((p, p)),
        }
    }
    runs
}

/// Marks every sample whose score exceeds 1 and groups the marks into events.
pub fn detect_events(series: &ScoreSeries, gap: usize) -> Vec<AnomalyEvent> {
    let marks: Vec<usize> = series.scores.iter().enumerate().filter(|(_, s)| **s > 1.0).map(|(i, _)| i).collect();
    merge_marks(&marks, gap)
        .into_iter()
        .map(|(a, b)| AnomalyEvent {
            method: series.method.clone(),
            flow: series.flow,
            start: series.offset + a,
            end: series.offset + b,
            peak_score: series.scores[a..=b].iter().copied().fold(0.0, f64::max),
        })
        .collect()
}

/// Flows eligible for detection and those excluded by the training-error gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kept: Vec<usize>,
    /// `(flow, mre_tr)` of every excluded flow.
    pub excluded: Vec<(usize, f64)>,
}

/// Keeps flows whose training relative error is strictly below `mre_max`.
pub fn gate_flows(models: &[TrainedPredictor], mre_max: f64) -> Gate {
    let mut gate = Gate { kept: Vec::new(), excluded: Vec::new() };
    for m in models {
        if m.mre_tr < mre_max {
            gate.kept.push(m.target);
        } else {
            log::info!("flow {} excluded: training MRE {:.4} >= {mre_max}", m.target_flow, m.mre_tr);
            gate.excluded.push((m.target, m.mre_tr));
        }
    }
    gate
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(scores: Vec<f64>) -> ScoreSeries {
        ScoreSeries { flow: Some(0), method: "t".into(), offset: 0, scores, delta: 1.0 }
    }

    #[test]
    fn score_arithmetic() {
        assert_eq!(score(&[1.0], &[1.0], 0.5, 1.0).unwrap(), vec![0.0]);
        assert_eq!(score(&[0.0], &[6.0], 2.0, 1.5).unwrap(), vec![2.0]);
        let boundary = score(&[0.0], &[3.0], 2.0, 1.5).unwrap();
        assert_eq!(boundary, vec![1.0]);
        assert!(detect_events(&series(boundary), 6).is_empty());
        assert!(matches!(score(&[0.0], &[1.0], 0.0, 1.0), Err(Error::Calibration(_))));
        assert!(score(&[0.0, 1.0], &[1.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn grouping_examples() {
        let mut s = vec![0.0; 30];
        s[10] = 2.0;
        s[14] = 3.0;
        let ev = detect_events(&series(s.clone()), 6);
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].start, ev[0].end, ev[0].peak_score), (10, 14, 3.0));
        s[14] = 0.0;
        s[17] = 1.5;
        let ev = detect_events(&series(s), 6);
        assert_eq!(ev.iter().map(|e| (e.start, e.end)).collect::<Vec<_>>(), vec![(10, 10), (17, 17)]);
        assert!(detect_events(&series(vec![1.0; 8]), 6).is_empty());
    }

    #[test]
    fn offset_and_network_wide() {
        let s = ScoreSeries { flow: None, method: "pca".into(), offset: 100, scores: vec![0.0, 4.0], delta: 2.0 };
        let ev = detect_events(&s, 6);
        assert_eq!((ev[0].flow, ev[0].start), (None, 101));
        assert_eq!(s.ratios().collect::<Vec<_>>(), vec![0.0, 8.0]);
        assert_eq!(s.with_delta(4.0).scores, vec![0.0, 2.0]);
    }

    #[test]
    fn config_defaults() {
        let c = DetectorConfig::default();
        assert_eq!((c.gap, c.mre_max, c.top_n), (6, 0.30, 600));
        assert!(DetectorConfig { delta: 0.0, ..c }.validate().is_err());
    }
}
