use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{GroundTruth, InjectionKind};
use crate::detector::AnomalyEvent;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindRecall {
    pub labels: usize,
    pub detected: usize,
    pub recall: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    /// `None` when there are no events.
    pub precision: Option<f64>,
    /// `None` when there are no labels.
    pub recall: Option<f64>,
    pub per_kind: BTreeMap<InjectionKind, KindRecall>,
    pub events: usize,
    pub true_positive_events: usize,
    pub labels: usize,
}

/// True when `event` intersects `label` in time and sits on a flow the
/// label covers. Network-wide events match any flow.
pub fn matches(event: &AnomalyEvent, label: &GroundTruth) -> bool {
    let on_flow = match event.flow {
        None => true,
        Some(f) => f == label.flow || label.flows.contains(&f),
    };
    on_flow && event.overlaps(label.start, label.end)
}

/// Precision and recall of `events` against `labels` (same sample indexing).
pub fn score_against_labels(events: &[AnomalyEvent], labels: &[GroundTruth]) -> DetectionMetrics {
    let tp_events = events.iter().filter(|e| labels.iter().any(|l| matches(e, l))).count();
    let mut per_kind = BTreeMap::new();
    for kind in InjectionKind::ALL {
        let of_kind: Vec<&GroundTruth> = labels.iter().filter(|l| l.kind == kind).collect();
        let detected = of_kind.iter().filter(|l| events.iter().any(|e| matches(e, l))).count();
        let recall = (!of_kind.is_empty()).then(|| detected as f64 / of_kind.len() as f64);
        per_kind.insert(kind, KindRecall { labels: of_kind.len(), detected, recall });
    }
    let detected: usize = per_kind.values().map(|k| k.detected).sum();
    DetectionMetrics {
        precision: (!events.is_empty()).then(|| tp_events as f64 / events.len() as f64),
        recall: (!labels.is_empty()).then(|| detected as f64 / labels.len() as f64),
        per_kind,
        events: events.len(),
        true_positive_events: tp_events,
        labels: labels.len(),
    }
}

impl DetectionMetrics {
    pub fn recall_of(&self, kind: InjectionKind) -> Option<f64> {
        self.per_kind.get(&kind).and_then(|k| k.recall)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(kind: InjectionKind, flow: usize, start: usize, end: usize, flows: Vec<usize>) -> GroundTruth {
        GroundTruth { kind, flow, start, end, magnitude: 1.0, flows }
    }

    #[test]
    fn perfect_and_empty() {
        let labels = vec![
            label(InjectionKind::ContextualDeviation, 1, 10, 20, vec![1]),
            label(InjectionKind::ContextShift, 4, 40, 50, vec![0, 4, 8]),
        ];
        let events: Vec<AnomalyEvent> = labels
            .iter()
            .map(|l| AnomalyEvent { method: "m".into(), flow: Some(l.flow), start: l.start, end: l.end, peak_score: 2.0 })
            .collect();
        let m = score_against_labels(&events, &labels);
        assert_eq!((m.precision, m.recall), (Some(1.0), Some(1.0)));
        let none = score_against_labels(&[], &labels);
        assert_eq!((none.precision, none.recall), (None, Some(0.0)));
        assert_eq!(none.recall_of(InjectionKind::PointSpike), None);
    }

    #[test]
    fn shift_matches_any_group_member() {
        let l = label(InjectionKind::ContextShift, 4, 40, 50, vec![0, 4, 8]);
        let on = |flow| AnomalyEvent { method: "m".into(), flow, start: 45, end: 46, peak_score: 2.0 };
        assert!(matches(&on(Some(8)), &l));
        assert!(!matches(&on(Some(3)), &l));
        assert!(matches(&on(None), &l));
    }
}
