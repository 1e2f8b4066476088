use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{NormalizationParams, TrafficMatrix};
use crate::detector::{EventRecord, ScoreSeries};
use crate::error::{Error, Result};

/// Samples shown on each side of an event: one day at 5-minute cadence.
pub const DEFAULT_HALF_WINDOW: usize = 288;
pub const CONTEXT_FLOWS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextSeries {
    pub flow: String,
    pub flow_index: usize,
    pub weight: f64,
    pub values: Vec<f64>,
}

/// Everything needed to plot and review one event, in bps unless noted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub id: String,
    pub event: EventRecord,
    pub window_start: usize,
    pub window_end: usize,
    pub timestamps: Vec<i64>,
    pub target: Vec<f64>,
    pub prediction: Vec<Option<f64>>,
    pub band_lower: Vec<Option<f64>>,
    pub band_upper: Vec<Option<f64>>,
    /// Normalized score; 1 is the detection threshold.
    pub score: Vec<Option<f64>>,
    pub context: Vec<ContextSeries>,
    /// Score traces of other methods for the same flow, keyed by method.
    #[serde(default)]
    pub baseline_scores: BTreeMap<String, Vec<Option<f64>>>,
}

/// Contextual predictions of one flow over the scored matrix.
#[derive(Clone, Debug)]
pub struct FlowTrace {
    /// Index of the sample predicted by `predictions[0]`.
    pub offset: usize,
    /// Predictions in normalized units.
    pub predictions: Vec<f64>,
    pub mae_tr: f64,
    /// Context flows by decreasing attention weight.
    pub context: Vec<(usize, f64)>,
}

/// Test matrix plus per-flow traces from which bundles are cut.
pub struct BundleSource<'a> {
    pub matrix: &'a TrafficMatrix,
    pub normalization: &'a NormalizationParams,
    pub traces: BTreeMap<usize, FlowTrace>,
    pub baselines: Vec<ScoreSeries>,
    pub half_window: usize,
}

fn aligned(values: &[f64], offset: usize, lo: usize, hi: usize, f: impl Fn(f64) -> f64) -> Vec<Option<f64>> {
    (lo..=hi).map(|t| t.checked_sub(offset).and_then(|i| values.get(i)).map(|v| f(*v))).collect()
}

impl BundleSource<'_> {
    pub fn bundle(&self, id: String, event: &EventRecord) -> Result<ContextBundle> {
        let flow = event
            .flow_index
            .ok_or_else(|| Error::Contract(format!("event {id} is network-wide; bundles need a target flow")))?;
        let trace = self
            .traces
            .get(&flow)
            .ok_or_else(|| Error::Contract(format!("no predictions for flow {} (event {id})", event.flow)))?;
        let t_len = self.matrix.n_samples();
        if event.end >= t_len {
            return Err(Error::Contract(format!("event {id} ends at {} beyond {t_len} samples", event.end)));
        }
        let lo = event.start.saturating_sub(self.half_window);
        let hi = (event.end + self.half_window).min(t_len - 1);
        let norm = self.normalization;
        let series = |f: usize| self.matrix.flow(f)[lo..=hi].to_vec();
        let band = event.delta * trace.mae_tr;
        let target = self.matrix.flow(flow);
        let score = (lo..=hi)
            .map(|t| {
                let p = trace.predictions.get(t.checked_sub(trace.offset)?)?;
                Some((norm.forward(target[t]) - p).abs() / band)
            })
            .collect();
        let baseline_scores = self
            .baselines
            .iter()
            .filter(|s| s.flow == Some(flow))
            .map(|s| (s.method.clone(), aligned(&s.scores, s.offset, lo, hi, |v| v * s.delta)))
            .collect();
        Ok(ContextBundle {
            id,
            event: event.clone(),
            window_start: lo,
            window_end: hi,
            timestamps: (lo..=hi).map(|t| self.matrix.timestamp(t)).collect(),
            target: series(flow),
            prediction: aligned(&trace.predictions, trace.offset, lo, hi, |p| norm.inverse(p)),
            band_lower: aligned(&trace.predictions, trace.offset, lo, hi, |p| norm.inverse(p - band).max(0.0)),
            band_upper: aligned(&trace.predictions, trace.offset, lo, hi, |p| norm.inverse(p + band)),
            score,
            context: trace
                .context
                .iter()
                .take(CONTEXT_FLOWS)
                .map(|&(f, weight)| ContextSeries {
                    flow: self.matrix.flow_ids()[f].to_string(),
                    flow_index: f,
                    weight,
                    values: series(f),
                })
                .collect(),
            baseline_scores,
        })
    }
}

impl ContextBundle {
    pub fn path(dir: &Path, id: &str) -> std::path::PathBuf {
        dir.join(format!("{id}.json"))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::write(Self::path(dir, &self.id), serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(dir: &Path, id: &str) -> Result<Self> {
        let path = Self::path(dir, id);
        let bytes = std::fs::read(&path).map_err(|_| Error::MissingArtifact { path, prerequisite: "detect" })?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}
