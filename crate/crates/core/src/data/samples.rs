//! Per-time-step graph inputs for the contextual predictor.
//!
//! Sample `s` is anchored at time `t = W + s` and predicts the target flow at
//! `t + 1`. Context flows contribute the `W` values ending at `t + 1`, so
//! their newest value is simultaneous with the prediction. The target's own
//! window is either zeroed (default) or lagged to end at `t`.

use serde::{Deserialize, Serialize};

use super::matrix::TrafficMatrix;
use crate::diff::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetWindow {
    /// Target features are all zero: the prediction sees context flows only.
    #[default]
    Masked,
    /// Target features are its own values `t-W+1 ..= t`.
    Lagged,
}

/// One time step's model input for a single target flow.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSample {
    pub target_index: usize,
    /// Anchor time `t`; the label is the target at `t + 1`.
    pub time: usize,
    /// `M x W` feature windows (normalized units).
    pub node_features: Tensor,
    /// Normalized target value at `t + 1`.
    pub label: f64,
}

impl GraphSample {
    pub fn n_flows(&self) -> usize {
        self.node_features.rows()
    }

    /// One-hot flow identifiers: the `M x M` identity.
    pub fn positional(&self) -> Tensor {
        Tensor::identity(self.n_flows())
    }

    /// `M x 1` indicator with a single 1 at the target.
    pub fn target_label(&self) -> Tensor {
        target_indicator(self.n_flows(), self.target_index)
    }

    /// All ordered pairs `(j, i)` with `j != i`: every flow sends to every other.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        all_to_all_edges(self.n_flows(), false)
    }
}

pub fn target_indicator(m: usize, target: usize) -> Tensor {
    let mut v = vec![0.0; m];
    v[target] = 1.0;
    Tensor::column(v)
}

pub fn all_to_all_edges(m: usize, self_loops: bool) -> Vec<(usize, usize)> {
    (0..m)
        .flat_map(|i| (0..m).filter(move |&j| self_loops || j != i).map(move |j| (j, i)))
        .collect()
}

/// Number of samples produced for a series of `t_len` samples.
pub fn sample_count(t_len: usize, window: usize) -> usize {
    t_len.saturating_sub(window + 1)
}

/// Anchor time of the first sample; predictions start at `first_anchor + 1`.
pub fn first_anchor(window: usize) -> usize {
    window
}

fn check(tm: &TrafficMatrix, target: usize, window: usize) -> Result<()> {
    if window == 0 {
        return Err(Error::Contract("window must be at least 1".into()));
    }
    if tm.n_samples() < window + 2 {
        return Err(Error::Contract(format!(
            "window {window} needs at least {} samples, matrix has {}",
            window + 2,
            tm.n_samples()
        )));
    }
    if target >= tm.n_flows() {
        return Err(Error::Contract(format!("target {target} out of {} flows", tm.n_flows())));
    }
    Ok(())
}

/// Fills `out` (`M x W`, row-major) with the features of the sample anchored at `t`.
pub(crate) fn fill_features(tm: &TrafficMatrix, target: usize, window: usize, mode: TargetWindow, t: usize, out: &mut [f64]) {
    for f in 0..tm.n_flows() {
        let row = &mut out[f * window..(f + 1) * window];
        if f == target {
            match mode {
                TargetWindow::Masked => row.fill(0.0),
                TargetWindow::Lagged => row.copy_from_slice(&tm.flow(f)[t + 1 - window..=t]),
            }
        } else {
            row.copy_from_slice(&tm.flow(f)[t + 2 - window..=t + 1]);
        }
    }
}

/// Builds every graph sample of `tm` (already normalized) for one target.
pub fn make_graph_samples(tm: &TrafficMatrix, target: usize, window: usize, mode: TargetWindow) -> Result<Vec<GraphSample>> {
    check(tm, target, window)?;
    let m = tm.n_flows();
    let n = sample_count(tm.n_samples(), window);
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let t = first_anchor(window) + s;
        let mut feats = vec![0.0; m * window];
        fill_features(tm, target, window, mode, t, &mut feats);
        out.push(GraphSample {
            target_index: target,
            time: t,
            node_features: Tensor::matrix(m, window, feats)?,
            label: tm.value(target, t + 1),
        });
    }
    Ok(out)
}
