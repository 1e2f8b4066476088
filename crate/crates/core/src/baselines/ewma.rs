use serde::{Deserialize, Serialize};

use crate::detector::{score, ScoreSeries};
use crate::error::{Error, Result};

/// `2 / (W + 1)`: the smoothing factor matching a `W`-sample window.
pub fn alpha_for_window(window: usize) -> f64 {
    2.0 / (window as f64 + 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EwmaState {
    pub alpha: f64,
    /// Forecast for the next sample.
    pub estimate: f64,
    pub mae_tr: f64,
}

/// One-step forecasts `p_t = alpha * y_{t-1} + (1 - alpha) * p_{t-1}` with
/// `p_0 = y_0`. `out[t]` is the forecast of `series[t]`.
pub fn ewma_forecasts(series: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Contract(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let Some(&first) = series.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(series.len());
    let mut p = first;
    out.push(p);
    for w in series.windows(2) {
        p = alpha * w[0] + (1.0 - alpha) * p;
        out.push(p);
    }
    Ok(out)
}

/// Runs the smoother over `series` (normalized units), measures `mae_tr` on
/// the first `train_len` samples and scores the rest.
///
/// The returned scores start at sample `train_len`.
pub fn ewma_score(series: &[f64], alpha: f64, train_len: usize, delta: f64) -> Result<(EwmaState, Vec<f64>)> {
    if train_len < 2 || train_len > series.len() {
        return Err(Error::Contract(format!(
            "EWMA needs at least 2 training samples within the series (train {train_len}, series {})",
            series.len()
        )));
    }
    let forecasts = ewma_forecasts(series, alpha)?;
    let mae_tr = (1..train_len).map(|t| (forecasts[t] - series[t]).abs()).sum::<f64>() / (train_len - 1) as f64;
    let scores = score(&forecasts[train_len..], &series[train_len..], mae_tr, delta)?;
    let last = series.len() - 1;
    let estimate = alpha * series[last] + (1.0 - alpha) * forecasts[last];
    Ok((EwmaState { alpha, estimate, mae_tr }, scores))
}

/// Score series of one flow for the test part of a normalized series.
pub fn ewma_series(flow: usize, series: &[f64], alpha: f64, train_len: usize) -> Result<(EwmaState, ScoreSeries)> {
    let (state, scores) = ewma_score(series, alpha, train_len, 1.0)?;
    Ok((state, ScoreSeries { flow: Some(flow), method: "ewma".into(), offset: 0, scores, delta: 1.0 }))
}
