//! Univariate recurrent forecaster: a GRU cell unrolled over a flow's own
//! last `W` values, followed by a linear readout.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::detector::{score, ScoreSeries};
use crate::diff::{seeded_rng, Activation, Binding, Graph, GruCell, Mlp, ParamSet, Tensor, Var};
use crate::error::{dim_err, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RnnConfig {
    pub hidden_dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for RnnConfig {
    fn default() -> Self {
        Self { hidden_dim: 128, window: 5, epochs: 50, learning_rate: 1e-3, batch_size: 32, seed: 1, shuffle: false }
    }
}

/// Layer layout of the forecaster.
#[derive(Clone, Debug)]
pub struct RnnArchitecture {
    pub window: usize,
    pub cell: GruCell,
    pub readout: Mlp,
}

impl RnnArchitecture {
    pub fn new(config: &RnnConfig) -> Result<Self> {
        if config.hidden_dim == 0 || config.window == 0 || config.epochs == 0 || config.batch_size == 0 {
            return Err(Error::Contract("RNN hidden size, window, epochs and batch size must be >= 1".into()));
        }
        Ok(Self {
            window: config.window,
            cell: GruCell::new("rnn.gru", 1, config.hidden_dim),
            readout: Mlp::new("rnn.out", &[config.hidden_dim, 1], Activation::Identity, Activation::Identity),
        })
    }

    pub fn init(&self, rng: &mut rand_chacha::ChaCha8Rng) -> ParamSet {
        let mut p = ParamSet::new();
        self.cell.init(&mut p, rng);
        self.readout.init(&mut p, rng);
        p
    }

    /// `B x 1` forecasts from `B x W` standardized windows, mapped back with
    /// `center + scale * out`.
    pub fn forward(&self, g: &mut Graph, bind: &Binding, windows: Tensor, center: f64, scale: f64) -> Result<Var> {
        if windows.cols() != self.window {
            return dim_err("rnn", format!("window width {} != {}", windows.cols(), self.window));
        }
        let b = windows.rows();
        let x = g.leaf(windows);
        let mut h = g.leaf(Tensor::zeros(b, self.cell.hidden()));
        for s in 0..self.window {
            let xs = g.slice_cols(x, s, 1)?;
            h = self.cell.step(g, bind, h, xs)?;
        }
        let out = self.readout.forward(g, bind, h)?;
        Ok(g.affine(out, scale, center))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RnnModel {
    pub flow: usize,
    pub params: ParamSet,
    pub config: RnnConfig,
    pub center: f64,
    pub scale: f64,
    pub mae_tr: f64,
}

fn windows(series: &[f64], w: usize, center: f64, scale: f64, idx: &[usize]) -> Tensor {
    let data = idx.iter().flat_map(|&t| series[t + 1 - w..=t].iter().map(|v| (v - center) / scale)).collect();
    Tensor::matrix(idx.len(), w, data).expect("window block")
}

/// Trains on the first `train_len` samples of a normalized series.
pub fn rnn_train(flow: usize, series: &[f64], train_len: usize, config: &RnnConfig) -> Result<RnnModel> {
    let arch = RnnArchitecture::new(config)?;
    let w = config.window;
    if train_len < w + 2 || train_len > series.len() {
        return Err(Error::Contract(format!("RNN needs at least {} training samples, got {train_len}", w + 2)));
    }
    let train = &series[..train_len];
    let n = train.len() as f64;
    let center = train.iter().sum::<f64>() / n;
    let sd = (train.iter().map(|v| (v - center).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if sd > 1e-6 { sd } else { 1.0 };

    let mut rng = seeded_rng(config.seed);
    let mut params = arch.init(&mut rng);
    // Anchors t: window t-W+1 ..= t, label t+1.
    let anchors: Vec<usize> = (w - 1..train_len - 1).collect();
    let mut mae = 0.0;
    for epoch in 0..config.epochs {
        let mut order = anchors.clone();
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut abs = 0.0;
        for idx in order.chunks(config.batch_size) {
            let labels = Tensor::column(idx.iter().map(|&t| train[t + 1]).collect());
            let mut g = Graph::new();
            let bind = params.bind(&mut g);
            let pred = arch.forward(&mut g, &bind, windows(train, w, center, scale, idx), center, scale)?;
            let loss = g.mae_loss(pred, labels.clone())?;
            let failure = Error::TrainingFailure { epoch, sample: idx[0] };
            if !g.value(loss).item().is_finite() {
                return Err(failure);
            }
            let pg = bind.grads(&g, &g.backward(loss)?);
            if !pg.is_finite() {
                return Err(failure);
            }
            params.adam_update(&pg, config.learning_rate)?;
            abs += g.value(pred).data().iter().zip(labels.data()).map(|(p, y)| (p - y).abs()).sum::<f64>();
        }
        mae = abs / anchors.len() as f64;
    }
    Ok(RnnModel { flow, params, config: config.clone(), center, scale, mae_tr: mae })
}

impl RnnModel {
    /// Forecasts of `series[t]` for every `t` in `from..series.len()`.
    pub fn forecast(&self, series: &[f64], from: usize) -> Result<Vec<f64>> {
        let arch = RnnArchitecture::new(&self.config)?;
        let w = self.config.window;
        if from < w {
            return Err(Error::Contract(format!("forecasts need {w} samples of history, start at {from}")));
        }
        let anchors: Vec<usize> = (from - 1..series.len() - 1).collect();
        let mut out = Vec::with_capacity(anchors.len());
        for idx in anchors.chunks(512) {
            let mut g = Graph::new();
            let bind = self.params.bind(&mut g);
            let pred = arch.forward(&mut g, &bind, windows(series, w, self.center, self.scale, idx), self.center, self.scale)?;
            g.check_finite()?;
            out.extend_from_slice(g.value(pred).data());
        }
        Ok(out)
    }

    /// Scores of `series[from..]` against this model's forecasts.
    pub fn score_series(&self, series: &[f64], from: usize) -> Result<ScoreSeries> {
        let forecasts = self.forecast(series, from)?;
        let scores = score(&forecasts, &series[from..], self.mae_tr, 1.0)?;
        Ok(ScoreSeries { flow: Some(self.flow), method: "rnn".into(), offset: 0, scores, delta: 1.0 })
    }
}

/// Trains on `series[..train_len]` and scores `series[train_len..]`.
pub fn rnn_train_and_score(flow: usize, series: &[f64], train_len: usize, config: &RnnConfig) -> Result<(RnnModel, ScoreSeries)> {
    let model = rnn_train(flow, series, train_len, config)?;
    let s = model.score_series(series, train_len)?;
    Ok((model, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RnnConfig {
        RnnConfig { hidden_dim: 6, epochs: 30, batch_size: 16, learning_rate: 1e-2, ..RnnConfig::default() }
    }

    #[test]
    fn constant_series_scores_near_zero() {
        let s = vec![2.5; 120];
        let (model, scores) = rnn_train_and_score(0, &s, 60, &small()).unwrap_or_else(|e| panic!("{e}"));
        let f = model.forecast(&s, 60).unwrap();
        assert_eq!(f.len(), 60);
        assert!(f.iter().all(|p| (p - 2.5).abs() < 1e-2), "{:?}", &f[..3]);
        assert_eq!(scores.scores.len(), 60);
    }

    #[test]
    fn deterministic() {
        let s: Vec<f64> = (0..80).map(|t| (t as f64 * 0.3).sin() + 3.0).collect();
        let a = rnn_train(1, &s, 50, &small()).unwrap();
        let b = rnn_train(1, &s, 50, &small()).unwrap();
        assert_eq!(a.mae_tr.to_bits(), b.mae_tr.to_bits());
        assert_eq!(a.params, b.params);
        assert!(rnn_train(1, &s, 6, &small()).is_err());
    }
}
