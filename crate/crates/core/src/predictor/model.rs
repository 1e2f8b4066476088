//! The contextual predictor network.
//!
//! Per batch:
//!
//! 1. `h_p = MLP_P(positional)` and `h_o = MLP_O(target_label)`, one row per flow.
//! 2. `alpha = Attention([h_p | h_o])`, an `M x M` row-stochastic matrix that
//!    depends on nothing but the flow identities and the target.
//! 3. `h^0 = MLP_F(x)` on every flow's history window.
//! 4. `K` rounds of `m = alpha h^k`, `h^{k+1} = GRU(h^k, m)`.
//! 5. `y = c + s * R(h^K_target)`, where `(c, s)` undo the per-flow standardization.
//!
//! The last round only needs the target's row, so it is run on that row alone.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::PredictorConfig;
use crate::data::samples::fill_features;
use crate::data::{TargetWindow, TrafficMatrix};
use crate::diff::{Activation, Binding, Graph, GraphAttention, GruCell, Mlp, ParamSet, Tensor, Var};
use crate::error::{dim_err, Error, Result};

/// Per-flow affine standardization fitted on normalized training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(m: usize) -> Self {
        Self { center: vec![0.0; m], scale: vec![1.0; m] }
    }

    /// Mean and standard deviation of each flow; flat flows get scale 1.
    pub fn fit(tm: &TrafficMatrix) -> Self {
        let (center, scale) = (0..tm.n_flows())
            .map(|f| {
                let xs = tm.flow(f);
                let n = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / n;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                (mean, if sd > 1e-6 { sd } else { 1.0 })
            })
            .unzip();
        Self { center, scale }
    }

    pub fn len(&self) -> usize {
        self.center.len()
    }

    pub fn is_empty(&self) -> bool {
        self.center.is_empty()
    }
}

/// Layer layout of one predictor; parameter values live in a [`ParamSet`].
#[derive(Clone, Debug)]
pub struct Architecture {
    pub n_flows: usize,
    pub window: usize,
    pub hidden: usize,
    pub iterations: usize,
    pub self_loop: bool,
    pub target_window: TargetWindow,
    pub enc_flow: Mlp,
    pub enc_pos: Mlp,
    pub enc_target: Mlp,
    pub attention: GraphAttention,
    pub update: GruCell,
    pub readout: Mlp,
}

fn encoder(prefix: &str, input: usize, d: usize, hidden_layers: usize) -> Mlp {
    let mut widths = vec![input];
    widths.extend(std::iter::repeat_n(d, hidden_layers + 1));
    Mlp::new(prefix, &widths, Activation::LeakyRelu, Activation::Identity)
}

impl Architecture {
    pub fn new(n_flows: usize, config: &PredictorConfig) -> Result<Self> {
        config.validate()?;
        if n_flows < 2 && !config.self_loop {
            return Err(Error::Contract("a target needs at least one context flow (M >= 2)".into()));
        }
        let d = config.hidden_dim;
        let h = config.encoder_hidden_layers;
        Ok(Self {
            n_flows,
            window: config.window,
            hidden: d,
            iterations: config.iterations,
            self_loop: config.self_loop,
            target_window: config.target_window,
            enc_flow: encoder("enc_f", config.window, d, h),
            enc_pos: encoder("enc_p", n_flows, d, h),
            enc_target: encoder("enc_o", 1, d, h),
            attention: GraphAttention::new("attn", 2 * d, config.attention_dim),
            update: GruCell::new("gru", d, d),
            readout: Mlp::new("readout", &[d, d, d, 1], Activation::LeakyRelu, Activation::Identity),
        })
    }

    pub fn init(&self, rng: &mut ChaCha8Rng) -> ParamSet {
        let mut p = ParamSet::new();
        self.enc_flow.init(&mut p, rng);
        self.enc_pos.init(&mut p, rng);
        self.enc_target.init(&mut p, rng);
        self.attention.init(&mut p, rng);
        self.update.init(&mut p, rng);
        self.readout.init(&mut p, rng);
        p
    }

    /// Neighbourhood mask, row-major `M x M`.
    pub fn mask(&self) -> Vec<bool> {
        let m = self.n_flows;
        (0..m * m).map(|k| self.self_loop || k / m != k % m).collect()
    }

    /// Attention matrix for `target`, given the positional encodings.
    pub fn attention_var(&self, g: &mut Graph, bind: &Binding, positional: &Tensor, target: usize) -> Result<Var> {
        let m = self.n_flows;
        if positional.rows() != m || positional.cols() != m {
            return dim_err("positional", format!("[{}x{}] for {m} flows", positional.rows(), positional.cols()));
        }
        if target >= m {
            return Err(Error::Contract(format!("target {target} out of {m} flows")));
        }
        let pos = g.leaf(positional.clone());
        let label = g.leaf(crate::data::samples::target_indicator(m, target));
        let h_p = self.enc_pos.forward(g, bind, pos)?;
        let h_o = self.enc_target.forward(g, bind, label)?;
        let nodes = g.concat_cols(&[h_p, h_o])?;
        self.attention.coefficients(g, bind, nodes, self.mask())
    }

    /// Predictions (normalized units) for a batch of samples of one target.
    ///
    /// `features` stacks `B` standardized `M x W` blocks. Returns the `B x 1`
    /// prediction and the attention matrix.
    pub fn forward(
        &self,
        g: &mut Graph,
        bind: &Binding,
        positional: &Tensor,
        target: usize,
        features: Tensor,
        std: &Standardizer,
    ) -> Result<(Var, Var)> {
        let m = self.n_flows;
        if features.cols() != self.window || !features.rows().is_multiple_of(m) || features.rows() == 0 {
            return dim_err(
                "forward",
                format!("features [{}x{}] for M={m}, W={}", features.rows(), features.cols(), self.window),
            );
        }
        let blocks = features.rows() / m;
        let alpha = self.attention_var(g, bind, positional, target)?;
        let x = g.leaf(features);
        let mut h = self.enc_flow.forward(g, bind, x)?;
        let rows: Vec<usize> = (0..blocks).map(|b| b * m + target).collect();
        for k in 0..self.iterations {
            let msg = g.block_matmul(alpha, h, blocks)?;
            if k + 1 == self.iterations {
                let h_t = g.gather_rows(h, rows.clone())?;
                let m_t = g.gather_rows(msg, rows.clone())?;
                h = self.update.step(g, bind, h_t, m_t)?;
            } else {
                h = self.update.step(g, bind, h, msg)?;
            }
        }
        let out = self.readout.forward(g, bind, h)?;
        let y = g.affine(out, std.scale[target], std.center[target]);
        Ok((y, alpha))
    }

    /// Standardized `M x W` feature block of the sample anchored at `t`.
    pub fn features_at(&self, tm: &TrafficMatrix, target: usize, t: usize, std: &Standardizer, out: &mut [f64]) {
        let w = self.window;
        fill_features(tm, target, w, self.target_window, t, out);
        for f in 0..self.n_flows {
            if f == target && self.target_window == TargetWindow::Masked {
                continue;
            }
            for v in &mut out[f * w..(f + 1) * w] {
                *v = (*v - std.center[f]) / std.scale[f];
            }
        }
    }
}

/// Attention weights a target puts on every flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionMap {
    pub target: usize,
    /// One weight per flow; the target's own entry is 0 without self-loops.
    pub weights: Vec<f64>,
    /// Flows other than the target, by descending weight, ties by index.
    pub ranking: Vec<usize>,
}

impl AttentionMap {
    pub fn from_weights(target: usize, weights: Vec<f64>) -> Self {
        let mut ranking: Vec<usize> = (0..weights.len()).filter(|&j| j != target).collect();
        ranking.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
        Self { target, weights, ranking }
    }
}

/// Evaluates the attention row of `target` for a trained parameter set.
pub fn attention_map(arch: &Architecture, params: &ParamSet, target: usize) -> Result<AttentionMap> {
    let mut g = Graph::new();
    let bind = params.bind(&mut g);
    let alpha = arch.attention_var(&mut g, &bind, &Tensor::identity(arch.n_flows), target)?;
    g.check_finite()?;
    Ok(AttentionMap::from_weights(target, g.value(alpha).row_slice(target).to_vec()))
}
