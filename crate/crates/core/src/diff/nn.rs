//! Differentiable building blocks: multilayer perceptrons, the GRU cell and
//! GAT-style attention scoring.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::optim::{Binding, ParamSet};
use crate::error::{dim_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    LeakyRelu,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::LeakyRelu => g.leaky_relu(x),
            Activation::Sigmoid => g.sigmoid(x),
            Activation::Tanh => g.tanh(x),
        }
    }
}

/// Fully connected stack `x -> act(x W1 + b1) -> ... -> out_act(x Wn + bn)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    prefix: String,
    widths: Vec<usize>,
    hidden: Activation,
    output: Activation,
}

impl Mlp {
    /// `widths` lists the input width followed by each layer's output width.
    pub fn new(prefix: impl Into<String>, widths: &[usize], hidden: Activation, output: Activation) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least one layer");
        Self { prefix: prefix.into(), widths: widths.to_vec(), hidden, output }
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn weight_name(&self, layer: usize) -> String {
        format!("{}.l{layer}.weight", self.prefix)
    }

    pub fn bias_name(&self, layer: usize) -> String {
        format!("{}.l{layer}.bias", self.prefix)
    }

    pub fn init(&self, params: &mut ParamSet, rng: &mut ChaCha8Rng) {
        for l in 0..self.layers() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            params.init_uniform(self.weight_name(l), fan_in, fan_out, fan_in, rng);
            params.init_uniform(self.bias_name(l), 1, fan_out, fan_in, rng);
        }
    }

    pub fn forward(&self, g: &mut Graph, bind: &Binding, input: Var) -> Result<Var> {
        let mut x = input;
        for l in 0..self.layers() {
            let w = bind.var(&self.weight_name(l))?;
            let b = bind.var(&self.bias_name(l))?;
            let (have, want) = (g.value(x).cols(), g.value(w).rows());
            if have != want {
                return dim_err(
                    "mlp",
                    format!("layer {} expects width {want}, input has {have}", self.weight_name(l)),
                );
            }
            let xw = g.matmul(x, w)?;
            let pre = g.add_row(xw, b)?;
            let act = if l + 1 == self.layers() { self.output } else { self.hidden };
            x = act.apply(g, pre);
        }
        Ok(x)
    }
}

/// Gated recurrent unit cell.
///
/// `z = sigmoid(x Wz + h Uz + bz)`, `r = sigmoid(x Wr + h Ur + br)`,
/// `n = tanh(x Wn + (r * h) Un + bn)`, `h' = (1 - z) * h + z * n`.
/// The input weights of the three gates are packed column-wise as `[z | r | n]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruCell {
    prefix: String,
    input_dim: usize,
    hidden: usize,
}

impl GruCell {
    pub fn new(prefix: impl Into<String>, input_dim: usize, hidden: usize) -> Self {
        Self { prefix: prefix.into(), input_dim, hidden }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Packed input weights `[input_dim x 3*hidden]`.
    pub fn w_name(&self) -> String {
        format!("{}.w", self.prefix)
    }

    /// Packed recurrent weights of the update and reset gates `[hidden x 2*hidden]`.
    pub fn u_zr_name(&self) -> String {
        format!("{}.u_zr", self.prefix)
    }

    /// Recurrent weights of the candidate `[hidden x hidden]`.
    pub fn u_n_name(&self) -> String {
        format!("{}.u_n", self.prefix)
    }

    /// Packed biases `[1 x 3*hidden]`.
    pub fn b_name(&self) -> String {
        format!("{}.b", self.prefix)
    }

    pub fn init(&self, params: &mut ParamSet, rng: &mut ChaCha8Rng) {
        let d = self.hidden;
        params.init_uniform(self.w_name(), self.input_dim, 3 * d, self.input_dim, rng);
        params.init_uniform(self.u_zr_name(), d, 2 * d, d, rng);
        params.init_uniform(self.u_n_name(), d, d, d, rng);
        params.init_uniform(self.b_name(), 1, 3 * d, d, rng);
    }

    pub fn step(&self, g: &mut Graph, bind: &Binding, state: Var, input: Var) -> Result<Var> {
        let d = self.hidden;
        let (sv, iv) = (g.value(state), g.value(input));
        if sv.cols() != d {
            return dim_err("gru_step", format!("state width {} != hidden {d}", sv.cols()));
        }
        if iv.cols() != self.input_dim {
            return dim_err(
                "gru_step",
                format!("input width {} != {}", iv.cols(), self.input_dim),
            );
        }
        if sv.rows() != iv.rows() {
            return dim_err("gru_step", format!("{} states vs {} inputs", sv.rows(), iv.rows()));
        }
        let w = bind.var(&self.w_name())?;
        let u_zr = bind.var(&self.u_zr_name())?;
        let u_n = bind.var(&self.u_n_name())?;
        let b = bind.var(&self.b_name())?;

        let xw0 = g.matmul(input, w)?;
        let xw = g.add_row(xw0, b)?;
        let hu = g.matmul(state, u_zr)?;

        let xz = g.slice_cols(xw, 0, d)?;
        let hz = g.slice_cols(hu, 0, d)?;
        let z_pre = g.add(xz, hz)?;
        let z = g.sigmoid(z_pre);

        let xr = g.slice_cols(xw, d, d)?;
        let hr = g.slice_cols(hu, d, d)?;
        let r_pre = g.add(xr, hr)?;
        let r = g.sigmoid(r_pre);

        let rh = g.mul(r, state)?;
        let rhu = g.matmul(rh, u_n)?;
        let xn = g.slice_cols(xw, 2 * d, d)?;
        let n_pre = g.add(xn, rhu)?;
        let n = g.tanh(n_pre);

        let delta = g.sub(n, state)?;
        let gated = g.mul(z, delta)?;
        g.add(state, gated)
    }
}

/// Single-head GAT scoring: `e_ij = LeakyReLU(a_src . (g_i W) + a_dst . (g_j W))`,
/// softmax-normalised over each row's neighbours.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphAttention {
    prefix: String,
    input_dim: usize,
    hidden: usize,
}

impl GraphAttention {
    pub fn new(prefix: impl Into<String>, input_dim: usize, hidden: usize) -> Self {
        Self { prefix: prefix.into(), input_dim, hidden }
    }

    pub fn proj_name(&self) -> String {
        format!("{}.proj", self.prefix)
    }

    pub fn src_name(&self) -> String {
        format!("{}.a_src", self.prefix)
    }

    pub fn dst_name(&self) -> String {
        format!("{}.a_dst", self.prefix)
    }

    pub fn init(&self, params: &mut ParamSet, rng: &mut ChaCha8Rng) {
        params.init_uniform(self.proj_name(), self.input_dim, self.hidden, self.input_dim, rng);
        params.init_uniform(self.src_name(), self.hidden, 1, self.hidden, rng);
        params.init_uniform(self.dst_name(), self.hidden, 1, self.hidden, rng);
    }

    /// Attention matrix `[m x m]`; row `i` holds the weights node `i` puts on
    /// each neighbour. `mask[i*m + j]` says whether `j` is a neighbour of `i`.
    pub fn coefficients(&self, g: &mut Graph, bind: &Binding, nodes: Var, mask: Vec<bool>) -> Result<Var> {
        if g.value(nodes).cols() != self.input_dim {
            return dim_err(
                "attention",
                format!("node width {} != {}", g.value(nodes).cols(), self.input_dim),
            );
        }
        let proj = bind.var(&self.proj_name())?;
        let a_src = bind.var(&self.src_name())?;
        let a_dst = bind.var(&self.dst_name())?;
        let z = g.matmul(nodes, proj)?;
        let s = g.matmul(z, a_src)?;
        let t = g.matmul(z, a_dst)?;
        let e = g.outer_add(s, t)?;
        let e = g.leaky_relu(e);
        g.masked_softmax_rows(e, mask)
    }
}
