use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Gradients, Graph, Var};
use super::tensor::Tensor;
use crate::error::{dim_err, Result};

/// Named trainable tensors together with their Adam moments.
///
/// Names are kept in a `BTreeMap` so iteration order (and therefore every
/// serialized form and every RNG draw made while initializing) is stable.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ParamSet {
    params: BTreeMap<String, Tensor>,
    #[serde(skip)]
    moments: BTreeMap<String, (Tensor, Tensor)>,
    #[serde(skip)]
    step: u64,
}

/// Equality compares parameter values only, not optimizer state.
impl PartialEq for ParamSet {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let name = name.into();
        self.moments.insert(name.clone(), (Tensor::zeros_like(&value), Tensor::zeros_like(&value)));
        self.params.insert(name, value);
    }

    /// Weight of shape `fan_in x fan_out` drawn from
    /// `uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init_uniform(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut ChaCha8Rng,
    ) {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
        self.insert(name, Tensor::matrix(rows, cols, data).expect("shape"));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_values(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Every parameter set to zero (used by closed-form tests).
    pub fn zeroed(&self) -> ParamSet {
        let mut out = ParamSet::new();
        for (k, v) in &self.params {
            out.insert(k.clone(), Tensor::zeros_like(v));
        }
        out
    }

    /// Registers every parameter as a leaf of `graph`.
    pub fn bind(&self, graph: &mut Graph) -> Binding {
        let vars = self.params.iter().map(|(k, v)| (k.clone(), graph.leaf(v.clone()))).collect();
        Binding { vars }
    }

    /// Rebuilds moment buffers after deserialization.
    pub(crate) fn reset_optimizer(&mut self) {
        self.moments = self
            .params
            .iter()
            .map(|(k, v)| (k.clone(), (Tensor::zeros_like(v), Tensor::zeros_like(v))))
            .collect();
        self.step = 0;
    }

    /// One Adam step (beta1 = 0.9, beta2 = 0.999, eps = 1e-8, bias-corrected).
    pub fn adam_update(&mut self, grads: &ParamGrads, lr: f64) -> Result<()> {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        for (name, g) in &grads.grads {
            let Some(p) = self.params.get(name) else {
                return dim_err("adam_update", format!("unknown parameter {name}"));
            };
            if !p.same_shape(g) {
                return dim_err("adam_update", format!("gradient shape mismatch for {name}"));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - B1.powi(t);
        let c2 = 1.0 - B2.powi(t);
        for (name, g) in &grads.grads {
            let p = self.params.get_mut(name).expect("checked above");
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (Tensor::zeros_like(p), Tensor::zeros_like(p)));
            let (pd, md, vd) = (p.data_mut(), m.data_mut(), v.data_mut());
            for i in 0..pd.len() {
                let gi = g.data()[i];
                md[i] = B1 * md[i] + (1.0 - B1) * gi;
                vd[i] = B2 * vd[i] + (1.0 - B2) * gi * gi;
                let mhat = md[i] / c1;
                let vhat = vd[i] / c2;
                pd[i] -= lr * mhat / (vhat.sqrt() + EPS);
            }
        }
        Ok(())
    }
}

/// Map from parameter name to its leaf in one graph.
#[derive(Clone, Debug)]
pub struct Binding {
    vars: BTreeMap<String, Var>,
}

impl Binding {
    pub fn var(&self, name: &str) -> Result<Var> {
        match self.vars.get(name) {
            Some(&v) => Ok(v),
            None => dim_err("binding", format!("no parameter named {name}")),
        }
    }

    pub fn grads(&self, graph: &Graph, grads: &Gradients) -> ParamGrads {
        ParamGrads {
            grads: self.vars.iter().map(|(k, &v)| (k.clone(), grads.wrt(graph, v))).collect(),
        }
    }
}

/// Per-parameter gradients, aligned by name with a [`ParamSet`].
#[derive(Clone, Debug, Default)]
pub struct ParamGrads {
    grads: BTreeMap<String, Tensor>,
}

impl ParamGrads {
    pub fn from_map(grads: BTreeMap<String, Tensor>) -> Self {
        Self { grads }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.grads.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.grads.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn is_finite(&self) -> bool {
        self.grads.values().all(Tensor::is_finite)
    }
}
