use serde::{Deserialize, Serialize};

use super::matrix::TrafficMatrix;
use crate::error::{Error, Result};

/// Logarithmic normalization `x -> ln(1 + x)` and its inverse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub scheme: String,
    /// Lower bound (bps) used as the denominator floor in relative errors.
    pub floor: f64,
}

impl Default for NormalizationParams {
    fn default() -> Self {
        Self { scheme: "log1p".into(), floor: 1.0 }
    }
}

impl NormalizationParams {
    pub fn forward(&self, x: f64) -> f64 {
        x.ln_1p()
    }

    pub fn inverse(&self, y: f64) -> f64 {
        y.exp_m1()
    }
}

/// Log-normalizes every cell. Fails on negative input.
pub fn normalize(tm: &TrafficMatrix) -> Result<(TrafficMatrix, NormalizationParams)> {
    if let Some(v) = tm.values().iter().find(|v| **v < 0.0) {
        return Err(Error::Contract(format!("cannot normalize negative traffic {v}")));
    }
    let params = NormalizationParams::default();
    let out = tm.map_values(|x| params.forward(x))?;
    Ok((out, params))
}

pub fn denormalize(tm: &TrafficMatrix, params: &NormalizationParams) -> Result<TrafficMatrix> {
    tm.map_values(|y| params.inverse(y))
}
