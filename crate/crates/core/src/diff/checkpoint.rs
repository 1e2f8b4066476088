//! Parameter checkpoint container.
//!
//! JSON document:
//!
//! ```text
//! {
//!   "format": "flowsentry-params/v1",
//!   "seed": 42,
//!   "config_hash": "<sha256 hex>",
//!   "params": [
//!     { "name": "enc_f.l0.weight", "shape": [5, 32], "dtype": "f64le",
//!       "data": "<hex of little-endian IEEE-754 doubles, row-major>" },
//!     ...
//!   ]
//! }
//! ```
//!
//! Parameters are listed in lexicographic name order. Hex payloads make the
//! round trip bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::ParamSet;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const FORMAT: &str = "flowsentry-params/v1";

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    data: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    format: String,
    pub seed: u64,
    pub config_hash: String,
    params: Vec<Entry>,
}

impl Checkpoint {
    pub fn from_params(params: &ParamSet, seed: u64, config_hash: impl Into<String>) -> Self {
        let params = params
            .iter()
            .map(|(name, t)| {
                let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
                Entry {
                    name: name.to_string(),
                    shape: t.shape().to_vec(),
                    dtype: "f64le".into(),
                    data: hex::encode(bytes),
                }
            })
            .collect();
        Self { format: FORMAT.into(), seed, config_hash: config_hash.into(), params }
    }

    pub fn to_params(&self) -> Result<ParamSet> {
        if self.format != FORMAT {
            return Err(Error::Contract(format!("unknown checkpoint format {}", self.format)));
        }
        let mut out = ParamSet::new();
        for e in &self.params {
            if e.dtype != "f64le" {
                return Err(Error::Contract(format!("unsupported dtype {} for {}", e.dtype, e.name)));
            }
            let bytes = hex::decode(&e.data)
                .map_err(|err| Error::Contract(format!("bad payload for {}: {err}", e.name)))?;
            if bytes.len() % 8 != 0 {
                return Err(Error::Contract(format!("truncated payload for {}", e.name)));
            }
            let values =
                bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            out.insert(e.name.clone(), Tensor::new(e.shape.clone(), values)?);
        }
        out.reset_optimizer();
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}
