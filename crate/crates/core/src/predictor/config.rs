use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::TargetWindow;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    /// Width `D` of every hidden state.
    pub hidden_dim: usize,
    /// Message-passing rounds `K`.
    pub iterations: usize,
    /// History window `W`.
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Hidden layers in each of the flow, position and target-label encoders.
    pub encoder_hidden_layers: usize,
    /// Width of the attention projection.
    pub attention_dim: usize,
    /// Let each node attend to itself as well.
    pub self_loop: bool,
    pub target_window: TargetWindow,
    pub shuffle: bool,
    /// Train one parameter set for every target instead of one per target.
    pub shared_model: bool,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 128,
            iterations: 2,
            window: 5,
            epochs: 50,
            learning_rate: 1e-3,
            batch_size: 32,
            seed: 1,
            encoder_hidden_layers: 1,
            attention_dim: 128,
            self_loop: false,
            target_window: TargetWindow::Masked,
            shuffle: false,
            shared_model: false,
        }
    }
}

impl PredictorConfig {
    /// Same config with `D` and the attention width both set to `d`.
    pub fn with_hidden(mut self, d: usize) -> Self {
        self.hidden_dim = d;
        self.attention_dim = d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Contract(format!("predictor config: {m}")));
        if self.hidden_dim == 0 || self.attention_dim == 0 {
            return bad("hidden and attention widths must be >= 1");
        }
        if self.iterations == 0 {
            return bad("K must be >= 1");
        }
        if self.window == 0 {
            return bad("window must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be >= 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be > 0");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_invariants() {
        let c = PredictorConfig::default();
        assert_eq!((c.hidden_dim, c.epochs, c.iterations, c.window), (128, 50, 2, 5));
        c.validate().unwrap();
        for broken in [
            PredictorConfig { iterations: 0, ..c.clone() },
            PredictorConfig { hidden_dim: 0, ..c.clone() },
            PredictorConfig { epochs: 0, ..c.clone() },
        ] {
            assert!(broken.validate().is_err());
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = PredictorConfig::default();
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), a.clone().with_hidden(32).hash());
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<PredictorConfig>(&json).unwrap(), a);
        assert_eq!(serde_json::from_str::<PredictorConfig>("{\"epochs\": 3}").unwrap().epochs, 3);
    }
}
