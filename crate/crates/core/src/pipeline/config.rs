use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{Components, RnnConfig, DEFAULT_CONFIDENCE};
use crate::data::{MatrixFormat, MissingPolicy, SyntheticSpec, DEFAULT_MIN_MEAN_BPS};
use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::predictor::PredictorConfig;
use crate::triage::DEFAULT_REVIEW_SIZE;

/// Detection methods known to the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gnn,
    PcaLinks,
    PcaFlows,
    Ewma,
    Rnn,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Gnn, Method::PcaLinks, Method::PcaFlows, Method::Ewma, Method::Rnn];
    pub const BASELINES: [Method; 4] = [Method::PcaLinks, Method::PcaFlows, Method::Ewma, Method::Rnn];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gnn => "gnn",
            Method::PcaLinks => "pca-links",
            Method::PcaFlows => "pca-flows",
            Method::Ewma => "ewma",
            Method::Rnn => "rnn",
        }
    }

    /// PCA detections carry no flow.
    pub fn network_wide(self) -> bool {
        matches!(self, Method::PcaLinks | Method::PcaFlows)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let known: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
            Error::Contract(format!("unknown method {s:?}; expected one of {}", known.join(", ")))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    S1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Built-in synthetic scenario seeded by the pipeline seed.
    Scenario { name: Scenario },
    Synthetic(SyntheticSpec),
    File {
        matrix: PathBuf,
        #[serde(default = "default_format")]
        format: MatrixFormat,
        #[serde(default)]
        missing: MissingPolicy,
        #[serde(default)]
        routing: Option<PathBuf>,
        #[serde(default)]
        labels: Option<PathBuf>,
        #[serde(default = "default_min_mean")]
        min_mean_bps: f64,
    },
}

fn default_format() -> MatrixFormat {
    MatrixFormat::Csv
}

fn default_min_mean() -> f64 {
    DEFAULT_MIN_MEAN_BPS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcaConfig {
    pub components: Components,
    pub confidence: f64,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self { components: Components::default(), confidence: DEFAULT_CONFIDENCE }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// EWMA window; the predictor window when unset.
    pub ewma_window: Option<usize>,
    /// RNN settings; mirrors the predictor's size and schedule when unset.
    pub rnn: Option<RnnConfig>,
    pub pca: PcaConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub data: DataSource,
    /// Fraction of samples used for training.
    pub split_fraction: f64,
    pub predictor: PredictorConfig,
    pub detector: DetectorConfig,
    pub baselines: BaselineConfig,
    pub review_size: usize,
    /// Sweep budgets run from 1x to this multiple of the detector budget.
    pub sweep_multiplier: usize,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    /// Scenario S1 at laptop scale: D = 32, K = 2, W = 5, 50 epochs, budget 30.
    fn default() -> Self {
        Self {
            seed: 1,
            data: DataSource::Scenario { name: Scenario::S1 },
            split_fraction: 0.5,
            predictor: PredictorConfig::default().with_hidden(32),
            detector: DetectorConfig { top_n: 30, ..DetectorConfig::default() },
            baselines: BaselineConfig::default(),
            review_size: DEFAULT_REVIEW_SIZE,
            sweep_multiplier: 6,
            out_dir: PathBuf::from("flowsentry-out"),
        }
    }
}

fn digest(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("config serializes")
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        let cfg: PipelineConfig = serde_json::from_slice(&bytes)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Contract(format!("split fraction {} not in (0, 1)", self.split_fraction)));
        }
        if self.sweep_multiplier == 0 {
            return Err(Error::Contract("sweep multiplier must be >= 1".into()));
        }
        self.predictor.validate()?;
        self.detector.validate()?;
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()?;
        }
        if let Some(w) = self.baselines.ewma_window {
            if w == 0 {
                return Err(Error::Contract("EWMA window must be >= 1".into()));
            }
        }
        let c = self.baselines.pca.confidence;
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::Contract(format!("PCA confidence {c} not in (0, 1)")));
        }
        Ok(())
    }

    /// The synthetic spec this config generates, if any.
    pub fn synthetic_spec(&self) -> Option<SyntheticSpec> {
        match &self.data {
            DataSource::Scenario { name: Scenario::S1 } => Some(SyntheticSpec::scenario_s1(self.seed)),
            DataSource::Synthetic(spec) => Some(spec.clone()),
            DataSource::File { .. } => None,
        }
    }

    pub fn predictor_config(&self) -> PredictorConfig {
        PredictorConfig { seed: self.seed, ..self.predictor.clone() }
    }

    pub fn rnn_config(&self) -> RnnConfig {
        let p = &self.predictor;
        let base = self.baselines.rnn.clone().unwrap_or(RnnConfig {
            hidden_dim: p.hidden_dim,
            window: p.window,
            epochs: p.epochs,
            learning_rate: p.learning_rate,
            batch_size: p.batch_size,
            seed: 0,
            shuffle: p.shuffle,
        });
        RnnConfig { seed: self.seed, ..base }
    }

    pub fn ewma_window(&self) -> usize {
        self.baselines.ewma_window.unwrap_or(self.predictor.window)
    }

    /// SHA-256 of the whole configuration except the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        digest(&[&json(&c)])
    }

    pub fn data_hash(&self) -> String {
        digest(&[b"data", &json(&self.data), &self.seed.to_le_bytes(), &self.split_fraction.to_le_bytes()])
    }

    pub fn models_hash(&self) -> String {
        digest(&[b"models", self.data_hash().as_bytes(), &json(&self.predictor_config())])
    }

    fn detection_json(&self) -> Vec<u8> {
        json(&self.detector)
    }

    /// Hash of everything that feeds the events of `method`.
    pub fn method_hash(&self, method: Method) -> String {
        let upstream = match method {
            Method::Gnn => self.models_hash(),
            Method::Ewma => digest(&[self.data_hash().as_bytes(), &self.ewma_window().to_le_bytes()]),
            Method::Rnn => digest(&[self.data_hash().as_bytes(), &json(&self.rnn_config())]),
            Method::PcaLinks | Method::PcaFlows => digest(&[self.data_hash().as_bytes(), &json(&self.baselines.pca)]),
        };
        digest(&[method.as_str().as_bytes(), upstream.as_bytes(), &self.detection_json()])
    }
}
