use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::PredictorConfig;
use super::model::{attention_map, Architecture, AttentionMap, Standardizer};
use crate::data::samples::{first_anchor, sample_count};
use crate::data::{normalize, FlowId, NormalizationParams, TrafficMatrix};
use crate::diff::{seeded_rng, Checkpoint, Graph, ParamSet, Tensor};
use crate::error::{Error, Result};

/// Batch size used when predicting; it does not affect the result.
const PREDICT_BATCH: usize = 256;

#[derive(Clone, Debug)]
pub struct TrainedPredictor {
    pub target: usize,
    pub target_flow: FlowId,
    pub flow_ids: Vec<FlowId>,
    pub params: ParamSet,
    /// Mean absolute training error over the final epoch, normalized units.
    pub mae_tr: f64,
    /// The same error measured in bps.
    pub mae_tr_bps: f64,
    pub mre_tr: f64,
    pub config: PredictorConfig,
    pub standardizer: Standardizer,
    pub normalization: NormalizationParams,
    pub data_hash: String,
    pub attention: AttentionMap,
}

/// Metadata written next to the parameter checkpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub target_flow: String,
    pub target: usize,
    pub flow_ids: Vec<String>,
    pub mae_tr: f64,
    pub mae_tr_bps: f64,
    pub mre_tr: f64,
    pub config: PredictorConfig,
    pub data_hash: String,
    pub standardizer: Standardizer,
    pub normalization: NormalizationParams,
    pub attention: AttentionMap,
}

/// Precomputed inputs for one target: standardized features of every sample
/// plus normalized labels.
struct SampleSet {
    features: Vec<f64>,
    labels: Vec<f64>,
    block: usize,
}

impl SampleSet {
    fn build(arch: &Architecture, tm_norm: &TrafficMatrix, target: usize, std: &Standardizer) -> Result<Self> {
        let n = sample_count(tm_norm.n_samples(), arch.window);
        if n == 0 {
            return Err(Error::Contract(format!(
                "{} samples are too few for window {}",
                tm_norm.n_samples(),
                arch.window
            )));
        }
        let block = arch.n_flows * arch.window;
        let mut features = vec![0.0; n * block];
        let mut labels = Vec::with_capacity(n);
        for s in 0..n {
            let t = first_anchor(arch.window) + s;
            arch.features_at(tm_norm, target, t, std, &mut features[s * block..(s + 1) * block]);
            labels.push(tm_norm.value(target, t + 1));
        }
        Ok(Self { features, labels, block })
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn batch(&self, idx: &[usize], window: usize) -> (Tensor, Tensor) {
        let mut feats = Vec::with_capacity(idx.len() * self.block);
        for &s in idx {
            feats.extend_from_slice(&self.features[s * self.block..(s + 1) * self.block]);
        }
        let rows = feats.len() / window;
        let labels = idx.iter().map(|&s| self.labels[s]).collect();
        (Tensor::matrix(rows, window, feats).expect("block sizes agree"), Tensor::column(labels))
    }
}

struct EpochErrors {
    abs: f64,
    abs_bps: f64,
    rel: f64,
    count: usize,
}

impl EpochErrors {
    fn new() -> Self {
        Self { abs: 0.0, abs_bps: 0.0, rel: 0.0, count: 0 }
    }

    fn add(&mut self, pred: &[f64], label: &[f64], norm: &NormalizationParams) {
        for (p, y) in pred.iter().zip(label) {
            self.abs += (p - y).abs();
            let (pd, yd) = (norm.inverse(*p), norm.inverse(*y));
            self.abs_bps += (pd - yd).abs();
            self.rel += (pd - yd).abs() / yd.max(norm.floor);
            self.count += 1;
        }
    }

    fn means(&self) -> (f64, f64, f64) {
        let n = self.count.max(1) as f64;
        (self.abs / n, self.abs_bps / n, self.rel / n)
    }
}

/// One Adam step on a batch; returns the batch predictions.
fn train_step(
    arch: &Architecture,
    params: &mut ParamSet,
    set: &SampleSet,
    target: usize,
    std: &Standardizer,
    idx: &[usize],
    lr: f64,
    epoch: usize,
) -> Result<Vec<f64>> {
    let positional = Tensor::identity(arch.n_flows);
    let (features, labels) = set.batch(idx, arch.window);
    let mut g = Graph::new();
    let bind = params.bind(&mut g);
    let failure = || Error::TrainingFailure { epoch, sample: idx[0] };
    let (pred, _) = arch.forward(&mut g, &bind, &positional, target, features, std)?;
    let loss = g.mae_loss(pred, labels)?;
    if !g.value(loss).item().is_finite() {
        return Err(failure());
    }
    let grads = g.backward(loss)?;
    let pg = bind.grads(&g, &grads);
    if !pg.is_finite() {
        return Err(failure());
    }
    params.adam_update(&pg, lr)?;
    Ok(g.value(pred).data().to_vec())
}

fn epoch_order(n: usize, batch: usize, shuffle: bool, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(rng);
    }
    order.chunks(batch).map(<[usize]>::to_vec).collect()
}

struct Prepared {
    norm_tm: TrafficMatrix,
    norm: NormalizationParams,
    std: Standardizer,
    arch: Architecture,
}

fn prepare(tm_train: &TrafficMatrix, config: &PredictorConfig) -> Result<Prepared> {
    let (norm_tm, norm) = normalize(tm_train)?;
    let std = Standardizer::fit(&norm_tm);
    let arch = Architecture::new(tm_train.n_flows(), config)?;
    Ok(Prepared { norm_tm, norm, std, arch })
}

fn finish(
    tm_train: &TrafficMatrix,
    prep: &Prepared,
    target: usize,
    params: ParamSet,
    errors: &EpochErrors,
    config: &PredictorConfig,
) -> Result<TrainedPredictor> {
    let (mae_tr, mae_tr_bps, mre_tr) = errors.means();
    let attention = attention_map(&prep.arch, &params, target)?;
    Ok(TrainedPredictor {
        target,
        target_flow: tm_train.flow_ids()[target].clone(),
        flow_ids: tm_train.flow_ids().to_vec(),
        params,
        mae_tr,
        mae_tr_bps,
        mre_tr,
        config: config.clone(),
        standardizer: prep.std.clone(),
        normalization: prep.norm.clone(),
        data_hash: tm_train.content_hash(),
        attention,
    })
}

/// Trains the predictor of one target flow on a raw (bps) training matrix.
pub fn train(tm_train: &TrafficMatrix, target: usize, config: &PredictorConfig) -> Result<TrainedPredictor> {
    if target >= tm_train.n_flows() {
        return Err(Error::Contract(format!("target {target} out of {} flows", tm_train.n_flows())));
    }
    let prep = prepare(tm_train, config)?;
    let set = SampleSet::build(&prep.arch, &prep.norm_tm, target, &prep.std)?;
    let mut rng = seeded_rng(config.seed);
    let mut params = prep.arch.init(&mut rng);
    let mut errors = EpochErrors::new();
    for epoch in 0..config.epochs {
        errors = EpochErrors::new();
        for idx in epoch_order(set.len(), config.batch_size, config.shuffle, &mut rng) {
            let pred = train_step(&prep.arch, &mut params, &set, target, &prep.std, &idx, config.learning_rate, epoch)?;
            let labels: Vec<f64> = idx.iter().map(|&s| set.labels[s]).collect();
            errors.add(&pred, &labels, &prep.norm);
        }
    }
    finish(tm_train, &prep, target, params, &errors, config)
}

/// Trains one parameter set over the samples of all `targets`, visiting
/// their batches round-robin. Each returned predictor shares the parameters
/// and carries its own training errors.
pub fn train_shared(tm_train: &TrafficMatrix, targets: &[usize], config: &PredictorConfig) -> Result<Vec<TrainedPredictor>> {
    if targets.is_empty() || targets.iter().any(|&t| t >= tm_train.n_flows()) {
        return Err(Error::Contract("shared training needs valid, non-empty targets".into()));
    }
    let prep = prepare(tm_train, config)?;
    let sets = targets
        .iter()
        .map(|&t| SampleSet::build(&prep.arch, &prep.norm_tm, t, &prep.std))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seeded_rng(config.seed);
    let mut params = prep.arch.init(&mut rng);
    let mut errors: Vec<EpochErrors> = Vec::new();
    for epoch in 0..config.epochs {
        errors = targets.iter().map(|_| EpochErrors::new()).collect();
        let orders: Vec<Vec<Vec<usize>>> =
            sets.iter().map(|s| epoch_order(s.len(), config.batch_size, config.shuffle, &mut rng)).collect();
        let rounds = orders.iter().map(Vec::len).max().unwrap_or(0);
        for r in 0..rounds {
            for (k, &target) in targets.iter().enumerate() {
                let Some(idx) = orders[k].get(r) else { continue };
                let pred = train_step(&prep.arch, &mut params, &sets[k], target, &prep.std, idx, config.learning_rate, epoch)?;
                let labels: Vec<f64> = idx.iter().map(|&s| sets[k].labels[s]).collect();
                errors[k].add(&pred, &labels, &prep.norm);
            }
        }
    }
    targets
        .iter()
        .zip(&errors)
        .map(|(&t, e)| finish(tm_train, &prep, t, params.clone(), e, config))
        .collect()
}

impl TrainedPredictor {
    pub fn architecture(&self) -> Result<Architecture> {
        Architecture::new(self.flow_ids.len(), &self.config)
    }

    fn check_universe(&self, tm: &TrafficMatrix) -> Result<()> {
        if tm.flow_ids() != self.flow_ids.as_slice() {
            return Err(Error::Contract(format!(
                "model for {} was trained on {} flows; matrix has a different flow set ({} flows)",
                self.target_flow,
                self.flow_ids.len(),
                tm.n_flows()
            )));
        }
        Ok(())
    }

    /// Predictions in normalized units for a normalized matrix: one per
    /// anchor `t = W ..= T-2`, predicting sample `t + 1`.
    pub fn predict_normalized(&self, tm_norm: &TrafficMatrix) -> Result<Vec<f64>> {
        self.check_universe(tm_norm)?;
        let arch = self.architecture()?;
        let set = SampleSet::build(&arch, tm_norm, self.target, &self.standardizer)?;
        let positional = Tensor::identity(arch.n_flows);
        let mut out = Vec::with_capacity(set.len());
        let all: Vec<usize> = (0..set.len()).collect();
        for idx in all.chunks(PREDICT_BATCH) {
            let (features, _) = set.batch(idx, arch.window);
            let mut g = Graph::new();
            let bind = self.params.bind(&mut g);
            let (pred, _) = arch.forward(&mut g, &bind, &positional, self.target, features, &self.standardizer)?;
            g.check_finite()?;
            out.extend_from_slice(g.value(pred).data());
        }
        Ok(out)
    }

    /// Predictions in bps for a raw test matrix over the same flows.
    pub fn predict_series(&self, tm_test: &TrafficMatrix) -> Result<Vec<f64>> {
        self.check_universe(tm_test)?;
        let (norm_tm, norm) = normalize(tm_test)?;
        Ok(self.predict_normalized(&norm_tm)?.into_iter().map(|y| norm.inverse(y)).collect())
    }

    /// The `k` context flows with the largest attention weight.
    pub fn top_context_flows(&self, k: usize) -> Vec<usize> {
        let available = self.attention.ranking.len();
        if k > available {
            log::warn!("asked for {k} context flows, only {available} exist; clipping");
        }
        self.attention.ranking.iter().take(k).copied().collect()
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            target_flow: self.target_flow.to_string(),
            target: self.target,
            flow_ids: self.flow_ids.iter().map(ToString::to_string).collect(),
            mae_tr: self.mae_tr,
            mae_tr_bps: self.mae_tr_bps,
            mre_tr: self.mre_tr,
            config: self.config.clone(),
            data_hash: self.data_hash.clone(),
            standardizer: self.standardizer.clone(),
            normalization: self.normalization.clone(),
            attention: self.attention.clone(),
        }
    }

    pub fn params_path(dir: &Path, target: usize) -> PathBuf {
        dir.join(format!("flow-{target:03}.params.json"))
    }

    pub fn sidecar_path(dir: &Path, target: usize) -> PathBuf {
        dir.join(format!("flow-{target:03}.json"))
    }

    /// Writes the parameter checkpoint and its sidecar into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        Checkpoint::from_params(&self.params, self.config.seed, self.config.hash())
            .save(&Self::params_path(dir, self.target))?;
        std::fs::write(Self::sidecar_path(dir, self.target), serde_json::to_vec_pretty(&self.sidecar())?)?;
        Ok(())
    }

    pub fn load(dir: &Path, target: usize) -> Result<Self> {
        let side_path = Self::sidecar_path(dir, target);
        let params_path = Self::params_path(dir, target);
        for p in [&side_path, &params_path] {
            if !p.exists() {
                return Err(Error::MissingArtifact { path: p.to_path_buf(), prerequisite: "train" });
            }
        }
        let side: Sidecar = serde_json::from_slice(&std::fs::read(&side_path)?)?;
        let ckpt = Checkpoint::load(&params_path)?;
        let expected = side.config.hash();
        if ckpt.config_hash != expected {
            return Err(Error::HashMismatch {
                path: params_path.clone(),
                expected,
                found: ckpt.config_hash.clone(),
            });
        }
        Ok(Self {
            target: side.target,
            target_flow: FlowId::parse(&side.target_flow),
            flow_ids: side.flow_ids.iter().map(|s| FlowId::parse(s)).collect(),
            params: ckpt.to_params()?,
            mae_tr: side.mae_tr,
            mae_tr_bps: side.mae_tr_bps,
            mre_tr: side.mre_tr,
            config: side.config,
            data_hash: side.data_hash,
            standardizer: side.standardizer,
            normalization: side.normalization,
            attention: side.attention,
        })
    }
}
