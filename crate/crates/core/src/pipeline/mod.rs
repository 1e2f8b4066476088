//! End-to-end runs: every stage reads its inputs from and writes its outputs
//! to one output directory, tracked by a manifest of config hashes.

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{BaselineConfig, DataSource, Method, PcaConfig, PipelineConfig, Scenario};
pub use manifest::{file_digest, Manifest, StageRecord, MANIFEST_FILE};

use crate::baselines::{alpha_for_window, ewma_series, pca_fit, pca_input, rnn_train_and_score, PcaInput};
use crate::data::{generate_synthetic, load_labels, normalize, save_labels, GroundTruth, RoutingMatrix, TrafficMatrix};
use crate::detector::{
    calibrate_top_n, detect_events, gate_flows, Calibration, read_events_jsonl, score, write_events_jsonl, EventRecord, Gate, ScoreDomain, ScoreSeries,
};
use crate::error::{Error, Result};
use crate::eval::{
    budget_multiples, overlap_matrix, score_against_labels, threshold_sweep, BundleSource, ContextBundle, DetectionMetrics,
    FlowTrace, OverlapMatrix, SweepResult, DEFAULT_HALF_WINDOW,
};
use crate::predictor::{train, train_shared, TrainedPredictor};
use crate::triage::sample_for_review;

/// Overrides the output directory when set.
pub const OUT_ENV: &str = "FLOWSENTRY_OUT";

pub const MATRIX: &str = "data/matrix.csv";
pub const ROUTING: &str = "data/routing.csv";
pub const LABELS: &str = "data/labels.json";
pub const MODELS: &str = "models";
pub const BUNDLES: &str = "bundles";
pub const OVERLAP_CSV: &str = "reports/overlap.csv";
pub const OVERLAP_TXT: &str = "reports/overlap.txt";
pub const METRICS: &str = "reports/metrics.json";
pub const SWEEP: &str = "reports/sweep.json";
pub const SAMPLE: &str = "review/sample.json";
pub const ANNOTATIONS: &str = "review/annotations.jsonl";

pub fn events_file(method: Method) -> String {
    format!("events/{method}.jsonl")
}

pub fn scores_file(method: Method) -> String {
    format!("scores/{method}.json")
}

pub fn report_file(method: Method) -> String {
    format!("reports/{method}.json")
}

pub fn bundle_id(index: usize) -> String {
    format!("gnn-{index:04}")
}

/// Traffic, routing and labels split into training and test parts.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub matrix: TrafficMatrix,
    pub routing: Option<RoutingMatrix>,
    /// Sample indices of the full matrix.
    pub labels: Option<Vec<GroundTruth>>,
    pub train: TrafficMatrix,
    pub test: TrafficMatrix,
}

impl Dataset {
    pub fn train_len(&self) -> usize {
        self.train.n_samples()
    }

    /// Labels re-indexed to the test matrix.
    pub fn test_labels(&self) -> Option<Vec<GroundTruth>> {
        let offset = self.train_len();
        self.labels.as_ref().map(|ls| ls.iter().filter_map(|l| l.shifted(offset)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowTraining {
    pub flow: String,
    pub mae_tr: f64,
    pub mae_tr_bps: f64,
    pub mre_tr: f64,
    pub top_context: Vec<String>,
}

/// Score series of one method, with the GNN's gate and per-flow traces.
pub type Scored = (Vec<ScoreSeries>, Option<Gate>, Option<BTreeMap<usize, FlowTrace>>);

/// Calibration outcome of one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub budget: usize,
    pub delta: f64,
    pub count_at_delta: usize,
    pub trimmed: usize,
    pub scored_series: usize,
    pub gate: Option<Gate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub report: MethodReport,
    pub events: Vec<EventRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewSample {
    pub seed: u64,
    pub ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overlap: OverlapMatrix,
    pub metrics: BTreeMap<String, DetectionMetrics>,
}

/// Resolves the output directory: `FLOWSENTRY_OUT`, then `flag`, then the config.
pub fn resolve_out_dir(flag: Option<&Path>, config: &PipelineConfig) -> PathBuf {
    if let Some(env) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    flag.map_or_else(|| config.out_dir.clone(), Path::to_path_buf)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, prerequisite: &'static str) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|_| Error::MissingArtifact { path: path.to_path_buf(), prerequisite })?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub out: PathBuf,
    pub force: bool,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, out: PathBuf, force: bool) -> Result<Self> {
        config.validate()?;
        std::fs::create_dir_all(&out)?;
        Ok(Self { config, out, force })
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn commit(&self, stage: &str, hash: String, files: &[String]) -> Result<()> {
        let mut m = Manifest::load_or_default(&self.out)?;
        m.record(&self.out, stage, hash, files)?;
        m.config_hash = self.config.hash();
        m.save(&self.out)?;
        write_json(&self.path("config.json"), &self.config)
    }

    fn require(&self, stage: &str, expected: &str, prerequisite: &'static str) -> Result<()> {
        Manifest::load_or_default(&self.out)?.require(&self.out, stage, expected, prerequisite, self.force)
    }

    fn has_stage(&self, stage: &str, expected: &str) -> bool {
        Manifest::load_or_default(&self.out)
            .is_ok_and(|m| m.stages.get(stage).is_some_and(|r| r.config_hash == expected))
    }

    fn split(&self, matrix: TrafficMatrix, routing: Option<RoutingMatrix>, labels: Option<Vec<GroundTruth>>) -> Result<Dataset> {
        let (train, test) = matrix.split_train_test(self.config.split_fraction)?;
        Ok(Dataset { matrix, routing, labels, train, test })
    }

    /// Builds or loads the traffic matrix and writes it under `data/`.
    pub fn generate(&self) -> Result<Dataset> {
        let (matrix, routing, labels) = match (&self.config.data, self.config.synthetic_spec()) {
            (_, Some(spec)) => {
                let d = generate_synthetic(&spec)?;
                (d.matrix, Some(d.routing), Some(d.labels))
            }
            (DataSource::File { matrix, format, missing, routing, labels, min_mean_bps }, None) => {
                let raw = TrafficMatrix::load(matrix, *format, *missing)?;
                let (tm, kept) = raw.filter_active_flows(*min_mean_bps)?;
                if kept.len() < raw.n_flows() {
                    log::info!("kept {} of {} flows above {min_mean_bps} bps", kept.len(), raw.n_flows());
                }
                let routing = routing.as_ref().map(|p| RoutingMatrix::load_csv(p)?.select_flows(&kept)).transpose()?;
                let labels = labels.as_ref().map(|p| load_labels(p)).transpose()?;
                (tm, routing, labels)
            }
            _ => unreachable!("synthetic sources always yield a spec"),
        };
        std::fs::create_dir_all(self.path("data"))?;
        matrix.save_csv(&self.path(MATRIX))?;
        let mut files = vec![MATRIX.to_string()];
        if let Some(r) = &routing {
            r.save_csv(&self.path(ROUTING))?;
            files.push(ROUTING.into());
        }
        if let Some(l) = &labels {
            save_labels(l, &self.path(LABELS))?;
            files.push(LABELS.into());
        }
        self.commit("generate", self.config.data_hash(), &files)?;
        log::info!("generated {} flows x {} samples", matrix.n_flows(), matrix.n_samples());
        self.split(matrix, routing, labels)
    }

    pub fn load_data(&self) -> Result<Dataset> {
        self.require("generate", &self.config.data_hash(), "generate")?;
        let matrix = TrafficMatrix::load(&self.path(MATRIX), crate::data::MatrixFormat::Csv, Default::default())?;
        let routing = self.path(ROUTING).exists().then(|| RoutingMatrix::load_csv(&self.path(ROUTING))).transpose()?;
        let labels = self.path(LABELS).exists().then(|| load_labels(&self.path(LABELS))).transpose()?;
        self.split(matrix, routing, labels)
    }

    /// Trains one predictor per flow on the training part.
    pub fn train(&self) -> Result<Vec<TrainedPredictor>> {
        let data = self.load_data()?;
        let cfg = self.config.predictor_config();
        let targets: Vec<usize> = (0..data.train.n_flows()).collect();
        let models = if cfg.shared_model {
            train_shared(&data.train, &targets, &cfg)?
        } else {
            targets.par_iter().map(|&t| train(&data.train, t, &cfg)).collect::<Result<Vec<_>>>()?
        };
        let dir = self.path(MODELS);
        let mut files = Vec::new();
        let mut summary = Vec::new();
        for m in &models {
            m.save(&dir)?;
            for p in [TrainedPredictor::params_path(&dir, m.target), TrainedPredictor::sidecar_path(&dir, m.target)] {
                files.push(p.strip_prefix(&self.out).expect("inside out dir").to_string_lossy().into_owned());
            }
            summary.push(FlowTraining {
                flow: m.target_flow.to_string(),
                mae_tr: m.mae_tr,
                mae_tr_bps: m.mae_tr_bps,
                mre_tr: m.mre_tr,
                top_context: m.top_context_flows(5).iter().map(|&f| m.flow_ids[f].to_string()).collect(),
            });
        }
        write_json(&self.path("reports/train.json"), &summary)?;
        files.push("reports/train.json".into());
        self.commit("train", self.config.models_hash(), &files)?;
        Ok(models)
    }

    pub fn load_models(&self) -> Result<Vec<TrainedPredictor>> {
        self.require("train", &self.config.models_hash(), "train")?;
        let n = self.load_data()?.matrix.n_flows();
        (0..n).map(|t| TrainedPredictor::load(&self.path(MODELS), t)).collect()
    }

    /// Score series of `method` over the test part.
    pub fn score_method(&self, method: Method, data: &Dataset) -> Result<Scored> {
        let train_len = data.train_len();
        let series_norm = || -> Result<TrafficMatrix> { Ok(normalize(&data.matrix)?.0) };
        match method {
            Method::Gnn => {
                let models = self.load_models()?;
                let gate = gate_flows(&models, self.config.detector.mre_max);
                let (test_norm, norm) = normalize(&data.test)?;
                let mut series = Vec::new();
                let mut traces = BTreeMap::new();
                for m in models.iter().filter(|m| gate.kept.contains(&m.target)) {
                    let preds = m.predict_normalized(&test_norm)?;
                    let offset = m.config.window + 1;
                    let scores = match self.config.detector.domain {
                        ScoreDomain::Normalized => score(&preds, &test_norm.flow(m.target)[offset..], m.mae_tr, 1.0)?,
                        ScoreDomain::Bps => {
                            let bps: Vec<f64> = preds.iter().map(|p| norm.inverse(*p)).collect();
                            score(&bps, &data.test.flow(m.target)[offset..], m.mae_tr_bps, 1.0)?
                        }
                    };
                    series.push(ScoreSeries { flow: Some(m.target), method: method.to_string(), offset, scores, delta: 1.0 });
                    let context = m.attention.ranking.iter().map(|&f| (f, m.attention.weights[f])).collect();
                    traces.insert(m.target, FlowTrace { offset, predictions: preds, mae_tr: m.mae_tr, context });
                }
                Ok((series, Some(gate), Some(traces)))
            }
            Method::Ewma => {
                let norm = series_norm()?;
                let alpha = alpha_for_window(self.config.ewma_window());
                let series = (0..norm.n_flows())
                    .map(|f| Ok(ewma_series(f, norm.flow(f), alpha, train_len)?.1))
                    .collect::<Result<Vec<_>>>()?;
                Ok((series, None, None))
            }
            Method::Rnn => {
                let norm = series_norm()?;
                let cfg = self.config.rnn_config();
                let series = (0..norm.n_flows())
                    .into_par_iter()
                    .map(|f| Ok(rnn_train_and_score(f, norm.flow(f), train_len, &cfg)?.1))
                    .collect::<Result<Vec<_>>>()?;
                Ok((series, None, None))
            }
            Method::PcaLinks | Method::PcaFlows => {
                let input = if method == Method::PcaLinks { PcaInput::Links } else { PcaInput::Flows };
                let routing = match (&data.routing, input) {
                    (Some(r), _) => r.clone(),
                    (None, PcaInput::Links) => {
                        return Err(Error::MissingArtifact { path: self.path(ROUTING), prerequisite: "generate" })
                    }
                    (None, PcaInput::Flows) => RoutingMatrix::new(
                        vec!["l0".into()],
                        data.matrix.flow_ids().iter().map(ToString::to_string).collect(),
                        vec![vec![1; data.matrix.n_flows()]],
                    )?,
                };
                let pca = &self.config.baselines.pca;
                let (train, dims) = pca_input(&data.train, &routing, input)?;
                let model = pca_fit(&train, dims, pca.components, pca.confidence)?;
                model.save_json(&self.path(&format!("models/{method}.json")))?;
                let (test, _) = pca_input(&data.test, &routing, input)?;
                Ok((vec![model.score_series(&test, method.as_str())?], None, None))
            }
        }
    }

    /// Scores, calibrates to the event budget and writes events for `method`.
    pub fn run_method(&self, method: Method) -> Result<MethodRun> {
        let data = self.load_data()?;
        std::fs::create_dir_all(self.path(MODELS))?;
        let (series, gate, traces) = self.score_method(method, &data)?;
        let det = &self.config.detector;
        let cal = if det.calibrate {
            calibrate_top_n(&series, det.top_n, det.gap)?
        } else {
            let events: Vec<_> = series.iter().flat_map(|s| detect_events(&s.with_delta(det.delta), det.gap)).collect();
            Calibration { delta: det.delta, count_at_delta: events.len(), trimmed: 0, events }
        };
        let events: Vec<EventRecord> = cal.events.iter().map(|e| EventRecord::new(e, &data.test, cal.delta)).collect();
        for dir in ["events", "scores", "reports"] {
            std::fs::create_dir_all(self.path(dir))?;
        }
        write_events_jsonl(&events, &self.path(&events_file(method)))?;
        write_json(&self.path(&scores_file(method)), &series)?;
        let report = MethodReport {
            method,
            budget: if det.calibrate { det.top_n } else { cal.events.len() },
            delta: cal.delta,
            count_at_delta: cal.count_at_delta,
            trimmed: cal.trimmed,
            scored_series: series.len(),
            gate,
        };
        write_json(&self.path(&report_file(method)), &report)?;
        let mut files = vec![events_file(method), scores_file(method), report_file(method)];
        if let Some(traces) = traces {
            files.extend(self.write_bundles(&data, traces, &events)?);
        }
        self.commit(method.as_str(), self.config.method_hash(method), &files)?;
        log::info!("{method}: {} events at delta {:.6}", events.len(), cal.delta);
        Ok(MethodRun { report, events })
    }

    fn write_bundles(&self, data: &Dataset, traces: BTreeMap<usize, FlowTrace>, events: &[EventRecord]) -> Result<Vec<String>> {
        let mut baselines = Vec::new();
        for m in [Method::Ewma, Method::Rnn] {
            if self.has_stage(m.as_str(), &self.config.method_hash(m)) {
                baselines.extend(read_json::<Vec<ScoreSeries>>(&self.path(&scores_file(m)), "baseline")?);
            }
        }
        let normalization = crate::data::NormalizationParams::default();
        let src = BundleSource { matrix: &data.test, normalization: &normalization, traces, baselines, half_window: DEFAULT_HALF_WINDOW };
        let dir = self.path(BUNDLES);
        if dir.exists() {
            std::fs::remove_dir_all(&dir)?;
        }
        std::fs::create_dir_all(&dir)?;
        let mut files = Vec::with_capacity(events.len());
        for (i, e) in events.iter().enumerate() {
            let b = src.bundle(bundle_id(i), e)?;
            b.save(&dir)?;
            files.push(format!("{BUNDLES}/{}.json", b.id));
        }
        Ok(files)
    }

    pub fn detect(&self) -> Result<MethodRun> {
        self.run_method(Method::Gnn)
    }

    /// Events of `method` from a previous run.
    pub fn load_events(&self, method: Method) -> Result<Vec<EventRecord>> {
        let prerequisite = if method == Method::Gnn { "detect" } else { "baseline" };
        self.require(method.as_str(), &self.config.method_hash(method), prerequisite)?;
        read_events_jsonl(&self.path(&events_file(method)))
    }

    fn available_methods(&self) -> Vec<Method> {
        Method::ALL.into_iter().filter(|m| self.has_stage(m.as_str(), &self.config.method_hash(*m))).collect()
    }

    /// Overlap matrix over every method with events, plus label metrics when
    /// labels exist.
    pub fn overlap(&self) -> Result<EvalReport> {
        let methods = self.available_methods();
        if methods.len() < 2 {
            return Err(Error::Contract(format!(
                "overlap needs at least 2 event sets, found {}; run detect and baseline first",
                methods.len()
            )));
        }
        let data = self.load_data()?;
        let labels = data.test_labels();
        let mut sets = Vec::new();
        let mut metrics = BTreeMap::new();
        for m in methods {
            let events: Vec<_> = self.load_events(m)?.iter().map(EventRecord::to_event).collect();
            if let Some(l) = &labels {
                metrics.insert(m.to_string(), score_against_labels(&events, l));
            }
            sets.push((m.to_string(), events));
        }
        let overlap = overlap_matrix(&sets)?;
        std::fs::create_dir_all(self.path("reports"))?;
        std::fs::write(self.path(OVERLAP_CSV), overlap.to_csv())?;
        std::fs::write(self.path(OVERLAP_TXT), overlap.to_table())?;
        let mut files = vec![OVERLAP_CSV.to_string(), OVERLAP_TXT.to_string()];
        if labels.is_some() {
            write_json(&self.path(METRICS), &metrics)?;
            files.push(METRICS.into());
        }
        self.commit("overlap", self.config.hash(), &files)?;
        Ok(EvalReport { overlap, metrics })
    }

    /// Recalibrates every method at 1x..kx the budget against the GNN events.
    pub fn sweep(&self) -> Result<Vec<SweepResult>> {
        let reference: Vec<_> = self.load_events(Method::Gnn)?.iter().map(EventRecord::to_event).collect();
        let budgets = budget_multiples(self.config.detector.top_n, self.config.sweep_multiplier);
        let mut out = Vec::new();
        for m in self.available_methods() {
            let series: Vec<ScoreSeries> = read_json(&self.path(&scores_file(m)), "baseline")?;
            out.push(threshold_sweep(m.as_str(), &series, &budgets, &reference, self.config.detector.gap)?);
        }
        write_json(&self.path(SWEEP), &out)?;
        self.commit("sweep", self.config.hash(), &[SWEEP.to_string()])?;
        Ok(out)
    }

    /// Seeded sample of GNN events for expert review.
    pub fn sample(&self, n: Option<usize>) -> Result<ReviewSample> {
        let events = self.load_events(Method::Gnn)?;
        let n = n.unwrap_or(self.config.review_size.min(events.len()));
        let idx = sample_for_review(events.len(), n, self.config.seed)?;
        let sample = ReviewSample { seed: self.config.seed, ids: idx.into_iter().map(bundle_id).collect() };
        write_json(&self.path(SAMPLE), &sample)?;
        self.commit("sample", self.config.hash(), &[SAMPLE.to_string()])?;
        Ok(sample)
    }

    pub fn load_sample(&self) -> Result<Option<ReviewSample>> {
        let p = self.path(SAMPLE);
        if !p.exists() {
            return Ok(None);
        }
        read_json(&p, "sample").map(Some)
    }

    pub fn load_bundle(&self, id: &str) -> Result<ContextBundle> {
        ContextBundle::load(&self.path(BUNDLES), id)
    }

    /// Every stage in order; baselines run before detection so the context
    /// bundles carry their score traces.
    pub fn run_all(&self) -> Result<EvalReport> {
        self.generate()?;
        let data = self.train().and_then(|_| self.load_data())?;
        for m in Method::BASELINES {
            if m == Method::PcaLinks && data.routing.is_none() {
                log::warn!("no routing matrix: skipping {m}");
                continue;
            }
            self.run_method(m)?;
        }
        self.detect()?;
        let report = self.overlap()?;
        self.sweep()?;
        self.sample(None)?;
        Ok(report)
    }
}
