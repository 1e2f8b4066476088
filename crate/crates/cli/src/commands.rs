use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use flowsentry::pipeline::{resolve_out_dir, Method, Pipeline, PipelineConfig, OUT_ENV};

use crate::server::{self, AppState, DEFAULT_PORT};

#[derive(Debug, Parser)]
#[command(name = "flowsentry", version, about = "Contextual anomaly detection on OD-flow traffic matrices")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Pipeline configuration (JSON). Defaults to synthetic scenario S1.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overridden by FLOWSENTRY_OUT.
    #[arg(long, global = true, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Event budget for threshold calibration.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Fixed detection threshold; disables calibration.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Accept upstream artifacts produced by a different configuration.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the traffic matrix (synthetic or from file) under data/.
    Generate,
    /// Train one contextual predictor per flow.
    Train,
    /// Score the test half with the predictors and write events and context bundles.
    Detect,
    /// Run one detection method.
    Baseline {
        #[arg(long, value_parser = parse_method)]
        method: Method,
    },
    /// Overlap matrix across all methods with events, plus label metrics.
    Overlap,
    /// Recalibrate every method at 1x..kx the budget against the predictor's events.
    Sweep,
    /// Seeded sample of events for expert review.
    Sample {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Every stage in order.
    Run,
    /// Print the effective configuration as JSON.
    Config,
    /// Serve the triage API and UI.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory with the built triage UI.
        #[arg(long)]
        ui: Option<PathBuf>,
        /// Annotation log; defaults to review/annotations.jsonl in the output directory.
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: flowsentry::Error| e.to_string())
}

/// Loads the config file (or the default) and applies command-line overrides.
pub fn effective_config(g: &Global) -> flowsentry::Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(b) = g.budget {
        cfg.detector.top_n = b;
        cfg.detector.calibrate = true;
    }
    if let Some(d) = g.delta {
        cfg.detector.delta = d;
        cfg.detector.calibrate = false;
    }
    cfg.out_dir = resolve_out_dir(g.out.as_deref(), &cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(v: &T) -> flowsentry::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

pub fn run(cli: Cli) -> flowsentry::Result<()> {
    let cfg = effective_config(&cli.global)?;
    if let Command::Config = cli.command {
        return print_json(&cfg);
    }
    let out = cfg.out_dir.clone();
    let p = Pipeline::new(cfg, out.clone(), cli.global.force)?;
    match cli.command {
        Command::Generate => {
            let d = p.generate()?;
            println!("{} flows x {} samples written to {}", d.matrix.n_flows(), d.matrix.n_samples(), out.display());
        }
        Command::Train => {
            for m in p.train()? {
                println!("{:<12} mae_tr {:.4}  mre_tr {:.4}", m.target_flow, m.mae_tr, m.mre_tr);
            }
        }
        Command::Detect => print_json(&p.detect()?.report)?,
        Command::Baseline { method } => print_json(&p.run_method(method)?.report)?,
        Command::Overlap => {
            let r = p.overlap()?;
            print!("{}", r.overlap.to_table());
        }
        Command::Sweep => print_json(&p.sweep()?)?,
        Command::Sample { n } => print_json(&p.sample(n)?)?,
        Command::Run => {
            let r = p.run_all()?;
            print!("{}", r.overlap.to_table());
        }
        Command::Config => unreachable!("handled above"),
        Command::Serve { port, host, ui, annotations } => {
            p.load_events(Method::Gnn)?;
            let state = AppState::load(&out, annotations.as_deref())?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(state, ui.as_deref(), &host, port))?;
        }
    }
    Ok(())
}
