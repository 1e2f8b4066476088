use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

/// Six flows, six days, small models: every stage runs in seconds.
fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let cfg = json!({
        "seed": 3,
        "data": {
            "kind": "synthetic",
            "n_flows": 6,
            "n_groups": 2,
            "samples": 1728,
            "injections": [
                { "kind": "contextual-deviation", "flow": 1, "start": 1200, "duration": 8, "magnitude": 1.5 },
                { "kind": "point-spike", "flow": 0, "start": 1500, "duration": 1, "magnitude": 1.5 }
            ]
        },
        "predictor": { "hidden_dim": 8, "attention_dim": 4, "epochs": 15, "learning_rate": 0.01 },
        "baselines": { "rnn": { "hidden_dim": 4, "epochs": 2 } },
        "detector": { "top_n": 5 },
        "review_size": 3
    });
    let p = dir.join("config.json");
    std::fs::write(&p, cfg.to_string()).unwrap();
    p
}

fn flowsentry(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowsentry"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("FLOWSENTRY_OUT")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn err(o: &Output) -> String {
    assert!(!o.status.success());
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn stages_run_in_order_and_name_missing_prerequisites() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("out");

    assert!(err(&flowsentry(&cfg, &out, &["train"])).contains("run `generate` first"));
    ok(&flowsentry(&cfg, &out, &["generate"]));
    assert!(err(&flowsentry(&cfg, &out, &["detect"])).contains("run `train` first"));
    ok(&flowsentry(&cfg, &out, &["train"]));
    let report: Value = serde_json::from_str(&ok(&flowsentry(&cfg, &out, &["detect"]))).unwrap();
    assert_eq!(report["budget"], 5);
    let events = std::fs::read_to_string(out.join("events/gnn.jsonl")).unwrap();
    assert_eq!(events.lines().count(), 5);
    assert_eq!(std::fs::read_dir(out.join("bundles")).unwrap().count(), 5);

    assert!(err(&flowsentry(&cfg, &out, &["overlap"])).contains("at least 2 event sets"));
    ok(&flowsentry(&cfg, &out, &["baseline", "--method", "ewma"]));
    let table = ok(&flowsentry(&cfg, &out, &["overlap"]));
    assert!(table.contains("ewma") && table.contains("gnn"));
    let csv = std::fs::read_to_string(out.join("reports/overlap.csv")).unwrap();
    assert!(csv.starts_with("method,gnn,ewma\ngnn,100.00,"));

    let sample: Value = serde_json::from_str(&ok(&flowsentry(&cfg, &out, &["sample"]))).unwrap();
    assert_eq!(sample["ids"].as_array().unwrap().len(), 3);
    assert!(err(&flowsentry(&cfg, &out, &["sample", "--n", "6"])).contains("cannot sample 6"));

    let bad = flowsentry(&cfg, &out, &["baseline", "--method", "svm"]);
    assert!(err(&bad).contains("unknown method"));
}

#[test]
fn changed_config_is_refused_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("out");
    ok(&flowsentry(&cfg, &out, &["generate"]));
    let e = err(&flowsentry(&cfg, &out, &["--seed", "9", "train"]));
    assert!(e.contains("hash mismatch"), "{e}");
    ok(&flowsentry(&cfg, &out, &["--seed", "9", "--force", "train"]));
}

#[test]
fn full_run_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&flowsentry(&cfg, &a, &["run"]));
    ok(&flowsentry(&cfg, &b, &["run"]));
    for f in ["reports/overlap.csv", "events/gnn.jsonl", "events/ewma.jsonl", "events/rnn.jsonl", "events/pca-links.jsonl", "reports/sweep.json"] {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        assert!(x == y, "{f} differs between runs");
    }
    let sweep: Value = serde_json::from_slice(&std::fs::read(a.join("reports/sweep.json")).unwrap()).unwrap();
    let gnn = sweep.as_array().unwrap().iter().find(|s| s["method"] == "gnn").unwrap();
    assert_eq!(gnn["points"][0]["overlap"], 100.0);
    assert_eq!(gnn["points"].as_array().unwrap().len(), 6);
}

#[test]
fn fixed_delta_and_env_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let env_out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_flowsentry"))
        .args(["--delta", "2.5", "config"])
        .arg("--config")
        .arg(&cfg)
        .env("FLOWSENTRY_OUT", &env_out)
        .output()
        .unwrap();
    let c: Value = serde_json::from_str(&ok(&o)).unwrap();
    assert_eq!(c["detector"]["calibrate"], false);
    assert_eq!(c["detector"]["delta"], 2.5);
    assert_eq!(c["out_dir"], env_out.to_str().unwrap());
}
