use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AnomalyEvent;
use crate::data::TrafficMatrix;
use crate::error::{Error, Result};

/// One line of an events file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub method: String,
    /// `origin-dest`, or `*` for network-wide events.
    pub flow: String,
    pub origin: Option<String>,
    pub dest: Option<String>,
    pub start_ts: i64,
    pub end_ts: i64,
    pub peak_score: f64,
    pub delta: f64,
    /// Sample indices within the scored matrix.
    pub start: usize,
    pub end: usize,
    pub flow_index: Option<usize>,
}

impl EventRecord {
    pub fn new(event: &AnomalyEvent, tm: &TrafficMatrix, delta: f64) -> Self {
        let id = event.flow.map(|f| tm.flow_ids()[f].clone());
        Self {
            method: event.method.clone(),
            flow: id.as_ref().map_or_else(|| "*".to_string(), ToString::to_string),
            origin: id.as_ref().map(|i| i.origin.clone()),
            dest: id.as_ref().map(|i| i.dest.clone()),
            start_ts: tm.timestamp(event.start),
            end_ts: tm.timestamp(event.end),
            peak_score: event.peak_score,
            delta,
            start: event.start,
            end: event.end,
            flow_index: event.flow,
        }
    }

    pub fn to_event(&self) -> AnomalyEvent {
        AnomalyEvent {
            method: self.method.clone(),
            flow: self.flow_index,
            start: self.start,
            end: self.end,
            peak_score: self.peak_score,
        }
    }
}

pub fn write_events_jsonl(records: &[EventRecord], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_events_jsonl(path: &Path) -> Result<Vec<EventRecord>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse { row: i + 1, col: e.column(), msg: e.to_string() })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FlowId;

    #[test]
    fn jsonl_round_trip() {
        let tm = TrafficMatrix::from_flows(vec![FlowId::new("a", "b")], vec![vec![1.0; 10]], 300, 1000).unwrap();
        let ev = [
            AnomalyEvent { method: "gnn".into(), flow: Some(0), start: 2, end: 4, peak_score: 3.5 },
            AnomalyEvent { method: "pca-links".into(), flow: None, start: 7, end: 7, peak_score: 1.25 },
        ];
        let recs: Vec<EventRecord> = ev.iter().map(|e| EventRecord::new(e, &tm, 0.5)).collect();
        assert_eq!(recs[0].flow, "a-b");
        assert_eq!((recs[0].start_ts, recs[0].end_ts), (1600, 2200));
        assert_eq!((recs[1].flow.as_str(), recs[1].origin.clone()), ("*", None));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.jsonl");
        write_events_jsonl(&recs, &p).unwrap();
        let back = read_events_jsonl(&p).unwrap();
        assert_eq!(back, recs);
        assert_eq!(back[0].to_event(), ev[0]);
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("{\"method\":\"gnn\",\"flow\":\"a-b\",\"origin\":\"a\",\"dest\":\"b\",\"start_ts\":1600"));
    }
}
