//! Expert review: tiered annotations over detected events, stored as an
//! append-only JSONL log.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diff::seeded_rng;
use crate::error::{Error, Result};

/// Wire names of the tiers, in display order.
pub const TIERS: [&str; 3] = ["high-confidence", "mid-confidence", "normal"];

pub const DEFAULT_REVIEW_SIZE: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tier {
    HighConfidence,
    MidConfidence,
    Normal,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::HighConfidence, Tier::MidConfidence, Tier::Normal];

    pub fn as_str(self) -> &'static str {
        TIERS[self as usize]
    }

    pub fn parse(s: &str) -> Result<Tier> {
        Tier::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Contract(format!("unknown tier {s:?}; expected one of {}", TIERS.join(", "))))
    }
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub anomaly_id: String,
    pub tier: Tier,
    pub annotator: String,
    /// Epoch seconds.
    pub timestamp: i64,
    #[serde(default)]
    pub note: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierSummary {
    #[serde(rename = "high-confidence")]
    pub high_confidence: usize,
    #[serde(rename = "mid-confidence")]
    pub mid_confidence: usize,
    pub normal: usize,
    pub total: usize,
}

impl TierSummary {
    pub fn count(&self, tier: Tier) -> usize {
        match tier {
            Tier::HighConfidence => self.high_confidence,
            Tier::MidConfidence => self.mid_confidence,
            Tier::Normal => self.normal,
        }
    }
}

/// Latest annotation per `(anomaly, annotator)`, rebuilt from the log.
#[derive(Clone, Debug, Default)]
pub struct AnnotationIndex {
    active: BTreeMap<(String, String), Annotation>,
}

impl AnnotationIndex {
    pub fn replay(records: impl IntoIterator<Item = Annotation>) -> Self {
        let mut idx = Self::default();
        for a in records {
            idx.apply(a);
        }
        idx
    }

    pub fn apply(&mut self, a: Annotation) {
        self.active.insert((a.anomaly_id.clone(), a.annotator.clone()), a);
    }

    pub fn for_anomaly(&self, id: &str) -> Vec<&Annotation> {
        self.active.values().filter(|a| a.anomaly_id == id).collect()
    }

    pub fn summary(&self) -> TierSummary {
        let mut s = TierSummary::default();
        for a in self.active.values() {
            match a.tier {
                Tier::HighConfidence => s.high_confidence += 1,
                Tier::MidConfidence => s.mid_confidence += 1,
                Tier::Normal => s.normal += 1,
            }
            s.total += 1;
        }
        s
    }
}

/// Append-only JSONL file of annotations.
#[derive(Debug)]
pub struct AnnotationLog {
    path: PathBuf,
    index: AnnotationIndex,
}

impl AnnotationLog {
    /// Opens (or starts) the log at `path` and replays it.
    pub fn open(path: &Path) -> Result<Self> {
        let records = if path.exists() { read_annotations(path)? } else { Vec::new() };
        Ok(Self { path: path.to_path_buf(), index: AnnotationIndex::replay(records) })
    }

    pub fn append(&mut self, a: Annotation) -> Result<Annotation> {
        let mut line = serde_json::to_vec(&a)?;
        line.push(b'\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        f.write_all(&line)?;
        f.flush()?;
        self.index.apply(a.clone());
        Ok(a)
    }

    pub fn index(&self) -> &AnnotationIndex {
        &self.index
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse { row: i + 1, col: e.column(), msg: e.to_string() })?);
    }
    Ok(out)
}

/// Seeded uniform sample of `n` distinct indices out of `total`, in draw order.
pub fn sample_for_review(total: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > total {
        return Err(Error::Contract(format!("cannot sample {n} events out of {total}")));
    }
    let mut rng = seeded_rng(seed);
    Ok(rand::seq::index::sample(&mut rng, total, n).into_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(id: &str, tier: Tier, who: &str) -> Annotation {
        Annotation { anomaly_id: id.into(), tier, annotator: who.into(), timestamp: 1, note: String::new() }
    }

    #[test]
    fn tier_wire_names() {
        for t in Tier::ALL {
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{t}\""));
            assert_eq!(Tier::parse(t.as_str()).unwrap(), t);
        }
        assert!(Tier::parse("normal traffic").is_err());
    }

    #[test]
    fn latest_annotation_wins_and_replay_matches() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.jsonl");
        let mut log = AnnotationLog::open(&p).unwrap();
        log.append(ann("e1", Tier::Normal, "x")).unwrap();
        log.append(ann("e1", Tier::HighConfidence, "x")).unwrap();
        log.append(ann("e1", Tier::MidConfidence, "y")).unwrap();
        log.append(ann("e2", Tier::Normal, "x")).unwrap();
        let s = log.index().summary();
        assert_eq!((s.high_confidence, s.mid_confidence, s.normal, s.total), (1, 1, 1, 3));
        assert_eq!(read_annotations(&p).unwrap().len(), 4);
        assert_eq!(AnnotationLog::open(&p).unwrap().index().summary(), s);
        assert_eq!(log.index().for_anomaly("e1").len(), 2);
    }

    #[test]
    fn review_sample() {
        let a = sample_for_review(600, 100, 3).unwrap();
        assert_eq!(a, sample_for_review(600, 100, 3).unwrap());
        assert_eq!(a.len(), 100);
        let mut all = sample_for_review(10, 10, 3).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(sample_for_review(5, 6, 3).is_err());
    }
}
