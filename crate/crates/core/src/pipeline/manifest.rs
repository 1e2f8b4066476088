use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// One completed stage: the config hash that produced it and the digest of
/// every file it wrote, keyed by path relative to the output directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    pub files: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Hash of the full configuration of the most recent command.
    pub config_hash: String,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

impl Manifest {
    pub fn path(out: &Path) -> PathBuf {
        out.join(MANIFEST_FILE)
    }

    pub fn load_or_default(out: &Path) -> Result<Self> {
        let p = Self::path(out);
        if !p.exists() {
            return Ok(Self::default());
        }
        Ok(serde_json::from_slice(&std::fs::read(p)?)?)
    }

    pub fn save(&self, out: &Path) -> Result<()> {
        std::fs::write(Self::path(out), serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    /// Records `stage` with digests of `files` (relative to `out`).
    pub fn record(&mut self, out: &Path, stage: &str, config_hash: String, files: &[String]) -> Result<()> {
        let mut rec = StageRecord { config_hash, files: BTreeMap::new() };
        for f in files {
            rec.files.insert(f.clone(), file_digest(&out.join(f))?);
        }
        self.stages.insert(stage.to_string(), rec);
        Ok(())
    }

    /// Checks that `stage` exists, was produced by `expected` and that its
    /// files are intact. Hash mismatches are only logged when `force` is set.
    pub fn require(&self, out: &Path, stage: &str, expected: &str, prerequisite: &'static str, force: bool) -> Result<()> {
        let rec = self.stages.get(stage).ok_or_else(|| Error::MissingArtifact {
            path: Self::path(out),
            prerequisite,
        })?;
        if rec.config_hash != expected {
            let err = Error::HashMismatch { path: out.join(stage), expected: expected.to_string(), found: rec.config_hash.clone() };
            if !force {
                return Err(err);
            }
            log::warn!("{err}; continuing because of --force");
        }
        for (file, digest) in &rec.files {
            let path = out.join(file);
            if !path.exists() {
                return Err(Error::MissingArtifact { path, prerequisite });
            }
            let found = file_digest(&path)?;
            if &found != digest {
                let err = Error::HashMismatch { path, expected: digest.clone(), found };
                if !force {
                    return Err(err);
                }
                log::warn!("{err}; continuing because of --force");
            }
        }
        Ok(())
    }
}
