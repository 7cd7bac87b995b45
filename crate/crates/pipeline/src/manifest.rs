//! `manifest.json`: per-stage status, config hash and output hashes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Read};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use qgdebias_core::spectral_qg::write_atomic;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::layout::Layout;
use crate::PipelineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: StageStatus,
    /// sha256 of `<stage>/config.toml`, the effective config of this stage.
    pub config_sha256: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Relative path → sha256 of the file.
    pub outputs: BTreeMap<String, String>,
    pub notes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut h = Sha256::new();
    let mut f = File::open(path)?;
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    pub fn load(layout: &Layout) -> Result<Self, PipelineError> {
        let path = layout.manifest();
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(&path)?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Other(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, layout: &Layout) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(layout.manifest(), text.as_bytes())?;
        Ok(())
    }

    /// Every output of every complete stage exists and matches its hash, and
    /// each stored stage config matches its recorded hash.
    pub fn verify(&self, layout: &Layout) -> Result<(), PipelineError> {
        for (stage, rec) in &self.stages {
            if rec.status != StageStatus::Complete {
                continue;
            }
            let cfg = layout.stage_config(stage);
            if sha256_file(&cfg)? != rec.config_sha256 {
                return Err(PipelineError::Other(format!("{stage}: config.toml does not match its hash")));
            }
            for (rel, hash) in &rec.outputs {
                let p = layout.root().join(rel);
                if !p.exists() {
                    return Err(PipelineError::Missing(format!("{stage}: {rel} is missing")));
                }
                if &sha256_file(&p)? != hash {
                    return Err(PipelineError::Other(format!("{stage}: {rel} does not match its hash")));
                }
            }
        }
        Ok(())
    }
}

/// Bookkeeping for one stage invocation.
pub struct StageRun {
    pub layout: Layout,
    name: String,
    started: u64,
    config_sha256: String,
    outputs: BTreeMap<String, String>,
    notes: BTreeMap<String, String>,
}

impl StageRun {
    /// Writes the effective config into the stage directory.
    pub fn begin(cfg: &ExperimentConfig, name: &str) -> Result<Self, PipelineError> {
        let layout = Layout::new(cfg.out_dir()?);
        std::fs::create_dir_all(layout.stage_dir(name))?;
        let text = cfg.to_toml();
        write_atomic(layout.stage_config(name), text.as_bytes())?;
        Ok(Self {
            layout,
            name: name.to_string(),
            started: now(),
            config_sha256: sha256_bytes(text.as_bytes()),
            outputs: BTreeMap::new(),
            notes: BTreeMap::new(),
        })
    }

    pub fn output(&mut self, path: &Path) -> Result<(), PipelineError> {
        let hash = sha256_file(path)?;
        self.outputs.insert(self.layout.relative(path), hash);
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.insert(key.to_string(), value.to_string());
    }

    pub fn finish(mut self, status: StageStatus) -> Result<(), PipelineError> {
        let cfg = self.layout.stage_config(&self.name);
        self.output(&cfg)?;
        let mut m = RunManifest::load(&self.layout)?;
        m.stages.insert(
            self.name.clone(),
            StageRecord {
                status,
                config_sha256: self.config_sha256,
                started_unix: self.started,
                finished_unix: now(),
                outputs: self.outputs,
                notes: self.notes,
            },
        );
        m.save(&self.layout)
    }
}
