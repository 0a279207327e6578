use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::backends::BackendConfig;
use crate::datasets::dataset_hash;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = "run.lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Build,
    Render,
    Invoke,
    Score,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Ingest, Stage::Build, Stage::Render, Stage::Invoke, Stage::Score];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Pending,
    Skipped,
    Done,
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub artifact_version: String,
    pub config: RunConfig,
    pub backend: BackendConfig,
    pub dataset_hash: Option<String>,
    pub catalog_hash: String,
    pub templates: Vec<String>,
    pub created_at: String,
    pub updated_at: String,
    pub stages: Vec<StageRecord>,
    pub items_total: usize,
    pub items_done: usize,
    pub notes: Vec<String>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl RunManifest {
    pub fn new(config: &RunConfig, backend: &BackendConfig, catalog_hash: &str) -> Self {
        let stamp = now();
        RunManifest {
            run_id: config.run_id.clone(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            backend: backend.clone(),
            dataset_hash: None,
            catalog_hash: catalog_hash.to_string(),
            templates: Vec::new(),
            created_at: stamp.clone(),
            updated_at: stamp,
            stages: Stage::ALL
                .iter()
                .map(|&stage| StageRecord {
                    stage,
                    status: StageStatus::Pending,
                    cause: None,
                })
                .collect(),
            items_total: 0,
            items_done: 0,
            notes: Vec::new(),
        }
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|_| Error::NotFound(format!("no run manifest at {}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line(), e.to_string()))
    }

    /// Write atomically through a temporary file.
    pub fn save(&mut self, run_dir: &Path) -> Result<()> {
        self.updated_at = now();
        let tmp = run_dir.join(format!("{MANIFEST_FILE}.tmp"));
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, run_dir.join(MANIFEST_FILE))?;
        Ok(())
    }

    pub fn status(&self, stage: Stage) -> StageStatus {
        self.stages
            .iter()
            .find(|s| s.stage == stage)
            .map(|s| s.status)
            .unwrap_or(StageStatus::Pending)
    }

    pub fn mark(&mut self, stage: Stage, status: StageStatus, cause: Option<String>) {
        if let Some(s) = self.stages.iter_mut().find(|s| s.stage == stage) {
            s.status = status;
            s.cause = cause;
        }
    }

    pub fn is_complete(&self) -> bool {
        self.status(Stage::Score) == StageStatus::Done
    }

    pub fn is_partial(&self) -> bool {
        self.status(Stage::Invoke) == StageStatus::Partial
    }

    pub fn failure(&self) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.status == StageStatus::Failed)
    }

    /// Recompute the dataset hash and compare it with the recorded one.
    pub fn verify(&self, run_dir: &Path) -> Result<()> {
        let Some(expected) = &self.dataset_hash else { return Ok(()) };
        let actual = dataset_hash(run_dir)?;
        if &actual != expected {
            return Err(Error::Integrity(format!(
                "dataset in {} hashes to {actual}, manifest records {expected}",
                run_dir.display()
            )));
        }
        Ok(())
    }
}

/// Exclusive ownership of a run directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(run_dir: &Path) -> Result<Self> {
        fs::create_dir_all(run_dir)?;
        let path = run_dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(RunLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(run_dir.to_path_buf())),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
