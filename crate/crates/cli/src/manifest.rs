use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Complete,
    Partial,
}

/// Provenance record written next to every run's outputs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub software: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub config: RunConfig,
    /// Output paths relative to the output directory, in creation order.
    pub outputs: Vec<String>,
    pub status: Status,
    pub error: Option<String>,
    pub created_unix: u64,
    pub wall_time_s: f64,
}

/// Hash of the physics-relevant configuration; the output location is excluded.
pub fn config_hash(cfg: &RunConfig) -> String {
    let canonical = serde_json::to_vec(&RunConfig { output_dir: None, ..cfg.clone() }).expect("config serializes");
    hex::encode(Sha256::digest(&canonical))
}

/// Tracks files written into one output directory.
pub struct Outputs {
    pub dir: PathBuf,
    files: Vec<String>,
    started: Instant,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new(), started: Instant::now() })
    }

    /// Create `name` (which may contain subdirectories) and record it.
    pub fn file(&mut self, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let f = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(std::io::BufWriter::new(f))
    }

    pub fn finish(self, command: &str, cfg: &RunConfig, error: Option<&anyhow::Error>) -> Result<()> {
        let manifest = Manifest {
            software: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_sha256: config_hash(cfg),
            seed: cfg.seed,
            config: cfg.clone(),
            outputs: self.files,
            status: if error.is_some() { Status::Partial } else { Status::Complete },
            error: error.map(|e| format!("{e:#}")),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing {}", path.display()))
    }
}
