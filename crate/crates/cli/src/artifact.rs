//! Artifact files. Every file opens with a provenance header carrying the
//! config digest, the seed and the artifact format version.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub artifact_version: u32,
    pub tool_version: String,
}

impl Provenance {
    pub fn new(command: &str, config_text: &str, seed: u64) -> Self {
        Provenance {
            command: command.to_string(),
            config_sha256: hex::encode(Sha256::digest(config_text.as_bytes())),
            seed,
            artifact_version: ARTIFACT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    fn comment_line(&self) -> String {
        format!(
            "# bouncy {} artifact_version={} config_sha256={} seed={} tool_version={}",
            self.command, self.artifact_version, self.config_sha256, self.seed, self.tool_version
        )
    }
}

/// Writes artifacts below one output directory.
pub struct Sink {
    dir: PathBuf,
    meta: Provenance,
}

impl Sink {
    pub fn new(dir: &Path, meta: Provenance) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Sink { dir: dir.to_path_buf(), meta })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok(BufWriter::new(file))
    }

    /// CSV with a `#` provenance line followed by the header row.
    pub fn csv<R: Serialize>(&self, name: &str, rows: &[R]) -> Result<PathBuf> {
        let mut out = self.create(name)?;
        writeln!(out, "{}", self.meta.comment_line())?;
        let mut w = csv::Writer::from_writer(out);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(self.path(name))
    }

    /// JSON lines; the first line is the provenance record.
    pub fn jsonl<R: Serialize>(&self, name: &str, rows: &[R]) -> Result<PathBuf> {
        let mut out = self.create(name)?;
        serde_json::to_writer(&mut out, &serde_json::json!({ "meta": &self.meta }))?;
        writeln!(out)?;
        for row in rows {
            serde_json::to_writer(&mut out, row)?;
            writeln!(out)?;
        }
        out.flush()?;
        Ok(self.path(name))
    }

    /// A single JSON object with the provenance under `meta`.
    pub fn json<R: Serialize>(&self, name: &str, report: &R) -> Result<PathBuf> {
        let mut value = serde_json::to_value(report)?;
        if let serde_json::Value::Object(map) = &mut value {
            map.insert("meta".into(), serde_json::to_value(&self.meta)?);
        }
        let mut out = self.create(name)?;
        serde_json::to_writer_pretty(&mut out, &value)?;
        writeln!(out)?;
        out.flush()?;
        Ok(self.path(name))
    }
}
