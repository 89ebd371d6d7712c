//! Byte-stable CSV rendering and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Fixed nine-significant-digit scientific notation.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

/// Comma-separated table accumulated in memory.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_output(dir: &Path, name: &str, contents: &[u8]) -> CliResult<OutputEntry> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Write { path, source })?;
    Ok(OutputEntry {
        file: name.to_string(),
        bytes: contents.len(),
        sha256: sha256_hex(contents),
    })
}

/// `SOURCE_DATE_EPOCH` when set and valid, otherwise the wall clock.
pub fn timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::<Utc>::from_timestamp(secs, 0));
    fixed
        .unwrap_or_else(Utc::now)
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a, P: Serialize, S: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub library_version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub created_at: String,
    pub parameters: &'a P,
    pub scenario: &'a S,
    pub outputs: Vec<OutputEntry>,
}

impl<'a, P: Serialize, S: Serialize> Manifest<'a, P, S> {
    pub fn new(
        command: &'a str,
        seed: u64,
        parameters: &'a P,
        scenario: &'a S,
        outputs: Vec<OutputEntry>,
    ) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            library_version: hnf_precoding::VERSION,
            command,
            seed,
            created_at: timestamp(),
            parameters,
            scenario,
            outputs,
        }
    }

    /// Writes `<command>.manifest.json`, so runs sharing a directory keep
    /// separate manifests.
    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let mut json = serde_json::to_string_pretty(self).expect("manifest serializes");
        json.push('\n');
        let name = format!("{}.manifest.json", self.command);
        write_output(dir, &name, json.as_bytes())?;
        Ok(dir.join(name))
    }
}
