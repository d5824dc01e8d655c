//! Run reports and atomic file output.
//!
//! Every subcommand ends by writing `<command>_report.json`: the effective
//! configuration echoed as flat text (reparsing it reproduces the run), the
//! produced files, wall time, versions, and the seed. All files — outputs
//! and the report itself — are written atomically (temp file + rename), so
//! a crashed run never leaves a half-written artifact behind.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

/// Version tag of every JSON document this binary emits.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Versions {
    pub cli: String,
    pub core: String,
}

/// Summary of one subcommand invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub wall_time_ms: u64,
    pub versions: Versions,
    /// The effective configuration in the flat text format; parsing it
    /// yields a configuration equal to the one the run used.
    pub config_echo: String,
    /// Files this run produced (the report itself is not listed). Each
    /// exists and is non-empty when the run exits 0.
    pub outputs: Vec<String>,
    /// Caveats, e.g. placeholder parameters left at illustrative defaults.
    pub notes: Vec<String>,
    /// Per-command headline numbers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
}

/// Write `bytes` to `path` atomically: write a sibling temp file, then
/// rename over the destination.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = PathBuf::from(tmp_name);
    std::fs::write(&tmp, bytes)
        .map_err(CliError::io(format!("cannot write {}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(CliError::io(format!("cannot rename {} into place", tmp.display())))?;
    Ok(())
}

/// Serialize a value as pretty JSON (newline-terminated) and write it
/// atomically.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Config(format!("cannot serialize {}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Accumulates a run's outputs, then verifies and writes the report.
pub struct ReportBuilder {
    command: &'static str,
    seed: u64,
    config_echo: String,
    notes: Vec<String>,
    outputs: Vec<PathBuf>,
    summary: Option<serde_json::Value>,
    start: Instant,
}

impl ReportBuilder {
    pub fn new(command: &'static str, cfg: &ExperimentConfig, start: Instant) -> Self {
        Self {
            command,
            seed: cfg.seed,
            config_echo: cfg.to_flat_text(),
            notes: Vec::new(),
            outputs: Vec::new(),
            summary: None,
            start,
        }
    }

    /// Flag placeholder lifetimes for commands that integrate the emitter
    /// dynamics.
    pub fn note_illustrative_defaults(&mut self, cfg: &ExperimentConfig) {
        for key in cfg.dynamics.illustrative_keys() {
            self.notes.push(format!(
                "{key} is an illustrative placeholder lifetime, not a measured value"
            ));
        }
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn add_output(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    pub fn set_summary(&mut self, summary: serde_json::Value) {
        self.summary = Some(summary);
    }

    /// Verify every listed output exists and is non-empty, then write
    /// `<command>_report.json` into `out_dir`.
    pub fn finish(self, out_dir: &Path) -> Result<PathBuf> {
        for p in &self.outputs {
            let meta = std::fs::metadata(p)
                .map_err(CliError::io(format!("output {} missing", p.display())))?;
            if meta.len() == 0 {
                return Err(CliError::Io {
                    context: format!("output {} is empty", p.display()),
                    source: std::io::Error::new(std::io::ErrorKind::Other, "empty output"),
                });
            }
        }
        let report = RunReport {
            schema_version: SCHEMA_VERSION,
            command: self.command.to_string(),
            seed: self.seed,
            wall_time_ms: self.start.elapsed().as_millis() as u64,
            versions: Versions {
                cli: env!("CARGO_PKG_VERSION").to_string(),
                core: timebin_core::VERSION.to_string(),
            },
            config_echo: self.config_echo,
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            notes: self.notes,
            summary: self.summary,
        };
        let path = out_dir.join(format!("{}_report.json", self.command));
        write_json_atomic(&path, &report)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_refuses_missing_or_empty_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::default();

        let mut rb = ReportBuilder::new("rabi", &cfg, Instant::now());
        rb.add_output(dir.path().join("nope.csv"));
        assert!(rb.finish(dir.path()).is_err());

        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, b"").unwrap();
        let mut rb = ReportBuilder::new("rabi", &cfg, Instant::now());
        rb.add_output(empty);
        assert!(rb.finish(dir.path()).is_err());
    }

    #[test]
    fn report_round_trips_and_echoes_the_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.seed = 42;
        let out = dir.path().join("data.csv");
        std::fs::write(&out, b"x\n1\n").unwrap();

        let mut rb = ReportBuilder::new("rabi", &cfg, Instant::now());
        rb.add_output(out);
        rb.note_illustrative_defaults(&cfg);
        let path = rb.finish(dir.path()).unwrap();

        let report: RunReport =
            serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
        assert_eq!(report.schema_version, SCHEMA_VERSION);
        assert_eq!(report.seed, 42);
        assert_eq!(ExperimentConfig::parse(&report.config_echo).unwrap(), cfg);
        // both lifetimes were left at their placeholders
        assert_eq!(report.notes.len(), 2);
    }
}
