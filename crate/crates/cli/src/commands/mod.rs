//! Subcommand implementations and the shared report writer.

pub mod are;
pub mod depth;
pub mod diagnose;
pub mod fse;
pub mod influence;
pub mod pca;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::{CliError, CliResult, Outcome};

/// Name of the metadata file written by every command.
pub const METADATA_FILE: &str = "metadata.json";

/// Collects payload files in an output directory and finishes with `metadata.json`.
pub(crate) struct ReportWriter {
    command: &'static str,
    dir: PathBuf,
    files: Vec<String>,
    started: Instant,
}

impl ReportWriter {
    pub fn new(command: &'static str, dir: Option<&Path>) -> CliResult<Self> {
        let dir = dir.ok_or_else(|| CliError::validation("--output-dir is required"))?.to_path_buf();
        Ok(ReportWriter { command, dir, files: Vec::new(), started: Instant::now() })
    }

    /// Creates the directory; called once validation is complete.
    pub fn create_dir(&self) -> CliResult<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).expect("report payload serializes");
        self.write(name, &(text + "\n"))
    }

    pub fn finish(mut self, config: &impl Serialize, seed: Option<u64>, results: Value) -> CliResult<Outcome> {
        let meta = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "config": config,
            "files": self.files,
            "results": results,
            "wall_time_seconds": self.started.elapsed().as_secs_f64(),
        });
        let files = std::mem::take(&mut self.files);
        let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        let path = self.dir.join(METADATA_FILE);
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        let mut files = files;
        files.push(METADATA_FILE.to_string());
        Ok(Outcome { output_dir: self.dir, files })
    }
}

/// Splits comma-separated list flags (`--x a,b --x c` → `[a, b, c]`).
pub(crate) fn split_list(items: &[String]) -> Vec<String> {
    items
        .iter()
        .flat_map(|s| s.split(','))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}
