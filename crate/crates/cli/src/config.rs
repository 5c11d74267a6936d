//! `--config` handling: a JSON object whose keys override command-line flags.
//!
//! Arguments are serialized to a JSON object, the file's keys are written over
//! it (hyphens and underscores are interchangeable) and the result is
//! deserialized back. Unknown keys are rejected.

use std::path::Path;

use dcm_core::model::Family;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::{CliError, CliResult};

pub trait Configurable: Serialize + DeserializeOwned {
    fn config_path(&self) -> Option<&Path>;
}

/// Applies the `--config` file, if any, on top of `args`.
pub fn resolve<T: Configurable>(args: T) -> CliResult<T> {
    let Some(path) = args.config_path().map(Path::to_path_buf) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let overrides: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Format { path: path.clone(), message: format!("invalid JSON: {e}") })?;
    let Value::Object(overrides) = overrides else {
        return Err(CliError::Format { path, message: "config must be a JSON object".into() });
    };
    let mut base = serde_json::to_value(&args).expect("arguments serialize");
    let fields = base.as_object_mut().expect("arguments serialize to an object");
    for (key, value) in overrides {
        let norm = key.replace('-', "_");
        if !fields.contains_key(&norm) {
            return Err(CliError::validation(format!("unknown config key '{key}'")));
        }
        fields.insert(norm, value);
    }
    serde_json::from_value(base).map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
}

/// `normal` (also `bvn`, `gaussian`, `mvn`) or `t<df>`.
pub fn parse_family(s: &str) -> CliResult<Family> {
    let l = s.trim().to_ascii_lowercase();
    let family = match l.as_str() {
        "normal" | "gaussian" | "bvn" | "mvn" => Family::Normal,
        _ => {
            let df = l
                .strip_prefix('t')
                .and_then(|d| d.parse::<u32>().ok())
                .ok_or_else(|| CliError::validation(format!("unknown family '{s}' (expected normal or t<df>)")))?;
            Family::StudentT { df }
        }
    };
    family.validate()?;
    Ok(family)
}

pub fn require_seed(seed: Option<u64>, command: &str) -> CliResult<u64> {
    seed.ok_or_else(|| CliError::validation(format!("{command} is stochastic and needs --seed")))
}

pub fn parse_list<T: std::str::FromStr>(items: &[String], what: &str) -> CliResult<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    items
        .iter()
        .map(|s| s.trim().parse::<T>().map_err(|e| CliError::validation(format!("{what} '{s}': {e}"))))
        .collect()
}
