use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::pca::StoredModel;
use super::ReportWriter;
use crate::config::{resolve, Configurable};
use crate::data::read_csv;
use crate::{CliError, CliResult, Outcome};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DiagnoseArgs {
    /// Data to score; the stored preprocessing is applied to it.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// `pca_model.json` written by `pca`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Configurable for DiagnoseArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }
}

pub fn run(args: DiagnoseArgs) -> CliResult<Outcome> {
    let args = resolve(args)?;
    let mut out = ReportWriter::new("diagnose", args.output_dir.as_deref())?;
    let input = args.input.clone().ok_or_else(|| CliError::validation("--input is required"))?;
    let model_path = args.model.clone().ok_or_else(|| CliError::validation("--model is required"))?;
    let text = std::fs::read_to_string(&model_path).map_err(|e| CliError::io(&model_path, e))?;
    let stored: StoredModel = serde_json::from_str(&text)
        .map_err(|e| CliError::Format { path: model_path.clone(), message: format!("not a PCA model: {e}") })?;
    let ds = read_csv(&input)?;
    let data = stored.preprocessing.apply(&ds)?;
    if data.ncols() != stored.model.dim() {
        return Err(CliError::validation("input columns do not match the stored model"));
    }
    out.create_dir()?;
    let scores = stored.model.scores(&data);
    let report = dcm_core::diagnostics::diagnose(&stored.model, &scores, &data)?;
    out.write("diagnostics.csv", &report.to_csv())?;
    out.write_json("diagnostics.json", &report)?;
    let counts = |label: &str| report.observations.iter().filter(|o| o.flag.label() == label).count();
    let results = json!({
        "estimator": stored.estimator.label(),
        "k": report.k,
        "n": data.nrows(),
        "sd_cut": report.sd_cut,
        "od_cut": report.od_cut,
        "flagged": report.flagged(),
        "counts": {
            "regular": counts("regular"),
            "score_outlier": counts("score_outlier"),
            "orthogonal_outlier": counts("orthogonal_outlier"),
            "both_outlier": counts("both_outlier"),
        },
        "warnings": report.warnings,
    });
    out.finish(&args, None, results)
}
