use std::path::{Path, PathBuf};

use clap::Args;
use dcm_core::diagnostics::{diagnose, project, unexplained_variance, PcaModel, ScoreScale};
use dcm_core::scatter::{fit_scatter_with, EstimatorKind, FitOptions, TYLER_MAX_ITER, TYLER_TOL};
use dcm_core::depth::DEFAULT_PROJECTIONS;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{split_list, ReportWriter};
use crate::config::{resolve, Configurable};
use crate::data::{csv_text, fmt_f64, read_csv, Preprocessing};
use crate::{CliError, CliResult, Outcome};

pub const MODEL_FILE: &str = "pca_model.json";

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PcaArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// cov, scm, tyler, dcm-<depth> or wtyler-<depth>.
    #[arg(long, default_value = "dcm-projection")]
    pub estimator: String,
    /// Number of retained components for diagnostics.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Largest q in the unexplained-variance table.
    #[arg(long, default_value_t = 10)]
    pub q_max: usize,
    /// Seed for sample depth direction sets (required for depth-based estimators).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_PROJECTIONS)]
    pub n_projections: usize,
    /// Tyler fixed-point iteration limit.
    #[arg(long, default_value_t = TYLER_MAX_ITER)]
    pub max_iter: usize,
    /// Tyler stopping tolerance on the relative change.
    #[arg(long, default_value_t = TYLER_TOL)]
    pub tol: f64,
    /// Divide every column by its MAD before fitting.
    #[arg(long)]
    #[serde(default)]
    pub mad_scale: bool,
    /// Column names or 1-based indices to drop.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub exclude_cols: Vec<String>,
    #[arg(long, value_enum, default_value = "auto")]
    pub score_scale: ScaleArg,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleArg {
    Auto,
    Eigenvalues,
    Robust,
}

impl From<ScaleArg> for ScoreScale {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::Auto => ScoreScale::Auto,
            ScaleArg::Eigenvalues => ScoreScale::FitEigenvalues,
            ScaleArg::Robust => ScoreScale::RobustScores,
        }
    }
}

impl Configurable for PcaArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }
}

/// Everything `diagnose` needs to score new data against a fitted subspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredModel {
    pub estimator: EstimatorKind,
    pub score_scale: ScoreScale,
    pub preprocessing: Preprocessing,
    pub model: PcaModel,
}

pub fn run(args: PcaArgs) -> CliResult<Outcome> {
    let mut args = resolve(args)?;
    args.exclude_cols = split_list(&args.exclude_cols);
    let mut out = ReportWriter::new("pca", args.output_dir.as_deref())?;
    let input = args.input.clone().ok_or_else(|| CliError::validation("--input is required"))?;
    let kind: EstimatorKind = args.estimator.parse()?;
    let seed = match kind.depth() {
        Some(_) => Some(crate::config::require_seed(args.seed, "pca with a depth-based estimator")?),
        None => args.seed,
    };
    if args.k == 0 || args.q_max == 0 {
        return Err(CliError::validation("--k and --q-max must be positive"));
    }
    if args.max_iter == 0 || !(args.tol >= 0.0 && args.tol.is_finite()) {
        return Err(CliError::validation("--max-iter must be positive and --tol finite and non-negative"));
    }

    let ds = read_csv(&input)?;
    let pre = Preprocessing::fit(&ds, &args.exclude_cols, args.mad_scale)?;
    let data = pre.apply(&ds)?;
    let p = data.ncols();
    if args.k > p {
        return Err(CliError::validation(format!("--k {} exceeds the number of variables {p}", args.k)));
    }
    out.create_dir()?;

    let opts = FitOptions {
        seed: seed.unwrap_or(0),
        n_projections: args.n_projections,
        max_iter: args.max_iter,
        tol: args.tol,
        ..FitOptions::default()
    };
    let fit = fit_scatter_with(kind, &data, &opts)?;
    let ev = fit.eigenvalues();
    let total: f64 = ev.iter().map(|v| v.max(0.0)).sum();

    out.write(
        "eigenvalues.csv",
        &csv_text(
            &["component".into(), "eigenvalue".into(), "proportion".into()],
            ev.iter()
                .enumerate()
                .map(|(i, &v)| vec![(i + 1).to_string(), fmt_f64(v), fmt_f64(v.max(0.0) / total)]),
        ),
    )?;
    let mut header = vec!["variable".to_string()];
    header.extend((1..=p).map(|j| format!("pc_{j}")));
    let vecs = &fit.decomp.eigenvectors;
    out.write(
        "eigenvectors.csv",
        &csv_text(
            &header,
            (0..p).map(|i| {
                let mut row = vec![pre.columns[i].clone()];
                row.extend((0..p).map(|j| fmt_f64(vecs[(i, j)])));
                row
            }),
        ),
    )?;
    let mut header = vec!["variable".to_string()];
    header.extend(pre.columns.iter().cloned());
    out.write(
        "scatter.csv",
        &csv_text(
            &header,
            (0..p).map(|i| {
                let mut row = vec![pre.columns[i].clone()];
                row.extend((0..p).map(|j| fmt_f64(fit.matrix[(i, j)])));
                row
            }),
        ),
    )?;
    let q_max = args.q_max.min(p);
    let uv = (1..=q_max).map(|q| unexplained_variance(&fit, q).map(|v| vec![q.to_string(), fmt_f64(v)]));
    let uv: Vec<Vec<String>> = uv.collect::<dcm_core::Result<_>>()?;
    out.write("unexplained_variance.csv", &csv_text(&["q".into(), "unexplained".into()], uv))?;

    let scale: ScoreScale = args.score_scale.into();
    let (model, scores) = project(&fit, &data, args.k, scale)?;
    let report = diagnose(&model, &scores, &data)?;
    out.write("diagnostics.csv", &report.to_csv())?;
    let stored = StoredModel { estimator: kind, score_scale: scale, preprocessing: pre, model };
    out.write_json(MODEL_FILE, &stored)?;

    let results = json!({
        "estimator": kind.label(),
        "n": data.nrows(),
        "p": p,
        "columns": &stored.preprocessing.columns,
        "k": args.k,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "dropped_rows": fit.dropped_rows,
        "center": fit.center,
        "sd_cut": report.sd_cut,
        "od_cut": report.od_cut,
        "flagged": report.flagged(),
        "warnings": report.warnings,
    });
    out.finish(&args, seed, results)
}
