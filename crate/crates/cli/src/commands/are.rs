use std::path::{Path, PathBuf};

use clap::Args;
use dcm_core::asymptotics::{are_eigvec, McOptions};
use dcm_core::model::EllipticalModel;
use dcm_core::numkernel::SymMatrix;
use dcm_core::scatter::EstimatorKind;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{split_list, ReportWriter};
use crate::config::{parse_family, parse_list, require_seed, resolve, Configurable};
use crate::data::{csv_text, fmt_f64};
use crate::{CliError, CliResult, Outcome};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct AreArgs {
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Families, e.g. `normal,t5,t10`.
    #[arg(long, value_delimiter = ',', default_value = "t5,t6,t10,t15,t25,normal")]
    pub family: Vec<String>,
    /// Eigenvalue ratios; the covariance is diag(1, ρ, ρ², …).
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub rho: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    /// Eigenvector index (1-based).
    #[arg(long, default_value_t = 1)]
    pub index: usize,
    #[arg(long, value_delimiter = ',', default_value = "scm,tyler,dcm-halfspace,dcm-mahalanobis,dcm-projection")]
    pub estimator: Vec<String>,
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Configurable for AreArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }
}

/// One computed cell of the ARE grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AreCell {
    pub family: String,
    pub df: Option<u32>,
    pub p: usize,
    pub rho: f64,
    pub estimator: EstimatorKind,
    pub are: f64,
    pub mc_se: f64,
    pub method: String,
    pub status: String,
}

/// Writes `are.csv`: `family, df, p, rho, estimator, are, mc_se, method, status`.
/// Degenerate cells (tied eigenvalues) are recorded with `NaN` and the run continues.
pub fn run(args: AreArgs) -> CliResult<Outcome> {
    let args = resolve(args)?;
    let mut out = ReportWriter::new("are", args.output_dir.as_deref())?;
    let seed = require_seed(args.seed, "are")?;
    let families = split_list(&args.family).iter().map(|f| parse_family(f)).collect::<CliResult<Vec<_>>>()?;
    let estimators: Vec<EstimatorKind> = parse_list(&split_list(&args.estimator), "estimator")?;
    if families.is_empty() || estimators.is_empty() || args.rho.is_empty() {
        return Err(CliError::validation("family, rho and estimator lists must be non-empty"));
    }
    if let Some(r) = args.rho.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(CliError::validation(format!("rho must be positive and finite, got {r}")));
    }
    if args.p < 2 || args.index == 0 || args.index > args.p {
        return Err(CliError::validation("need p >= 2 and 1 <= index <= p"));
    }
    if args.mc_n < dcm_core::scatter::MIN_MC_N {
        return Err(CliError::validation(format!("--mc-n must be at least {}", dcm_core::scatter::MIN_MC_N)));
    }
    for f in &families {
        f.kurtosis_factor()?;
    }
    out.create_dir()?;

    let opts = McOptions::new(args.mc_n, seed);
    let mut cells = Vec::new();
    for &family in &families {
        for &rho in &args.rho {
            let variances: Vec<f64> = (0..args.p).map(|j| rho.powi(j as i32)).collect();
            let model = EllipticalModel::new(family, vec![0.0; args.p], SymMatrix::from_diag(&variances))?;
            for &est in &estimators {
                let base = AreCell {
                    family: family.label(),
                    df: family.df(),
                    p: args.p,
                    rho,
                    estimator: est,
                    are: f64::NAN,
                    mc_se: f64::NAN,
                    method: String::new(),
                    status: "ok".into(),
                };
                let cell = match are_eigvec(&model, est, args.index - 1, &opts) {
                    Ok(r) => AreCell {
                        are: r.value,
                        mc_se: r.mc_std_error,
                        method: serde_json::to_value(r.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                        ..base
                    },
                    Err(dcm_core::Error::DegenerateModel(_)) => AreCell { status: "degenerate_model".into(), ..base },
                    Err(e) => return Err(e.into()),
                };
                cells.push(cell);
            }
        }
    }
    let header: Vec<String> =
        ["family", "df", "p", "rho", "estimator", "are", "mc_se", "method", "status"].map(String::from).to_vec();
    let rows = cells.iter().map(|c| {
        vec![
            c.family.clone(),
            c.df.map(|d| d.to_string()).unwrap_or_default(),
            c.p.to_string(),
            fmt_f64(c.rho),
            c.estimator.label(),
            fmt_f64(c.are),
            fmt_f64(c.mc_se),
            c.method.clone(),
            c.status.clone(),
        ]
    });
    out.write("are.csv", &csv_text(&header, rows))?;
    let degenerate = cells.iter().filter(|c| c.status != "ok").count();
    out.finish(&args, Some(seed), json!({ "cells": cells.len(), "degenerate_cells": degenerate }))
}
