use std::path::{Path, PathBuf};

use clap::Args;
use dcm_core::model::EllipticalModel;
use dcm_core::numkernel::SymMatrix;
use dcm_core::scatter::EstimatorKind;
use dcm_core::simulation::{fse_cell, FseRow, FseTable, SimPlan};
use dcm_core::Execution;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{split_list, ReportWriter};
use crate::config::{parse_family, parse_list, require_seed, resolve, Configurable};
use crate::{CliError, CliResult, Outcome};

pub const CHECKPOINT_DIR: &str = "checkpoints";

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FseArgs {
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// normal or t<df>.
    #[arg(long, default_value = "normal")]
    pub family: String,
    /// Dimension; the covariance is diag(p, p-1, ..., 1).
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, value_delimiter = ',', default_value = "20,50,100,300,500")]
    pub sample_sizes: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Estimators compared against the sample covariance.
    #[arg(long, value_delimiter = ',', default_value = "scm,tyler,dcm-halfspace,dcm-mahalanobis,dcm-projection")]
    pub estimator: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Recompute every cell even when a matching checkpoint exists.
    #[arg(long)]
    #[serde(default)]
    pub no_resume: bool,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Configurable for FseArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }
}

/// Finished sample-size cell; reused only when the stored plan matches.
#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    plan: SimPlan,
    n: usize,
    rows: Vec<FseRow>,
}

pub fn checkpoint_name(n: usize, seed: u64) -> String {
    format!("cell-n{n}-seed{seed}.json")
}

pub fn build_plan(args: &FseArgs) -> CliResult<SimPlan> {
    let seed = require_seed(args.seed, "simulate-fse")?;
    let family = parse_family(&args.family)?;
    if args.p == 0 {
        return Err(CliError::validation("--p must be positive"));
    }
    let variances: Vec<f64> = (1..=args.p).rev().map(|v| v as f64).collect();
    let model = EllipticalModel::new(family, vec![0.0; args.p], SymMatrix::from_diag(&variances))?;
    let estimators: Vec<EstimatorKind> = parse_list(&split_list(&args.estimator), "estimator")?;
    let plan = SimPlan { model, estimators, sample_sizes: args.sample_sizes.clone(), replications: args.reps, seed };
    plan.validate()?;
    Ok(plan)
}

pub fn run(args: FseArgs) -> CliResult<Outcome> {
    let args = resolve(args)?;
    let mut out = ReportWriter::new("simulate-fse", args.output_dir.as_deref())?;
    let plan = build_plan(&args)?;
    out.create_dir()?;
    let ck_dir = out.dir().join(CHECKPOINT_DIR);
    std::fs::create_dir_all(&ck_dir).map_err(|e| CliError::io(&ck_dir, e))?;

    let mut rows = Vec::new();
    let mut resumed = Vec::new();
    for &n in &plan.sample_sizes {
        let path = ck_dir.join(checkpoint_name(n, plan.seed));
        let cached = if args.no_resume { None } else { load_checkpoint(&path, &plan, n) };
        let cell = match cached {
            Some(r) => {
                resumed.push(n);
                r
            }
            None => {
                let r = fse_cell(&plan, n, Execution::Parallel)?;
                let ck = Checkpoint { plan: cell_key(&plan, n), n, rows: r };
                let text = serde_json::to_string(&ck).expect("checkpoint serializes");
                // write-then-rename so an interrupted run never leaves a torn file
                let tmp = path.with_extension("tmp");
                std::fs::write(&tmp, text).map_err(|e| CliError::io(&tmp, e))?;
                std::fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
                ck.rows
            }
        };
        rows.extend(cell);
    }
    let table = FseTable { rows };
    out.write("fse.csv", &table.to_csv())?;
    let invalid: Vec<String> = table
        .rows
        .iter()
        .filter(|r| !r.is_valid(plan.replications))
        .map(|r| format!("n={} {}", r.n, r.estimator))
        .collect();
    let results = json!({
        "family": plan.model.family.label(),
        "p": plan.model.dim(),
        "replications": plan.replications,
        "resumed_cells": resumed,
        "invalid_cells": invalid,
    });
    out.finish(&args, Some(plan.seed), results)
}

fn load_checkpoint(path: &Path, plan: &SimPlan, n: usize) -> Option<Vec<FseRow>> {
    let text = std::fs::read_to_string(path).ok()?;
    let ck: Checkpoint = serde_json::from_str(&text).ok()?;
    (ck.plan == cell_key(plan, n) && ck.n == n).then_some(ck.rows)
}

/// The plan restricted to one sample size, so cells survive edits to the size list.
fn cell_key(plan: &SimPlan, n: usize) -> SimPlan {
    SimPlan { sample_sizes: vec![n], ..plan.clone() }
}
