use std::path::{Path, PathBuf};

use clap::Args;
use dcm_core::asymptotics::{influence_grid, GridSpec, InfluenceCalculator, McOptions};
use dcm_core::model::EllipticalModel;
use dcm_core::numkernel::{norm, SymMatrix};
use dcm_core::scatter::EstimatorKind;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{split_list, ReportWriter};
use crate::config::{parse_family, parse_list, require_seed, resolve, Configurable};
use crate::data::{csv_text, fmt_f64};
use crate::{CliError, CliResult, Outcome};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InfluenceArgs {
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, default_value = "normal")]
    pub family: String,
    /// Diagonal of the covariance (must have two entries).
    #[arg(long, value_delimiter = ',', default_value = "2,1")]
    pub variances: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "cov,scm,tyler,dcm-halfspace,dcm-mahalanobis,dcm-projection")]
    pub estimator: Vec<String>,
    /// Half-width of the grid in marginal standard deviations.
    #[arg(long, default_value_t = 3.0)]
    pub width: f64,
    /// Points per axis.
    #[arg(long, default_value_t = 41)]
    pub grid_size: usize,
    /// Eigenvector index (1-based).
    #[arg(long, default_value_t = 1)]
    pub index: usize,
    #[arg(long, default_value_t = 100_000)]
    pub mc_n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Configurable for InfluenceArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }
}

/// Writes one `influence_<estimator>.csv` (`x, y, norm`) per estimator and
/// records boundary/interior maxima in the metadata.
pub fn run(args: InfluenceArgs) -> CliResult<Outcome> {
    let args = resolve(args)?;
    let mut out = ReportWriter::new("influence-grid", args.output_dir.as_deref())?;
    let seed = require_seed(args.seed, "influence-grid")?;
    if args.variances.len() != 2 {
        return Err(dcm_core::Error::InvalidInput(format!(
            "influence grids need p = 2, got {} variances",
            args.variances.len()
        ))
        .into());
    }
    if !(args.width.is_finite() && args.width > 0.0) || args.grid_size < 3 || args.index == 0 || args.index > 2 {
        return Err(CliError::validation("need width > 0, grid-size >= 3 and index in 1..=2"));
    }
    let family = parse_family(&args.family)?;
    let estimators: Vec<EstimatorKind> = parse_list(&split_list(&args.estimator), "estimator")?;
    let model = EllipticalModel::new(family, vec![0.0; 2], SymMatrix::from_diag(&args.variances))?;
    let spec = GridSpec::centered(&model, args.width, args.grid_size)?;
    let opts = McOptions::new(args.mc_n, seed);
    let calcs = estimators
        .iter()
        .map(|&e| InfluenceCalculator::new(e, &model, &opts))
        .collect::<dcm_core::Result<Vec<_>>>()?;
    out.create_dir()?;

    let mut summary = serde_json::Map::new();
    for calc in &calcs {
        let grid = influence_grid(calc, args.index - 1, &spec)?;
        let rows = grid.ys.iter().enumerate().flat_map(|(r, &y)| {
            let grid = &grid;
            grid.xs.iter().enumerate().map(move |(c, &x)| vec![fmt_f64(x), fmt_f64(y), fmt_f64(grid.norms[(r, c)])])
        });
        let label = calc.estimator().label();
        out.write(&format!("influence_{label}.csv"), &csv_text(&["x".into(), "y".into(), "norm".into()], rows))?;
        let (boundary, interior) = grid.ring_maxima();
        let at_center = norm(&calc.eigvec(args.index - 1, &model.mu)?);
        let bound = calc.sup_norm_bound();
        summary.insert(
            label,
            json!({
                "boundary_max": boundary,
                "interior_max": interior,
                "center_norm": at_center,
                "sup_bound": bound,
                "within_sup_bound": bound.map(|b| boundary <= b * (1.0 + 1e-9)),
                "boundary_exceeds_interior": boundary > interior,
            }),
        );
    }
    out.finish(&args, Some(seed), serde_json::Value::Object(summary))
}
