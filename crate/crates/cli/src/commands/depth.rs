use std::path::{Path, PathBuf};

use clap::Args;
use dcm_core::depth::{DepthKind, DepthModel, DEFAULT_PROJECTIONS};
use dcm_core::ranks::{rank_matrix, spatial_median_default};
use dcm_core::Execution;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{split_list, ReportWriter};
use crate::config::{require_seed, resolve, Configurable};
use crate::data::{csv_text, fmt_f64, read_csv, Preprocessing};
use crate::{CliError, CliResult, Outcome};

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DepthArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// halfspace, mahalanobis or projection.
    #[arg(long, default_value = "halfspace")]
    pub depth: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_PROJECTIONS)]
    pub n_projections: usize,
    #[arg(long)]
    #[serde(default)]
    pub mad_scale: bool,
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub exclude_cols: Vec<String>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Configurable for DepthArgs {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }
}

/// Writes `depth.csv`: the input rows with `depth`, `htped` and
/// `rank_1..rank_p` appended, ranks taken about the spatial median.
pub fn run(args: DepthArgs) -> CliResult<Outcome> {
    let mut args = resolve(args)?;
    args.exclude_cols = split_list(&args.exclude_cols);
    let mut out = ReportWriter::new("depth", args.output_dir.as_deref())?;
    let input = args.input.clone().ok_or_else(|| CliError::validation("--input is required"))?;
    let kind: DepthKind = args.depth.parse()?;
    let seed = require_seed(args.seed, "depth")?;
    let ds = read_csv(&input)?;
    let pre = Preprocessing::fit(&ds, &args.exclude_cols, args.mad_scale)?;
    let data = pre.apply(&ds)?;
    let model = DepthModel::fit(kind, &data, seed, args.n_projections)?;
    out.create_dir()?;

    let center = spatial_median_default(&data)?;
    let exec = Execution::Parallel;
    let depths = model.depths(&data, exec)?;
    let htpeds = model.htpeds(&data, exec)?;
    let ranks = rank_matrix(&model, &center.value, &data, exec)?;
    let p = data.ncols();
    let mut header = ds.headers.clone();
    header.extend(["depth".to_string(), "htped".into()]);
    header.extend((1..=p).map(|j| format!("rank_{j}")));
    let rows = (0..data.nrows()).map(|i| {
        let mut r: Vec<String> = ds.data.row(i).iter().map(|&v| fmt_f64(v)).collect();
        r.extend([fmt_f64(depths[i]), fmt_f64(htpeds[i])]);
        r.extend(ranks.row(i).iter().map(|&v| fmt_f64(v)));
        r
    });
    out.write("depth.csv", &csv_text(&header, rows))?;

    let deepest = (0..depths.len()).fold(0, |b, i| if depths[i] > depths[b] { i } else { b });
    let results = json!({
        "depth": kind.label(),
        "max_depth": model.max_depth(),
        "n": data.nrows(),
        "p": p,
        "center": center.value,
        "center_converged": center.converged,
        "deepest_row": deepest,
        "columns": pre.columns,
    });
    out.finish(&args, Some(seed), results)
}
