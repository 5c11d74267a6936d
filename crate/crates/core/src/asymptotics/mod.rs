//! Influence functions, the asymptotic covariance of the sample DCM and
//! asymptotic relative efficiencies of eigenvector estimates.
//!
//! Expectations over the standardized spherical law are computed by seeded
//! Monte Carlo on a [`StandardPanel`] drawn from the model's own family, and
//! reported with standard errors.

mod are;
mod influence;
mod vds;

pub use are::{are_closed_form_2d, are_eigvec, are_trace_ratio, AreMethod, AreResult};
pub use influence::{influence_grid, GridSpec, InfluenceCalculator, InfluenceGrid};
pub use vds::{eigvec_avar, vds_elements, EigvecAvar, VdsElements};

use crate::depth::{DepthKind, RadialDepth};
use crate::model::{Family, StandardPanel};
use crate::numkernel::Matrix;
use crate::scatter::MIN_MC_N;
use crate::{Error, Execution, Result};

/// Monte-Carlo settings shared by the population calculators.
#[derive(Clone, Copy, Debug)]
pub struct McOptions {
    pub mc_n: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl McOptions {
    pub fn new(mc_n: usize, seed: u64) -> Self {
        McOptions { mc_n, seed, exec: Execution::Parallel }
    }
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions::new(100_000, 0)
    }
}

/// Standardized draws `z` with `htped²(|z|)` (`≡ 1` without a depth).
pub(crate) struct SphericalPanel {
    pub z: Matrix,
    pub h2: Vec<f64>,
}

impl SphericalPanel {
    pub fn new(family: Family, depth: Option<DepthKind>, p: usize, opts: &McOptions) -> Result<Self> {
        if opts.mc_n < MIN_MC_N {
            return Err(Error::invalid(format!("mc_n must be at least {MIN_MC_N}")));
        }
        let radial = depth.map(|d| RadialDepth::new(d, family)).transpose()?;
        let panel = StandardPanel::draw(family, p, opts.mc_n, opts.seed, opts.exec)?;
        let z = panel.draws().clone();
        let h2 = opts.exec.map(opts.mc_n, |k| {
            let h = radial.as_ref().map_or(1.0, |r| {
                let row = z.row(k);
                r.htped(row.iter().map(|v| v * v).sum::<f64>().sqrt())
            });
            h * h
        });
        Ok(SphericalPanel { z, h2 })
    }

    pub fn len(&self) -> usize {
        self.h2.len()
    }
}

/// Rejects (near-)tied values in a descending sequence.
pub(crate) fn check_distinct(values: &[f64], what: &str) -> Result<()> {
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for (i, w) in values.windows(2).enumerate() {
        if (w[0] - w[1]).abs() <= 1e-10 * scale {
            return Err(Error::DegenerateModel(format!(
                "{what} {} and {} are tied ({:e})",
                i + 1,
                i + 2,
                w[0]
            )));
        }
    }
    Ok(())
}
