//! Elliptical sampling and the finite-sample efficiency harness.
//!
//! For each sample size, every replication draws a fresh sample from a seed
//! derived from (master seed, n, replication index), fits every estimator and
//! records the squared principal angle between the true and estimated first
//! eigenvectors. The mean over replications is the MSPA; the FSE of an
//! estimator is `MSPA(covariance) / MSPA(estimator)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::depth::{DepthKind, DepthModel, DEFAULT_PROJECTIONS};
use crate::model::EllipticalModel;
use crate::numkernel::{dot, Matrix};
use crate::ranks::spatial_median_default;
use crate::scatter::{fit_scatter_with, EstimatorKind, FitOptions};
use crate::{substream_seed, Error, Execution, Result};

/// Largest failure share for which a cell is still reported as valid.
pub const MAX_FAILURE_RATE: f64 = 0.01;

/// `n` draws from `model`. Student-t draws use the scale matrix
/// `((ν-2)/ν)·Σ`, so `Σ` is the covariance for every family.
pub fn sample_elliptical(model: &EllipticalModel, n: usize, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    model.family.validate()?;
    Ok(model.sample(n, seed))
}

/// Smallest angle between the lines spanned by `g1` and `g2`, in `[0, π/2]`.
///
/// Equal to `acos(|u·v|)` for the normalized vectors, evaluated as
/// `atan2(|v - (u·v)u|, |u·v|)` to keep precision at small angles.
pub fn principal_angle(g1: &[f64], g2: &[f64]) -> Result<f64> {
    if g1.len() != g2.len() {
        return Err(Error::invalid("principal angle of vectors of different lengths"));
    }
    let n1 = dot(g1, g1).sqrt();
    let n2 = dot(g2, g2).sqrt();
    if !(n1 > 0.0 && n2 > 0.0) || !n1.is_finite() || !n2.is_finite() {
        return Err(Error::invalid("principal angle needs nonzero finite vectors"));
    }
    let u: Vec<f64> = g1.iter().map(|v| v / n1).collect();
    let v: Vec<f64> = g2.iter().map(|x| x / n2).collect();
    let c = dot(&u, &v);
    let rejection = v.iter().zip(&u).map(|(a, b)| (a - c * b).powi(2)).sum::<f64>().sqrt();
    Ok(rejection.atan2(c.abs()).clamp(0.0, std::f64::consts::FRAC_PI_2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimPlan {
    pub model: EllipticalModel,
    pub estimators: Vec<EstimatorKind>,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
}

impl SimPlan {
    pub fn validate(&self) -> Result<()> {
        self.model.family.validate()?;
        let p = self.model.dim();
        if self.replications == 0 {
            return Err(Error::invalid("replications must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(Error::invalid("no estimators requested"));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::invalid("no sample sizes requested"));
        }
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n < p + 2) {
            return Err(Error::invalid(format!("sample size {n} is below p + 2 = {}", p + 2)));
        }
        Ok(())
    }

    /// Requested estimators with the covariance baseline first, duplicates removed.
    pub fn estimator_list(&self) -> Vec<EstimatorKind> {
        let mut out = vec![EstimatorKind::SampleCov];
        for &e in &self.estimators {
            if !out.contains(&e) {
                out.push(e);
            }
        }
        out
    }

    /// Seed of replication `rep` at sample size `n`.
    pub fn replication_seed(&self, n: usize, rep: usize) -> u64 {
        substream_seed(substream_seed(self.seed, n as u64), rep as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FseRow {
    pub family: String,
    pub df: Option<u32>,
    pub p: usize,
    pub n: usize,
    pub estimator: EstimatorKind,
    pub mspa: f64,
    pub fse: f64,
    pub mc_se: f64,
    pub failures: usize,
}

impl FseRow {
    pub fn is_valid(&self, replications: usize) -> bool {
        (self.failures as f64) < MAX_FAILURE_RATE * replications as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FseTable {
    pub rows: Vec<FseRow>,
}

impl FseTable {
    pub fn get(&self, estimator: EstimatorKind, n: usize) -> Option<&FseRow> {
        self.rows.iter().find(|r| r.estimator == estimator && r.n == n)
    }

    pub const CSV_HEADER: [&'static str; 9] = ["family", "df", "p", "n", "estimator", "mspa", "fse", "mc_se", "failures"];

    /// CSV text; floats carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = Self::CSV_HEADER.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{:.16e},{:.16e},{:.16e},{}\n",
                r.family,
                r.df.map(|d| d.to_string()).unwrap_or_default(),
                r.p,
                r.n,
                r.estimator,
                r.mspa,
                r.fse,
                r.mc_se,
                r.failures
            ));
        }
        s
    }
}

/// Squared angles of one replication, in `estimators` order; `None` marks a failed fit.
fn replicate(plan: &SimPlan, estimators: &[EstimatorKind], truth: &[f64], n: usize, rep: usize) -> Result<Vec<Option<f64>>> {
    let seed = plan.replication_seed(n, rep);
    let data = sample_elliptical(&plan.model, n, seed)?;
    let center = spatial_median_default(&data)?.value;
    let mut depth_cache: HashMap<DepthKind, Option<DepthModel>> = HashMap::new();
    let mut out = Vec::with_capacity(estimators.len());
    for &est in estimators {
        let depth_model = match est.depth() {
            Some(dk) => match depth_cache
                .entry(dk)
                .or_insert_with(|| DepthModel::fit(dk, &data, seed, DEFAULT_PROJECTIONS).ok())
            {
                Some(m) => Some(m.clone()),
                None => {
                    out.push(None);
                    continue;
                }
            },
            None => None,
        };
        let opts = FitOptions {
            center: if est == EstimatorKind::SampleCov { None } else { Some(center.clone()) },
            seed,
            depth_model,
            exec: Execution::Sequential,
            ..FitOptions::default()
        };
        match fit_scatter_with(est, &data, &opts) {
            Ok(fit) => out.push(Some(principal_angle(truth, &fit.decomp.vector(0))?.powi(2))),
            Err(Error::ConvergenceFailure { .. } | Error::DegenerateData(_) | Error::NumericalFailure(_) | Error::NotPositiveDefinite { .. }) => {
                out.push(None)
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// All rows for one sample size.
pub fn fse_cell(plan: &SimPlan, n: usize, exec: Execution) -> Result<Vec<FseRow>> {
    plan.validate()?;
    let estimators = plan.estimator_list();
    let spectral = plan.model.spectral()?;
    let truth = spectral.vector(0);
    let reps = exec.try_map(plan.replications, |r| replicate(plan, &estimators, &truth, n, r))?;
    let column = |j: usize| -> Vec<Option<f64>> { reps.iter().map(|r| r[j]).collect() };
    let base = column(0);
    let base_mspa = mean_of(&base);
    let mut rows = Vec::with_capacity(estimators.len());
    for (j, &est) in estimators.iter().enumerate() {
        let col = column(j);
        let failures = col.iter().filter(|v| v.is_none()).count();
        let mspa = mean_of(&col);
        let fse = base_mspa / mspa;
        rows.push(FseRow {
            family: plan.model.family.label(),
            df: plan.model.family.df(),
            p: plan.model.dim(),
            n,
            estimator: est,
            mspa,
            fse,
            mc_se: ratio_se(&base, &col),
            failures,
        });
    }
    Ok(rows)
}

pub fn run_fse(plan: &SimPlan, exec: Execution) -> Result<FseTable> {
    plan.validate()?;
    let mut rows = Vec::new();
    for &n in &plan.sample_sizes {
        rows.extend(fse_cell(plan, n, exec)?);
    }
    Ok(FseTable { rows })
}

fn mean_of(v: &[Option<f64>]) -> f64 {
    let ok: Vec<f64> = v.iter().flatten().copied().collect();
    if ok.is_empty() {
        f64::NAN
    } else {
        ok.iter().sum::<f64>() / ok.len() as f64
    }
}

/// Delta-method standard error of `mean(a) / mean(b)` over replications where
/// both succeeded.
fn ratio_se(a: &[Option<f64>], b: &[Option<f64>]) -> f64 {
    let pairs: Vec<(f64, f64)> = a.iter().zip(b).filter_map(|(x, y)| Some(((*x)?, (*y)?))).collect();
    let m = pairs.len();
    if m < 2 {
        return f64::NAN;
    }
    let mf = m as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / mf;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / mf;
    if mb == 0.0 {
        return if ma == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let r = ma / mb;
    let u: Vec<f64> = pairs.iter().map(|(x, y)| (x - r * y) / mb).collect();
    let mu = u.iter().sum::<f64>() / mf;
    let var = u.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (mf - 1.0);
    (var / mf).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Family;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn angle_examples() {
        assert!(principal_angle(&[1.0, 2.0], &[1.0, 2.0]).unwrap() < 1e-15);
        assert!((principal_angle(&[1.0, 0.0], &[0.0, 3.0]).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!(principal_angle(&[0.6, 0.8], &[-0.6, -0.8]).unwrap() < 1e-15);
        let t: f64 = 0.3;
        assert!((principal_angle(&[1.0, 0.0], &[t.cos(), -t.sin()]).unwrap() - t).abs() < 1e-15);
        assert!(principal_angle(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn sampler_covariance() {
        let m = EllipticalModel::diagonal(Family::Normal, &[1.0, 1.0]).unwrap();
        let x = sample_elliptical(&m, 100_000, 1).unwrap();
        let c = crate::depth::sample_covariance(&x, &x.column_means());
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((c[(i, j)] - target).abs() < 0.05);
            }
        }
        let one = sample_elliptical(&m, 1, 2).unwrap();
        assert_eq!(one.nrows(), 1);
        assert!(one.is_finite());
        assert!(sample_elliptical(&m, 0, 2).is_err());
    }

    fn small_plan() -> SimPlan {
        SimPlan {
            model: EllipticalModel::diagonal(Family::Normal, &[2.0, 1.0]).unwrap(),
            estimators: vec![EstimatorKind::Scm, EstimatorKind::Dcm(DepthKind::Projection), EstimatorKind::Tyler],
            sample_sizes: vec![20, 100],
            replications: 40,
            seed: 17,
        }
    }

    #[test]
    fn baseline_has_unit_efficiency_and_runs_are_reproducible() {
        let plan = small_plan();
        let a = run_fse(&plan, Execution::Parallel).unwrap();
        let b = run_fse(&plan, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        for n in [20, 100] {
            let base = a.get(EstimatorKind::SampleCov, n).unwrap();
            assert_eq!(base.fse, 1.0);
            assert_eq!(base.mc_se, 0.0);
        }
        for r in &a.rows {
            assert!(r.mspa >= 0.0 && r.mspa <= FRAC_PI_2 * FRAC_PI_2);
            assert!(r.fse.is_finite() && r.fse > 0.0);
        }
        assert_eq!(a.rows.len(), 8);
    }

    #[test]
    fn plan_validation() {
        let mut plan = small_plan();
        plan.sample_sizes = vec![3];
        assert!(plan.validate().is_err());
        let mut plan = small_plan();
        plan.replications = 0;
        assert!(run_fse(&plan, Execution::Sequential).is_err());
    }

    #[test]
    fn ratio_se_zero_for_identical_columns() {
        let v = vec![Some(1.0), Some(2.0), None, Some(0.5)];
        assert_eq!(ratio_se(&v, &v), 0.0);
    }
}
