//! Asymptotic relative efficiency of eigenvector estimates against the
//! sample covariance matrix.

use serde::Serialize;

use super::{check_distinct, McOptions, SphericalPanel};
use crate::mc::moments;
use crate::model::{EllipticalModel, Family};
use crate::scatter::EstimatorKind;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AreMethod {
    /// Exact (no Monte Carlo).
    Exact,
    TraceRatio,
    ClosedForm2d,
}

#[derive(Clone, Debug, Serialize)]
pub struct AreResult {
    pub value: f64,
    pub mc_std_error: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub method: AreMethod,
}

/// `1 + κ`, the elliptical kurtosis factor scaling the covariance-eigenvector
/// variance: 1 for the normal, `(ν-2)/(ν-4)` for `t_ν`.
fn kurtosis_factor(family: Family) -> Result<f64> {
    match family {
        Family::Normal => Ok(1.0),
        Family::StudentT { .. } => family.kurtosis_factor(),
    }
}

/// Efficiency of the `opts`-indexed eigenvector: the bivariate closed form
/// for `p = 2`, the trace ratio otherwise.
pub fn are_eigvec(model: &EllipticalModel, estimator: EstimatorKind, index: usize, opts: &McOptions) -> Result<AreResult> {
    if model.dim() == 2 {
        are_closed_form_2d(model, estimator, opts)
    } else {
        are_trace_ratio(model, estimator, index, opts)
    }
}

/// `tr AVar(covariance eigenvector i) / tr AVar(estimator eigenvector i)`.
///
/// The numerator is `(1+κ) Σ_{k≠i} λ_iλ_k/(λ_i-λ_k)²`. Tyler's denominator is
/// the same sum times `(p+2)/p` without the kurtosis factor; for SCM/DCM it is
/// `Σ_{k≠i} E[h⁴ λ_iλ_k z_i²z_k²/(zᵀΛz)²] / (λ_{DS,i}-λ_{DS,k})²` by Monte Carlo.
pub fn are_trace_ratio(model: &EllipticalModel, estimator: EstimatorKind, index: usize, opts: &McOptions) -> Result<AreResult> {
    let p = model.dim();
    if index >= p {
        return Err(Error::invalid(format!("eigenvector index {index} out of range for p={p}")));
    }
    if p < 2 {
        return Err(Error::invalid("eigenvector efficiency needs p >= 2"));
    }
    let lam = model.spectral()?.eigenvalues;
    check_distinct(&lam, "eigenvalues")?;
    let kappa1 = kurtosis_factor(model.family)?;
    let base: f64 = (0..p)
        .filter(|&k| k != index)
        .map(|k| lam[index] * lam[k] / (lam[index] - lam[k]).powi(2))
        .sum();
    let numerator = kappa1 * base;
    let exact = |denominator: f64| AreResult {
        value: numerator / denominator,
        mc_std_error: 0.0,
        numerator,
        denominator,
        method: AreMethod::Exact,
    };
    match estimator {
        EstimatorKind::SampleCov => return Ok(exact(numerator)),
        EstimatorKind::Tyler => return Ok(exact(base * (p as f64 + 2.0) / p as f64)),
        EstimatorKind::DepthWeightedTyler(_) => {
            return Err(Error::invalid("no asymptotic variance available for depth-weighted Tyler"));
        }
        EstimatorKind::Scm | EstimatorKind::Dcm(_) => {}
    }
    let panel = SphericalPanel::new(model.family, estimator.depth(), p, opts)?;
    // per draw: b_j = h² λ_j z_j² / q (j < p), a_k = b_i b_k (k ≠ i)
    let fill = |k: usize, out: &mut [f64]| {
        let z = panel.z.row(k);
        let q: f64 = z.iter().zip(&lam).map(|(v, l)| l * v * v).sum();
        let (b, a) = out.split_at_mut(p);
        for j in 0..p {
            b[j] = panel.h2[k] * lam[j] * z[j] * z[j] / q;
        }
        for j in 0..p {
            a[j] = if j == index { 0.0 } else { b[index] * b[j] };
        }
    };
    let m = moments(panel.len(), 2 * p, opts.exec, fill);
    let (bm, am) = m.mean.split_at(p);
    check_distinct(&sorted_desc(bm), "sign covariance eigenvalues")?;
    let gap = |k: usize| bm[index] - bm[k];
    let denominator: f64 = (0..p).filter(|&k| k != index).map(|k| am[k] / gap(k).powi(2)).sum();
    let lin = moments(panel.len(), 1, opts.exec, |k, out| {
        let mut buf = vec![0.0; 2 * p];
        fill(k, &mut buf);
        let (b, a) = buf.split_at(p);
        out[0] = (0..p)
            .filter(|&j| j != index)
            .map(|j| a[j] / gap(j).powi(2) - 2.0 * am[j] * (b[index] - b[j]) / gap(j).powi(3))
            .sum();
    });
    let value = numerator / denominator;
    Ok(AreResult {
        value,
        mc_std_error: value * lin.se[0] / denominator,
        numerator,
        denominator,
        method: AreMethod::TraceRatio,
    })
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Bivariate closed form with eigenvalues `(λ, ρλ)`:
/// `(1+κ) [E(h²(z1²-ρz2²)/(z1²+ρz2²))]² / ((1-ρ)² E(h⁴z1²z2²/(z1²+ρz2²)²))`.
/// The same for both eigenvectors.
pub fn are_closed_form_2d(model: &EllipticalModel, estimator: EstimatorKind, opts: &McOptions) -> Result<AreResult> {
    if model.dim() != 2 {
        return Err(Error::invalid("the closed form needs p = 2"));
    }
    let lam = model.spectral()?.eigenvalues;
    let rho = lam[1] / lam[0];
    if (1.0 - rho).abs() <= 1e-10 {
        return Err(Error::DegenerateModel(format!("eigenvalue ratio rho = {rho} is 1")));
    }
    match estimator {
        EstimatorKind::SampleCov | EstimatorKind::Tyler | EstimatorKind::DepthWeightedTyler(_) => {
            return are_trace_ratio(model, estimator, 0, opts);
        }
        EstimatorKind::Scm | EstimatorKind::Dcm(_) => {}
    }
    let kappa1 = kurtosis_factor(model.family)?;
    let panel = SphericalPanel::new(model.family, estimator.depth(), 2, opts)?;
    let fill = |k: usize, out: &mut [f64]| {
        let z = panel.z.row(k);
        let (a, b) = (z[0] * z[0], z[1] * z[1]);
        let q = a + rho * b;
        let h2 = panel.h2[k];
        out[0] = h2 * (a - rho * b) / q;
        out[1] = h2 * h2 * a * b / (q * q);
    };
    let m = moments(panel.len(), 2, opts.exec, fill);
    let (g, h) = (m.mean[0], m.mean[1]);
    let numerator = kappa1 * g * g;
    let denominator = (1.0 - rho).powi(2) * h;
    let value = numerator / denominator;
    let lin = moments(panel.len(), 1, opts.exec, |k, out| {
        let mut buf = [0.0; 2];
        fill(k, &mut buf);
        out[0] = 2.0 * buf[0] / g - buf[1] / h;
    });
    Ok(AreResult { value, mc_std_error: value * lin.se[0], numerator, denominator, method: AreMethod::ClosedForm2d })
}
