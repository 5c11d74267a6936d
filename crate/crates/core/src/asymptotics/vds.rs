//! Element formulas for the asymptotic covariance `V_DS` of the sample DCM in
//! the eigenbasis of `Σ`, and the eigenvector/eigenvalue limit variances built
//! from them.

use serde::Serialize;

use super::{check_distinct, McOptions, SphericalPanel};
use crate::depth::DepthKind;
use crate::mc::moments;
use crate::model::EllipticalModel;
use crate::numkernel::{Matrix, SpectralDecomp, SymMatrix};
use crate::{Error, Result};

/// Smallest panel accepted for the fourth-moment expectations.
pub const MIN_VDS_MC_N: usize = 100_000;

/// With `γ_ab = E[htped⁴ λ_aλ_b z_a² z_b² / (zᵀΛz)²]`:
///
/// - variance of diagonal element `a`: `γ_aa - λ_{DS,a}²`
/// - variance of off-diagonal element `(a,b)`: `γ_ab`
/// - covariance of diagonal elements `a ≠ b`: `γ_ab - λ_{DS,a} λ_{DS,b}`
/// - covariance of the mirrored off-diagonal pair `(a,b)`, `(b,a)`: `γ_ab`
/// - every other covariance is zero.
#[derive(Clone, Debug, Serialize)]
pub struct VdsElements {
    pub lambda_ds: Vec<f64>,
    pub gamma: Matrix,
    pub gamma_se: Matrix,
    pub var_diag: Vec<f64>,
    pub var_diag_se: Vec<f64>,
    /// `γ_ab` off the diagonal, zero on it.
    pub var_offdiag: Matrix,
    /// `γ_ab - λ_{DS,a} λ_{DS,b}`; the diagonal holds `var_diag`.
    pub cov_diag_pairs: Matrix,
}

impl VdsElements {
    pub fn dim(&self) -> usize {
        self.lambda_ds.len()
    }

    /// Full `p² × p²` covariance of `vec(DCM)`, column-major `vec` order
    /// (`(a,b) ↦ a + p·b`), with exact zeros outside the nonzero pattern.
    pub fn assemble(&self) -> Matrix {
        let p = self.dim();
        let mut v = Matrix::zeros(p * p, p * p);
        let idx = |a: usize, b: usize| a + p * b;
        for a in 0..p {
            for b in 0..p {
                if a == b {
                    for c in 0..p {
                        v[(idx(a, a), idx(c, c))] = self.cov_diag_pairs[(a, c)];
                    }
                } else {
                    v[(idx(a, b), idx(a, b))] = self.var_offdiag[(a, b)];
                    v[(idx(a, b), idx(b, a))] = self.var_offdiag[(a, b)];
                }
            }
        }
        v
    }
}

pub fn vds_elements(model: &EllipticalModel, depth: DepthKind, opts: &McOptions) -> Result<VdsElements> {
    let lambda = model.spectral()?.eigenvalues;
    vds_for_eigenvalues(model, &lambda, depth, opts)
}

fn vds_for_eigenvalues(model: &EllipticalModel, lambda: &[f64], depth: DepthKind, opts: &McOptions) -> Result<VdsElements> {
    if opts.mc_n < MIN_VDS_MC_N {
        return Err(Error::invalid(format!("mc_n must be at least {MIN_VDS_MC_N}")));
    }
    let p = lambda.len();
    let panel = SphericalPanel::new(model.family, Some(depth), p, opts)?;
    // per draw: b_a = h² λ_a z_a² / q, then c_ab = b_a b_b for a ≤ b
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|a| (a..p).map(move |b| (a, b))).collect();
    let draw = |k: usize, b: &mut [f64]| {
        let z = panel.z.row(k);
        let q: f64 = z.iter().zip(lambda).map(|(v, l)| l * v * v).sum();
        for a in 0..p {
            b[a] = panel.h2[k] * lambda[a] * z[a] * z[a] / q;
        }
    };
    let m = moments(panel.len(), p + pairs.len(), opts.exec, |k, out| {
        let (b, c) = out.split_at_mut(p);
        draw(k, b);
        for (slot, &(x, y)) in c.iter_mut().zip(&pairs) {
            *slot = b[x] * b[y];
        }
    });
    let lambda_ds = m.mean[..p].to_vec();
    let mut gamma = Matrix::zeros(p, p);
    let mut gamma_se = Matrix::zeros(p, p);
    for (t, &(a, b)) in pairs.iter().enumerate() {
        for (x, y) in [(a, b), (b, a)] {
            gamma[(x, y)] = m.mean[p + t];
            gamma_se[(x, y)] = m.se[p + t];
        }
    }
    // delta method for γ_aa - λ_{DS,a}²: per-draw linearization c_aa - 2 λ_{DS,a} b_a
    let lin = moments(panel.len(), p, opts.exec, |k, out| {
        let mut b = vec![0.0; p];
        draw(k, &mut b);
        for a in 0..p {
            out[a] = b[a] * b[a] - 2.0 * lambda_ds[a] * b[a];
        }
    });
    let var_diag: Vec<f64> = (0..p).map(|a| gamma[(a, a)] - lambda_ds[a] * lambda_ds[a]).collect();
    let mut var_offdiag = Matrix::zeros(p, p);
    let mut cov_diag_pairs = Matrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            if a == b {
                cov_diag_pairs[(a, a)] = var_diag[a];
            } else {
                var_offdiag[(a, b)] = gamma[(a, b)];
                cov_diag_pairs[(a, b)] = gamma[(a, b)] - lambda_ds[a] * lambda_ds[b];
            }
        }
    }
    Ok(VdsElements { lambda_ds, gamma, gamma_se, var_diag, var_diag_se: lin.se, var_offdiag, cov_diag_pairs })
}

/// Limit variances of the sample-DCM eigenvectors `g_i` and eigenvalues.
///
/// `AVar(g_i) = Σ_{k≠i} γ_ik / (λ_{DS,i} - λ_{DS,k})² γ_k γ_kᵀ`,
/// `ACov(g_i, g_j) = -γ_ij / (λ_{DS,i} - λ_{DS,j})² γ_j γ_iᵀ`,
/// eigenvalue variances and covariances are the diagonal-element entries of `V_DS`.
#[derive(Clone, Debug, Serialize)]
pub struct EigvecAvar {
    pub vds: VdsElements,
    pub spectral: SpectralDecomp,
    pub avar: Vec<SymMatrix>,
    pub avar_trace: Vec<f64>,
    pub eigval_var: Vec<f64>,
    pub eigval_cov: Matrix,
}

impl EigvecAvar {
    /// `ACov(g_i, g_j)` for `i ≠ j` (0-based).
    pub fn acov(&self, i: usize, j: usize) -> Result<Matrix> {
        let p = self.vds.dim();
        if i >= p || j >= p || i == j {
            return Err(Error::invalid("ACov needs two distinct eigenvector indices"));
        }
        let l = &self.vds.lambda_ds;
        let c = -self.vds.gamma[(i, j)] / (l[i] - l[j]).powi(2);
        let (gi, gj) = (self.spectral.vector(i), self.spectral.vector(j));
        let mut m = Matrix::zeros(p, p);
        for r in 0..p {
            for s in 0..p {
                m[(r, s)] = c * gj[r] * gi[s];
            }
        }
        Ok(m)
    }
}

pub fn eigvec_avar(model: &EllipticalModel, depth: DepthKind, opts: &McOptions) -> Result<EigvecAvar> {
    let spectral = model.spectral()?;
    check_distinct(&spectral.eigenvalues, "eigenvalues")?;
    let vds = vds_for_eigenvalues(model, &spectral.eigenvalues, depth, opts)?;
    check_distinct(&vds.lambda_ds, "DCM eigenvalues")?;
    let p = vds.dim();
    let l = &vds.lambda_ds;
    let mut avar = Vec::with_capacity(p);
    let mut avar_trace = Vec::with_capacity(p);
    for i in 0..p {
        let mut m = Matrix::zeros(p, p);
        let mut tr = 0.0;
        for k in (0..p).filter(|&k| k != i) {
            let c = vds.gamma[(i, k)] / (l[i] - l[k]).powi(2);
            tr += c;
            let g = spectral.vector(k);
            for r in 0..p {
                for s in r..p {
                    m[(r, s)] += c * g[r] * g[s];
                }
            }
        }
        avar.push(SymMatrix::new(sym_from_upper(m))?);
        avar_trace.push(tr);
    }
    let eigval_var = vds.var_diag.clone();
    let eigval_cov = vds.cov_diag_pairs.clone();
    Ok(EigvecAvar { vds, spectral, avar, avar_trace, eigval_var, eigval_cov })
}

fn sym_from_upper(mut m: Matrix) -> Matrix {
    let p = m.nrows();
    for r in 0..p {
        for s in 0..r {
            m[(r, s)] = m[(s, r)];
        }
    }
    m
}
