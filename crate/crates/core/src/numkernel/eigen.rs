use serde::{Deserialize, Serialize};

use super::{Matrix, SymMatrix};
use crate::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition `m = Q · diag(λ) · Qᵀ` of a symmetric matrix.
///
/// Eigenvalues are sorted in descending order (ties keep the order in which the
/// Jacobi iteration left them on the diagonal). Each eigenvector is signed so that
/// its largest-magnitude coordinate is positive, ties going to the lowest index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecomp {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns.
    pub eigenvectors: Matrix,
}

impl SpectralDecomp {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The `i`-th eigenvector (0-based).
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.eigenvectors.column(i)
    }

    /// `Q · diag(λ) · Qᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let p = self.dim();
        let q = &self.eigenvectors;
        let mut out = Matrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let s: f64 = (0..p).map(|k| q[(i, k)] * self.eigenvalues[k] * q[(j, k)]).sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }
}

/// Cyclic Jacobi eigensolver.
///
/// Rotations are applied while any off-diagonal entry exceeds
/// `1e-14 · ‖m‖_F`; fails with `NumericalFailure` after 100 sweeps.
pub fn eigh(m: &SymMatrix) -> Result<SpectralDecomp> {
    let p = m.dim();
    let mut a = m.as_matrix().clone();
    let mut v = Matrix::identity(p);
    let threshold = 1e-14 * a.frobenius();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..p)
            .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            converged = true;
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let apq = a[(i, j)];
                if apq.abs() <= threshold * 1e-3 {
                    a[(i, j)] = 0.0;
                    a[(j, i)] = 0.0;
                    continue;
                }
                rotate(&mut a, &mut v, i, j);
            }
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..p).collect();
    // stable: equal eigenvalues keep their diagonal order
    order.sort_by(|&x, &y| a[(y, y)].total_cmp(&a[(x, x)]));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| a[(k, k)]).collect();
    let mut eigenvectors = Matrix::zeros(p, p);
    for (col, &k) in order.iter().enumerate() {
        let mut best = 0usize;
        for r in 1..p {
            if v[(r, k)].abs() > v[(best, k)].abs() {
                best = r;
            }
        }
        let sign = if v[(best, k)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..p {
            eigenvectors[(r, col)] = sign * v[(r, k)];
        }
    }
    Ok(SpectralDecomp { eigenvalues, eigenvectors })
}

fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let n = a.nrows();
    let apq = a[(p, q)];
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    a[(p, p)] -= t * apq;
    a[(q, q)] += t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[(k, p)] = new_kp;
        a[(p, k)] = new_kp;
        a[(k, q)] = new_kq;
        a[(q, k)] = new_kq;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}
