//! Influence functions of eigenvector functionals at elliptical models.

use serde::Serialize;

use super::{check_distinct, McOptions};
use crate::depth::RadialDepth;
use crate::model::EllipticalModel;
use crate::numkernel::{Matrix, SpectralDecomp};
use crate::scatter::{lambda_ds_for_eigenvalues, EstimatorKind};
use crate::{Error, Result};

/// Evaluates `IF(x0; γ_i)` for one estimator at one model.
///
/// With `z0 = Λ^{-1/2} Γᵀ (x0 - μ)` the influence lies in `span{γ_k : k ≠ i}`
/// with coefficients
///
/// | estimator  | coefficient of `γ_k`                                              |
/// |------------|-------------------------------------------------------------------|
/// | covariance | `√(λ_iλ_k) z0_i z0_k / (λ_i - λ_k)`                               |
/// | Tyler      | `(p+2) √(λ_iλ_k) z0_i z0_k / ((λ_i - λ_k) |z0|²)`                 |
/// | SCM        | `√(λ_iλ_k) z0_i z0_k / ((λ_{S,i} - λ_{S,k}) z0ᵀΛz0)`              |
/// | DCM        | `htped²(x0) √(λ_iλ_k) z0_i z0_k / ((λ_{DS,i} - λ_{DS,k}) z0ᵀΛz0)` |
///
/// `λ_S`, `λ_DS` are the population SCM/DCM eigenvalues (Monte Carlo).
#[derive(Clone, Debug)]
pub struct InfluenceCalculator {
    estimator: EstimatorKind,
    model: EllipticalModel,
    spectral: SpectralDecomp,
    radial: Option<RadialDepth>,
    sign_eigenvalues: Option<Vec<f64>>,
}

impl InfluenceCalculator {
    pub fn new(estimator: EstimatorKind, model: &EllipticalModel, opts: &McOptions) -> Result<Self> {
        let spectral = model.spectral()?;
        let sign_eigenvalues = match estimator {
            EstimatorKind::Scm | EstimatorKind::Dcm(_) => Some(
                lambda_ds_for_eigenvalues(&spectral.eigenvalues, model.family, estimator.depth(), opts.mc_n, opts.seed, opts.exec)?
                    .values,
            ),
            _ => None,
        };
        Self::build(estimator, model, spectral, sign_eigenvalues)
    }

    /// Uses caller-supplied SCM/DCM eigenvalues instead of computing them.
    pub fn with_lambda_ds(estimator: EstimatorKind, model: &EllipticalModel, lambda_ds: Vec<f64>) -> Result<Self> {
        if lambda_ds.len() != model.dim() {
            return Err(Error::invalid("one DCM eigenvalue per dimension required"));
        }
        Self::build(estimator, model, model.spectral()?, Some(lambda_ds))
    }

    fn build(estimator: EstimatorKind, model: &EllipticalModel, spectral: SpectralDecomp, sign_eigenvalues: Option<Vec<f64>>) -> Result<Self> {
        if let EstimatorKind::DepthWeightedTyler(_) = estimator {
            return Err(Error::invalid("no closed-form influence function for depth-weighted Tyler"));
        }
        check_distinct(&spectral.eigenvalues, "eigenvalues")?;
        let sign_eigenvalues = match estimator {
            EstimatorKind::Scm | EstimatorKind::Dcm(_) => {
                let v = sign_eigenvalues.expect("sign-based estimator");
                check_distinct(&v, "sign covariance eigenvalues")?;
                Some(v)
            }
            _ => None,
        };
        let radial = estimator.depth().map(|d| RadialDepth::new(d, model.family)).transpose()?;
        Ok(InfluenceCalculator { estimator, model: model.clone(), spectral, radial, sign_eigenvalues })
    }

    pub fn estimator(&self) -> EstimatorKind {
        self.estimator
    }

    pub fn model(&self) -> &EllipticalModel {
        &self.model
    }

    pub fn spectral(&self) -> &SpectralDecomp {
        &self.spectral
    }

    /// Population SCM/DCM eigenvalues used in the denominators.
    pub fn sign_eigenvalues(&self) -> Option<&[f64]> {
        self.sign_eigenvalues.as_deref()
    }

    /// `z0 = Λ^{-1/2} Γᵀ (x0 - μ)`.
    pub fn standardize(&self, x0: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = x0.iter().zip(&self.model.mu).map(|(a, b)| a - b).collect();
        let y = self.spectral.eigenvectors.tmatvec(&diff);
        y.iter().zip(&self.spectral.eigenvalues).map(|(v, l)| v / l.sqrt()).collect()
    }

    /// Influence of `x0` on the `index`-th (0-based) eigenvector.
    pub fn eigvec(&self, index: usize, x0: &[f64]) -> Result<Vec<f64>> {
        let p = self.model.dim();
        if index >= p {
            return Err(Error::invalid(format!("eigenvector index {index} out of range for p={p}")));
        }
        if x0.len() != p || x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("x0 must be a finite vector of the model dimension"));
        }
        let z = self.standardize(x0);
        let lam = &self.spectral.eigenvalues;
        let zz: f64 = z.iter().map(|v| v * v).sum();
        let mut out = vec![0.0; p];
        if zz == 0.0 {
            return Ok(out);
        }
        let zlz: f64 = z.iter().zip(lam).map(|(v, l)| l * v * v).sum();
        let (scale, gaps): (f64, &[f64]) = match self.estimator {
            EstimatorKind::SampleCov => (1.0, lam),
            EstimatorKind::Tyler => ((p as f64 + 2.0) / zz, lam),
            EstimatorKind::Scm => (1.0 / zlz, self.sign_eigenvalues.as_deref().expect("scm")),
            EstimatorKind::Dcm(_) => {
                let h = self.radial.as_ref().expect("dcm").htped(zz.sqrt());
                (h * h / zlz, self.sign_eigenvalues.as_deref().expect("dcm"))
            }
            EstimatorKind::DepthWeightedTyler(_) => unreachable!("rejected at construction"),
        };
        for k in (0..p).filter(|&k| k != index) {
            let c = scale * (lam[index] * lam[k]).sqrt() * z[index] * z[k] / (gaps[index] - gaps[k]);
            for (o, g) in out.iter_mut().zip(self.spectral.eigenvectors.column(k)) {
                *o += c * g;
            }
        }
        Ok(out)
    }

    /// Supremum of `|IF|` over `x0` for bivariate SCM/DCM models:
    /// `M_D² / (2 |λ_{DS,1} - λ_{DS,2}|)` (`M_D = 1` for the SCM).
    pub fn sup_norm_bound(&self) -> Option<f64> {
        if self.model.dim() != 2 {
            return None;
        }
        let l = self.sign_eigenvalues.as_ref()?;
        let md = self.estimator.depth().map_or(1.0, |d| d.max_depth());
        Some(md * md / (2.0 * (l[0] - l[1]).abs()))
    }
}

/// Rectangle and resolution of an influence grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// `n × n` grid over `μ_j ± width·σ_j`, `σ_j² = Σ_jj`.
    pub fn centered(model: &EllipticalModel, width: f64, n: usize) -> Result<Self> {
        if model.dim() != 2 {
            return Err(Error::invalid("influence grids need p = 2"));
        }
        let s = model.sigma.diag();
        let r = |j: usize| (model.mu[j] - width * s[j].sqrt(), model.mu[j] + width * s[j].sqrt());
        Ok(GridSpec { x_range: r(0), y_range: r(1), nx: n, ny: n })
    }

    fn coords(range: (f64, f64), n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.5 * (range.0 + range.1)];
        }
        let step = (range.1 - range.0) / (n - 1) as f64;
        (0..n).map(|i| if i == n - 1 { range.1 } else { range.0 + step * i as f64 }).collect()
    }
}

/// `|IF|` on a rectangular grid; `norms[(row, col)]` is at `(xs[col], ys[row])`.
#[derive(Clone, Debug, Serialize)]
pub struct InfluenceGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub norms: Matrix,
}

impl InfluenceGrid {
    /// Largest norm on the outermost ring of cells, and on the cells inside
    /// the central half of both ranges.
    pub fn ring_maxima(&self) -> (f64, f64) {
        let (nx, ny) = (self.xs.len(), self.ys.len());
        let mut boundary = 0.0f64;
        let mut interior = 0.0f64;
        for r in 0..ny {
            for c in 0..nx {
                let v = self.norms[(r, c)];
                if r == 0 || c == 0 || r + 1 == ny || c + 1 == nx {
                    boundary = boundary.max(v);
                }
                let inner = |i: usize, n: usize| 4 * i + 1 >= n && 4 * i + 3 <= 3 * n;
                if inner(r, ny) && inner(c, nx) {
                    interior = interior.max(v);
                }
            }
        }
        (boundary, interior)
    }
}

pub fn influence_grid(calc: &InfluenceCalculator, index: usize, spec: &GridSpec) -> Result<InfluenceGrid> {
    if calc.model().dim() != 2 {
        return Err(Error::invalid("influence grids need p = 2"));
    }
    if spec.nx == 0 || spec.ny == 0 || !(spec.x_range.0 <= spec.x_range.1 && spec.y_range.0 <= spec.y_range.1) {
        return Err(Error::invalid("grid needs a non-empty rectangle"));
    }
    let xs = GridSpec::coords(spec.x_range, spec.nx);
    let ys = GridSpec::coords(spec.y_range, spec.ny);
    let mut norms = Matrix::zeros(spec.ny, spec.nx);
    for (r, &y) in ys.iter().enumerate() {
        for (c, &x) in xs.iter().enumerate() {
            let v = calc.eigvec(index, &[x, y])?;
            norms[(r, c)] = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        }
    }
    Ok(InfluenceGrid { xs, ys, norms })
}
