//! Scatter estimators: sample covariance, SCM, DCM, Tyler and depth-weighted
//! Tyler; recovery of standardized shape eigenvalues from DCM eigenvalues.

use serde::{Deserialize, Serialize};

use crate::depth::{DepthKind, DepthModel, RadialDepth, DEFAULT_PROJECTIONS};
use crate::model::{EllipticalModel, Family, StandardPanel};
use crate::numkernel::{cholesky, eigh, Matrix, SpectralDecomp, SymMatrix};
use crate::ranks::{sign_unchecked, spatial_median_default};
use crate::{Error, Execution, Result};

pub const TYLER_TOL: f64 = 1e-8;
pub const TYLER_MAX_ITER: usize = 200;
/// Smallest Monte-Carlo panel accepted by the population routines.
pub const MIN_MC_N: usize = 10_000;

const CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum EstimatorKind {
    SampleCov,
    Scm,
    Dcm(DepthKind),
    Tyler,
    DepthWeightedTyler(DepthKind),
}

impl EstimatorKind {
    pub fn label(self) -> String {
        match self {
            EstimatorKind::SampleCov => "cov".into(),
            EstimatorKind::Scm => "scm".into(),
            EstimatorKind::Tyler => "tyler".into(),
            EstimatorKind::Dcm(d) => format!("dcm-{}", d.label()),
            EstimatorKind::DepthWeightedTyler(d) => format!("wtyler-{}", d.label()),
        }
    }

    pub fn depth(self) -> Option<DepthKind> {
        match self {
            EstimatorKind::Dcm(d) | EstimatorKind::DepthWeightedTyler(d) => Some(d),
            _ => None,
        }
    }

    pub fn is_tyler(self) -> bool {
        matches!(self, EstimatorKind::Tyler | EstimatorKind::DepthWeightedTyler(_))
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        match s.as_str() {
            "cov" | "sample-cov" | "samplecov" | "classical" | "cpca" => return Ok(EstimatorKind::SampleCov),
            "scm" | "spca" => return Ok(EstimatorKind::Scm),
            "tyler" => return Ok(EstimatorKind::Tyler),
            _ => {}
        }
        if let Some(d) = s.strip_prefix("dcm-") {
            return Ok(EstimatorKind::Dcm(d.parse()?));
        }
        if let Some(d) = s.strip_prefix("wtyler-").or_else(|| s.strip_prefix("depth-weighted-tyler-")) {
            return Ok(EstimatorKind::DepthWeightedTyler(d.parse()?));
        }
        Err(Error::invalid(format!("unknown estimator '{s}'")))
    }
}

impl From<EstimatorKind> for String {
    fn from(k: EstimatorKind) -> String {
        k.label()
    }
}

impl TryFrom<String> for EstimatorKind {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Tuning for [`fit_scatter_with`].
#[derive(Clone, Debug)]
pub struct FitOptions {
    /// Location; defaults to the spatial median (sample mean for `SampleCov`),
    /// or to the population center when `depth_model` is population-sourced.
    pub center: Option<Vec<f64>>,
    /// Seed for the sample depth direction set.
    pub seed: u64,
    /// Depth model to use instead of fitting one to the data.
    pub depth_model: Option<DepthModel>,
    pub n_projections: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub exec: Execution,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            center: None,
            seed: 0,
            depth_model: None,
            n_projections: DEFAULT_PROJECTIONS,
            tol: TYLER_TOL,
            max_iter: TYLER_MAX_ITER,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScatterFit {
    pub kind: EstimatorKind,
    pub matrix: SymMatrix,
    pub decomp: SpectralDecomp,
    pub center: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Rows equal to the center (zero spatial sign), left out of sign-based sums.
    pub dropped_rows: usize,
    /// Per-row `htped²` weights of the depth-weighted Tyler fit.
    #[serde(skip)]
    pub weights: Option<Vec<f64>>,
}

impl ScatterFit {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.decomp.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Fits `kind` with default options, an optional center and a depth seed.
pub fn fit_scatter(kind: EstimatorKind, data: &Matrix, center: Option<Vec<f64>>, seed: u64) -> Result<ScatterFit> {
    fit_scatter_with(kind, data, &FitOptions { center, seed, ..FitOptions::default() })
}

pub fn fit_scatter_with(kind: EstimatorKind, data: &Matrix, opts: &FitOptions) -> Result<ScatterFit> {
    let (n, p) = (data.nrows(), data.ncols());
    if n == 0 || p == 0 {
        return Err(Error::invalid("scatter of an empty data set"));
    }
    if !data.is_finite() {
        return Err(Error::invalid("data contains non-finite values"));
    }
    if let Some(c) = &opts.center {
        if c.len() != p || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("center must be a finite vector of the data dimension"));
        }
    }
    if let Some(dm) = &opts.depth_model {
        if dm.dim() != p {
            return Err(Error::invalid("depth model dimension does not match the data"));
        }
        if Some(dm.kind()) != kind.depth() {
            return Err(Error::invalid(format!("depth model is {:?}, estimator {}", dm.kind(), kind)));
        }
    }
    match kind {
        EstimatorKind::SampleCov if n < 2 => {
            return Err(Error::invalid("sample covariance needs at least two rows"));
        }
        EstimatorKind::Tyler | EstimatorKind::DepthWeightedTyler(_) if n <= p => {
            return Err(Error::invalid(format!("{kind} needs n > p, got n={n}, p={p}")));
        }
        _ => {}
    }

    let center = match (&opts.center, kind) {
        (Some(c), _) => c.clone(),
        (None, EstimatorKind::SampleCov) => data.column_means(),
        (None, _) => match opts.depth_model.as_ref().and_then(|m| m.population_center()) {
            Some(mu) => mu.to_vec(),
            None => spatial_median_default(data)?.value,
        },
    };

    let depth_model = match kind.depth() {
        Some(dk) => Some(match &opts.depth_model {
            Some(m) => m.clone(),
            None => DepthModel::fit(dk, data, opts.seed, opts.n_projections)?,
        }),
        None => None,
    };

    let (matrix, iterations, converged, dropped, weights) = match kind {
        EstimatorKind::SampleCov => {
            let (acc, _) = outer_sum(data, opts.exec, |x| {
                Some((1.0, x.iter().zip(&center).map(|(a, b)| a - b).collect()))
            });
            (acc.scale(1.0 / (n - 1) as f64), 0, true, 0, None)
        }
        EstimatorKind::Scm => {
            let (acc, kept) = sign_sum(data, &center, opts.exec, |_| 1.0)?;
            (acc.scale(1.0 / kept as f64), 0, true, n - kept, None)
        }
        EstimatorKind::Dcm(_) => {
            let dm = depth_model.as_ref().expect("depth kind");
            let h = dm.htpeds(data, opts.exec)?;
            let (acc, kept) = sign_sum(data, &center, opts.exec, |i| h[i] * h[i])?;
            (acc.scale(1.0 / kept as f64), 0, true, n - kept, None)
        }
        EstimatorKind::Tyler => {
            let (m, it, dropped) = tyler_iterate(data, &center, None, opts)?;
            (m, it, true, dropped, None)
        }
        EstimatorKind::DepthWeightedTyler(_) => {
            let dm = depth_model.as_ref().expect("depth kind");
            let w: Vec<f64> = dm.htpeds(data, opts.exec)?.into_iter().map(|h| h * h).collect();
            let (m, it, dropped) = tyler_iterate(data, &center, Some(&w), opts)?;
            (m, it, true, dropped, Some(w))
        }
    };
    let decomp = eigh(&matrix)?;
    Ok(ScatterFit { kind, matrix, decomp, center, iterations, converged, dropped_rows: dropped, weights })
}

/// Sums `w·v·vᵀ` over rows in fixed chunks, reduced in chunk order.
/// Rows mapped to `None` are skipped; returns the sum and the kept count.
fn outer_sum<F>(data: &Matrix, exec: Execution, f: F) -> (SymMatrix, usize)
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)> + Sync + Send,
{
    outer_sum_indexed(data, exec, |i| f(data.row(i)))
}

fn outer_sum_indexed<F>(data: &Matrix, exec: Execution, f: F) -> (SymMatrix, usize)
where
    F: Fn(usize) -> Option<(f64, Vec<f64>)> + Sync + Send,
{
    let (n, p) = (data.nrows(), data.ncols());
    let chunks = n.div_ceil(CHUNK);
    let partials = exec.map(chunks, |c| {
        let mut acc = Matrix::zeros(p, p);
        let mut kept = 0usize;
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            if let Some((w, v)) = f(i) {
                kept += 1;
                for a in 0..p {
                    let wa = w * v[a];
                    for b in a..p {
                        acc[(a, b)] += wa * v[b];
                    }
                }
            }
        }
        (acc, kept)
    });
    let mut total = Matrix::zeros(p, p);
    let mut kept = 0;
    for (acc, k) in partials {
        kept += k;
        for a in 0..p {
            for b in a..p {
                total[(a, b)] += acc[(a, b)];
            }
        }
    }
    (SymMatrix::from_upper(total), kept)
}

/// `Σ w_i S_i S_iᵀ` over rows with nonzero sign.
fn sign_sum<W>(data: &Matrix, center: &[f64], exec: Execution, weight: W) -> Result<(SymMatrix, usize)>
where
    W: Fn(usize) -> f64 + Sync + Send,
{
    let (acc, kept) = outer_sum_indexed(data, exec, |i| {
        let s = sign_unchecked(data.row(i), center);
        if s.iter().all(|v| *v == 0.0) {
            None
        } else {
            Some((weight(i), s))
        }
    });
    if kept == 0 {
        return Err(Error::DegenerateData("every row coincides with the center".into()));
    }
    if !acc.as_matrix().is_finite() {
        return Err(Error::NumericalFailure("non-finite weights in sign sum".into()));
    }
    Ok((acc, kept))
}

/// Right side of the (weighted) Tyler equation,
/// `(p / Σw) Σ w_i (x_i-μ)(x_i-μ)ᵀ / ((x_i-μ)ᵀ M⁻¹ (x_i-μ))`, with `w ≡ 1` when
/// `weights` is `None`. Rows equal to the center are skipped.
pub fn tyler_rhs(matrix: &SymMatrix, data: &Matrix, center: &[f64], weights: Option<&[f64]>, exec: Execution) -> Result<SymMatrix> {
    let p = data.ncols();
    if matrix.dim() != p || center.len() != p {
        return Err(Error::invalid("dimension mismatch in Tyler equation"));
    }
    if let Some(w) = weights {
        if w.len() != data.nrows() {
            return Err(Error::invalid("one weight per row required"));
        }
    }
    let chol = cholesky(matrix)?;
    let weight_of = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (acc, _) = outer_sum_indexed(data, exec, |i| {
        let d: Vec<f64> = data.row(i).iter().zip(center).map(|(a, b)| a - b).collect();
        if d.iter().all(|v| *v == 0.0) {
            return None;
        }
        let q = chol.inv_quad_form(&d);
        Some((weight_of(i) / q, d))
    });
    let wsum: f64 = (0..data.nrows())
        .filter(|&i| data.row(i).iter().zip(center).any(|(a, b)| a != b))
        .map(weight_of)
        .sum();
    if !(wsum > 1e-300) {
        return Err(Error::DegenerateData("all Tyler weights vanish".into()));
    }
    Ok(acc.scale(p as f64 / wsum))
}

fn normalize_trace(m: SymMatrix) -> SymMatrix {
    let p = m.dim() as f64;
    let t = m.trace();
    m.scale(p / t)
}

/// Fixed-point iteration from the identity with trace-p renormalization.
fn tyler_iterate(data: &Matrix, center: &[f64], weights: Option<&[f64]>, opts: &FitOptions) -> Result<(SymMatrix, usize, usize)> {
    let (n, p) = (data.nrows(), data.ncols());
    let dropped = (0..n).filter(|&i| data.row(i).iter().zip(center).all(|(a, b)| a == b)).count();
    if n - dropped <= p {
        return Err(Error::DegenerateData("too few rows away from the center".into()));
    }
    if let Some(w) = weights {
        let total: f64 = w.iter().sum();
        if !(total > 1e-12 * n as f64) {
            return Err(Error::DegenerateData("depth weights are all (near) zero".into()));
        }
    }
    let mut m = SymMatrix::identity(p);
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let next = normalize_trace(tyler_rhs(&m, data, center, weights, opts.exec).map_err(|e| match e {
            Error::NotPositiveDefinite { .. } => Error::DegenerateData("Tyler iterate became singular".into()),
            other => other,
        })?);
        change = next.as_matrix().sub(m.as_matrix()).frobenius() / m.as_matrix().frobenius();
        m = next;
        if change <= opts.tol {
            return Ok((m, it, dropped));
        }
    }
    Err(Error::ConvergenceFailure { iterations: opts.max_iter, last_change: change })
}

/// `‖RHS(M) − M‖_F` for a Tyler-type fit, `M = fit.matrix`, RHS evaluated on `data`.
pub fn tyler_residual(fit: &ScatterFit, data: &Matrix) -> Result<f64> {
    if !fit.kind.is_tyler() {
        return Err(Error::invalid(format!("{} is not a Tyler-type fit", fit.kind)));
    }
    let rhs = tyler_rhs(&fit.matrix, data, &fit.center, fit.weights.as_deref(), Execution::Sequential)?;
    Ok(rhs.as_matrix().sub(fit.matrix.as_matrix()).frobenius())
}

/// Monte-Carlo diagonal of the population DCM in the eigenbasis of `Σ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaDs {
    /// Ordered like the eigenvalues of `Σ` (descending).
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeEigenvalues {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Panel of squared standardized coordinates and `htped²(|z|)`.
///
/// Every draw is used with all `p` cyclic shifts of its coordinates, which
/// leaves `|z|` unchanged and makes the estimates exactly exchangeable
/// across coordinates when the eigenvalues are.
struct RadialPanel {
    p: usize,
    z2: Vec<f64>,
    h2: Vec<f64>,
}

impl RadialPanel {
    /// `depth = None` uses `htped ≡ 1` (the SCM).
    fn new(family: Family, depth: Option<DepthKind>, p: usize, mc_n: usize, seed: u64, exec: Execution) -> Result<Self> {
        if mc_n < MIN_MC_N {
            return Err(Error::invalid(format!("mc_n must be at least {MIN_MC_N}")));
        }
        let radial = depth.map(|d| RadialDepth::new(d, family)).transpose()?;
        let panel = StandardPanel::draw(family, p, mc_n, seed, exec)?;
        let z2: Vec<f64> = panel.draws().as_slice().iter().map(|v| v * v).collect();
        let h2 = exec.map(mc_n, |k| {
            let r = z2[k * p..(k + 1) * p].iter().sum::<f64>().sqrt();
            let h = radial.as_ref().map_or(1.0, |rd| rd.htped(r));
            h * h
        });
        Ok(RadialPanel { p, z2, h2 })
    }

    /// Per-draw shift-averaged `h² z_i² / Σ_j λ_j z_j²` for all `i`.
    fn unit(&self, k: usize, lambda: &[f64], out: &mut [f64]) {
        let p = self.p;
        let z2 = &self.z2[k * p..(k + 1) * p];
        out.iter_mut().for_each(|o| *o = 0.0);
        for s in 0..p {
            let q: f64 = (0..p).map(|j| lambda[j] * z2[(j + s) % p]).sum();
            for i in 0..p {
                out[i] += z2[(i + s) % p] / q;
            }
        }
        let c = self.h2[k] / p as f64;
        out.iter_mut().for_each(|o| *o *= c);
    }

    /// Means and standard errors of [`RadialPanel::unit`] over the panel.
    fn moments(&self, lambda: &[f64], exec: Execution) -> (Vec<f64>, Vec<f64>) {
        let p = self.p;
        let n = self.h2.len();
        let chunks = n.div_ceil(4096);
        let partials = exec.map(chunks, |c| {
            let mut s1 = vec![0.0; p];
            let mut s2 = vec![0.0; p];
            let mut u = vec![0.0; p];
            for k in c * 4096..((c + 1) * 4096).min(n) {
                self.unit(k, lambda, &mut u);
                for i in 0..p {
                    s1[i] += u[i];
                    s2[i] += u[i] * u[i];
                }
            }
            (s1, s2)
        });
        let mut s1 = vec![0.0; p];
        let mut s2 = vec![0.0; p];
        for (a, b) in partials {
            for i in 0..p {
                s1[i] += a[i];
                s2[i] += b[i];
            }
        }
        let nf = n as f64;
        let mean: Vec<f64> = s1.iter().map(|s| s / nf).collect();
        let se = s2
            .iter()
            .zip(&mean)
            .map(|(s, m)| ((s / nf - m * m).max(0.0) / (nf - 1.0)).sqrt())
            .collect();
        (mean, se)
    }
}

/// `λ_{D,S,i} = E[htped²(|z|) λ_i z_i² / Σ_j λ_j z_j²]` by Monte Carlo, with `z`
/// from the standardized law of the model's family.
pub fn lambda_ds_population(model: &EllipticalModel, depth: DepthKind, mc_n: usize, seed: u64) -> Result<LambdaDs> {
    lambda_ds_with(model, depth, mc_n, seed, Execution::Parallel)
}

pub fn lambda_ds_with(model: &EllipticalModel, depth: DepthKind, mc_n: usize, seed: u64, exec: Execution) -> Result<LambdaDs> {
    let lambda = model.spectral()?.eigenvalues;
    lambda_ds_for_eigenvalues(&lambda, model.family, Some(depth), mc_n, seed, exec)
}

pub(crate) fn lambda_ds_for_eigenvalues(lambda: &[f64], family: Family, depth: Option<DepthKind>, mc_n: usize, seed: u64, exec: Execution) -> Result<LambdaDs> {
    let panel = RadialPanel::new(family, depth, lambda.len(), mc_n, seed, exec)?;
    let (mean, se) = panel.moments(lambda, exec);
    Ok(LambdaDs {
        values: mean.iter().zip(lambda).map(|(m, l)| m * l).collect(),
        std_errors: se.iter().zip(lambda).map(|(s, l)| s * l).collect(),
    })
}

/// Options for [`recover_shape`].
#[derive(Clone, Debug)]
pub struct ShapeOptions {
    pub mc_n: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for ShapeOptions {
    fn default() -> Self {
        ShapeOptions { mc_n: 100_000, tol: 1e-8, max_iter: 500, seed: 0, exec: Execution::Parallel }
    }
}

/// Standardized shape eigenvalues `Λ*` from DCM eigenvalues `λ_{D,S}`.
///
/// Iterates `Λ_{k+1,i} = λ_{D,S,i} / E[htped² z_i² / zᵀΛ_k z]` over one fixed
/// panel and rescales each iterate to unit determinant. Starts from the
/// standardized `λ_{D,S}`; stops when the largest relative change is at most
/// `tol`. Non-convergence is reported through `converged = false`.
pub fn recover_shape(lambda_ds: &[f64], family: Family, depth: DepthKind, opts: &ShapeOptions) -> Result<ShapeEigenvalues> {
    let p = lambda_ds.len();
    if p == 0 {
        return Err(Error::invalid("no eigenvalues given"));
    }
    if lambda_ds.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid("DCM eigenvalues must be positive"));
    }
    if lambda_ds.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::invalid("DCM eigenvalues must be in descending order"));
    }
    let panel = RadialPanel::new(family, Some(depth), p, opts.mc_n, opts.seed, opts.exec)?;
    let mut current = det_standardize(lambda_ds.to_vec());
    for it in 1..=opts.max_iter {
        let (e, _) = panel.moments(&current, opts.exec);
        let next = det_standardize(lambda_ds.iter().zip(&e).map(|(l, m)| l / m).collect());
        let change = next
            .iter()
            .zip(&current)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        current = next;
        if change <= opts.tol {
            return Ok(ShapeEigenvalues { values: current, iterations: it, converged: true });
        }
    }
    Ok(ShapeEigenvalues { values: current, iterations: opts.max_iter, converged: false })
}

fn det_standardize(v: Vec<f64>) -> Vec<f64> {
    let g = (v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64).exp();
    v.into_iter().map(|x| x / g).collect()
}
