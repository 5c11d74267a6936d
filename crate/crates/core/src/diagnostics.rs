//! PCA projection diagnostics: score distances, orthogonal distances,
//! outlier cutoffs and unexplained variance.

use serde::{Deserialize, Serialize};

use crate::numkernel::{chi2_quantile, dot, std_normal_quantile, Matrix};
use crate::scatter::{EstimatorKind, ScatterFit};
use crate::stats::{median_mad_in_place, quantile_type7};
use crate::{Error, Result};

/// Variances used to standardize scores in the score distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreScale {
    /// Eigenvalues of the fitted scatter matrix.
    FitEigenvalues,
    /// Squared normalized MAD of each score column, `(MAD/Φ⁻¹(3/4))²`.
    RobustScores,
    /// `FitEigenvalues` for the sample covariance, `RobustScores` otherwise
    /// (SCM, DCM and Tyler eigenvalues are not on the scale of the data).
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// `p × k`, orthonormal columns.
    pub loading: Matrix,
    pub eigvals: Vec<f64>,
    pub center: Vec<f64>,
    pub k: usize,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `Pᵀ (x - center)`.
    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.loading.tmatvec(&d)
    }

    pub fn scores(&self, data: &Matrix) -> Matrix {
        data.map_rows(|x| self.score(x))
    }
}

/// Top-`k` loading of `fit` and the scores of `data`.
pub fn project(fit: &ScatterFit, data: &Matrix, k: usize, scale: ScoreScale) -> Result<(PcaModel, Matrix)> {
    let p = fit.dim();
    if k == 0 || k > p {
        return Err(Error::invalid(format!("k must be in 1..={p}, got {k}")));
    }
    if data.ncols() != p {
        return Err(Error::invalid("data dimension does not match the fit"));
    }
    let ev = &fit.decomp.eigenvalues;
    if !(ev[k - 1] > 0.0) {
        return Err(Error::DegenerateModel(format!("eigenvalue {k} is not positive ({:e})", ev[k - 1])));
    }
    let mut loading = Matrix::zeros(p, k);
    for j in 0..k {
        for i in 0..p {
            loading[(i, j)] = fit.decomp.eigenvectors[(i, j)];
        }
    }
    let mut model = PcaModel { loading, eigvals: ev[..k].to_vec(), center: fit.center.clone(), k };
    let scores = model.scores(data);
    let robust = match scale {
        ScoreScale::FitEigenvalues => false,
        ScoreScale::RobustScores => true,
        ScoreScale::Auto => fit.kind != EstimatorKind::SampleCov,
    };
    if robust {
        let q = std_normal_quantile(0.75)?;
        for j in 0..k {
            let (_, mad) = median_mad_in_place(&mut scores.column(j));
            if !(mad > 0.0) {
                return Err(Error::DegenerateModel(format!("score {} has zero MAD", j + 1)));
            }
            model.eigvals[j] = (mad / q).powi(2);
        }
    }
    Ok((model, scores))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierFlag {
    Regular,
    ScoreOutlier,
    OrthogonalOutlier,
    BothOutlier,
}

impl OutlierFlag {
    pub fn classify(sd: f64, od: f64, sd_cut: f64, od_cut: f64) -> Self {
        match (sd > sd_cut, od > od_cut) {
            (false, false) => OutlierFlag::Regular,
            (true, false) => OutlierFlag::ScoreOutlier,
            (false, true) => OutlierFlag::OrthogonalOutlier,
            (true, true) => OutlierFlag::BothOutlier,
        }
    }

    pub fn is_outlier(self) -> bool {
        self != OutlierFlag::Regular
    }

    pub fn label(self) -> &'static str {
        match self {
            OutlierFlag::Regular => "regular",
            OutlierFlag::ScoreOutlier => "score_outlier",
            OutlierFlag::OrthogonalOutlier => "orthogonal_outlier",
            OutlierFlag::BothOutlier => "both_outlier",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub index: usize,
    pub score: Vec<f64>,
    pub sd: f64,
    pub od: f64,
    pub flag: OutlierFlag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoffs {
    pub sd_cut: f64,
    pub od_cut: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub k: usize,
    pub observations: Vec<Observation>,
    pub sd_cut: f64,
    pub od_cut: f64,
    pub warnings: Vec<String>,
}

/// Score distances `sqrt(Σ_j s_ij²/λ_j)` and orthogonal distances
/// `|(x_i - center) - P s_i|`, the latter set to zero when below rounding
/// relative to `|x_i - center|`.
pub fn distances(model: &PcaModel, scores: &Matrix, data: &Matrix) -> Result<Vec<(f64, f64)>> {
    let (n, p, k) = (data.nrows(), model.dim(), model.k);
    if data.ncols() != p || scores.nrows() != n || scores.ncols() != k {
        return Err(Error::invalid("scores, data and model are inconsistent"));
    }
    Ok((0..n)
        .map(|i| {
            let s = scores.row(i);
            let sd = s.iter().zip(&model.eigvals).map(|(v, l)| v * v / l).sum::<f64>().sqrt();
            let d: Vec<f64> = data.row(i).iter().zip(&model.center).map(|(a, b)| a - b).collect();
            let fitted = model.loading.matvec(s);
            let r: Vec<f64> = d.iter().zip(&fitted).map(|(a, b)| a - b).collect();
            let od = dot(&r, &r).sqrt();
            let od = if od <= 1e-12 * dot(&d, &d).sqrt() { 0.0 } else { od };
            (sd, od)
        })
        .collect())
}

/// `sd_cut = sqrt(χ²_{k,0.975})`,
/// `od_cut = [med(OD^{2/3}) + MAD(OD^{2/3}) Φ⁻¹(0.975)]^{3/2}` (MAD unnormalized).
pub fn cutoffs(od: &[f64], k: usize) -> Result<Cutoffs> {
    if od.len() < 2 {
        return Err(Error::invalid("cutoffs need at least two observations"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let sd_cut = chi2_quantile(0.975, k as u32)?.sqrt();
    let mut t: Vec<f64> = od.iter().map(|v| v.powf(2.0 / 3.0)).collect();
    let (med, mad) = median_mad_in_place(&mut t);
    let mut warnings = Vec::new();
    if mad == 0.0 {
        warnings.push("orthogonal distances have zero MAD; od cutoff is the median".to_string());
    }
    let od_cut = (med + mad * std_normal_quantile(0.975)?).powf(1.5);
    Ok(Cutoffs { sd_cut, od_cut, warnings })
}

/// Distances, cutoffs and flags for every row of `data`.
pub fn diagnose(model: &PcaModel, scores: &Matrix, data: &Matrix) -> Result<DiagnosticsReport> {
    let dist = distances(model, scores, data)?;
    let od: Vec<f64> = dist.iter().map(|d| d.1).collect();
    let c = cutoffs(&od, model.k)?;
    let observations = dist
        .iter()
        .enumerate()
        .map(|(i, &(sd, od))| Observation {
            index: i,
            score: scores.row(i).to_vec(),
            sd,
            od,
            flag: OutlierFlag::classify(sd, od, c.sd_cut, c.od_cut),
        })
        .collect();
    Ok(DiagnosticsReport { k: model.k, observations, sd_cut: c.sd_cut, od_cut: c.od_cut, warnings: c.warnings })
}

impl DiagnosticsReport {
    pub fn flagged(&self) -> Vec<usize> {
        self.observations.iter().filter(|o| o.flag.is_outlier()).map(|o| o.index).collect()
    }

    /// One row per observation: `index, score_1..score_k, sd, od, flag`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index");
        for j in 1..=self.k {
            s.push_str(&format!(",score_{j}"));
        }
        s.push_str(",sd,od,flag\n");
        for o in &self.observations {
            s.push_str(&o.index.to_string());
            for v in &o.score {
                s.push_str(&format!(",{v:.16e}"));
            }
            s.push_str(&format!(",{:.16e},{:.16e},{}\n", o.sd, o.od, o.flag.label()));
        }
        s
    }
}

/// Share of total variance not captured by the top `q` eigenvalues.
pub fn unexplained_variance(fit: &ScatterFit, q: usize) -> Result<f64> {
    let ev = &fit.decomp.eigenvalues;
    if q == 0 || q > ev.len() {
        return Err(Error::invalid(format!("q must be in 1..={}", ev.len())));
    }
    let clamp = |v: &f64| v.max(0.0);
    let total: f64 = ev.iter().map(clamp).sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateModel("scatter matrix has zero trace".into()));
    }
    let head: f64 = ev[..q].iter().map(clamp).sum();
    Ok((1.0 - head / total).max(0.0))
}

/// Type-7 quantiles of the squared orthogonal distances.
pub fn od_squared_quantiles(model: &PcaModel, data: &Matrix, probs: &[f64]) -> Result<Vec<f64>> {
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("quantile probabilities must lie in [0, 1]"));
    }
    let scores = model.scores(data);
    let od2: Vec<f64> = distances(model, &scores, data)?.into_iter().map(|(_, od)| od * od).collect();
    Ok(probs.iter().map(|&p| quantile_type7(&od2, p)).collect())
}

/// Quantiles of the squared distance from the hyperplane of the top `k` components.
pub fn squared_distance_quantiles(fit: &ScatterFit, data: &Matrix, k: usize, probs: &[f64]) -> Result<Vec<f64>> {
    let (model, _) = project(fit, data, k, ScoreScale::FitEigenvalues)?;
    od_squared_quantiles(&model, data, probs)
}
