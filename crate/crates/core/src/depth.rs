//! Halfspace, Mahalanobis and projection depth, and the htped transform.
//!
//! A [`DepthModel`] is either fitted to a sample (depth with respect to the
//! empirical distribution) or built from an [`EllipticalModel`] (population
//! depth, evaluated in closed form through the Mahalanobis distance).
//!
//! Htped is fixed to `max_depth - depth`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::model::{EllipticalModel, Family};
use crate::numkernel::{cholesky, dot, std_normal_cdf, std_normal_quantile, student_t_quantile, Cholesky, Matrix, SymMatrix};
use crate::ranks::spatial_median;
use crate::stats::median_mad_in_place;
use crate::{Error, Execution, Result};

/// Random directions used by sample projection depth and by sample halfspace
/// depth in three or more dimensions.
pub const DEFAULT_PROJECTIONS: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthKind {
    Halfspace,
    Mahalanobis,
    Projection,
}

impl DepthKind {
    pub const ALL: [DepthKind; 3] = [DepthKind::Halfspace, DepthKind::Mahalanobis, DepthKind::Projection];

    /// Supremum of the depth over points and distributions.
    pub fn max_depth(self) -> f64 {
        match self {
            DepthKind::Halfspace => 0.5,
            DepthKind::Mahalanobis | DepthKind::Projection => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DepthKind::Halfspace => "halfspace",
            DepthKind::Mahalanobis => "mahalanobis",
            DepthKind::Projection => "projection",
        }
    }
}

impl std::str::FromStr for DepthKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "halfspace" | "hd" | "hsd" | "tukey" => Ok(DepthKind::Halfspace),
            "mahalanobis" | "mhd" => Ok(DepthKind::Mahalanobis),
            "projection" | "pd" => Ok(DepthKind::Projection),
            other => Err(Error::invalid(format!("unknown depth kind '{other}'"))),
        }
    }
}

/// Population depth of an elliptical family as a function of the Mahalanobis
/// distance `d` (with respect to the covariance).
///
/// - Mahalanobis: `1 / (1 + d²)`.
/// - Halfspace: `G(-d)`, `G` the CDF of a unit-variance marginal of the family.
/// - Projection (median/MAD): `1 / (1 + d/q)`, `q` the unnormalized MAD of that marginal.
#[derive(Clone, Debug)]
pub struct RadialDepth {
    kind: DepthKind,
    marginal: Marginal,
    mad: f64,
}

#[derive(Clone, Debug)]
enum Marginal {
    Normal,
    /// Student t with `scale = sqrt(ν/(ν-2))` mapping unit-variance values to the standard t.
    StudentT { dist: StudentsT, scale: f64 },
}

impl RadialDepth {
    pub fn new(kind: DepthKind, family: Family) -> Result<Self> {
        family.validate()?;
        let (marginal, mad) = match family {
            Family::Normal => (Marginal::Normal, std_normal_quantile(0.75)?),
            Family::StudentT { df } => {
                let nu = df as f64;
                let scale = (nu / (nu - 2.0)).sqrt();
                let dist = StudentsT::new(0.0, 1.0, nu).map_err(|e| Error::invalid(e.to_string()))?;
                (Marginal::StudentT { dist, scale }, student_t_quantile(0.75, nu)? / scale)
            }
        };
        Ok(RadialDepth { kind, marginal, mad })
    }

    pub fn kind(&self) -> DepthKind {
        self.kind
    }

    /// MAD of the unit-variance marginal (the projection-depth scale).
    pub fn marginal_mad(&self) -> f64 {
        self.mad
    }

    pub fn depth(&self, d: f64) -> f64 {
        match self.kind {
            DepthKind::Mahalanobis => 1.0 / (1.0 + d * d),
            DepthKind::Projection => 1.0 / (1.0 + d / self.mad),
            DepthKind::Halfspace => match &self.marginal {
                Marginal::Normal => std_normal_cdf(-d),
                Marginal::StudentT { dist, scale } => dist.cdf(-d * scale),
            },
        }
    }

    pub fn htped(&self, d: f64) -> f64 {
        (self.kind.max_depth() - self.depth(d)).max(0.0)
    }
}

#[derive(Clone, Debug)]
struct ProjectionAxis {
    direction: Vec<f64>,
    median: f64,
    mad: f64,
}

#[derive(Clone, Debug)]
enum Source {
    SampleHalfspace { data: Matrix, directions: Vec<Vec<f64>> },
    SampleMahalanobis { mean: Vec<f64>, chol: Cholesky },
    SampleProjection { axes: Vec<ProjectionAxis> },
    Population { model: EllipticalModel, chol: Cholesky, radial: RadialDepth },
}

/// A fitted depth evaluator.
#[derive(Clone, Debug)]
pub struct DepthModel {
    kind: DepthKind,
    source: Source,
    dim: usize,
    n_projections: usize,
    seed: u64,
}

/// Fits a sample depth with the default direction budget.
pub fn fit_depth(kind: DepthKind, data: &Matrix, seed: u64) -> Result<DepthModel> {
    DepthModel::fit(kind, data, seed, DEFAULT_PROJECTIONS)
}

impl DepthModel {
    /// Depth with respect to the empirical distribution of `data`.
    ///
    /// Mahalanobis uses the sample mean and covariance as plug-ins. Projection
    /// depth uses median/MAD along `n_projections` seeded random directions,
    /// the `2p` signed coordinate axes and the directions from the spatial
    /// median to every observation. Halfspace depth is exact for `p <= 2` and
    /// minimised over that same direction set otherwise.
    pub fn fit(kind: DepthKind, data: &Matrix, seed: u64, n_projections: usize) -> Result<Self> {
        let (n, p) = (data.nrows(), data.ncols());
        if n == 0 || p == 0 {
            return Err(Error::invalid("depth needs a non-empty data set"));
        }
        if !data.is_finite() {
            return Err(Error::invalid("data contains non-finite values"));
        }
        let source = match kind {
            DepthKind::Mahalanobis => {
                if n <= p {
                    return Err(Error::DegenerateData(format!(
                        "Mahalanobis depth needs n > p, got n={n}, p={p}"
                    )));
                }
                let mean = data.column_means();
                let cov = sample_covariance(data, &mean);
                let chol = cholesky(&cov).map_err(|_| {
                    Error::DegenerateData("sample covariance is singular".into())
                })?;
                Source::SampleMahalanobis { mean, chol }
            }
            DepthKind::Halfspace => {
                let directions = if p >= 3 { direction_set(data, seed, n_projections)? } else { Vec::new() };
                Source::SampleHalfspace { data: data.clone(), directions }
            }
            DepthKind::Projection => {
                let directions = direction_set(data, seed, n_projections)?;
                let mut buf = vec![0.0; n];
                let axes = directions
                    .into_iter()
                    .map(|u| {
                        for (b, r) in buf.iter_mut().zip(data.rows_iter()) {
                            *b = dot(r, &u);
                        }
                        let (median, mad) = median_mad_in_place(&mut buf);
                        ProjectionAxis { direction: u, median, mad }
                    })
                    .collect();
                Source::SampleProjection { axes }
            }
        };
        Ok(DepthModel { kind, source, dim: p, n_projections, seed })
    }

    /// Closed-form depth of an elliptical population.
    pub fn population(kind: DepthKind, model: &EllipticalModel) -> Result<Self> {
        let radial = RadialDepth::new(kind, model.family)?;
        Ok(DepthModel {
            kind,
            source: Source::Population { model: model.clone(), chol: model.cholesky(), radial },
            dim: model.dim(),
            n_projections: 0,
            seed: 0,
        })
    }

    pub fn kind(&self) -> DepthKind {
        self.kind
    }

    pub fn max_depth(&self) -> f64 {
        self.kind.max_depth()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_projections(&self) -> usize {
        self.n_projections
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_population(&self) -> bool {
        matches!(self.source, Source::Population { .. })
    }

    /// The center of a population model.
    pub fn population_center(&self) -> Option<&[f64]> {
        match &self.source {
            Source::Population { model, .. } => Some(&model.mu),
            _ => None,
        }
    }

    pub fn depth_at(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "point has dimension {}, depth model {}",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("point has non-finite coordinates"));
        }
        Ok(match &self.source {
            Source::Population { model, chol, radial } => radial.depth(model.mahalanobis(chol, x)),
            Source::SampleMahalanobis { mean, chol } => {
                let diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
                1.0 / (1.0 + chol.inv_quad_form(&diff))
            }
            Source::SampleProjection { axes } => {
                let o = axes.iter().fold(0.0f64, |acc, ax| {
                    let num = (dot(x, &ax.direction) - ax.median).abs();
                    let ratio = if ax.mad > 0.0 {
                        num / ax.mad
                    } else if num == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    };
                    acc.max(ratio)
                });
                if o.is_infinite() { 0.0 } else { 1.0 / (1.0 + o) }
            }
            Source::SampleHalfspace { data, directions } => {
                let count = match self.dim {
                    1 => halfspace_count_1d(data, x[0]),
                    2 => halfspace_count_2d(data, x),
                    _ => halfspace_count_directions(data, directions, x),
                };
                count as f64 / data.nrows() as f64
            }
        })
    }

    /// `max_depth - depth_at(x)`, floored at zero. (Sample halfspace depth of
    /// the deepest point of an odd-sized sample can exceed 1/2 by `1/(2n)`.)
    pub fn htped_at(&self, x: &[f64]) -> Result<f64> {
        Ok((self.max_depth() - self.depth_at(x)?).max(0.0))
    }

    /// Depth of every row of `data`.
    pub fn depths(&self, data: &Matrix, exec: Execution) -> Result<Vec<f64>> {
        exec.try_map(data.nrows(), |i| self.depth_at(data.row(i)))
    }

    /// Htped of every row of `data`.
    pub fn htpeds(&self, data: &Matrix, exec: Execution) -> Result<Vec<f64>> {
        let max = self.max_depth();
        Ok(self.depths(data, exec)?.into_iter().map(|d| (max - d).max(0.0)).collect())
    }
}

/// Unbiased sample covariance around `mean`.
pub(crate) fn sample_covariance(data: &Matrix, mean: &[f64]) -> SymMatrix {
    let (n, p) = (data.nrows(), data.ncols());
    let mut acc = Matrix::zeros(p, p);
    let mut diff = vec![0.0; p];
    for r in data.rows_iter() {
        for (d, (x, m)) in diff.iter_mut().zip(r.iter().zip(mean)) {
            *d = x - m;
        }
        for i in 0..p {
            for j in i..p {
                acc[(i, j)] += diff[i] * diff[j];
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    SymMatrix::from_upper(acc.scale(1.0 / denom))
}

fn direction_set(data: &Matrix, seed: u64, n_random: usize) -> Result<Vec<Vec<f64>>> {
    let p = data.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs = Vec::with_capacity(n_random + 2 * p + data.nrows());
    while dirs.len() < n_random {
        let v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        if let Some(u) = normalized(v) {
            dirs.push(u);
        }
    }
    for i in 0..p {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; p];
            e[i] = s;
            dirs.push(e);
        }
    }
    let center = spatial_median(data, 1e-10, 500)?.value;
    for r in data.rows_iter() {
        let v: Vec<f64> = r.iter().zip(&center).map(|(a, b)| a - b).collect();
        if let Some(u) = normalized(v) {
            dirs.push(u);
        }
    }
    Ok(dirs)
}

fn normalized(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = dot(&v, &v).sqrt();
    if n > 1e-300 && n.is_finite() {
        v.iter_mut().for_each(|x| *x /= n);
        Some(v)
    } else {
        None
    }
}

fn halfspace_count_1d(data: &Matrix, x: f64) -> usize {
    let (mut ge, mut le) = (0, 0);
    for r in data.rows_iter() {
        if r[0] >= x {
            ge += 1;
        }
        if r[0] <= x {
            le += 1;
        }
    }
    ge.min(le)
}

fn halfspace_count_directions(data: &Matrix, directions: &[Vec<f64>], x: &[f64]) -> usize {
    directions
        .iter()
        .map(|u| {
            let t = dot(u, x);
            data.rows_iter().filter(|r| dot(r, u) >= t).count()
        })
        .min()
        .unwrap_or(data.nrows())
}

/// Exact minimum number of observations in a closed halfplane whose boundary
/// passes through `x`, by an angular sweep (O(n log n)).
///
/// Observations equal to `x` lie in every such halfplane. For the rest, a
/// generic direction sees the points whose angle lies in an open half-circle;
/// the count only changes where the half-circle boundary crosses a point angle,
/// so it suffices to test one start angle between consecutive critical values.
fn halfspace_count_2d(data: &Matrix, x: &[f64]) -> usize {
    use std::f64::consts::PI;
    let mut coincident = 0;
    let mut angles = Vec::with_capacity(data.nrows());
    for r in data.rows_iter() {
        let (dx, dy) = (r[0] - x[0], r[1] - x[1]);
        if dx == 0.0 && dy == 0.0 {
            coincident += 1;
        } else {
            let a = dy.atan2(dx);
            // atan2 returns (-π, π]; fold π onto -π so every angle is unique mod 2π
            angles.push(if a >= PI { a - 2.0 * PI } else { a });
        }
    }
    if angles.is_empty() {
        return coincident;
    }
    angles.sort_by(f64::total_cmp);
    let m = angles.len();
    let mut extended = Vec::with_capacity(2 * m);
    extended.extend_from_slice(&angles);
    extended.extend(angles.iter().map(|a| a + 2.0 * PI));

    // Critical angles carry the direction that produced them. Directions that are
    // exactly parallel define the same critical line even when atan2 rounds them
    // an ulp apart, so they are merged by an exact cross-product test instead of
    // by angle equality.
    let mut critical: Vec<(f64, [f64; 2])> = Vec::with_capacity(2 * m);
    for r in data.rows_iter() {
        let (dx, dy) = (r[0] - x[0], r[1] - x[1]);
        if dx == 0.0 && dy == 0.0 {
            continue;
        }
        let a = dy.atan2(dx);
        let a = if a >= PI { a - 2.0 * PI } else { a };
        critical.push((a, [dx, dy]));
        critical.push((if a >= 0.0 { a - PI } else { a + PI }, [-dx, -dy]));
    }
    critical.sort_by(|p, q| p.0.total_cmp(&q.0));
    let same_ray = |u: [f64; 2], v: [f64; 2]| u[0] * v[1] - u[1] * v[0] == 0.0 && u[0] * v[0] + u[1] * v[1] > 0.0;
    let mut merged: Vec<(f64, [f64; 2])> = Vec::with_capacity(critical.len());
    for c in critical {
        match merged.last() {
            Some(&(_, d)) if same_ray(d, c.1) => {}
            _ => merged.push(c),
        }
    }
    if merged.len() > 1 && same_ray(merged[0].1, merged[merged.len() - 1].1) {
        merged.pop();
    }
    let critical: Vec<f64> = merged.into_iter().map(|c| c.0).collect();

    let count_open = |s: f64| {
        let lo = extended.partition_point(|&b| b <= s);
        let hi = extended.partition_point(|&b| b < s + PI);
        hi - lo
    };
    let k = critical.len();
    let mut best = usize::MAX;
    for i in 0..k {
        let next = if i + 1 < k { critical[i + 1] } else { critical[0] + 2.0 * PI };
        let mut s = 0.5 * (critical[i] + next);
        if s >= PI {
            s -= 2.0 * PI;
        }
        best = best.min(count_open(s));
    }
    best + coincident
}
