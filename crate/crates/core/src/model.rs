//! Elliptical generative models.
//!
//! `sigma` is always the covariance matrix. For Student-t families the scale
//! matrix is `((ν-2)/ν)·Σ`, so every family with the same `Σ` has the same
//! second moments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::numkernel::{cholesky, eigh, Cholesky, Matrix, SpectralDecomp, SymMatrix};
use crate::{substream_seed, Error, Execution, Result};

/// Spherical generator family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Normal,
    StudentT { df: u32 },
}

impl Family {
    pub fn validate(self) -> Result<()> {
        match self {
            Family::StudentT { df } if df < 3 => Err(Error::invalid(format!(
                "student t needs df >= 3 for a finite covariance, got {df}"
            ))),
            _ => Ok(()),
        }
    }

    /// `E‖z‖⁴ / (p(p+2))` for the standardized law, i.e. `1 + κ` with κ the
    /// elliptical kurtosis parameter. Requires finite fourth moments.
    pub fn kurtosis_factor(self) -> Result<f64> {
        match self {
            Family::Normal => Ok(1.0),
            Family::StudentT { df } if df > 4 => Ok((df as f64 - 2.0) / (df as f64 - 4.0)),
            Family::StudentT { df } => Err(Error::invalid(format!(
                "student t with df={df} has no finite fourth moment"
            ))),
        }
    }

    pub fn label(self) -> String {
        match self {
            Family::Normal => "normal".into(),
            Family::StudentT { df } => format!("t{df}"),
        }
    }

    pub fn df(self) -> Option<u32> {
        match self {
            Family::Normal => None,
            Family::StudentT { df } => Some(df),
        }
    }
}

/// Elliptical distribution with center `mu` and covariance `sigma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticalModel {
    pub family: Family,
    pub mu: Vec<f64>,
    pub sigma: SymMatrix,
}

impl EllipticalModel {
    pub fn new(family: Family, mu: Vec<f64>, sigma: SymMatrix) -> Result<Self> {
        family.validate()?;
        if mu.len() != sigma.dim() {
            return Err(Error::invalid(format!(
                "center has dimension {}, covariance {}",
                mu.len(),
                sigma.dim()
            )));
        }
        if mu.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("center has non-finite entries"));
        }
        cholesky(&sigma)?;
        Ok(EllipticalModel { family, mu, sigma })
    }

    /// Centered model with diagonal covariance.
    pub fn diagonal(family: Family, variances: &[f64]) -> Result<Self> {
        Self::new(family, vec![0.0; variances.len()], SymMatrix::from_diag(variances))
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn cholesky(&self) -> Cholesky {
        cholesky(&self.sigma).expect("validated at construction")
    }

    pub fn spectral(&self) -> Result<SpectralDecomp> {
        eigh(&self.sigma)
    }

    /// Mahalanobis distance `d_Σ(x, μ)`.
    pub fn mahalanobis(&self, chol: &Cholesky, x: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(&self.mu).map(|(a, b)| a - b).collect();
        chol.inv_quad_form(&diff).sqrt()
    }

    /// Draws `n` observations `μ + L·z`, `L = chol(Σ)`, z from the standardized law.
    pub fn sample(&self, n: usize, seed: u64) -> Matrix {
        let chol = self.cholesky();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = self.dim();
        let mut out = Matrix::zeros(n, p);
        let mut z = vec![0.0; p];
        for i in 0..n {
            draw_standardized(self.family, &mut rng, &mut z);
            let x = chol.mul_lower(&z);
            for (o, (xi, m)) in out.row_mut(i).iter_mut().zip(x.iter().zip(&self.mu)) {
                *o = xi + m;
            }
        }
        out
    }
}

pub(crate) fn draw_standardized(family: Family, rng: &mut ChaCha8Rng, z: &mut [f64]) {
    for zi in z.iter_mut() {
        *zi = StandardNormal.sample(rng);
    }
    if let Family::StudentT { df } = family {
        let nu = df as f64;
        let w: f64 = ChiSquared::new(nu).expect("df >= 3").sample(rng);
        let scale = ((nu - 2.0) / w).sqrt();
        z.iter_mut().for_each(|zi| *zi *= scale);
    }
}

const PANEL_BATCH: usize = 4096;

/// Fixed set of draws from the standardized spherical law (zero mean,
/// identity covariance) used for Monte-Carlo expectations.
///
/// Draws are generated in batches of 4096, each from its own substream of the
/// seed, so the panel is identical under parallel and sequential execution.
#[derive(Clone, Debug)]
pub struct StandardPanel {
    pub family: Family,
    draws: Matrix,
}

impl StandardPanel {
    pub fn draw(family: Family, p: usize, n: usize, seed: u64, exec: Execution) -> Result<Self> {
        family.validate()?;
        if p == 0 || n == 0 {
            return Err(Error::invalid("panel needs p >= 1 and n >= 1"));
        }
        let batches = n.div_ceil(PANEL_BATCH);
        let chunks = exec.map(batches, |b| {
            let len = PANEL_BATCH.min(n - b * PANEL_BATCH);
            let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, b as u64));
            let mut buf = vec![0.0; len * p];
            for z in buf.chunks_exact_mut(p) {
                draw_standardized(family, &mut rng, z);
            }
            buf
        });
        let data = chunks.concat();
        Ok(StandardPanel { family, draws: Matrix::from_vec(n, p, data)? })
    }

    pub fn len(&self) -> usize {
        self.draws.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.draws.ncols()
    }

    pub fn draws(&self) -> &Matrix {
        &self.draws
    }
}
