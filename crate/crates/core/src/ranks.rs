//! Spatial signs, depth-based multivariate ranks and the spatial median.

use serde::{Deserialize, Serialize};

use crate::depth::DepthModel;
use crate::numkernel::{norm, Matrix};
use crate::stats::median_in_place;
use crate::{Error, Execution, Result};

pub const SPATIAL_MEDIAN_TOL: f64 = 1e-10;
pub const SPATIAL_MEDIAN_MAX_ITER: usize = 500;

/// Distance below which a Weiszfeld iterate is treated as sitting on a data point.
const ANCHOR_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankVector {
    pub value: Vec<f64>,
    pub source_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationEstimate {
    pub value: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `(x - mu) / |x - mu|`, or the zero vector when `x == mu`.
pub fn spatial_sign(x: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
    if x.len() != mu.len() {
        return Err(Error::invalid(format!("sign of a {}-vector around a {}-vector", x.len(), mu.len())));
    }
    if x.iter().chain(mu).any(|v| !v.is_finite()) {
        return Err(Error::invalid("spatial sign of non-finite input"));
    }
    Ok(sign_unchecked(x, mu))
}

pub(crate) fn sign_unchecked(x: &[f64], mu: &[f64]) -> Vec<f64> {
    let mut d: Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
    // pre-scale by the largest coordinate so tiny and huge differences do not under/overflow
    let m = d.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if m == 0.0 || !m.is_finite() {
        d.iter_mut().for_each(|v| *v = 0.0);
        return d;
    }
    d.iter_mut().for_each(|v| *v /= m);
    let r = norm(&d);
    d.iter_mut().for_each(|v| *v /= r);
    d
}

/// Multivariate ranks `htped(x_i) * S(x_i - mu)` of every row.
pub fn rank_transform(model: &DepthModel, mu: &[f64], data: &Matrix, exec: Execution) -> Result<Vec<RankVector>> {
    check_dims(model, mu, data)?;
    exec.try_map(data.nrows(), |i| {
        let x = data.row(i);
        let h = model.htped_at(x)?;
        let mut value = sign_unchecked(x, mu);
        value.iter_mut().for_each(|v| *v *= h);
        Ok(RankVector { value, source_index: i })
    })
}

/// Ranks as an `n x p` matrix.
pub fn rank_matrix(model: &DepthModel, mu: &[f64], data: &Matrix, exec: Execution) -> Result<Matrix> {
    let ranks = rank_transform(model, mu, data, exec)?;
    let p = data.ncols();
    let flat: Vec<f64> = ranks.into_iter().flat_map(|r| r.value).collect();
    Matrix::from_vec(data.nrows(), p, flat)
}

fn check_dims(model: &DepthModel, mu: &[f64], data: &Matrix) -> Result<()> {
    if model.dim() != data.ncols() || mu.len() != data.ncols() {
        return Err(Error::invalid(format!(
            "dimension mismatch: model {}, center {}, data {}",
            model.dim(),
            mu.len(),
            data.ncols()
        )));
    }
    Ok(())
}

/// Spatial (L1) median by Weiszfeld iteration with the Vardi–Zhang
/// modification at data points, started from the coordinatewise median.
///
/// Stops when the norm of the (sub)gradient of `sum |x_i - m|`, divided by
/// `n`, is at most `tol`. At a data point the gradient is the part of the
/// residual not absorbed by the point's own unit ball.
pub fn spatial_median(data: &Matrix, tol: f64, max_iter: usize) -> Result<LocationEstimate> {
    let (n, p) = (data.nrows(), data.ncols());
    if n == 0 || p == 0 {
        return Err(Error::invalid("spatial median of an empty data set"));
    }
    if !data.is_finite() {
        return Err(Error::invalid("data contains non-finite values"));
    }
    if !(tol >= 0.0) {
        return Err(Error::invalid("tolerance must be non-negative"));
    }
    let mut m: Vec<f64> = (0..p).map(|j| median_in_place(&mut data.column(j))).collect();
    let mut num = vec![0.0; p];
    let mut resid = vec![0.0; p];
    let nf = n as f64;
    for iter in 0..=max_iter {
        num.iter_mut().for_each(|v| *v = 0.0);
        resid.iter_mut().for_each(|v| *v = 0.0);
        let mut wsum = 0.0;
        let mut coincident = 0usize;
        for x in data.rows_iter() {
            let d = x.iter().zip(&m).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if d < ANCHOR_EPS {
                coincident += 1;
                continue;
            }
            let w = 1.0 / d;
            wsum += w;
            for j in 0..p {
                num[j] += w * x[j];
                resid[j] += w * (x[j] - m[j]);
            }
        }
        let r = norm(&resid);
        let eta = coincident as f64;
        let grad = (r - eta).max(0.0) / nf;
        if grad <= tol {
            return Ok(LocationEstimate { value: m, iterations: iter, converged: true });
        }
        if iter == max_iter {
            break;
        }
        let t: Vec<f64> = num.iter().map(|v| v / wsum).collect();
        if coincident == 0 {
            m = t;
        } else {
            let a = (1.0 - eta / r).max(0.0);
            let b = (eta / r).min(1.0);
            m = t.iter().zip(&m).map(|(ti, mi)| a * ti + b * mi).collect();
        }
    }
    Ok(LocationEstimate { value: m, iterations: max_iter, converged: false })
}

/// Spatial median with the default tolerance and iteration cap.
pub fn spatial_median_default(data: &Matrix) -> Result<LocationEstimate> {
    spatial_median(data, SPATIAL_MEDIAN_TOL, SPATIAL_MEDIAN_MAX_ITER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth::{DepthKind, DepthModel};
    use crate::model::{EllipticalModel, Family};

    #[test]
    fn sign_examples() {
        assert_eq!(spatial_sign(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), vec![0.6, 0.8]);
        assert_eq!(spatial_sign(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert!(spatial_sign(&[1.0], &[1.0, 2.0]).is_err());
        let s = spatial_sign(&[1e-200, 3e-200], &[0.0, 0.0]).unwrap();
        assert!((norm(&s) - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn sign_rotation() {
        let (x, mu) = ([2.0, -1.0], [0.5, 0.25]);
        let rot = |v: &[f64]| vec![-v[1], v[0]];
        let lhs = spatial_sign(&rot(&x), &rot(&mu)).unwrap();
        let rhs = rot(&spatial_sign(&x, &mu).unwrap());
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rank_examples() {
        let model = EllipticalModel::diagonal(Family::Normal, &[1.0, 1.0]).unwrap();
        let dm = DepthModel::population(DepthKind::Mahalanobis, &model).unwrap();
        let data = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0], [1e8, 0.0]]).unwrap();
        let r = rank_transform(&dm, &[0.0, 0.0], &data, Execution::Sequential).unwrap();
        assert!((r[0].value[0] - 0.5).abs() < 1e-15 && r[0].value[1] == 0.0);
        assert_eq!(r[1].value, vec![0.0, 0.0]);
        assert!((r[2].value[0] - 1.0).abs() < 1e-12);
        assert_eq!(r[2].source_index, 2);
    }

    #[test]
    fn median_examples() {
        let d = Matrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap();
        let m = spatial_median_default(&d).unwrap();
        assert!(m.converged);
        assert!(norm(&m.value) < 1e-12);
        let d1 = Matrix::from_vec(3, 1, vec![1.0, 2.0, 100.0]).unwrap();
        let m1 = spatial_median_default(&d1).unwrap();
        assert!(m1.converged);
        assert!((m1.value[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn median_iteration_contract() {
        let model = EllipticalModel::diagonal(Family::Normal, &[3.0, 1.0]).unwrap();
        let d = model.sample(50, 3);
        let m = spatial_median(&d, 0.0, 3).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 3);
        assert!(spatial_median(&Matrix::zeros(0, 2), 1e-10, 10).is_err());
    }

    #[test]
    fn median_anchored_at_data_point() {
        // a heavy cluster at the origin makes the origin optimal
        let mut rows = vec![[0.0, 0.0]; 5];
        rows.extend([[1.0, 0.0], [0.0, 2.0], [-3.0, 1.0]]);
        let d = Matrix::from_rows(&rows).unwrap();
        let m = spatial_median_default(&d).unwrap();
        assert!(m.converged);
        assert!(norm(&m.value) < 1e-12);
    }
}
