use super::{Matrix, SymMatrix};
use crate::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cholesky {
    l: Matrix,
}

/// Factorizes a positive-definite matrix. A pivot `≤ 1e-14 · trace(m)` is
/// reported as `NotPositiveDefinite`.
pub fn cholesky(m: &SymMatrix) -> Result<Cholesky> {
    let p = m.dim();
    let floor = 1e-14 * m.trace().abs();
    let mut l = Matrix::zeros(p, p);
    for j in 0..p {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > floor) {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..p {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(Cholesky { l })
}

/// Solves `m · x = b` for positive-definite `m`.
pub fn solve_spd(m: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    cholesky(m)?.solve(b)
}

impl Cholesky {
    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `L · y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let p = self.dim();
        let mut y = vec![0.0; p];
        for i in 0..p {
            let row = self.l.row(i);
            let s: f64 = row[..i].iter().zip(&y[..i]).map(|(a, x)| a * x).sum();
            y[i] = (b[i] - s) / row[i];
        }
        y
    }

    /// Solves `Lᵀ · x = y`.
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        let p = self.dim();
        let mut x = vec![0.0; p];
        for i in (0..p).rev() {
            let s = y[i] - ((i + 1)..p).map(|k| self.l[(k, i)] * x[k]).sum::<f64>();
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::invalid(format!(
                "right-hand side has length {}, expected {}",
                b.len(),
                self.dim()
            )));
        }
        Ok(self.backward(&self.forward(b)))
    }

    /// `vᵀ m⁻¹ v`, computed as `‖L⁻¹ v‖²`.
    pub fn inv_quad_form(&self, v: &[f64]) -> f64 {
        self.forward(v).iter().map(|x| x * x).sum()
    }

    /// `L · v`.
    pub fn mul_lower(&self, v: &[f64]) -> Vec<f64> {
        self.l.matvec(v)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::dot;
    use rand::{Rng, SeedableRng};

    fn random_spd(p: usize, seed: u64) -> SymMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix::from_vec(p, p, (0..p * p).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let mut m = a.matmul(&a.transpose());
        for i in 0..p {
            m[(i, i)] += p as f64 * 0.1;
        }
        SymMatrix::new(m).unwrap()
    }

    #[test]
    fn identity_and_diagonal() {
        assert_eq!(*cholesky(&SymMatrix::identity(3)).unwrap().factor(), Matrix::identity(3));
        let c = cholesky(&SymMatrix::from_diag(&[4.0, 9.0])).unwrap();
        assert_eq!(*c.factor(), Matrix::from_rows(&[[2.0, 0.0], [0.0, 3.0]]).unwrap());
    }

    #[test]
    fn two_by_two_round_trip() {
        let m = SymMatrix::new(Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap()).unwrap();
        let l = cholesky(&m).unwrap();
        let back = l.factor().matmul(&l.factor().transpose());
        assert!(back.sub(m.as_matrix()).frobenius() <= 1e-12);
    }

    #[test]
    fn not_positive_definite() {
        let m = SymMatrix::new(Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap()).unwrap();
        assert!(matches!(cholesky(&m), Err(Error::NotPositiveDefinite { index: 1, .. })));
        assert!(matches!(
            cholesky(&SymMatrix::from_diag(&[1.0, 0.0])),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn solve_examples() {
        assert_eq!(solve_spd(&SymMatrix::identity(2), &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        let x = solve_spd(&SymMatrix::from_diag(&[2.0, 4.0]), &[2.0, 4.0]).unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() <= 1e-15), "{x:?}");
    }

    #[test]
    fn random_round_trips() {
        for (seed, p) in [(1u64, 4usize), (2, 10), (3, 25), (4, 50)] {
            let m = random_spd(p, seed);
            let l = cholesky(&m).unwrap();
            let back = l.factor().matmul(&l.factor().transpose());
            let rel = back.sub(m.as_matrix()).frobenius() / m.as_matrix().frobenius();
            assert!(rel <= 1e-10, "p={p}: {rel}");

            let b: Vec<f64> = (0..p).map(|i| (i as f64 + 1.0).sin()).collect();
            let x = l.solve(&b).unwrap();
            let r: Vec<f64> = m.as_matrix().matvec(&x).iter().zip(&b).map(|(a, b)| a - b).collect();
            assert!(dot(&r, &r).sqrt() / dot(&b, &b).sqrt() <= 1e-10);
            assert!((l.inv_quad_form(&b) - dot(&b, &x)).abs() <= 1e-9 * dot(&b, &x).abs());
        }
    }
}
