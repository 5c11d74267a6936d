//! Dense linear algebra and special functions.
//!
//! Everything here is a pure function of its inputs. Matrices are small
//! (p up to a few hundred) and stored row-major.

mod cholesky;
mod eigen;
mod matrix;
mod special;

pub use cholesky::{cholesky, solve_spd, Cholesky};
pub use eigen::{eigh, SpectralDecomp};
pub use matrix::{dot, norm, Matrix, SymMatrix};
pub use special::{
    chi2_quantile, erfc, ln_gamma, regularized_gamma_p, regularized_gamma_q, std_normal_cdf,
    std_normal_quantile, student_t_cdf, student_t_quantile,
};
