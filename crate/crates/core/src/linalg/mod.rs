//! Eigenvalue machinery: Sturm bisection and inverse iteration for symmetric
//! tridiagonal matrices, a Jacobi oracle for small dense symmetric matrices,
//! and a spectral-abscissa test for small general matrices.

mod abscissa;
mod jacobi;
mod tridiag;

pub use abscissa::{spectral_abscissa, Abscissa, AbscissaSign, ABSCISSA_MAX_DIM, MARGINAL_BAND};
pub use jacobi::{dense_eigs_oracle, SymEigen, ORACLE_MAX_DIM};
pub use tridiag::{
    eig_sensitivity, perron_vector, sturm_count, top_eigenvalue, EigResult, SymTridiag, DEFAULT_RELATIVE_TOL,
};
