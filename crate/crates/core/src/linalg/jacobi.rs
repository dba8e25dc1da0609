use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest dimension accepted by [`dense_eigs_oracle`].
pub const ORACLE_MAX_DIM: usize = 16;

const MAX_SWEEPS: usize = 64;

/// Full eigendecomposition `A = V diag(values) V^T`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector of `values[k]`.
    pub vectors: DMatrix<f64>,
}

/// Brute-force symmetric eigensolver by cyclic Jacobi rotations. Kept
/// independent of the tridiagonal machinery so it can serve as its oracle.
pub fn dense_eigs_oracle(matrix: &DMatrix<f64>) -> Result<SymEigen> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::Precondition(format!("matrix must be square, got {}x{}", n, matrix.ncols())));
    }
    if n > ORACLE_MAX_DIM {
        return Err(Error::DimensionTooLarge { dim: n, max: ORACLE_MAX_DIM });
    }
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((matrix[(i, j)] - matrix[(j, i)]).abs());
        }
    }
    if asym > 1e-12 {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }

    let mut a = matrix.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let frob = a.norm();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-18 * frob || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                // rotation zeroing a[p][q]
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MutationMatrix;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn reconstruction_error(a: &DMatrix<f64>, e: &SymEigen) -> f64 {
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.values.clone()));
        (a - &e.vectors * lam * e.vectors.transpose()).norm()
    }

    #[test]
    fn two_by_two_closed_form() {
        let (a, b, c) = (0.3, -0.8, 1.7);
        let m = DMatrix::from_row_slice(2, 2, &[a, b, b, c]);
        let e = dense_eigs_oracle(&m).unwrap();
        let mid = (a + c) / 2.0;
        let rad = (((a - c) / 2.0f64).powi(2) + b * b).sqrt();
        assert_abs_diff_eq!(e.values[0], mid - rad, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], mid + rad, epsilon = 1e-14);
    }

    #[test]
    fn mutation_matrix_spectrum() {
        let t = MutationMatrix::new(3).to_tridiag().to_dense();
        let e = dense_eigs_oracle(&t).unwrap();
        for (got, want) in e.values.iter().zip([-3.0, -1.0, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
    }

    #[test]
    fn identity() {
        let e = dense_eigs_oracle(&DMatrix::identity(6, 6)).unwrap();
        assert!(e.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rejects_asymmetric_and_oversized() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(dense_eigs_oracle(&m), Err(Error::NotSymmetric { .. })));
        assert!(matches!(
            dense_eigs_oracle(&DMatrix::identity(17, 17)),
            Err(Error::DimensionTooLarge { dim: 17, .. })
        ));
    }

    proptest! {
        #[test]
        fn reconstructs_random_symmetric(n in 1usize..=16, seed in proptest::collection::vec(-5.0f64..5.0, 256)) {
            let m = DMatrix::from_fn(n, n, |i, j| {
                let (i, j) = if i <= j { (i, j) } else { (j, i) };
                seed[i * 16 + j]
            });
            let e = dense_eigs_oracle(&m).unwrap();
            prop_assert!(reconstruction_error(&m, &e) <= 1e-10 * m.norm().max(1.0));
            prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
