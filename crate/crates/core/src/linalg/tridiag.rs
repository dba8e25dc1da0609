use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default bisection tolerance, relative to the Gershgorin radius.
pub const DEFAULT_RELATIVE_TOL: f64 = 1e-13;

const INVERSE_ITERATION_CAP: usize = 50;
const SHIFT_OFFSET: f64 = 1e-12;

/// Symmetric tridiagonal matrix stored as its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || offdiag.len() + 1 != diag.len() {
            return Err(Error::Precondition(format!(
                "tridiagonal lengths must be (n, n-1), got ({}, {})",
                diag.len(),
                offdiag.len()
            )));
        }
        Ok(SymTridiag { diag, offdiag })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn diag_mut(&mut self) -> &mut [f64] {
        &mut self.diag
    }

    pub fn offdiag_mut(&mut self) -> &mut [f64] {
        &mut self.offdiag
    }

    /// Gershgorin interval `[lo, hi]` containing every eigenvalue.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            let r = self.row_radius(i);
            (lo.min(self.diag[i] - r), hi.max(self.diag[i] + r))
        })
    }

    fn row_radius(&self, i: usize) -> f64 {
        let left = if i > 0 { self.offdiag[i - 1].abs() } else { 0.0 };
        let right = self.offdiag.get(i).map_or(0.0, |e| e.abs());
        left + right
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n())
            .map(|i| self.diag[i].abs() + self.row_radius(i))
            .fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.offdiag[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.offdiag[i] * x[i + 1];
            }
            out[i] = v;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if i + 1 == j {
                self.offdiag[i]
            } else if j + 1 == i {
                self.offdiag[j]
            } else {
                0.0
            }
        })
    }

    /// Largest eigenvalue at the default tolerance.
    pub fn top_eigenvalue(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        let radius = lo.abs().max(hi.abs());
        top_eigenvalue(self, DEFAULT_RELATIVE_TOL * radius.max(f64::MIN_POSITIVE))
    }

    /// Largest eigenvalue and its Perron vector at the default tolerance.
    pub fn perron(&self) -> Result<EigResult> {
        perron_vector(self, self.top_eigenvalue())
    }
}

/// Top eigenpair of a symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigResult {
    pub lambda_max: f64,
    /// Unit eigenvector, sign fixed so its components sum to a positive number.
    pub vector: Vec<f64>,
    /// `||B w - lambda w||_2`.
    pub residual: f64,
}

/// Number of eigenvalues strictly below `shift`, from the signs of the
/// `LDL^T` pivots of `matrix - shift I`. A vanishing pivot is replaced by
/// `-pivmin`.
pub fn sturm_count(matrix: &SymTridiag, shift: f64) -> usize {
    let max_e2 = matrix.offdiag.iter().map(|e| e * e).fold(1.0, f64::max);
    let pivmin = f64::MIN_POSITIVE * max_e2;
    let mut count = 0;
    let mut q = matrix.diag[0] - shift;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..matrix.n() {
        let e = matrix.offdiag[i - 1];
        q = matrix.diag[i] - shift - e * e / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn ulp(x: f64) -> f64 {
    let x = x.abs();
    x.next_up() - x
}

/// Largest eigenvalue by Sturm bisection inside the Gershgorin interval.
/// Stops once the bracket is narrower than `max(tol, 4 ulp)`.
pub fn top_eigenvalue(matrix: &SymTridiag, tol: f64) -> f64 {
    let n = matrix.n();
    let (glo, ghi) = matrix.gershgorin();
    let pad = 4.0 * f64::EPSILON * (1.0 + glo.abs().max(ghi.abs()));
    let mut lo = glo - pad;
    let mut hi = ghi + pad;
    for _ in 0..256 {
        let width = hi - lo;
        if width <= tol.max(4.0 * ulp(lo.abs().max(hi.abs()))) {
            break;
        }
        let mid = lo + 0.5 * width;
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(matrix, mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo + 0.5 * (hi - lo)
}

/// Solves `(matrix - shift I) y = rhs` by the Thomas recurrence.
fn shifted_solve(matrix: &SymTridiag, shift: f64, rhs: &[f64], y: &mut [f64]) {
    let n = matrix.n();
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut pivots = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = matrix.diag[0] - shift;
    if p.abs() < tiny {
        p = -tiny;
    }
    pivots[0] = p;
    z[0] = rhs[0];
    for i in 1..n {
        let l = matrix.offdiag[i - 1] / pivots[i - 1];
        let mut p = matrix.diag[i] - shift - l * matrix.offdiag[i - 1];
        if p.abs() < tiny {
            p = -tiny;
        }
        pivots[i] = p;
        z[i] = rhs[i] - l * z[i - 1];
    }
    y[n - 1] = z[n - 1] / pivots[n - 1];
    for i in (0..n - 1).rev() {
        y[i] = (z[i] - matrix.offdiag[i] * y[i + 1]) / pivots[i];
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    v.iter_mut().for_each(|x| *x *= sign / norm);
}

fn residual(matrix: &SymTridiag, lambda: f64, w: &[f64]) -> f64 {
    let mut bw = vec![0.0; w.len()];
    matrix.matvec(w, &mut bw);
    bw.iter()
        .zip(w)
        .map(|(b, x)| (b - lambda * x).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Perron vector by inverse iteration from the all-ones vector, shifted just
/// above `lambda_max` so the shifted matrix is negative definite.
pub fn perron_vector(matrix: &SymTridiag, lambda_max: f64) -> Result<EigResult> {
    let n = matrix.n();
    let scale = 1.0 + matrix.norm_inf();
    let target = 1e-10 * scale;
    if n == 1 {
        return Ok(EigResult {
            lambda_max,
            vector: vec![1.0],
            residual: (matrix.diag[0] - lambda_max).abs(),
        });
    }

    let mut offset = SHIFT_OFFSET * scale;
    let mut shift = lambda_max + offset;
    for _ in 0..8 {
        if sturm_count(matrix, shift) == n {
            break;
        }
        offset *= 10.0;
        shift = lambda_max + offset;
    }

    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut y = vec![0.0; n];
    let mut res = f64::INFINITY;
    for it in 1..=INVERSE_ITERATION_CAP {
        shifted_solve(matrix, shift, &v, &mut y);
        normalize(&mut y);
        let change = y.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut y);
        res = residual(matrix, lambda_max, &v);
        if it >= 2 && res <= target && change <= 1e-13 {
            return Ok(EigResult {
                lambda_max,
                vector: v,
                residual: res,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: INVERSE_ITERATION_CAP,
        residual: res,
    })
}

/// Gradient of the top eigenvalue with respect to the matrix entries: the
/// rank-one matrix `w w^T` built from the Perron vector `w`.
pub fn eig_sensitivity(matrix: &SymTridiag) -> Result<DMatrix<f64>> {
    let lambda = top_eigenvalue(matrix, 4.0 * f64::EPSILON * (1.0 + matrix.norm_inf()));
    let eig = perron_vector(matrix, lambda)?;
    let w = nalgebra::DVector::from_vec(eig.vector);
    Ok(&w * w.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense_eigs_oracle;
    use crate::model::MutationMatrix;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn neumann_eigenvalues(n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| -2.0 * (1.0 - (k as f64 * std::f64::consts::PI / n as f64).cos()))
            .collect()
    }

    #[test]
    fn sturm_count_on_mutation_matrix() {
        let t = MutationMatrix::new(3).to_tridiag();
        // eigenvalues {0, -1, -3}
        assert_eq!(sturm_count(&t, -0.5), 2);
        assert_eq!(sturm_count(&t, -2.0), 1);
        assert_eq!(sturm_count(&t, 0.5), 3);
        let (lo, hi) = t.gershgorin();
        assert_eq!(sturm_count(&t, lo - 1.0), 0);
        assert_eq!(sturm_count(&t, hi + 1.0), 3);
        for (k, ev) in neumann_eigenvalues(7).into_iter().enumerate() {
            let t = MutationMatrix::new(7).to_tridiag();
            assert!(sturm_count(&t, ev - 1e-9) <= sturm_count(&t, ev + 1e-9), "k = {k}");
        }
    }

    #[test]
    fn top_eigenvalue_of_t_is_zero() {
        for n in 1..30 {
            let t = MutationMatrix::new(n).to_tridiag();
            assert_abs_diff_eq!(top_eigenvalue(&t, 1e-14), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn perron_vector_of_t_is_uniform() {
        for n in 2..25 {
            let t = MutationMatrix::new(n).to_tridiag();
            let eig = t.perron().unwrap();
            let expect = 1.0 / (n as f64).sqrt();
            for w in &eig.vector {
                assert_abs_diff_eq!(*w, expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn perron_vector_equal_diagonal() {
        let m = SymTridiag::new(vec![0.3, 0.3], vec![0.2]).unwrap();
        let eig = m.perron().unwrap();
        assert_abs_diff_eq!(eig.lambda_max, 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(eig.vector[0], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.vector[1], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn perron_vector_matches_jacobi_on_distinct_diagonal() {
        let m = SymTridiag::new(vec![0.4, -1.3, 2.1], vec![0.7, 0.25]).unwrap();
        let eig = m.perron().unwrap();
        let dense = dense_eigs_oracle(&m.to_dense()).unwrap();
        let top = dense.values.len() - 1;
        let mut v: Vec<f64> = dense.vectors.column(top).iter().copied().collect();
        if v.iter().sum::<f64>() < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for (a, b) in eig.vector.iter().zip(&v) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(eig.lambda_max, dense.values[top], epsilon = 1e-12);
    }

    #[test]
    fn sensitivity_of_t_is_uniform() {
        let t = MutationMatrix::new(5).to_tridiag();
        let s = eig_sensitivity(&t).unwrap();
        for v in s.iter() {
            assert_abs_diff_eq!(*v, 0.2, epsilon = 1e-10);
        }
        let m = SymTridiag::new(vec![1.0, 1.0], vec![0.5]).unwrap();
        for v in eig_sensitivity(&m).unwrap().iter() {
            assert_abs_diff_eq!(*v, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn tridiag_rejects_bad_lengths() {
        assert!(SymTridiag::new(vec![1.0, 2.0], vec![]).is_err());
        assert!(SymTridiag::new(vec![], vec![]).is_err());
    }

    fn arb_tridiag() -> impl Strategy<Value = SymTridiag> {
        (2usize..9).prop_flat_map(|n| {
            (
                proptest::collection::vec(-3.0f64..3.0, n),
                proptest::collection::vec(0.01f64..2.0, n - 1),
            )
                .prop_map(|(d, e)| SymTridiag::new(d, e).unwrap())
        })
    }

    proptest! {
        #[test]
        fn sturm_count_is_monotone(m in arb_tridiag(), a in -8.0f64..8.0, b in -8.0f64..8.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(sturm_count(&m, lo) <= sturm_count(&m, hi));
        }

        #[test]
        fn perron_vector_is_positive(m in arb_tridiag()) {
            let eig = m.perron().unwrap();
            prop_assert!(eig.vector.iter().all(|&w| w > 0.0));
            let norm = eig.vector.iter().map(|w| w * w).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() <= 1e-12);
            prop_assert!(eig.residual <= 1e-10 * (1.0 + m.norm_inf()));
        }

        #[test]
        fn entrywise_larger_matrix_has_larger_root(m in arb_tridiag(), bump in 0.01f64..1.0, k in 0usize..16) {
            let mut bigger = m.clone();
            let n = m.n();
            let w = m.perron().unwrap().vector;
            // first-order gain, a lower bound by convexity of the top eigenvalue
            let gain = if k % 2 == 0 {
                let i = k / 2 % n;
                bigger.diag_mut()[i] += bump;
                bump * w[i] * w[i]
            } else {
                let i = k / 2 % (n - 1);
                bigger.offdiag_mut()[i] += bump;
                2.0 * bump * w[i] * w[i + 1]
            };
            let (hi, lo) = (bigger.top_eigenvalue(), m.top_eigenvalue());
            let resolution = 1e-10 * (1.0 + bigger.norm_inf());
            prop_assert!(hi >= lo - resolution);
            if gain > resolution {
                prop_assert!(hi > lo);
            }
        }
    }
}
