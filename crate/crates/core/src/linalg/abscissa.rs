use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest dimension accepted by [`spectral_abscissa`].
pub const ABSCISSA_MAX_DIM: usize = 64;

/// Abscissas within this band of zero are not given a sign.
pub const MARGINAL_BAND: f64 = 1e-6;

const TAYLOR_TERMS: usize = 24;
const SQUARINGS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbscissaSign {
    Negative,
    Positive,
    Marginal,
}

/// Estimate of `max Re(eig(A))` with a sign verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abscissa {
    pub value: f64,
    pub sign: AbscissaSign,
}

impl Abscissa {
    pub fn from_value(value: f64) -> Self {
        let sign = if value < -MARGINAL_BAND {
            AbscissaSign::Negative
        } else if value > MARGINAL_BAND {
            AbscissaSign::Positive
        } else {
            AbscissaSign::Marginal
        };
        Abscissa { value, sign }
    }

    pub fn is_hurwitz(&self) -> bool {
        self.sign == AbscissaSign::Negative
    }
}

/// Spectral abscissa from the growth rate of the propagator `exp(A t)`.
///
/// One step `P = exp(A h)` with `||A|| h = 1` is taken by Taylor stepping of
/// `y' = A y`; the power iteration then squares `P` repeatedly, renormalising
/// and accumulating the log of the norm, so after `k` squarings the estimate
/// is `ln ||exp(A t)|| / t` with `t = 2^k h`. Since
/// `||exp(A t)|| >= exp(alpha t)`, the estimate approaches `alpha` from above
/// with error `O(ln(cond) / t)`.
pub fn spectral_abscissa(matrix: &DMatrix<f64>) -> Result<Abscissa> {
    let m = matrix.nrows();
    if matrix.ncols() != m {
        return Err(Error::Precondition(format!("matrix must be square, got {}x{}", m, matrix.ncols())));
    }
    if m > ABSCISSA_MAX_DIM {
        return Err(Error::DimensionTooLarge { dim: m, max: ABSCISSA_MAX_DIM });
    }
    if m == 0 {
        return Err(Error::Precondition("empty matrix".into()));
    }
    let norm = inf_norm(matrix);
    if norm == 0.0 {
        return Ok(Abscissa::from_value(0.0));
    }
    let h = 1.0 / norm;
    let ah = matrix * h;

    let mut prop = DMatrix::<f64>::identity(m, m);
    let mut term = DMatrix::<f64>::identity(m, m);
    for k in 1..=TAYLOR_TERMS {
        term = &term * &ah / k as f64;
        prop += &term;
    }

    let mut t = h;
    let c = inf_norm(&prop);
    let mut log_norm = c.ln();
    prop /= c;
    for _ in 0..SQUARINGS {
        prop = &prop * &prop;
        t *= 2.0;
        let c = inf_norm(&prop);
        if c == 0.0 {
            // nilpotent-like collapse: every mode decays faster than representable
            return Ok(Abscissa::from_value(f64::NEG_INFINITY));
        }
        log_norm = 2.0 * log_norm + c.ln();
        prop /= c;
    }
    Ok(Abscissa::from_value(log_norm / t))
}

fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MutationMatrix;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
        let ab = spectral_abscissa(&a).unwrap();
        assert_abs_diff_eq!(ab.value, -1.0, epsilon = 1e-9);
        assert!(ab.is_hurwitz());
    }

    #[test]
    fn mutation_matrix_is_marginal() {
        let t = MutationMatrix::new(3).to_tridiag().to_dense();
        let ab = spectral_abscissa(&t).unwrap();
        assert_eq!(ab.sign, AbscissaSign::Marginal);
        assert!(ab.value.abs() < 1e-9);
    }

    #[test]
    fn rotation_with_decay() {
        // eigenvalues -0.3 +- 2i
        let a = DMatrix::from_row_slice(2, 2, &[-0.3, 2.0, -2.0, -0.3]);
        let ab = spectral_abscissa(&a).unwrap();
        assert_abs_diff_eq!(ab.value, -0.3, epsilon = 1e-9);
    }

    #[test]
    fn jordan_block() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 0.5]);
        let ab = spectral_abscissa(&a).unwrap();
        assert_abs_diff_eq!(ab.value, 0.5, epsilon = 1e-9);
        assert_eq!(ab.sign, AbscissaSign::Positive);
    }

    #[test]
    fn zero_matrix_and_size_limit() {
        assert_eq!(spectral_abscissa(&DMatrix::zeros(3, 3)).unwrap().sign, AbscissaSign::Marginal);
        assert!(spectral_abscissa(&DMatrix::zeros(65, 65)).is_err());
    }
}
