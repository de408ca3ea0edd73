//! Thomas algorithm for the tridiagonal systems of the implicit half-steps.

use crate::error::{Error, Result};

/// Tridiagonal matrix stored by diagonals. `lower[0]` and `upper[n-1]` are unused.
#[derive(Debug, Clone, Default)]
pub(crate) struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Tridiagonal {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    /// Solves `A x = rhs` in place of `rhs`, using `scratch` for the modified
    /// upper diagonal. No pivoting: the systems assembled here are strictly
    /// diagonally dominant M-matrices.
    pub fn solve_in_place(&self, rhs: &mut [f64], scratch: &mut Vec<f64>) -> Result<()> {
        let n = self.diag.len();
        debug_assert_eq!(rhs.len(), n);
        scratch.clear();
        scratch.resize(n, 0.0);
        let mut den = self.diag[0];
        if den == 0.0 || !den.is_finite() {
            return Err(Error::Singular { row: 0 });
        }
        scratch[0] = self.upper[0] / den;
        rhs[0] /= den;
        for i in 1..n {
            den = self.diag[i] - self.lower[i] * scratch[i - 1];
            if den == 0.0 || !den.is_finite() {
                return Err(Error::Singular { row: i });
            }
            scratch[i] = if i + 1 < n { self.upper[i] / den } else { 0.0 };
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / den;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= scratch[i] * rhs[i + 1];
        }
        Ok(())
    }
}
