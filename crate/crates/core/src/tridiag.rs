//! Symmetric tridiagonal matrices and the Thomas algorithm.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix: `diag` of length `n`, `off` of length `n - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        debug_assert_eq!(off.len() + 1, diag.len());
        SymTridiag { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `I + c * self`.
    pub fn shifted_identity(&self, c: f64) -> SymTridiag {
        SymTridiag {
            diag: self.diag.iter().map(|d| 1.0 + c * d).collect(),
            off: self.off.iter().map(|e| c * e).collect(),
        }
    }

    /// `out = self * u`.
    pub fn mul(&self, u: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * u[i];
            if i > 0 {
                s += self.off[i - 1] * u[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * u[i + 1];
            }
            out[i] = s;
        }
    }

    /// Quadratic form `u^T self u`.
    pub fn quad(&self, u: &[f64]) -> f64 {
        let n = self.len();
        let mut s = 0.0;
        for i in 0..n {
            s += self.diag[i] * u[i] * u[i];
            if i + 1 < n {
                s += 2.0 * self.off[i] * u[i] * u[i + 1];
            }
        }
        s
    }

    pub fn factor(&self) -> Result<Thomas> {
        let n = self.len();
        let mut inv_piv = vec![0.0; n];
        let mut upper = vec![0.0; n.saturating_sub(1)];
        let mut piv = self.diag[0];
        for i in 0..n {
            if i > 0 {
                piv = self.diag[i] - self.off[i - 1] * upper[i - 1];
            }
            if !piv.is_finite() || piv == 0.0 {
                return Err(Error::Solver { step: 0, detail: format!("pivot {piv} at row {i}") });
            }
            inv_piv[i] = 1.0 / piv;
            if i + 1 < n {
                upper[i] = self.off[i] * inv_piv[i];
            }
        }
        Ok(Thomas { matrix: self.clone(), inv_piv, upper })
    }
}

/// LU factors of a [`SymTridiag`] (no pivoting).
#[derive(Debug, Clone)]
pub struct Thomas {
    matrix: SymTridiag,
    inv_piv: Vec<f64>,
    upper: Vec<f64>,
}

impl Thomas {
    pub fn matrix(&self) -> &SymTridiag {
        &self.matrix
    }

    /// Solves in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        let off = &self.matrix.off;
        b[0] *= self.inv_piv[0];
        for i in 1..n {
            b[i] = (b[i] - off[i - 1] * b[i - 1]) * self.inv_piv[i];
        }
        for i in (0..n - 1).rev() {
            b[i] -= self.upper[i] * b[i + 1];
        }
    }

    /// Solves in place and returns `‖A x - b‖∞ / ‖b‖∞` (0 for `b = 0`).
    pub fn solve_checked(&self, b: &mut [f64], scratch: &mut [f64]) -> f64 {
        let rhs_norm = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        scratch.copy_from_slice(b);
        self.solve(b);
        if rhs_norm == 0.0 {
            return 0.0;
        }
        let m = &self.matrix;
        let n = b.len();
        let mut r: f64 = 0.0;
        for i in 0..n {
            let mut s = m.diag[i] * b[i];
            if i > 0 {
                s += m.off[i - 1] * b[i - 1];
            }
            if i + 1 < n {
                s += m.off[i] * b[i + 1];
            }
            r = r.max((s - scratch[i]).abs());
        }
        r / rhs_norm
    }
}
