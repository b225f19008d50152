//! Small dense least-squares helpers.

use nalgebra::{DMatrix, DVector};

/// Relative pivot size below which a design matrix is treated as singular.
const RANK_TOL: f64 = 1e-10;

pub(crate) struct LeastSquares {
    pub coef: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares via thin QR. `None` when the design is rank
/// deficient or underdetermined.
pub(crate) fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Option<LeastSquares> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if n == 0 || m < n || y.len() != m {
        return None;
    }
    let x = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let r = qr.r();
    let diag_max = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if !(diag_max > 0.0) || (0..n).any(|i| r[(i, i)].abs() <= RANK_TOL * diag_max) {
        return None;
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r.solve_upper_triangular(&qty)?;
    if beta.iter().any(|b| !b.is_finite()) {
        return None;
    }
    let resid = yv - x * &beta;
    Some(LeastSquares {
        coef: beta.iter().copied().collect(),
        residuals: resid.iter().copied().collect(),
    })
}

/// Solves a symmetric positive-definite system.
pub(crate) fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.cholesky().map(|c| c.solve(b))
}
