//! Symmetric tridiagonal helpers.

/// Solves `A x = rhs` for tridiagonal `A` by the Thomas algorithm.
/// `lower[i]` couples row `i` to `i-1`, `upper[i]` couples `i` to `i+1`.
/// Returns `None` on a vanishing pivot.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if piv == 0.0 || !piv.is_finite() {
        return None;
    }
    c[0] = upper[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - lower[i] * c[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return None;
        }
        c[i] = if i + 1 < n { upper[i] / piv } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / piv;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Some(x)
}

/// Number of negative pivots of the LDL^T factorization of a symmetric
/// tridiagonal matrix shifted by `-sigma * mass` (Sylvester inertia).
pub fn count_below(diag: &[f64], off: &[f64], mass: &[f64], sigma: f64) -> usize {
    let n = diag.len();
    let mut count = 0;
    let mut dprev = 1.0;
    for i in 0..n {
        let mut di = diag[i] - sigma * mass[i];
        if i > 0 {
            di -= off[i - 1] * off[i - 1] / dprev;
        }
        if di == 0.0 {
            di = -1e-300;
        }
        if di < 0.0 {
            count += 1;
        }
        dprev = di;
    }
    count
}
