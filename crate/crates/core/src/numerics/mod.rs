//! Small numerical kernels shared by the solvers.

pub mod ode;
pub mod roots;

/// Solves a tridiagonal system in place with the Thomas algorithm.
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (so `lower[0]` is ignored) and
/// `upper[i]` multiplies `x[i+1]` (so the last entry is ignored). Returns
/// `None` when a pivot vanishes.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Option<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 || !beta.is_finite() {
        return None;
    }
    rhs[0] /= beta;
    for i in 1..n {
        c[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i];
        if beta == 0.0 || !beta.is_finite() {
            return None;
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i + 1] * rhs[i + 1];
    }
    Some(())
}

/// Composite Simpson rule on a uniform grid with an even number of intervals.
pub fn simpson(values: &[f64], dx: f64) -> f64 {
    let n = values.len() - 1;
    debug_assert!(n >= 2 && n % 2 == 0, "Simpson needs an even number of intervals");
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        if i % 2 == 1 {
            odd += values[i];
        } else {
            even += values[i];
        }
    }
    dx / 3.0 * (values[0] + values[n] + 4.0 * odd + 2.0 * even)
}

/// Running integral `int_0^{x_i} f` on a uniform grid.
///
/// Even nodes use Simpson panels; odd nodes add a three-point rule for the
/// last half panel, so every entry is third-order accurate or better.
pub fn cumulative_integral(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    for i in 1..n {
        if i % 2 == 0 {
            out[i] = out[i - 2] + dx / 3.0 * (values[i - 2] + 4.0 * values[i - 1] + values[i]);
        } else if i + 1 < n {
            out[i] = out[i - 1] + dx / 12.0 * (5.0 * values[i - 1] + 8.0 * values[i] - values[i + 1]);
        } else {
            out[i] = out[i - 1] + dx / 12.0 * (-values[i - 2] + 8.0 * values[i - 1] + 5.0 * values[i]);
        }
    }
    out
}
