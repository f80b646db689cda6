//! Tridiagonal kernels shared by the eigensolver and the time steppers.

/// Thomas algorithm for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
/// No pivoting: meant for the diagonally dominant stepping matrices.
/// `scratch` must hold `n` entries; `rhs` is overwritten with the solution.
pub(crate) fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * scratch[i];
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
}

/// Gaussian elimination with partial pivoting on a general tridiagonal
/// system (the LAPACK `gtsv` scheme). `dl`/`du` have length `n - 1`.
/// Exact zero pivots are nudged so that inverse iteration can proceed.
pub(crate) fn solve_pivoted(dl: &[f64], d: &[f64], du: &[f64], b: &mut [f64]) {
    let n = d.len();
    if n == 1 {
        b[0] /= nudge(d[0]);
        return;
    }
    let mut dl = dl.to_vec();
    let mut d = d.to_vec();
    let mut du = du.to_vec();
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            let piv = nudge(d[i]);
            d[i] = piv;
            let fact = dl[i] / piv;
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
            dl[i] = 0.0;
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                dl[i] = du[i + 1];
                du[i + 1] = -fact * dl[i];
            } else {
                dl[i] = 0.0;
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
    }
    d[n - 1] = nudge(d[n - 1]);
    b[n - 1] /= d[n - 1];
    b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - dl[i] * b[i + 2]) / d[i];
    }
}

fn nudge(p: f64) -> f64 {
    if p == 0.0 {
        f64::EPSILON * f64::EPSILON
    } else {
        p
    }
}

/// Number of eigenvalues strictly below `x` of the symmetric tridiagonal
/// matrix with diagonal `d` and constant off-diagonal `e` (Sturm count).
pub(crate) fn count_below(d: &[f64], e: f64, x: f64) -> usize {
    let e2 = e * e;
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for &di in &d[1..] {
        let prev = if q == 0.0 { f64::EPSILON * e.abs().max(1.0) } else { q };
        q = (di - x) - e2 / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}
