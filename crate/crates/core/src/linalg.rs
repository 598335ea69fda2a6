use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition numbers above this are treated as numerically singular.
pub const MAX_CONDITION: f64 = 1e14;

/// `tr(Q R⁻¹)` for symmetric positive definite `R`, computed on the
/// diagonally equilibrated pair so that mixed parameter scales do not
/// spoil the factorization.
pub fn trace_q_rinv(q: &DMatrix<f64>, r: &DMatrix<f64>, context: &str) -> Result<f64> {
    let p = r.nrows();
    let mut scale = DVector::<f64>::zeros(p);
    for i in 0..p {
        let d = r[(i, i)];
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::numerical(
                context,
                format!("R has non-positive diagonal entry {d:e} at {i}"),
            ));
        }
        scale[i] = 1.0 / d.sqrt();
    }
    let rs = DMatrix::from_fn(p, p, |i, j| r[(i, j)] * scale[i] * scale[j]);
    let qs = DMatrix::from_fn(p, p, |i, j| q[(i, j)] * scale[i] * scale[j]);
    let cond = condition_estimate(&rs);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::numerical(
            context,
            format!("R is numerically singular (condition estimate {cond:e})"),
        ));
    }
    let ch = rs.cholesky().ok_or_else(|| {
        Error::numerical(context, format!("R not positive definite (condition estimate {cond:e})"))
    })?;
    let x = ch.solve(&qs.transpose());
    // tr(Q R⁻¹) = tr(R⁻¹ Q) and R⁻¹Qᵀ has the same trace
    Ok(x.trace())
}

/// Spectral condition number of a symmetric matrix.
pub fn condition_estimate(sym: &DMatrix<f64>) -> f64 {
    let eig = sym.clone().symmetric_eigen();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &e in eig.eigenvalues.iter() {
        lo = lo.min(e.abs());
        hi = hi.max(e.abs());
    }
    if eig.eigenvalues.iter().any(|&e| e <= 0.0) {
        return f64::INFINITY;
    }
    hi / lo
}


/// Cholesky solve with one retry after a small diagonal bump. Returns the
/// solution and the bump that was needed (zero when none).
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    if let Some(ch) = a.clone().cholesky() {
        return Some((ch.solve(b), 0.0));
    }
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut bumped = a.clone();
    let mut bump = 1e-12 * scale;
    for _ in 0..4 {
        for i in 0..n {
            bumped[(i, i)] = a[(i, i)] + bump;
        }
        if let Some(ch) = bumped.clone().cholesky() {
            return Some((ch.solve(b), bump));
        }
        bump *= 1e3;
    }
    None
}

/// `log det` of a symmetric positive definite matrix via Cholesky.
pub fn log_det_spd(a: &DMatrix<f64>) -> Option<f64> {
    let ch = a.clone().cholesky()?;
    let l = ch.l_dirty();
    Some((0..a.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum())
}
