use nalgebra::{Cholesky, DMatrix, Dyn};

/// Cholesky factor of a symmetric positive-definite matrix, rejecting
/// numerically singular input (smallest pivot below 10⁻¹² of the largest
/// diagonal entry, relative).
pub(crate) fn spd_factor(m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let max_diag = m.diagonal().amax();
    if !(max_diag > 0.0) || !max_diag.is_finite() {
        return if m.nrows() == 0 { m.cholesky() } else { None };
    }
    let chol = m.cholesky()?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows())
        .map(|k| l[(k, k)] * l[(k, k)])
        .fold(f64::INFINITY, f64::min);
    if min_pivot < 1e-12 * max_diag {
        return None;
    }
    Some(chol)
}
