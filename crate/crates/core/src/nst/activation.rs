use super::{NstError, Result};
use crate::autodiff::{piecewise_pow_value, Matrix};

/// `sgn(x)|x|^s` for `|x| < 1` and `sgn(x)|x|^l` otherwise.
pub fn activation(x: f64, s: f64, l: f64) -> f64 {
    piecewise_pow_value(x, s, l)
}

/// `lambda * I + |w_tilde|` entrywise.
///
/// Entries are non-negative and `W u >= lambda u` on the non-negative orthant,
/// so a nonzero non-negative vector never maps to zero. This alone does not
/// make `W` invertible: `lambda = 0.1` with off-diagonal entries `0.1` is
/// singular. Random draws are invertible almost surely.
pub fn positive_invertible(lambda: f64, w_tilde: &Matrix) -> Result<Matrix> {
    if !(lambda > 0.0) {
        return Err(NstError::NonPositiveLambda(lambda));
    }
    let (r, c) = w_tilde.shape();
    let mut m = w_tilde.map(f64::abs);
    for i in 0..r.min(c) {
        m.set(i, i, m.get(i, i) + lambda);
    }
    Ok(m)
}

/// Product order on time codes: `t_u[i] <= t_v[i]` for every coordinate.
pub fn precedes(t_u: &[f64], t_v: &[f64]) -> Result<bool> {
    if t_u.len() != t_v.len() {
        return Err(NstError::LengthMismatch(t_u.len(), t_v.len()));
    }
    Ok(t_u.iter().zip(t_v).all(|(a, b)| a <= b))
}

/// Sum over coordinates of `relu(t_u - t_v)`; zero exactly when `t_u` precedes `t_v`.
pub fn order_violation(t_u: &[f64], t_v: &[f64]) -> f64 {
    t_u.iter().zip(t_v).map(|(a, b)| (a - b).max(0.0)).sum()
}
