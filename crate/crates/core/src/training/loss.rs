use super::{Result, TrainError};
use crate::autodiff::{sigmoid, Matrix, Tape, Var};

pub const STEEPNESS: f64 = 10.0;

/// `1 / (1 + exp(-10 x))`.
pub fn steep_sigmoid(x: f64) -> f64 {
    sigmoid(STEEPNESS * x)
}

/// Mean squared error between `m x 1` columns; 0 when there are no rows.
pub fn distance_loss(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    let m = tape.shape(pred).0;
    let diff = tape.sub(pred, target)?;
    let sq = tape.square(diff);
    let total = tape.sum(sq);
    Ok(tape.scale(total, 1.0 / m.max(1) as f64))
}

pub fn distance_loss_value(pred: &[f64], target: &[f64]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let s: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    s / pred.len() as f64
}

/// Fraction of `edges` whose endpoints satisfy the product order, i.e.
/// `sum_t relu(T(u)_t - T(v)_t) = 0`.
pub fn total_correct(times: &Matrix, edges: &[(usize, usize)]) -> Result<f64> {
    if edges.is_empty() {
        return Err(TrainError::EmptyEdgeSet);
    }
    let ok = edges
        .iter()
        .filter(|&&(u, v)| crate::nst::order_violation(times.row(u), times.row(v)) == 0.0)
        .count();
    Ok(ok as f64 / edges.len() as f64)
}

/// `sum_edges sum_t steep_sigmoid(T(u)_t - T(v)_t)`, before the correctness factor.
pub fn causality_sum(times: &Matrix, edges: &[(usize, usize)]) -> f64 {
    edges
        .iter()
        .map(|&(u, v)| {
            times
                .row(u)
                .iter()
                .zip(times.row(v))
                .map(|(a, b)| steep_sigmoid(a - b))
                .sum::<f64>()
        })
        .sum()
}

/// Causality sum scaled by `1 - total_correct`.
pub fn causality_loss_value(times: &Matrix, edges: &[(usize, usize)]) -> Result<f64> {
    let tc = total_correct(times, edges)?;
    Ok(causality_sum(times, edges) * (1.0 - tc))
}

/// Causality loss on the tape; `(1 - total_correct)` enters as a constant.
/// Returns the loss node and the total-correct fraction it used.
pub fn causality_loss(tape: &mut Tape, times: Var, edges: &[(usize, usize)]) -> Result<(Var, f64)> {
    let tc = total_correct(tape.value(times), edges)?;
    let us: Vec<usize> = edges.iter().map(|e| e.0).collect();
    let vs: Vec<usize> = edges.iter().map(|e| e.1).collect();
    let tu = tape.gather_rows(times, &us)?;
    let tv = tape.gather_rows(times, &vs)?;
    let diff = tape.sub(tu, tv)?;
    let s = tape.sigmoid(diff, STEEPNESS);
    let total = tape.sum(s);
    Ok((tape.scale(total, 1.0 - tc), tc))
}

/// Penalty over every causally connected pair plus a margin term over
/// antichain pairs (both orders):
/// `sum_{u<v} sum_t relu(T(u)_t - T(v)_t) + sum_B min_t relu(eps + T(v)_t - T(u)_t)`.
/// With `smooth`, the steep sigmoid replaces both ReLUs.
pub fn global_causality_loss(
    tape: &mut Tape,
    times: Var,
    closure: &[(usize, usize)],
    antichain: &[(usize, usize)],
    epsilon: f64,
    smooth: bool,
) -> Result<Var> {
    let t = tape.shape(times).1;
    if t < 2 && !antichain.is_empty() {
        return Err(TrainError::TooFewTimeDims(t));
    }
    let penal = |tape: &mut Tape, x: Var| {
        if smooth {
            tape.sigmoid(x, STEEPNESS)
        } else {
            tape.relu(x)
        }
    };
    let gather = |tape: &mut Tape, pairs: &[(usize, usize)]| -> Result<(Var, Var)> {
        let us: Vec<usize> = pairs.iter().map(|e| e.0).collect();
        let vs: Vec<usize> = pairs.iter().map(|e| e.1).collect();
        Ok((tape.gather_rows(times, &us)?, tape.gather_rows(times, &vs)?))
    };
    let mut total = tape.constant(Matrix::scalar(0.0));
    if !closure.is_empty() {
        let (tu, tv) = gather(tape, closure)?;
        let diff = tape.sub(tu, tv)?;
        let first = penal(tape, diff);
        let first = tape.sum(first);
        total = tape.add(total, first)?;
    }
    if !antichain.is_empty() {
        let (au, av) = gather(tape, antichain)?;
        let gap = tape.sub(av, au)?;
        let gap = tape.add_const(gap, epsilon);
        let gap = penal(tape, gap);
        let mins = tape.min_cols(gap)?;
        let second = tape.sum(mins);
        total = tape.add(total, second)?;
    }
    Ok(total)
}

/// Summary statistics of per-pair distortion ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionStats {
    pub avg: f64,
    pub std: f64,
    pub max: f64,
    pub count: usize,
}

/// Mean, population standard deviation and maximum of `ratios`.
pub fn distortion_stats(ratios: &[f64]) -> Option<DistortionStats> {
    if ratios.is_empty() {
        return None;
    }
    let n = ratios.len() as f64;
    let avg = ratios.iter().sum::<f64>() / n;
    let var = ratios.iter().map(|r| (r - avg) * (r - avg)).sum::<f64>() / n;
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(DistortionStats {
        avg,
        std: var.sqrt(),
        max,
        count: ratios.len(),
    })
}
