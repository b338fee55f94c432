//! Minimal reverse-mode automatic differentiation over dense `f64` matrices.

mod gradcheck;
mod param;
mod tape;
mod tensor;

pub use gradcheck::{gradient_check, gradient_check_with, relative_error, GradCheckReport};
pub use param::{Constraint, Param, ParamId, ParamStore};
pub use tape::{piecewise_pow_value, sigmoid, Tape, Var};
pub use tensor::Matrix;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{what} {value} violates lower bound {bound}")]
    ConstraintViolation {
        what: &'static str,
        value: f64,
        bound: f64,
    },
    #[error("loss must be 1x1, got {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("backward already ran on this tape")]
    DoubleBackward,
}

pub type Result<T> = std::result::Result<T, AutodiffError>;

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = store.grad_norm();
    if norm > max_norm && norm > 0.0 {
        let k = max_norm / norm;
        for p in store.iter_mut() {
            p.grad.data_mut().iter_mut().for_each(|g| *g *= k);
        }
    }
    norm
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    type Unary = fn(&mut Tape, Var) -> Result<Var>;

    fn unary_ops() -> Vec<(&'static str, Unary)> {
        vec![
            ("abs", |t, x| Ok(t.abs(x))),
            ("leaky_relu", |t, x| Ok(t.leaky_relu(x, 0.01))),
            ("relu", |t, x| Ok(t.relu(x))),
            ("sigmoid", |t, x| Ok(t.sigmoid(x, 10.0))),
            ("exp", |t, x| Ok(t.exp(x))),
            ("square", |t, x| Ok(t.square(x))),
            ("recip", |t, x| {
                let a = t.abs(x);
                let a = t.add_const(a, 0.5);
                Ok(t.recip(a))
            }),
            ("log1p", |t, x| {
                let a = t.abs(x);
                Ok(t.log1p(a))
            }),
            ("sqrt", |t, x| {
                let a = t.abs(x);
                Ok(t.sqrt(a))
            }),
            ("acos", |t, x| {
                let s = t.sigmoid(x, 1.0);
                let c = t.scale(s, 1.6);
                let c = t.add_const(c, -0.8);
                Ok(t.acos(c))
            }),
            ("piecewise_pow", |t, x| {
                let s = t.variable(Matrix::scalar(1.7));
                let l = t.variable(Matrix::scalar(2.4));
                t.piecewise_pow(x, s, l, 1.0)
            }),
            ("sum_cols", |t, x| Ok(t.sum_cols(x))),
            ("min_cols", |t, x| t.min_cols(x)),
            ("mean", |t, x| Ok(t.mean(x))),
            ("gather_slice", |t, x| {
                let g = t.gather_rows(x, &[2, 0, 2])?;
                t.slice_cols(g, 1, 3)
            }),
            ("matmul", |t, x| {
                let w = t.variable(Matrix::from_rows(&[vec![0.3, -0.1], vec![0.2, 0.5], vec![-0.4, 0.6]]));
                let y = t.matmul(x, w)?;
                let z = t.matmul_t(y, w)?;
                let r = t.variable(Matrix::row_vector(&[0.1, 0.2, 0.3]));
                t.add_row(z, r)
            }),
            ("mul_sub", |t, x| {
                let y = t.square(x);
                let m = t.mul(x, y)?;
                t.sub(m, x)
            }),
            ("scalars", |t, x| {
                let s = t.variable(Matrix::scalar(0.7));
                let y = t.mul_scalar(x, s)?;
                t.add_scalar(y, s)
            }),
        ]
    }

    fn check_op(name: &str, op: Unary, input: Vec<f64>) -> std::result::Result<(), TestCaseError> {
        let h = 1e-5;
        let x0 = Matrix::from_vec(3, 3, input);
        let build = |x0: &Matrix| -> (Tape, Var, Var) {
            let mut t = Tape::new();
            let x = t.variable(x0.clone());
            let y = op(&mut t, x).unwrap();
            let weights = Matrix::from_vec(
                t.shape(y).0,
                t.shape(y).1,
                (0..t.value(y).len()).map(|i| 0.3 + 0.11 * i as f64).collect(),
            );
            let wv = t.constant(weights);
            let p = t.mul(y, wv).unwrap();
            let l = t.sum(p);
            (t, x, l)
        };
        let (mut t, x, l) = build(&x0);
        // Points close to a kink are not smooth; skip them.
        prop_assume!(t.kink_margin() > 1e-2);
        t.backward(l, &mut ParamStore::new()).unwrap();
        let analytic = t.grad(x).cloned().unwrap_or_else(|| Matrix::zeros(3, 3));
        for k in 0..9 {
            let mut up = x0.clone();
            up.data_mut()[k] += h;
            let mut down = x0.clone();
            down.data_mut()[k] -= h;
            let (tu, _, lu) = build(&up);
            let (td, _, ld) = build(&down);
            let numeric = (tu.value(lu).item() - td.value(ld).item()) / (2.0 * h);
            let err = relative_error(analytic.data()[k], numeric);
            prop_assert!(err < 1e-4, "{name}[{k}]: analytic {} numeric {numeric}", analytic.data()[k]);
        }
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 100, max_global_rejects: 100_000, ..ProptestConfig::default() })]

        #[test]
        fn ops_match_central_differences(input in proptest::collection::vec(-2.5f64..2.5, 9)) {
            for (name, op) in unary_ops() {
                check_op(name, op, input.clone())?;
            }
        }
    }
}
