use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{BaselineError, Result};
use crate::autodiff::{Constraint, Matrix, ParamId, ParamStore, Tape, Var};

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    a: ParamId,
    b: ParamId,
    c: ParamId,
    a_exp: ParamId,
    b_exp: ParamId,
}

/// Neural snowflake `f(r) = u_J^{1+|p|}`, `u_j = B_j psi(A_j u_{j-1}) C_j`,
/// `u_0 = r`. Matrices are stored as raw weights and used through `|.|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnowflakeV1 {
    layers: Vec<Layer>,
    p: ParamId,
}

const A_EXP_FLOOR: f64 = 1e-3;

impl SnowflakeV1 {
    /// `depth` layers with hidden widths `width` (`d_0 = d_J = 1`).
    pub fn build(store: &mut ParamStore, prefix: &str, depth: usize, width: usize) -> Self {
        let layers = (1..=depth)
            .map(|j| {
                let d_in = if j == 1 { 1 } else { width };
                let d_out = if j == depth { 1 } else { width };
                let name = |s: &str| format!("{prefix}.{j}.{s}");
                Layer {
                    a: store.add(name("A"), Matrix::filled(width, d_in, 1.0), Constraint::Free),
                    b: store.add(name("B"), Matrix::filled(d_out, width, 1.0), Constraint::Free),
                    c: store.add(name("C"), Matrix::filled(1, 3, 1.0), Constraint::Free),
                    a_exp: store.add(
                        name("a"),
                        Matrix::scalar(1.0),
                        Constraint::Interval(A_EXP_FLOOR, 1.0),
                    ),
                    b_exp: store.add(name("b"), Matrix::scalar(1.0), Constraint::Interval(0.0, 1.0)),
                }
            })
            .collect();
        let p = store.add(format!("{prefix}.p"), Matrix::scalar(0.0), Constraint::Free);
        Self { layers, p }
    }

    /// Matrix entries `~ U(0, 2 / fan_in)`, `C` entries `~ U(0, 2/3)`,
    /// `a = b = 1`, `p = 0`.
    pub fn init(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) {
        for layer in &self.layers {
            for id in [layer.a, layer.b, layer.c] {
                let p = store.get_mut(id);
                let hi = 2.0 / p.value.cols() as f64;
                for x in p.value.data_mut() {
                    *x = rng.gen_range(0.0..hi);
                }
            }
            store.get_mut(layer.a_exp).value = Matrix::scalar(1.0);
            store.get_mut(layer.b_exp).value = Matrix::scalar(1.0);
        }
        store.get_mut(self.p).value = Matrix::scalar(0.0);
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Applies the snowflake to an `m x 1` column of non-negative distances.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, r: Var) -> Result<Var> {
        let mut u = r;
        for layer in &self.layers {
            let a = tape.param(store, layer.a);
            let a = tape.abs(a);
            let v = tape.matmul_t(u, a)?;
            let v = tape.abs(v);
            let f1 = tape.neg(v);
            let f1 = tape.exp(f1);
            let f1 = tape.scale(f1, -1.0);
            let f1 = tape.add_const(f1, 1.0);
            let ae = tape.param(store, layer.a_exp);
            let f2 = tape.sign_pow(v, ae, 0.0)?;
            let be = tape.param(store, layer.b_exp);
            let f3 = tape.log1p(v);
            let f3 = tape.sign_pow(f3, be, 0.0)?;
            let c = tape.param(store, layer.c);
            let c = tape.abs(c);
            let mut mixed = None;
            for (k, f) in [f1, f2, f3].into_iter().enumerate() {
                let ck = tape.slice_cols(c, k, k + 1)?;
                let term = tape.mul_scalar(f, ck)?;
                mixed = Some(match mixed {
                    None => term,
                    Some(acc) => tape.add(acc, term)?,
                });
            }
            let b = tape.param(store, layer.b);
            let b = tape.abs(b);
            u = tape.matmul_t(mixed.expect("three terms"), b)?;
        }
        let p = tape.param(store, self.p);
        let p = tape.abs(p);
        let e = tape.add_const(p, 1.0);
        Ok(tape.sign_pow(u, e, 1.0)?)
    }

    /// Scalar evaluation `f(r)`.
    pub fn eval(&self, store: &ParamStore, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(BaselineError::NegativeInput(r));
        }
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::scalar(r));
        let y = self.forward(&mut tape, store, x)?;
        Ok(tape.value(y).item())
    }
}
