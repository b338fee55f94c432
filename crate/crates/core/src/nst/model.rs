use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NstError, Result};
use crate::autodiff::{Constraint, Matrix, ParamId, ParamStore, Tape, Var};
use crate::checkpoint::{self, Checkpoint};

pub const LEAKY_SLOPE: f64 = 0.01;
pub const EXPONENT_FLOOR: f64 = 1.0;
pub const LAMBDA_FLOOR: f64 = 1e-6;
pub const LAMBDA_INIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NstConfig {
    pub input_dim: usize,
    pub space_dim: usize,
    pub time_dim: usize,
    pub encoder_depth: usize,
    pub encoder_width: usize,
    /// `J`: number of linear maps in the quasi-metric (the last one is a row).
    pub metric_depth: usize,
    /// `J~`: number of layers in the partial-order network.
    pub order_depth: usize,
}

impl NstConfig {
    /// Encoder 10 x 100, four metric and four order layers.
    pub fn new(input_dim: usize, space_dim: usize, time_dim: usize) -> Self {
        Self {
            input_dim,
            space_dim,
            time_dim,
            encoder_depth: 10,
            encoder_width: 100,
            metric_depth: 4,
            order_depth: 4,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.space_dim + self.time_dim
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(NstError::InvalidConfig(m.to_string()));
        if self.input_dim == 0 {
            return bad("input dimension must be positive");
        }
        if self.space_dim == 0 {
            return bad("space dimension must be positive");
        }
        if self.metric_depth == 0 {
            return bad("metric depth must be at least 1");
        }
        if self.encoder_depth > 0 && self.encoder_width == 0 {
            return bad("encoder width must be positive");
        }
        Ok(())
    }
}

/// Fully connected network with LeakyReLU between layers and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<(ParamId, ParamId)>,
    in_dim: usize,
    out_dim: usize,
}

impl Mlp {
    pub fn build(
        store: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        depth: usize,
        width: usize,
        out_dim: usize,
    ) -> Self {
        let mut dims = vec![in_dim];
        dims.extend(std::iter::repeat_n(width, depth));
        dims.push(out_dim);
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let weight = store.add(
                    format!("{prefix}.{i}.weight"),
                    Matrix::zeros(w[1], w[0]),
                    Constraint::Free,
                );
                let bias = store.add(
                    format!("{prefix}.{i}.bias"),
                    Matrix::zeros(1, w[1]),
                    Constraint::Free,
                );
                (weight, bias)
            })
            .collect();
        Self {
            layers,
            in_dim,
            out_dim,
        }
    }

    /// Weights and biases `~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init(&self, store: &mut ParamStore, rng: &mut ChaCha8Rng) {
        for &(w, b) in &self.layers {
            let fan_in = store.value(w).cols();
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            for id in [w, b] {
                for x in store.get_mut(id).value.data_mut() {
                    *x = rng.gen_range(-bound..bound);
                }
            }
        }
    }

    pub fn layers(&self) -> &[(ParamId, ParamId)] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Row-wise forward pass of an `n x in_dim` input.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> crate::autodiff::Result<Var> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let wv = tape.param(store, w);
            let bv = tape.param(store, b);
            h = tape.matmul_t(h, wv)?;
            h = tape.add_row(h, bv)?;
            if i < last {
                h = tape.leaky_relu(h, LEAKY_SLOPE);
            }
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct MetricLayer {
    w_tilde: ParamId,
    lambda: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
struct OrderLayer {
    v_tilde: ParamId,
    lambda: ParamId,
    bias: ParamId,
    exponent: ParamId,
}

/// Encoder, neural quasi-metric and neural partial order sharing one
/// parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralSpacetime {
    config: NstConfig,
    seed: u64,
    store: ParamStore,
    encoder: Mlp,
    /// `(s_j, l_j)` for `j = 0..=J`.
    metric_exponents: Vec<(ParamId, ParamId)>,
    /// `W_1..W_J`; the last is the positive output row.
    metric_layers: Vec<MetricLayer>,
    order_layers: Vec<OrderLayer>,
    output_exponent: Option<f64>,
}

impl NeuralSpacetime {
    /// Builds the parameter layout with every value at its identity-like
    /// default (zero weights, `lambda` = 0.1, exponents 1).
    pub fn new(config: NstConfig) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let encoder = Mlp::build(
            &mut store,
            "encoder",
            config.input_dim,
            config.encoder_depth,
            config.encoder_width,
            config.embedding_dim(),
        );
        let exp = |store: &mut ParamStore, name: String| {
            store.add(name, Matrix::scalar(1.0), Constraint::LowerBound(EXPONENT_FLOOR))
        };
        let lam = |store: &mut ParamStore, name: String| {
            store.add(name, Matrix::scalar(LAMBDA_INIT), Constraint::LowerBound(LAMBDA_FLOOR))
        };
        let d = config.space_dim;
        let metric_exponents = (0..=config.metric_depth)
            .map(|j| {
                let s = exp(&mut store, format!("metric.{j}.s"));
                let l = exp(&mut store, format!("metric.{j}.l"));
                (s, l)
            })
            .collect();
        let metric_layers = (1..=config.metric_depth)
            .map(|j| {
                let rows = if j == config.metric_depth { 1 } else { d };
                let w_tilde = store.add(
                    format!("metric.{j}.w"),
                    Matrix::zeros(rows, d),
                    Constraint::Free,
                );
                let lambda = lam(&mut store, format!("metric.{j}.lambda"));
                MetricLayer { w_tilde, lambda }
            })
            .collect();
        let t = config.time_dim;
        let order_layers = if t == 0 {
            Vec::new()
        } else {
            (1..=config.order_depth)
                .map(|j| {
                    let v_tilde = store.add(
                        format!("order.{j}.v"),
                        Matrix::zeros(t, t),
                        Constraint::Free,
                    );
                    let lambda = lam(&mut store, format!("order.{j}.lambda"));
                    let bias = store.add(
                        format!("order.{j}.bias"),
                        Matrix::zeros(1, t),
                        Constraint::Free,
                    );
                    let exponent = exp(&mut store, format!("order.{j}.s"));
                    OrderLayer {
                        v_tilde,
                        lambda,
                        bias,
                        exponent,
                    }
                })
                .collect()
        };
        Ok(Self {
            config,
            seed: 0,
            store,
            encoder,
            metric_exponents,
            metric_layers,
            order_layers,
            output_exponent: None,
        })
    }

    /// [`NeuralSpacetime::new`] followed by [`NeuralSpacetime::init_weights`].
    pub fn init(config: NstConfig, seed: u64) -> Result<Self> {
        let mut m = Self::new(config)?;
        m.init_weights(seed);
        Ok(m)
    }

    /// Encoder `~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))`; metric and order
    /// `W~ ~ U(0, 1/(rows * cols))`; `lambda` = 0.1; exponents and biases reset.
    pub fn init_weights(&mut self, seed: u64) {
        self.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.encoder.init(&mut self.store, &mut rng);
        let uniform_positive = |store: &mut ParamStore, id: ParamId, rng: &mut ChaCha8Rng| {
            let p = store.get_mut(id);
            let hi = 1.0 / p.value.len() as f64;
            for x in p.value.data_mut() {
                *x = rng.gen_range(0.0..hi);
            }
        };
        for layer in &self.metric_layers {
            uniform_positive(&mut self.store, layer.w_tilde, &mut rng);
            self.store.get_mut(layer.lambda).value = Matrix::scalar(LAMBDA_INIT);
        }
        for &(s, l) in &self.metric_exponents {
            self.store.get_mut(s).value = Matrix::scalar(1.0);
            self.store.get_mut(l).value = Matrix::scalar(1.0);
        }
        for layer in &self.order_layers {
            uniform_positive(&mut self.store, layer.v_tilde, &mut rng);
            self.store.get_mut(layer.lambda).value = Matrix::scalar(LAMBDA_INIT);
            let t = self.config.time_dim;
            self.store.get_mut(layer.bias).value = Matrix::zeros(1, t);
            self.store.get_mut(layer.exponent).value = Matrix::scalar(1.0);
        }
    }

    /// The configuration that realises `||x - y||_p^alpha` on the spatial
    /// coordinates: identity encoder, `J = 2`, `s_0 = l_0 = 1`,
    /// `s_1 = l_1 = p`, `W_1 = I`, all-ones output row and output exponent
    /// `alpha / p`.
    pub fn lp_snowflake(dim: usize, p: f64, alpha: f64) -> Result<Self> {
        if !(p >= EXPONENT_FLOOR) || !(alpha > 0.0) {
            return Err(NstError::InvalidConfig(format!(
                "snowflake needs p >= 1 and alpha > 0, got p = {p}, alpha = {alpha}"
            )));
        }
        let config = NstConfig {
            input_dim: dim,
            space_dim: dim,
            time_dim: 0,
            encoder_depth: 0,
            encoder_width: 0,
            metric_depth: 2,
            order_depth: 0,
        };
        let mut m = Self::new(config)?;
        let (w, _) = m.encoder.layers[0];
        m.store.get_mut(w).value = Matrix::identity(dim);
        m.store.get_mut(m.metric_exponents[1].0).value = Matrix::scalar(p);
        m.store.get_mut(m.metric_exponents[1].1).value = Matrix::scalar(p);
        for layer in &m.metric_layers {
            m.store.get_mut(layer.lambda).value = Matrix::scalar(1.0);
        }
        m.output_exponent = Some(alpha / p);
        Ok(m)
    }

    pub fn config(&self) -> &NstConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn output_exponent(&self) -> Option<f64> {
        self.output_exponent
    }

    /// Concrete `W_1..W_J` (`D x D` blocks, then the `1 x D` output row).
    pub fn metric_matrices(&self) -> Vec<Matrix> {
        self.metric_layers
            .iter()
            .map(|layer| {
                let lambda = self.store.value(layer.lambda).item();
                let mut w = self.store.value(layer.w_tilde).map(f64::abs);
                if w.rows() == 1 {
                    w.data_mut().iter_mut().for_each(|x| *x += lambda);
                } else {
                    for i in 0..w.rows() {
                        w.set(i, i, w.get(i, i) + lambda);
                    }
                }
                w
            })
            .collect()
    }

    /// `(s_j, l_j)` for `j = 0..=J`.
    pub fn metric_exponent_values(&self) -> Vec<(f64, f64)> {
        self.metric_exponents
            .iter()
            .map(|&(s, l)| (self.store.value(s).item(), self.store.value(l).item()))
            .collect()
    }

    pub fn set_metric_exponents(&mut self, j: usize, s: f64, l: f64) {
        let (sid, lid) = self.metric_exponents[j];
        self.store.get_mut(sid).value = Matrix::scalar(s);
        self.store.get_mut(lid).value = Matrix::scalar(l);
    }

    /// Overwrites `lambda_j` and `W~_j` of metric layer `j` (1-based).
    pub fn set_metric_layer(&mut self, j: usize, lambda: f64, w_tilde: Matrix) {
        let layer = &self.metric_layers[j - 1];
        self.store.get_mut(layer.lambda).value = Matrix::scalar(lambda);
        self.store.get_mut(layer.w_tilde).value = w_tilde;
    }

    /// Overwrites order layer `j` (1-based).
    pub fn set_order_layer(&mut self, j: usize, lambda: f64, v_tilde: Matrix, bias: Matrix, s: f64) {
        let layer = &self.order_layers[j - 1];
        self.store.get_mut(layer.lambda).value = Matrix::scalar(lambda);
        self.store.get_mut(layer.v_tilde).value = v_tilde;
        self.store.get_mut(layer.bias).value = bias;
        self.store.get_mut(layer.exponent).value = Matrix::scalar(s);
    }

    /// Encoder applied to every row of `features` (`n x N`).
    pub fn embed(&self, tape: &mut Tape, features: Var) -> Result<Var> {
        Ok(self.encoder.forward(tape, &self.store, features)?)
    }

    /// Quasi-metric between matching rows of two `m x (D+T)` embeddings, as `m x 1`.
    pub fn pair_distances(&self, tape: &mut Tape, emb_u: Var, emb_v: Var) -> Result<Var> {
        let d = self.config.space_dim;
        let st = &self.store;
        let xu = tape.slice_cols(emb_u, 0, d)?;
        let xv = tape.slice_cols(emb_v, 0, d)?;
        let (s0, l0) = self.metric_exponents[0];
        let (s0, l0) = (tape.param(st, s0), tape.param(st, l0));
        let au = tape.piecewise_pow(xu, s0, l0, EXPONENT_FLOOR)?;
        let av = tape.piecewise_pow(xv, s0, l0, EXPONENT_FLOOR)?;
        let diff = tape.sub(au, av)?;
        let mut u = tape.abs(diff);
        for (layer, &(s, l)) in self.metric_layers.iter().zip(&self.metric_exponents[1..]) {
            let (s, l) = (tape.param(st, s), tape.param(st, l));
            let act = tape.piecewise_pow(u, s, l, EXPONENT_FLOOR)?;
            let w = tape.param(st, layer.w_tilde);
            let w = tape.abs(w);
            let lambda = tape.param(st, layer.lambda);
            let w = if tape.shape(w).0 == 1 {
                tape.add_scalar(w, lambda)?
            } else {
                tape.add_scaled_identity(w, lambda)?
            };
            u = tape.matmul_t(act, w)?;
        }
        if let Some(e) = self.output_exponent {
            let ev = tape.constant(Matrix::scalar(e));
            u = tape.sign_pow(u, ev, f64::MIN_POSITIVE)?;
        }
        Ok(u)
    }

    /// Partial-order network applied to the time block of every row, `n x T`.
    pub fn time_codes(&self, tape: &mut Tape, emb: Var) -> Result<Var> {
        let d = self.config.space_dim;
        let st = &self.store;
        let mut z = tape.slice_cols(emb, d, d + self.config.time_dim)?;
        for layer in &self.order_layers {
            let a = tape.leaky_relu(z, LEAKY_SLOPE);
            let s = tape.param(st, layer.exponent);
            let a = tape.sign_pow(a, s, EXPONENT_FLOOR)?;
            let v = tape.param(st, layer.v_tilde);
            let v = tape.abs(v);
            let lambda = tape.param(st, layer.lambda);
            let v = tape.add_scaled_identity(v, lambda)?;
            let b = tape.param(st, layer.bias);
            let h = tape.matmul_t(a, v)?;
            z = tape.add_row(h, b)?;
        }
        Ok(z)
    }

    fn check_len(&self, found: usize, expected: usize) -> Result<()> {
        if found != expected {
            return Err(NstError::ShapeMismatch { expected, found });
        }
        Ok(())
    }

    /// Encoder on a single feature vector.
    pub fn encoder_forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len(), self.config.input_dim)?;
        Ok(self.embed_all(&Matrix::row_vector(x))?.into_data())
    }

    /// Encoder on every row of `features`.
    pub fn embed_all(&self, features: &Matrix) -> Result<Matrix> {
        self.check_len(features.cols(), self.config.input_dim)?;
        let mut tape = Tape::new();
        let x = tape.constant(features.clone());
        let e = self.embed(&mut tape, x)?;
        Ok(tape.value(e).clone())
    }

    /// Quasi-metric between two embedded points `x^ in R^{D+T}`.
    pub fn quasi_metric(&self, xu: &[f64], xv: &[f64]) -> Result<f64> {
        let k = self.config.embedding_dim();
        self.check_len(xu.len(), k)?;
        self.check_len(xv.len(), k)?;
        let mut tape = Tape::new();
        let a = tape.constant(Matrix::row_vector(xu));
        let b = tape.constant(Matrix::row_vector(xv));
        let d = self.pair_distances(&mut tape, a, b)?;
        Ok(tape.value(d).item())
    }

    /// Quasi-metric for the listed row pairs of an embedding matrix.
    pub fn distances(&self, emb: &Matrix, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
        self.check_len(emb.cols(), self.config.embedding_dim())?;
        let mut tape = Tape::new();
        let e = tape.constant(emb.clone());
        let us: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let vs: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let eu = tape.gather_rows(e, &us)?;
        let ev = tape.gather_rows(e, &vs)?;
        let d = self.pair_distances(&mut tape, eu, ev)?;
        Ok(tape.value(d).data().to_vec())
    }

    /// Time code `T(x^)` of one embedded point.
    pub fn partial_order_forward(&self, xhat: &[f64]) -> Result<Vec<f64>> {
        self.check_len(xhat.len(), self.config.embedding_dim())?;
        Ok(self.time_codes_all(&Matrix::row_vector(xhat))?.into_data())
    }

    pub fn time_codes_all(&self, emb: &Matrix) -> Result<Matrix> {
        self.check_len(emb.cols(), self.config.embedding_dim())?;
        let mut tape = Tape::new();
        let e = tape.constant(emb.clone());
        let t = self.time_codes(&mut tape, e)?;
        Ok(tape.value(t).clone())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: checkpoint::FORMAT.to_string(),
            geometry: "nst".to_string(),
            config: serde_json::to_value(&self.config).expect("config serializes"),
            seed: self.seed,
            output_exponent: self.output_exponent.map(checkpoint::encode_f64),
            params: checkpoint::snapshot(&self.store),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.geometry != "nst" {
            return Err(checkpoint::CheckpointError::Unsupported(format!(
                "geometry {:?} is not nst",
                ck.geometry
            ))
            .into());
        }
        let config: NstConfig = serde_json::from_value(ck.config.clone())
            .map_err(|e| checkpoint::CheckpointError::Json(e.to_string()))?;
        let mut m = Self::new(config)?;
        m.seed = ck.seed;
        m.output_exponent = ck
            .output_exponent
            .as_deref()
            .map(checkpoint::decode_f64)
            .transpose()?;
        checkpoint::restore(&mut m.store, &ck.params)?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        self.to_checkpoint().to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::from_json(text)?)
    }
}
