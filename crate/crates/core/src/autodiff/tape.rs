use super::{AutodiffError, Matrix, ParamId, ParamStore, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    MulScalar(Var, Var),
    AddScalar(Var, Var),
    AddScaledIdentity(Var, Var),
    Abs(Var),
    PiecewisePow { x: Var, small: Var, large: Var },
    LeakyRelu(Var, f64),
    Relu(Var),
    Sigmoid(Var, f64),
    Exp(Var),
    Log1p(Var),
    Sqrt(Var),
    Acos(Var),
    Square(Var),
    Recip(Var),
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    MinCols(Var),
    GatherRows(Var, Vec<usize>),
    SliceCols(Var, usize, usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::MatMul(..) => "matmul",
            Op::MatMulT(..) => "matmul_t",
            Op::Scale(..) => "scale",
            Op::AddConst(..) => "add_const",
            Op::MulScalar(..) => "mul_scalar",
            Op::AddScalar(..) => "add_scalar",
            Op::AddScaledIdentity(..) => "add_scaled_identity",
            Op::Abs(..) => "abs",
            Op::PiecewisePow { .. } => "piecewise_pow",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Relu(..) => "relu",
            Op::Sigmoid(..) => "sigmoid",
            Op::Exp(..) => "exp",
            Op::Log1p(..) => "log1p",
            Op::Sqrt(..) => "sqrt",
            Op::Acos(..) => "acos",
            Op::Square(..) => "square",
            Op::Recip(..) => "recip",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::SumCols(..) => "sum_cols",
            Op::MinCols(..) => "min_cols",
            Op::GatherRows(..) => "gather_rows",
            Op::SliceCols(..) => "slice_cols",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
    requires_grad: bool,
    param: Option<ParamId>,
}

/// Append-only record of a forward computation.
///
/// Every node stores its forward value; parents always precede children, so
/// a single reverse sweep accumulates exact gradients. A tape supports one
/// backward pass; build a fresh tape for the next step.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
    backward_done: bool,
}

/// `sgn(x) |x|^e` with `e = small` when `|x| < 1` and `e = large` otherwise.
#[inline]
pub fn piecewise_pow_value(x: f64, small: f64, large: f64) -> f64 {
    let a = x.abs();
    let e = if a < 1.0 { small } else { large };
    let mag = if e == 1.0 { a } else { a.powf(e) };
    if x < 0.0 {
        -mag
    } else {
        mag
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last backward pass with respect to `v`, if it was reached.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    fn push(&mut self, op: Op, value: Matrix, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Input that does not receive a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(Op::Leaf, value, false)
    }

    /// Free leaf that receives a gradient but is not tied to a parameter.
    pub fn variable(&mut self, value: Matrix) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// Loads a parameter's current value as a leaf; its gradient is written
    /// back to the store by [`Tape::backward`].
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let v = self.push(Op::Leaf, store.value(id).clone(), true);
        self.nodes[v.0].param = Some(id);
        v
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(AutodiffError::ShapeMismatch {
                op,
                left: sa,
                right: sb,
            });
        }
        Ok(())
    }

    fn scalar_operand(&self, op: &'static str, a: Var, s: Var) -> Result<()> {
        if self.shape(s) != (1, 1) {
            return Err(AutodiffError::ShapeMismatch {
                op,
                left: self.shape(a),
                right: self.shape(s),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Add(a, b), value, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Sub(a, b), value, rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Mul(a, b), value, rg))
    }

    /// `a + row` with `row` (`1 x m`) broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (sa, sr) = (self.shape(a), self.shape(row));
        if sr.0 != 1 || sr.1 != sa.1 {
            return Err(AutodiffError::ShapeMismatch {
                op: "add_row",
                left: sa,
                right: sr,
            });
        }
        let mut value = self.value(a).clone();
        let r = self.value(row).data().to_vec();
        for chunk in value.data_mut().chunks_mut(sa.1.max(1)) {
            for (x, b) in chunk.iter_mut().zip(&r) {
                *x += b;
            }
        }
        let rg = self.rg(a) || self.rg(row);
        Ok(self.push(Op::AddRow(a, row), value, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                left: sa,
                right: sb,
            });
        }
        let value = self.value(a).matmul(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::MatMul(a, b), value, rg))
    }

    /// `a * w^T`: applies the linear map `w` to every row of `a`.
    pub fn matmul_t(&mut self, a: Var, w: Var) -> Result<Var> {
        let (sa, sw) = (self.shape(a), self.shape(w));
        if sa.1 != sw.1 {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul_t",
                left: sa,
                right: sw,
            });
        }
        let value = self.value(a).matmul_t(self.value(w));
        let rg = self.rg(a) || self.rg(w);
        Ok(self.push(Op::MatMulT(a, w), value, rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x * c);
        let rg = self.rg(a);
        self.push(Op::Scale(a, c), value, rg)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x + c);
        let rg = self.rg(a);
        self.push(Op::AddConst(a), value, rg)
    }

    /// `a * s` for a `1 x 1` node `s`.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        self.scalar_operand("mul_scalar", a, s)?;
        let c = self.value(s).item();
        let value = self.value(a).map(|x| x * c);
        let rg = self.rg(a) || self.rg(s);
        Ok(self.push(Op::MulScalar(a, s), value, rg))
    }

    /// `a + s` for a `1 x 1` node `s`.
    pub fn add_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        self.scalar_operand("add_scalar", a, s)?;
        let c = self.value(s).item();
        let value = self.value(a).map(|x| x + c);
        let rg = self.rg(a) || self.rg(s);
        Ok(self.push(Op::AddScalar(a, s), value, rg))
    }

    /// `w + lambda * I` for square `w` and `1 x 1` node `lambda`.
    pub fn add_scaled_identity(&mut self, w: Var, lambda: Var) -> Result<Var> {
        let sw = self.shape(w);
        if sw.0 != sw.1 {
            return Err(AutodiffError::ShapeMismatch {
                op: "add_scaled_identity",
                left: sw,
                right: sw,
            });
        }
        self.scalar_operand("add_scaled_identity", w, lambda)?;
        let l = self.value(lambda).item();
        let mut value = self.value(w).clone();
        for i in 0..sw.0 {
            let d = value.get(i, i);
            value.set(i, i, d + l);
        }
        let rg = self.rg(w) || self.rg(lambda);
        Ok(self.push(Op::AddScaledIdentity(w, lambda), value, rg))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::abs);
        let rg = self.rg(a);
        self.push(Op::Abs(a), value, rg)
    }

    /// Elementwise `sgn(x) |x|^e` with `e = small` on `|x| < 1` and `e = large`
    /// on `|x| >= 1`. Both exponents are `1 x 1` nodes and must be `>= floor`.
    pub fn piecewise_pow(&mut self, x: Var, small: Var, large: Var, floor: f64) -> Result<Var> {
        self.scalar_operand("piecewise_pow", x, small)?;
        self.scalar_operand("piecewise_pow", x, large)?;
        let (s, l) = (self.value(small).item(), self.value(large).item());
        for e in [s, l] {
            if !(e >= floor) || !e.is_finite() {
                return Err(AutodiffError::ConstraintViolation {
                    what: "activation exponent",
                    value: e,
                    bound: floor,
                });
            }
        }
        let value = self.value(x).map(|v| piecewise_pow_value(v, s, l));
        let rg = self.rg(x) || self.rg(small) || self.rg(large);
        Ok(self.push(Op::PiecewisePow { x, small, large }, value, rg))
    }

    /// `sgn(x) |x|^e` with a single exponent node.
    pub fn sign_pow(&mut self, x: Var, e: Var, floor: f64) -> Result<Var> {
        self.piecewise_pow(x, e, e, floor)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        let rg = self.rg(a);
        self.push(Op::LeakyRelu(a, slope), value, rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        let rg = self.rg(a);
        self.push(Op::Relu(a), value, rg)
    }

    /// `1 / (1 + exp(-slope * x))`.
    pub fn sigmoid(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).map(|x| sigmoid(slope * x));
        let rg = self.rg(a);
        self.push(Op::Sigmoid(a, slope), value, rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::exp);
        let rg = self.rg(a);
        self.push(Op::Exp(a), value, rg)
    }

    pub fn log1p(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::ln_1p);
        let rg = self.rg(a);
        self.push(Op::Log1p(a), value, rg)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::sqrt);
        let rg = self.rg(a);
        self.push(Op::Sqrt(a), value, rg)
    }

    pub fn acos(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::acos);
        let rg = self.rg(a);
        self.push(Op::Acos(a), value, rg)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x * x);
        let rg = self.rg(a);
        self.push(Op::Square(a), value, rg)
    }

    pub fn recip(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| 1.0 / x);
        let rg = self.rg(a);
        self.push(Op::Recip(a), value, rg)
    }

    /// Sum of all entries, as a `1 x 1` node.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(Op::Sum(a), value, rg)
    }

    /// Mean of all entries; the mean of an empty matrix is 0.
    pub fn mean(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let value = Matrix::scalar(if m.is_empty() {
            0.0
        } else {
            m.sum() / m.len() as f64
        });
        let rg = self.rg(a);
        self.push(Op::Mean(a), value, rg)
    }

    /// Row sums as an `n x 1` column.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let data: Vec<f64> = (0..m.rows()).map(|r| m.row(r).iter().sum()).collect();
        let value = Matrix::from_vec(m.rows(), 1, data);
        let rg = self.rg(a);
        self.push(Op::SumCols(a), value, rg)
    }

    /// Row minima as an `n x 1` column; the gradient goes to the first minimiser.
    pub fn min_cols(&mut self, a: Var) -> Result<Var> {
        let m = self.value(a);
        if m.cols() == 0 {
            return Err(AutodiffError::ShapeMismatch {
                op: "min_cols",
                left: m.shape(),
                right: (m.rows(), 1),
            });
        }
        let data: Vec<f64> = (0..m.rows())
            .map(|r| m.row(r).iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        let value = Matrix::from_vec(m.rows(), 1, data);
        let rg = self.rg(a);
        Ok(self.push(Op::MinCols(a), value, rg))
    }

    /// Row `i` of the result is row `indices[i]` of `a`.
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let m = self.value(a);
        if let Some(&bad) = indices.iter().find(|&&i| i >= m.rows()) {
            return Err(AutodiffError::ShapeMismatch {
                op: "gather_rows",
                left: m.shape(),
                right: (bad, 0),
            });
        }
        let cols = m.cols();
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            data.extend_from_slice(m.row(i));
        }
        let value = Matrix::from_vec(indices.len(), cols, data);
        let rg = self.rg(a);
        Ok(self.push(Op::GatherRows(a, indices.to_vec()), value, rg))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let m = self.value(a);
        if start > end || end > m.cols() {
            return Err(AutodiffError::ShapeMismatch {
                op: "slice_cols",
                left: m.shape(),
                right: (start, end),
            });
        }
        let width = end - start;
        let mut data = Vec::with_capacity(m.rows() * width);
        for r in 0..m.rows() {
            data.extend_from_slice(&m.row(r)[start..end]);
        }
        let value = Matrix::from_vec(m.rows(), width, data);
        let rg = self.rg(a);
        Ok(self.push(Op::SliceCols(a, start, end), value, rg))
    }

    /// Reverse sweep from the scalar `loss`. Parameter gradient slots in
    /// `store` are zeroed first, then receive `d loss / d param`.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<()> {
        if self.backward_done {
            return Err(AutodiffError::DoubleBackward);
        }
        if self.shape(loss) != (1, 1) {
            return Err(AutodiffError::NonScalarLoss(self.shape(loss)));
        }
        self.backward_done = true;
        store.zero_grad();
        let n = self.nodes.len();
        self.grads = vec![None; n];
        if !self.rg(loss) {
            return Ok(());
        }
        self.grads[loss.0] = Some(Matrix::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let Some(g) = self.grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g);
            if let Some(pid) = self.nodes[idx].param {
                store.get_mut(pid).grad.add_assign(&g);
            }
            self.grads[idx] = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, g: Matrix) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut self.grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&mut self, idx: usize, g: &Matrix) {
        let op = self.nodes[idx].op.clone();
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(a, g.clone());
                self.accumulate(b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(a, g.clone());
                self.accumulate(b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                if self.rg(a) {
                    let ga = g.zip_map(self.value(b), |x, y| x * y);
                    self.accumulate(a, ga);
                }
                if self.rg(b) {
                    let gb = g.zip_map(self.value(a), |x, y| x * y);
                    self.accumulate(b, gb);
                }
            }
            Op::AddRow(a, row) => {
                self.accumulate(a, g.clone());
                if self.rg(row) {
                    let cols = g.cols();
                    let mut sums = vec![0.0; cols];
                    for chunk in g.data().chunks(cols.max(1)) {
                        for (s, x) in sums.iter_mut().zip(chunk) {
                            *s += x;
                        }
                    }
                    self.accumulate(row, Matrix::from_vec(1, cols, sums));
                }
            }
            Op::MatMul(a, b) => {
                if self.rg(a) {
                    let ga = g.matmul_t(self.value(b));
                    self.accumulate(a, ga);
                }
                if self.rg(b) {
                    let gb = self.value(a).t_matmul(g);
                    self.accumulate(b, gb);
                }
            }
            Op::MatMulT(a, w) => {
                if self.rg(a) {
                    let ga = g.matmul(self.value(w));
                    self.accumulate(a, ga);
                }
                if self.rg(w) {
                    let gw = g.t_matmul(self.value(a));
                    self.accumulate(w, gw);
                }
            }
            Op::Scale(a, c) => self.accumulate(a, g.map(|x| x * c)),
            Op::AddConst(a) => self.accumulate(a, g.clone()),
            Op::MulScalar(a, s) => {
                let c = self.value(s).item();
                if self.rg(a) {
                    self.accumulate(a, g.map(|x| x * c));
                }
                if self.rg(s) {
                    let gs = g
                        .data()
                        .iter()
                        .zip(self.value(a).data())
                        .map(|(x, y)| x * y)
                        .sum();
                    self.accumulate(s, Matrix::scalar(gs));
                }
            }
            Op::AddScalar(a, s) => {
                self.accumulate(a, g.clone());
                self.accumulate(s, Matrix::scalar(g.sum()));
            }
            Op::AddScaledIdentity(w, lambda) => {
                self.accumulate(w, g.clone());
                let trace = (0..g.rows()).map(|i| g.get(i, i)).sum();
                self.accumulate(lambda, Matrix::scalar(trace));
            }
            Op::Abs(a) => {
                let ga = g.zip_map(self.value(a), |gi, x| {
                    if x > 0.0 {
                        gi
                    } else if x < 0.0 {
                        -gi
                    } else {
                        0.0
                    }
                });
                self.accumulate(a, ga);
            }
            Op::PiecewisePow { x, small, large } => {
                let (s, l) = (self.value(small).item(), self.value(large).item());
                let xv = self.value(x);
                let out = &self.nodes[idx].value;
                let mut gx = Matrix::zeros(xv.rows(), xv.cols());
                let (mut gs, mut gl) = (0.0, 0.0);
                for ((gxi, (&xi, &yi)), &gi) in gx
                    .data_mut()
                    .iter_mut()
                    .zip(xv.data().iter().zip(out.data()))
                    .zip(g.data())
                {
                    let a = xi.abs();
                    let in_small = a < 1.0;
                    let e = if in_small { s } else { l };
                    // d/dx = e |x|^(e-1); at x = 0 it is 1 for e = 1 and 0 otherwise
                    // (the limit for e > 1, a finite subgradient choice for e < 1).
                    let dx = if a == 0.0 {
                        if e == 1.0 {
                            1.0
                        } else {
                            0.0
                        }
                    } else if e == 1.0 {
                        1.0
                    } else {
                        e * yi.abs() / a
                    };
                    *gxi = gi * dx;
                    // d/de = sgn(x) |x|^e ln|x|, zero at x = 0 and |x| = 1.
                    if a > 0.0 {
                        let de = yi * a.ln();
                        if in_small {
                            gs += gi * de;
                        } else {
                            gl += gi * de;
                        }
                    }
                }
                self.accumulate(x, gx);
                if small == large {
                    self.accumulate(small, Matrix::scalar(gs + gl));
                } else {
                    self.accumulate(small, Matrix::scalar(gs));
                    self.accumulate(large, Matrix::scalar(gl));
                }
            }
            Op::LeakyRelu(a, slope) => {
                let ga = g.zip_map(self.value(a), |gi, x| if x > 0.0 { gi } else { slope * gi });
                self.accumulate(a, ga);
            }
            Op::Relu(a) => {
                let ga = g.zip_map(self.value(a), |gi, x| if x > 0.0 { gi } else { 0.0 });
                self.accumulate(a, ga);
            }
            Op::Sigmoid(a, slope) => {
                let y = &self.nodes[idx].value;
                let ga = g.zip_map(y, |gi, yi| gi * slope * yi * (1.0 - yi));
                self.accumulate(a, ga);
            }
            Op::Exp(a) => {
                let ga = g.zip_map(&self.nodes[idx].value, |gi, yi| gi * yi);
                self.accumulate(a, ga);
            }
            Op::Log1p(a) => {
                let ga = g.zip_map(self.value(a), |gi, x| gi / (1.0 + x));
                self.accumulate(a, ga);
            }
            Op::Sqrt(a) => {
                let ga = g.zip_map(&self.nodes[idx].value, |gi, yi| {
                    if yi > 0.0 {
                        gi / (2.0 * yi)
                    } else {
                        0.0
                    }
                });
                self.accumulate(a, ga);
            }
            Op::Acos(a) => {
                let ga = g.zip_map(self.value(a), |gi, x| {
                    let d = 1.0 - x * x;
                    if d > 0.0 {
                        -gi / d.sqrt()
                    } else {
                        0.0
                    }
                });
                self.accumulate(a, ga);
            }
            Op::Square(a) => {
                let ga = g.zip_map(self.value(a), |gi, x| 2.0 * gi * x);
                self.accumulate(a, ga);
            }
            Op::Recip(a) => {
                let ga = g.zip_map(&self.nodes[idx].value, |gi, yi| -gi * yi * yi);
                self.accumulate(a, ga);
            }
            Op::Sum(a) => {
                let (r, c) = self.shape(a);
                self.accumulate(a, Matrix::filled(r, c, g.item()));
            }
            Op::Mean(a) => {
                let (r, c) = self.shape(a);
                let n = (r * c).max(1) as f64;
                self.accumulate(a, Matrix::filled(r, c, g.item() / n));
            }
            Op::SumCols(a) => {
                let (r, c) = self.shape(a);
                let mut ga = Matrix::zeros(r, c);
                for i in 0..r {
                    let gi = g.get(i, 0);
                    for j in 0..c {
                        ga.set(i, j, gi);
                    }
                }
                self.accumulate(a, ga);
            }
            Op::MinCols(a) => {
                let m = self.value(a);
                let mut ga = Matrix::zeros(m.rows(), m.cols());
                for i in 0..m.rows() {
                    let row = m.row(i);
                    let mut best = 0;
                    for (j, &x) in row.iter().enumerate() {
                        if x < row[best] {
                            best = j;
                        }
                    }
                    ga.set(i, best, g.get(i, 0));
                }
                self.accumulate(a, ga);
            }
            Op::GatherRows(a, indices) => {
                if self.rg(a) {
                    let (r, c) = self.shape(a);
                    let mut ga = Matrix::zeros(r, c);
                    for (k, &i) in indices.iter().enumerate() {
                        let src = &g.data()[k * c..(k + 1) * c];
                        let dst = &mut ga.data_mut()[i * c..(i + 1) * c];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                    self.accumulate(a, ga);
                }
            }
            Op::SliceCols(a, start, end) => {
                if self.rg(a) {
                    let (r, c) = self.shape(a);
                    let mut ga = Matrix::zeros(r, c);
                    let w = end - start;
                    for i in 0..r {
                        ga.data_mut()[i * c + start..i * c + end]
                            .copy_from_slice(&g.data()[i * w..(i + 1) * w]);
                    }
                    self.accumulate(a, ga);
                }
            }
        }
    }

    /// Smallest distance from any input of a kinked operation to its kink
    /// (0 for abs/relu/leaky-relu/sqrt, 0 and +-1 for the piecewise power).
    /// Finite-difference checks are only meaningful when this is not tiny.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in &self.nodes {
            let (input, near_one) = match &node.op {
                Op::Abs(a) | Op::LeakyRelu(a, _) | Op::Relu(a) | Op::Sqrt(a) => (*a, false),
                Op::PiecewisePow { x, small, large } => {
                    let s = self.value(*small).item();
                    let l = self.value(*large).item();
                    // s == l == 1 is the identity and has no kink.
                    if s == 1.0 && l == 1.0 {
                        continue;
                    }
                    (*x, s != l)
                }
                Op::MinCols(a) => {
                    let m = self.value(*a);
                    for r in 0..m.rows() {
                        let mut row: Vec<f64> = m.row(r).to_vec();
                        row.sort_by(f64::total_cmp);
                        if row.len() > 1 {
                            margin = margin.min(row[1] - row[0]);
                        }
                    }
                    continue;
                }
                _ => continue,
            };
            for &x in self.value(input).data() {
                margin = margin.min(x.abs());
                if near_one {
                    margin = margin.min((x.abs() - 1.0).abs());
                }
            }
        }
        margin
    }

    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
