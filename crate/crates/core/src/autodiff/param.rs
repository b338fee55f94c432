use serde::{Deserialize, Serialize};

use super::Matrix;

/// Feasible set of a trainable parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "bound", rename_all = "snake_case")]
pub enum Constraint {
    Free,
    /// Every entry must stay `>= bound`.
    LowerBound(f64),
    /// Every entry must stay in `[lo, hi]`.
    Interval(f64, f64),
}

impl Constraint {
    pub fn project(self, value: &mut Matrix) {
        let (lo, hi) = match self {
            Constraint::Free => return,
            Constraint::LowerBound(lo) => (lo, f64::INFINITY),
            Constraint::Interval(lo, hi) => (lo, hi),
        };
        for x in value.data_mut() {
            *x = x.clamp(lo, hi);
        }
    }

    pub fn is_satisfied(self, value: &Matrix) -> bool {
        match self {
            Constraint::Free => true,
            Constraint::LowerBound(lo) => value.data().iter().all(|&x| x >= lo),
            Constraint::Interval(lo, hi) => value.data().iter().all(|&x| (lo..=hi).contains(&x)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    pub constraint: Constraint,
}

/// Owns every trainable tensor of a model together with its gradient slot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix, constraint: Constraint) -> ParamId {
        let grad = Matrix::zeros(value.rows(), value.cols());
        self.params.push(Param {
            name: name.into(),
            value,
            grad,
            constraint,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Clamps every constrained parameter back into its feasible set.
    pub fn project(&mut self) {
        for p in &mut self.params {
            p.constraint.project(&mut p.value);
        }
    }

    pub fn all_feasible(&self) -> bool {
        self.params.iter().all(|p| p.constraint.is_satisfied(&p.value))
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.grad.norm_sq())
            .sum::<f64>()
            .sqrt()
    }
}
