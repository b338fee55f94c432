use super::{Result, TrainConfig, TrainError};
use crate::autodiff::{Matrix, ParamStore, Tape, Var};
use crate::baselines::{BaselineConfig, BaselineModel, GeometryKind};
use crate::checkpoint::Checkpoint;
use crate::nst::{NeuralSpacetime, NstConfig};

/// Any trainable embedding: a neural spacetime or a baseline geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Nst(NeuralSpacetime),
    Baseline(BaselineModel),
}

impl Model {
    /// Fresh seeded model for `config` on inputs of width `input_dim`.
    pub fn from_config(config: &TrainConfig, input_dim: usize) -> Result<Self> {
        Ok(match config.geometry {
            GeometryKind::Nst => Model::Nst(NeuralSpacetime::init(
                NstConfig {
                    input_dim,
                    space_dim: config.space_dim,
                    time_dim: config.time_dim,
                    encoder_depth: config.encoder_depth,
                    encoder_width: config.encoder_width,
                    metric_depth: config.metric_depth,
                    order_depth: config.order_depth,
                },
                config.seed,
            )?),
            g => Model::Baseline(BaselineModel::init(
                BaselineConfig {
                    geometry: g,
                    input_dim,
                    dim: config.space_dim + config.time_dim,
                    encoder_depth: config.encoder_depth,
                    encoder_width: config.encoder_width,
                    radius: config.radius,
                    snowflake_depth: config.metric_depth,
                    snowflake_width: config.space_dim + config.time_dim,
                },
                config.seed,
            )?),
        })
    }

    pub fn geometry(&self) -> GeometryKind {
        match self {
            Model::Nst(_) => GeometryKind::Nst,
            Model::Baseline(b) => b.geometry(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::Nst(m) => m.config().input_dim,
            Model::Baseline(b) => b.config().input_dim,
        }
    }

    pub fn time_dim(&self) -> usize {
        match self {
            Model::Nst(m) => m.config().time_dim,
            Model::Baseline(b) => b.time_dim(),
        }
    }

    pub fn store(&self) -> &ParamStore {
        match self {
            Model::Nst(m) => m.store(),
            Model::Baseline(b) => b.store(),
        }
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        match self {
            Model::Nst(m) => m.store_mut(),
            Model::Baseline(b) => b.store_mut(),
        }
    }

    pub fn embed(&self, tape: &mut Tape, features: Var) -> Result<Var> {
        Ok(match self {
            Model::Nst(m) => m.embed(tape, features)?,
            Model::Baseline(b) => b.embed(tape, features)?,
        })
    }

    /// Distances between matching rows; see [`BaselineModel::pair_distances`]
    /// for the meaning of the row list.
    pub fn pair_distances(
        &self,
        tape: &mut Tape,
        eu: Var,
        ev: Var,
    ) -> Result<(Var, Option<Vec<usize>>)> {
        Ok(match self {
            Model::Nst(m) => (m.pair_distances(tape, eu, ev)?, None),
            Model::Baseline(b) => b.pair_distances(tape, eu, ev)?,
        })
    }

    /// `n x T` time codes, or `None` when the geometry has no time.
    pub fn time_codes(&self, tape: &mut Tape, emb: Var) -> Result<Option<Var>> {
        Ok(match self {
            Model::Nst(m) if m.config().time_dim == 0 => None,
            Model::Nst(m) => Some(m.time_codes(tape, emb)?),
            Model::Baseline(b) => b.time_codes(tape, emb)?,
        })
    }

    /// Embeddings, per-pair distances (`None` when undefined) and time codes
    /// evaluated without recording gradients.
    pub fn evaluate_pairs(
        &self,
        features: &Matrix,
        pairs: &[(usize, usize)],
    ) -> Result<(Vec<Option<f64>>, Option<Matrix>)> {
        if features.cols() != self.input_dim() {
            return Err(TrainError::FeatureWidth {
                expected: self.input_dim(),
                found: features.cols(),
            });
        }
        let mut tape = Tape::new();
        let x = tape.constant(features.clone());
        let emb = self.embed(&mut tape, x)?;
        let us: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let vs: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let eu = tape.gather_rows(emb, &us)?;
        let ev = tape.gather_rows(emb, &vs)?;
        let (d, rows) = self.pair_distances(&mut tape, eu, ev)?;
        let values = tape.value(d).data().to_vec();
        let distances = match rows {
            None => values.into_iter().map(Some).collect(),
            Some(rows) => {
                let mut out = vec![None; pairs.len()];
                for (r, x) in rows.into_iter().zip(values) {
                    out[r] = Some(x);
                }
                out
            }
        };
        let times = self
            .time_codes(&mut tape, emb)?
            .map(|t| tape.value(t).clone());
        Ok((distances, times))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        match self {
            Model::Nst(m) => m.to_checkpoint(),
            Model::Baseline(b) => b.to_checkpoint(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Ok(if ck.geometry == GeometryKind::Nst.name() {
            Model::Nst(NeuralSpacetime::from_checkpoint(ck)?)
        } else {
            Model::Baseline(BaselineModel::from_checkpoint(ck)?)
        })
    }

    pub fn to_json(&self) -> String {
        self.to_checkpoint().to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::from_json(text)?)
    }
}
