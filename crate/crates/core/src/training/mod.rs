//! Losses, the AdamW optimizer, the training loop and evaluation reports.

mod loss;
mod model;
mod optim;
mod report;
mod train;


use serde::{Deserialize, Serialize};

pub use loss::{
    causality_loss, causality_loss_value, causality_sum, distance_loss, distance_loss_value,
    distortion_stats, global_causality_loss, steep_sigmoid, total_correct, DistortionStats,
    STEEPNESS,
};
pub use model::Model;
pub use optim::{AdamW, AdamWConfig};
pub use report::{evaluate, evaluate_targets, EmbeddingReport, PairDistortion};
pub use train::{
    all_pair_targets, antichain_pairs, closure_pairs, edge_targets, loss_curve_csv, loss_kink_margin,
    record_loss, train, train_model, LossPoint, LossTerms, RecordedLoss, TrainOutcome,
};

use crate::autodiff::AutodiffError;
use crate::baselines::{BaselineError, GeometryKind};
use crate::checkpoint::CheckpointError;
use crate::graph::GraphError;
use crate::nst::NstError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("graph has no edges")]
    EmptyEdgeSet,
    #[error("the no-causality term needs at least 2 time dimensions, got {0}")]
    TooFewTimeDims(usize),
    #[error("features have width {found}, model expects {expected}")]
    FeatureWidth { expected: usize, found: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nst(#[from] NstError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CausalityMode {
    /// Steep-sigmoid penalty on one-hop edges, masked by correctness.
    Local,
    /// ReLU penalty on the whole closure plus an antichain margin.
    Global,
}

/// Which node pairs supply distance targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    /// Edge weights on `A_uv = 1` pairs.
    Edges,
    /// Shortest-path distances between every unordered pair in the
    /// undirected graph.
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "size")]
pub enum BatchMode {
    Full,
    /// Shuffled mini-batches of this many target pairs per step.
    Pairs(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub geometry: GeometryKind,
    pub space_dim: usize,
    pub time_dim: usize,
    pub encoder_depth: usize,
    pub encoder_width: usize,
    pub metric_depth: usize,
    pub order_depth: usize,
    pub lr: f64,
    pub epochs: usize,
    pub clip: f64,
    pub seed: u64,
    pub batch: BatchMode,
    pub causality: CausalityMode,
    pub targets: TargetMode,
    /// Antichain margin for the global causality loss.
    pub epsilon: f64,
    /// Swap ReLU for the steep sigmoid in the global causality loss.
    pub smooth: bool,
    pub distance_weight: f64,
    pub causality_weight: f64,
    /// De Sitter radius.
    pub radius: f64,
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryKind::Nst,
            space_dim: 10,
            time_dim: 10,
            encoder_depth: 10,
            encoder_width: 100,
            metric_depth: 4,
            order_depth: 4,
            lr: 1e-4,
            epochs: 5000,
            clip: 1.0,
            seed: 0,
            batch: BatchMode::Full,
            causality: CausalityMode::Local,
            targets: TargetMode::Edges,
            epsilon: 0.1,
            smooth: false,
            distance_weight: 1.0,
            causality_weight: 1.0,
            radius: 1.0,
            deterministic: false,
        }
    }
}

impl TrainConfig {
    pub fn new(space_dim: usize, time_dim: usize) -> Self {
        Self {
            space_dim,
            time_dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.space_dim == 0 {
            return bad("space dimension must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.clip > 0.0) {
            return bad(format!("clip norm must be positive, got {}", self.clip));
        }
        if let BatchMode::Pairs(0) = self.batch {
            return bad("batch size must be positive".into());
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon must be non-negative, got {}", self.epsilon));
        }
        if !(self.distance_weight >= 0.0 && self.causality_weight >= 0.0) {
            return bad("loss weights must be non-negative".into());
        }
        Ok(())
    }
}
