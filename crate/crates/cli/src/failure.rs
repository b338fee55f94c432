use std::fmt;

use nst_core::baselines::BaselineError;
use nst_core::checkpoint::CheckpointError;
use nst_core::graph::GraphError;
use nst_core::nst::NstError;
use nst_core::training::TrainError;

pub const CONSTRAINT: u8 = 2;
pub const MALFORMED: u8 = 3;

/// Why a command stopped. Well-formed input that breaks a model or graph
/// constraint exits with 2; unreadable or unparsable input exits with 3.
#[derive(Debug)]
pub enum Failure {
    Constraint(String),
    Malformed(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Constraint(_) => CONSTRAINT,
            Failure::Malformed(_) => MALFORMED,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Failure::Malformed(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Constraint(m) | Failure::Malformed(m) => f.write_str(m),
        }
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        let msg = e.to_string();
        match e {
            GraphError::Parse { .. } | GraphError::Io(_) | GraphError::Json(_) => Failure::Malformed(msg),
            _ => Failure::Constraint(msg),
        }
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Infeasible { .. } => Failure::Constraint(e.to_string()),
            _ => Failure::Malformed(e.to_string()),
        }
    }
}

impl From<NstError> for Failure {
    fn from(e: NstError) -> Self {
        match e {
            NstError::Checkpoint(c) => c.into(),
            other => Failure::Constraint(other.to_string()),
        }
    }
}

impl From<BaselineError> for Failure {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::Checkpoint(c) => c.into(),
            other => Failure::Constraint(other.to_string()),
        }
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Graph(g) => g.into(),
            TrainError::Checkpoint(c) => c.into(),
            TrainError::Nst(n) => n.into(),
            TrainError::Baseline(b) => b.into(),
            other => Failure::Constraint(other.to_string()),
        }
    }
}
