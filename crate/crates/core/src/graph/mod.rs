//! Discrete structures: weighted digraphs, posets induced by DAGs, graph
//! metrics, and the synthetic generators used by the experiments.

mod digraph;
mod generate;
mod metric;
mod poset;

pub use digraph::{cosine_edge_weights, Edge, UndirectedView, WeightedDigraph};
pub use generate::{
    generate_random_dag, generate_tree, layered_layout, spring_layout, synthetic_metric,
    SyntheticDag, SyntheticMetric, TreeGraph, SPRING_ITERATIONS,
};
pub use metric::{
    diameter, doubling_constant_estimate, separation, shortest_paths, DistanceMatrix,
    FiniteMetric, MAX_DOUBLING_POINTS,
};
pub use poset::{dag_to_poset, hasse_reduction, is_dag, poset_width, topological_order, Poset};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(usize, usize),
    #[error("edge {0} -> {1} has non-positive weight {2}")]
    NonPositiveWeight(usize, usize, f64),
    #[error("node {node} out of range for graph with {count} nodes")]
    NodeOutOfRange { node: usize, count: usize },
    #[error("graph contains a directed cycle")]
    CyclicInput,
    #[error("negative weight {0}")]
    NegativeWeight(f64),
    #[error("{0} points exceed the brute-force limit of {1}")]
    TooLarge(usize, usize),
    #[error("unknown synthetic metric `{0}`")]
    UnknownMetric(String),
    #[error("relation is not a partial order: {0}")]
    NotAPoset(String),
    #[error("metric space is disconnected")]
    Disconnected,
    #[error("feature matrix has {rows} rows of width {width}, expected {expected} rows")]
    FeatureShape {
        rows: usize,
        width: usize,
        expected: usize,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, GraphError>;
