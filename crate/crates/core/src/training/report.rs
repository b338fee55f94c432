use serde::{Deserialize, Serialize};

use super::loss::{causality_loss_value, distance_loss_value, distortion_stats, total_correct};
use super::{Model, Result};
use crate::autodiff::Matrix;
use crate::baselines::GeometryKind;
use crate::graph::{dag_to_poset, WeightedDigraph};

/// Predicted against true distance for one target pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistortion {
    pub source: usize,
    pub target: usize,
    pub true_distance: f64,
    /// `None` when the geometry leaves the pair undefined.
    pub predicted: Option<f64>,
    /// `predicted / true_distance`; `None` when undefined or not finite.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub geometry: GeometryKind,
    pub pairs: Vec<PairDistortion>,
    pub avg_distortion: Option<f64>,
    pub std_distortion: Option<f64>,
    pub max_distortion: Option<f64>,
    /// Fraction of edges whose endpoints satisfy the learned order; `None`
    /// without time coordinates or edges.
    pub directionality: Option<f64>,
    /// Same fraction over every pair of the transitive closure.
    pub closure_directionality: Option<f64>,
    /// Mean squared error over defined target pairs.
    pub final_distance_loss: f64,
    /// Local causality loss on edges (0 without time coordinates).
    pub final_causality_loss: f64,
    /// Pairs with a non-finite ratio. Excluded from the statistics.
    pub outliers: usize,
    /// Pairs the geometry cannot measure. Excluded from the statistics.
    pub undefined: usize,
    pub wall_time_secs: f64,
}

impl EmbeddingReport {
    /// Copy with the wall time cleared, for comparing runs.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_secs: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Report over the graph's edges.
pub fn evaluate(model: &Model, graph: &WeightedDigraph) -> Result<EmbeddingReport> {
    evaluate_targets(model, graph, &super::edge_targets(graph))
}

/// Report over arbitrary `(u, v, true distance)` targets; order metrics
/// always use the graph's edges and closure.
pub fn evaluate_targets(
    model: &Model,
    graph: &WeightedDigraph,
    targets: &[(usize, usize, f64)],
) -> Result<EmbeddingReport> {
    let features = Matrix::from_rows(graph.features());
    let pairs: Vec<(usize, usize)> = targets.iter().map(|t| (t.0, t.1)).collect();
    let (predicted, times) = model.evaluate_pairs(&features, &pairs)?;

    let mut rows = Vec::with_capacity(targets.len());
    let (mut ratios, mut outliers, mut undefined) = (Vec::new(), 0, 0);
    let (mut pred_ok, mut true_ok) = (Vec::new(), Vec::new());
    for (&(source, target, truth), pred) in targets.iter().zip(predicted) {
        let ratio = pred.map(|p| p / truth).filter(|r| r.is_finite());
        match (pred, ratio) {
            (None, _) => undefined += 1,
            (Some(_), None) => outliers += 1,
            (Some(p), Some(r)) => {
                ratios.push(r);
                pred_ok.push(p);
                true_ok.push(truth);
            }
        }
        rows.push(PairDistortion {
            source,
            target,
            true_distance: truth,
            predicted: pred,
            ratio,
        });
    }
    let stats = distortion_stats(&ratios);

    let edges: Vec<(usize, usize)> = graph.edges().iter().map(|e| (e.source, e.target)).collect();
    let (mut directionality, mut closure_directionality, mut causality) = (None, None, 0.0);
    if let Some(times) = &times {
        if !edges.is_empty() {
            directionality = Some(total_correct(times, &edges)?);
            causality = causality_loss_value(times, &edges)?;
            let closure = dag_to_poset(graph)?.strict_pairs();
            closure_directionality = Some(total_correct(times, &closure)?);
        }
    }

    Ok(EmbeddingReport {
        geometry: model.geometry(),
        pairs: rows,
        avg_distortion: stats.as_ref().map(|s| s.avg),
        std_distortion: stats.as_ref().map(|s| s.std),
        max_distortion: stats.as_ref().map(|s| s.max),
        directionality,
        closure_directionality,
        final_distance_loss: distance_loss_value(&pred_ok, &true_ok),
        final_causality_loss: causality,
        outliers,
        undefined,
        wall_time_secs: 0.0,
    })
}
