use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GraphError, Result};

/// A directed weighted edge `source -> target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Simple weighted digraph with one feature row per node.
///
/// Construction validates that there are no self-loops, no duplicate ordered
/// pairs, and that every weight is strictly positive. Acyclicity is *not*
/// required here; use [`super::is_dag`] where the caller needs it.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    node_count: usize,
    features: Vec<Vec<f64>>,
    edges: Vec<Edge>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    node_count: usize,
    features: Vec<Vec<f64>>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<u8>>,
    distances: Vec<Vec<Option<f64>>>,
}

impl WeightedDigraph {
    pub fn new(node_count: usize, features: Vec<Vec<f64>>, edges: Vec<Edge>) -> Result<Self> {
        if features.len() != node_count {
            return Err(GraphError::FeatureShape {
                rows: features.len(),
                width: features.first().map_or(0, Vec::len),
                expected: node_count,
            });
        }
        let width = features.first().map_or(0, Vec::len);
        if features.iter().any(|row| row.len() != width) {
            return Err(GraphError::FeatureShape {
                rows: features.len(),
                width,
                expected: node_count,
            });
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for e in &edges {
            for node in [e.source, e.target] {
                if node >= node_count {
                    return Err(GraphError::NodeOutOfRange {
                        node,
                        count: node_count,
                    });
                }
            }
            if e.source == e.target {
                return Err(GraphError::SelfLoop(e.source));
            }
            if !(e.weight > 0.0) || !e.weight.is_finite() {
                return Err(GraphError::NonPositiveWeight(e.source, e.target, e.weight));
            }
            if !seen.insert((e.source, e.target)) {
                return Err(GraphError::DuplicateEdge(e.source, e.target));
            }
        }
        Ok(Self {
            node_count,
            features,
            edges,
        })
    }

    /// Graph whose node features are the one-hot identity rows.
    pub fn with_identity_features(node_count: usize, edges: Vec<Edge>) -> Result<Self> {
        let features = (0..node_count)
            .map(|i| (0..node_count).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(node_count, features, edges)
    }

    /// Convenience constructor from `(u, v, w)` triples.
    pub fn from_triples(
        node_count: usize,
        features: Vec<Vec<f64>>,
        triples: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let edges = triples
            .iter()
            .map(|&(source, target, weight)| Edge {
                source,
                target,
                weight,
            })
            .collect();
        Self::new(node_count, features, edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn set_features(&mut self, features: Vec<Vec<f64>>) -> Result<()> {
        let edges = std::mem::take(&mut self.edges);
        *self = Self::new(self.node_count, features, edges)?;
        Ok(())
    }

    /// Out-neighbour lists.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            out[e.source].push(e.target);
        }
        out
    }

    /// Row-major binary adjacency matrix `A`.
    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let mut a = vec![vec![false; self.node_count]; self.node_count];
        for e in &self.edges {
            a[e.source][e.target] = true;
        }
        a
    }

    /// Target distance matrix `D`: zero on the diagonal, the edge weight
    /// where `A_uv = 1`, absent elsewhere.
    pub fn distance_targets(&self) -> Vec<Vec<Option<f64>>> {
        let mut d = vec![vec![None; self.node_count]; self.node_count];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = Some(0.0);
        }
        for e in &self.edges {
            d[e.source][e.target] = Some(e.weight);
        }
        d
    }

    pub fn to_json(&self) -> Result<String> {
        let json = GraphJson {
            node_count: self.node_count,
            features: self.features.clone(),
            edges: self.edges.clone(),
            adjacency: self
                .adjacency()
                .into_iter()
                .map(|row| row.into_iter().map(u8::from).collect())
                .collect(),
            distances: self.distance_targets(),
        };
        Ok(serde_json::to_string_pretty(&json)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let json: GraphJson = serde_json::from_str(text)?;
        Self::new(json.node_count, json.features, json.edges)
    }

    /// Edge list as `u<TAB>v<TAB>w` lines.
    pub fn edge_list_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            // `{}` on f64 is the shortest string that parses back to the same bits.
            let _ = writeln!(out, "{}\t{}\t{}", e.source, e.target, e.weight);
        }
        out
    }

    /// Features as CSV, row `i` = node `i`.
    pub fn features_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.features {
            let line: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Vec<Edge>> {
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(GraphError::Parse {
                    line: idx + 1,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            let parse_id = |s: &str| {
                s.trim().parse::<usize>().map_err(|e| GraphError::Parse {
                    line: idx + 1,
                    message: format!("bad node id `{s}`: {e}"),
                })
            };
            let source = parse_id(fields[0])?;
            let target = parse_id(fields[1])?;
            let weight = fields[2]
                .trim()
                .parse::<f64>()
                .map_err(|e| GraphError::Parse {
                    line: idx + 1,
                    message: format!("bad weight `{}`: {e}", fields[2]),
                })?;
            edges.push(Edge {
                source,
                target,
                weight,
            });
        }
        Ok(edges)
    }

    pub fn parse_features_csv(text: &str) -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| GraphError::Parse {
                        line: idx + 1,
                        message: format!("bad feature `{s}`: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(rows)
    }

    /// Loads an edge-list file plus an optional feature CSV. Without features,
    /// the node count is inferred from the largest id and one-hot features are used.
    pub fn load(edge_path: &Path, feature_path: Option<&Path>) -> Result<Self> {
        let edges = Self::parse_edge_list(&fs::read_to_string(edge_path)?)?;
        match feature_path {
            Some(path) => {
                let features = Self::parse_features_csv(&fs::read_to_string(path)?)?;
                let k = features.len();
                Self::new(k, features, edges)
            }
            None => {
                let k = edges
                    .iter()
                    .map(|e| e.source.max(e.target) + 1)
                    .max()
                    .unwrap_or(0);
                Self::with_identity_features(k, edges)
            }
        }
    }

    pub fn save(&self, edge_path: &Path, feature_path: &Path) -> Result<()> {
        fs::write(edge_path, self.edge_list_tsv())?;
        fs::write(feature_path, self.features_csv())?;
        Ok(())
    }
}

/// Replaces every edge weight with the cosine similarity of its endpoint
/// features, clamped into `[eps, 1]` so the weights stay strictly positive.
pub fn cosine_edge_weights(graph: &WeightedDigraph, eps: f64) -> Result<WeightedDigraph> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(GraphError::InvalidArgument(format!(
            "clamp floor {eps} must lie in (0, 1]"
        )));
    }
    let feats = graph.features();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let edges = graph
        .edges()
        .iter()
        .map(|e| {
            let (a, b) = (&feats[e.source], &feats[e.target]);
            let denom = norm(a) * norm(b);
            let cos = if denom > 0.0 {
                a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / denom
            } else {
                0.0
            };
            Edge {
                weight: cos.clamp(eps, 1.0),
                ..*e
            }
        })
        .collect();
    WeightedDigraph::new(graph.node_count(), feats.to_vec(), edges)
}

/// Symmetrized weights `W(u,v) = max(W_D(u,v), W_D(v,u))`; absent where
/// neither direction has an edge.
#[derive(Debug, Clone, PartialEq)]
pub struct UndirectedView {
    n: usize,
    weights: Vec<Option<f64>>,
}

impl UndirectedView {
    pub fn from_digraph(graph: &WeightedDigraph) -> Self {
        let n = graph.node_count();
        let mut weights = vec![None; n * n];
        for e in graph.edges() {
            for (a, b) in [(e.source, e.target), (e.target, e.source)] {
                let slot = &mut weights[a * n + b];
                *slot = Some(slot.map_or(e.weight, |w: f64| w.max(e.weight)));
            }
        }
        Self { n, weights }
    }

    /// Builds a view from explicit undirected `(u, v, w)` entries.
    /// Weights are only checked for sign later, by the shortest-path routine.
    pub fn from_undirected(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut weights = vec![None; n * n];
        for &(u, v, w) in entries {
            for node in [u, v] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, count: n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            for (a, b) in [(u, v), (v, u)] {
                let slot = &mut weights[a * n + b];
                *slot = Some(slot.map_or(w, |old: f64| old.max(w)));
            }
        }
        Ok(Self { n, weights })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        if u == v {
            Some(0.0)
        } else {
            self.weights[u * self.n + v]
        }
    }

    pub fn neighbours(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n).filter_map(move |v| {
            if v == u {
                None
            } else {
                self.weights[u * self.n + v].map(|w| (v, w))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(k: usize) -> WeightedDigraph {
        let triples: Vec<_> = (0..k - 1).map(|i| (i, i + 1, 1.0)).collect();
        WeightedDigraph::from_triples(k, vec![vec![0.0]; k], &triples).unwrap()
    }

    #[test]
    fn rejects_self_loop_duplicates_and_bad_weights() {
        let f = vec![vec![0.0]; 3];
        assert!(matches!(
            WeightedDigraph::from_triples(3, f.clone(), &[(1, 1, 1.0)]),
            Err(GraphError::SelfLoop(1))
        ));
        assert!(matches!(
            WeightedDigraph::from_triples(3, f.clone(), &[(0, 1, 1.0), (0, 1, 2.0)]),
            Err(GraphError::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            WeightedDigraph::from_triples(3, f.clone(), &[(0, 1, 0.0)]),
            Err(GraphError::NonPositiveWeight(..))
        ));
        assert!(matches!(
            WeightedDigraph::from_triples(3, f, &[(0, 5, 1.0)]),
            Err(GraphError::NodeOutOfRange { node: 5, .. })
        ));
    }

    #[test]
    fn adjacency_and_targets() {
        let g = chain(3);
        let a = g.adjacency();
        assert!(a[0][1] && a[1][2] && !a[1][0] && !a[0][2]);
        let d = g.distance_targets();
        assert_eq!(d[0][0], Some(0.0));
        assert_eq!(d[0][1], Some(1.0));
        assert_eq!(d[0][2], None);
    }

    #[test]
    fn symmetrization_takes_max() {
        let g = WeightedDigraph::from_triples(2, vec![vec![0.0]; 2], &[(0, 1, 1.0), (1, 0, 3.0)])
            .unwrap();
        let view = UndirectedView::from_digraph(&g);
        assert_eq!(view.weight(0, 1), Some(3.0));
        assert_eq!(view.weight(1, 0), Some(3.0));
        assert_eq!(view.weight(1, 1), Some(0.0));
    }

    #[test]
    fn tsv_and_csv_round_trip_bytes() {
        let g = WeightedDigraph::from_triples(
            3,
            vec![vec![0.1, 0.2], vec![1.0 / 3.0, 2.5], vec![-0.0, 7.0]],
            &[(0, 1, 0.123456789012345), (1, 2, 1.0 / 7.0)],
        )
        .unwrap();
        let tsv = g.edge_list_tsv();
        let csv = g.features_csv();
        let edges = WeightedDigraph::parse_edge_list(&tsv).unwrap();
        let feats = WeightedDigraph::parse_features_csv(&csv).unwrap();
        let back = WeightedDigraph::new(3, feats, edges).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.edge_list_tsv(), tsv);
        assert_eq!(back.features_csv(), csv);
        let json_back = WeightedDigraph::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(json_back, g);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = WeightedDigraph::parse_edge_list("0\t1\t1.0\n1\t2\n").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 2, .. }));
    }

    #[test]
    fn json_marks_absent_distances_as_null() {
        let json = chain(2).to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(v["distances"][1][0].is_null());
        assert_eq!(v["adjacency"][0][1], 1);
    }

    #[test]
    fn cosine_weights_are_clamped() {
        let g = WeightedDigraph::from_triples(
            3,
            vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![1.0, 1.0]],
            &[(0, 1, 1.0), (0, 2, 1.0)],
        )
        .unwrap();
        let w = cosine_edge_weights(&g, 1e-3).unwrap();
        assert_eq!(w.edges()[0].weight, 1e-3);
        assert!((w.edges()[1].weight - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(cosine_edge_weights(&g, 0.0).is_err());
    }
}
