use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{topological_order, Edge, GraphError, Result, WeightedDigraph};

/// The five planar distance functions used for synthetic DAG weights.
/// Each is a function of the Euclidean distance `r = |x - y|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticMetric {
    /// `r^0.5 * log(1 + r)^0.5`
    M1,
    /// `r^0.1 * log(1 + r)^0.9`
    M2,
    /// `1 - 1 / (1 + r^0.5)`
    M3,
    /// `1 - exp(-(r - 1) / log r)`
    M4,
    /// `1 - 1 / (1 + r^0.2 + r^0.5)`
    M5,
}

impl SyntheticMetric {
    pub const ALL: [SyntheticMetric; 5] = [Self::M1, Self::M2, Self::M3, Self::M4, Self::M5];

    pub fn eval_radius(self, r: f64) -> f64 {
        if r == 0.0 {
            return 0.0;
        }
        match self {
            Self::M1 => r.sqrt() * r.ln_1p().sqrt(),
            Self::M2 => r.powf(0.1) * r.ln_1p().powf(0.9),
            Self::M3 => 1.0 - 1.0 / (1.0 + r.sqrt()),
            Self::M4 => {
                // (r - 1) / ln r -> 1 as r -> 1.
                let ratio = if (r - 1.0).abs() < 1e-12 {
                    1.0
                } else if r.is_infinite() {
                    f64::INFINITY
                } else {
                    (r - 1.0) / r.ln()
                };
                1.0 - (-ratio).exp()
            }
            Self::M5 => 1.0 - 1.0 / (1.0 + r.powf(0.2) + r.sqrt()),
        }
    }

    pub fn eval(self, x: [f64; 2], y: [f64; 2]) -> f64 {
        self.eval_radius(((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt())
    }
}

impl fmt::Display for SyntheticMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::M1 => "m1",
            Self::M2 => "m2",
            Self::M3 => "m3",
            Self::M4 => "m4",
            Self::M5 => "m5",
        };
        f.write_str(s)
    }
}

impl FromStr for SyntheticMetric {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "m1" | "1" => Ok(Self::M1),
            "m2" | "2" => Ok(Self::M2),
            "m3" | "3" => Ok(Self::M3),
            "m4" | "4" => Ok(Self::M4),
            "m5" | "5" => Ok(Self::M5),
            _ => Err(GraphError::UnknownMetric(s.to_string())),
        }
    }
}

/// Evaluates a synthetic metric by name.
pub fn synthetic_metric(name: &str, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
    Ok(name.parse::<SyntheticMetric>()?.eval(x, y))
}

/// A random DAG with its planar coordinates (also stored as node features).
#[derive(Debug, Clone)]
pub struct SyntheticDag {
    pub graph: WeightedDigraph,
    pub coords: Vec<[f64; 2]>,
}

/// Random DAG on `k` nodes whose topological order is `0, 1, ..., k-1`.
///
/// Each pair `i < j` becomes the edge `i -> j` with probability `p`. Nodes
/// are placed by [`layered_layout`] and each edge weight is `metric` applied
/// to its endpoint coordinates. Features are the coordinates.
pub fn generate_random_dag(
    k: usize,
    p: f64,
    metric: SyntheticMetric,
    seed: u64,
) -> Result<SyntheticDag> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GraphError::InvalidArgument(format!(
            "edge probability {p} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            // Always draw so the stream does not depend on p's edge cases.
            let draw: f64 = rng.gen();
            if draw < p {
                pairs.push((i, j));
            }
        }
    }
    let unweighted: Vec<Edge> = pairs
        .iter()
        .map(|&(source, target)| Edge {
            source,
            target,
            weight: 1.0,
        })
        .collect();
    let skeleton = WeightedDigraph::new(k, vec![Vec::new(); k], unweighted)?;
    let coords = layered_layout(&skeleton)?;
    let edges = pairs
        .into_iter()
        .map(|(source, target)| Edge {
            source,
            target,
            weight: metric.eval(coords[source], coords[target]),
        })
        .collect();
    let features = coords.iter().map(|c| c.to_vec()).collect();
    let graph = WeightedDigraph::new(k, features, edges)?;
    Ok(SyntheticDag { graph, coords })
}

/// Deterministic layered drawing in `[0, 1]^2`.
///
/// Layer = longest path from a source; layers run top (y = 1) to bottom
/// (y = 0). Within a layer nodes are ordered by the mean x of their
/// predecessors, ties broken by id, and spread evenly over (0, 1).
pub fn layered_layout(graph: &WeightedDigraph) -> Result<Vec<[f64; 2]>> {
    let n = graph.node_count();
    let order = topological_order(graph).ok_or(GraphError::CyclicInput)?;
    let mut preds = vec![Vec::new(); n];
    for e in graph.edges() {
        preds[e.target].push(e.source);
    }
    let mut layer = vec![0usize; n];
    for &v in &order {
        layer[v] = preds[v].iter().map(|&u| layer[u] + 1).max().unwrap_or(0);
    }
    let depth = layer.iter().copied().max().unwrap_or(0);
    let mut coords = vec![[0.5, 0.5]; n];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); depth + 1];
    for &v in &order {
        members[layer[v]].push(v);
    }
    for (l, nodes) in members.iter_mut().enumerate() {
        let mut keyed: Vec<(f64, usize)> = nodes
            .iter()
            .map(|&v| {
                let key = if preds[v].is_empty() {
                    v as f64 / n.max(1) as f64
                } else {
                    preds[v].iter().map(|&u| coords[u][0]).sum::<f64>() / preds[v].len() as f64
                };
                (key, v)
            })
            .collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let count = keyed.len() as f64;
        let y = if depth == 0 {
            0.5
        } else {
            1.0 - l as f64 / depth as f64
        };
        for (pos, &(_, v)) in keyed.iter().enumerate() {
            coords[v] = [(pos as f64 + 1.0) / (count + 1.0), y];
        }
    }
    Ok(coords)
}

/// A complete tree with unit weights and spring-layout coordinates.
#[derive(Debug, Clone)]
pub struct TreeGraph {
    pub graph: WeightedDigraph,
    pub coords: Vec<[f64; 2]>,
}

pub const SPRING_ITERATIONS: usize = 50;

/// Complete `branching`-ary tree on `n` nodes in breadth-first numbering
/// (parent of `i` is `(i - 1) / branching`), edges directed parent to child.
pub fn generate_tree(branching: usize, n: usize, seed: u64) -> Result<TreeGraph> {
    if !(branching == 2 || branching == 3) {
        return Err(GraphError::InvalidArgument(format!(
            "branching factor {branching} must be 2 or 3"
        )));
    }
    if n == 0 {
        return Err(GraphError::InvalidArgument("tree needs at least one node".into()));
    }
    let edges: Vec<Edge> = (1..n)
        .map(|child| Edge {
            source: (child - 1) / branching,
            target: child,
            weight: 1.0,
        })
        .collect();
    let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e.source, e.target)).collect();
    let coords = spring_layout(radial_start(branching, n, seed), &pairs);
    let features = coords.iter().map(|c| c.to_vec()).collect();
    let graph = WeightedDigraph::new(n, features, edges)?;
    Ok(TreeGraph { graph, coords })
}

/// Rings by depth, each node centred in its share of the full level's
/// angle, with a little seeded jitter so no two nodes start aligned.
fn radial_start(branching: usize, n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = Vec::with_capacity(n);
    let (mut first, mut width, mut depth) = (0usize, 1usize, 0usize);
    while first < n {
        for i in first..(first + width).min(n) {
            let angle = std::f64::consts::TAU * ((i - first) as f64 + 0.5) / width as f64;
            let r = depth as f64 + rng.gen_range(-0.05..0.05);
            let angle = angle + rng.gen_range(-0.05..0.05) / width as f64;
            pos.push([r * angle.cos(), r * angle.sin()]);
        }
        first += width;
        width *= branching;
        depth += 1;
    }
    normalize_unit_square(&mut pos);
    pos
}

/// Fruchterman-Reingold relaxation of `start` with optimal distance
/// `k = 1/sqrt(n)`: every pair repels with `k^2/r`, every edge attracts with
/// `r^2/k`. Runs a fixed number of iterations with a linearly cooling step
/// cap, then rescales into `[0, 1]^2`.
pub fn spring_layout(start: Vec<[f64; 2]>, edges: &[(usize, usize)]) -> Vec<[f64; 2]> {
    let n = start.len();
    let mut pos = start;
    if n < 2 {
        return vec![[0.5, 0.5]; n];
    }
    let k = 1.0 / (n as f64).sqrt();
    for iter in 0..SPRING_ITERATIONS {
        let temperature = 0.1 * (1.0 - iter as f64 / SPRING_ITERATIONS as f64);
        let mut disp = vec![[0.0f64; 2]; n];
        for i in 0..n {
            for j in i + 1..n {
                let dx = pos[i][0] - pos[j][0];
                let dy = pos[i][1] - pos[j][1];
                let r = (dx * dx + dy * dy).sqrt().max(0.01);
                let f = k * k / (r * r);
                disp[i][0] += f * dx;
                disp[i][1] += f * dy;
                disp[j][0] -= f * dx;
                disp[j][1] -= f * dy;
            }
        }
        for &(u, v) in edges {
            let dx = pos[u][0] - pos[v][0];
            let dy = pos[u][1] - pos[v][1];
            let r = (dx * dx + dy * dy).sqrt();
            let f = r / k;
            disp[u][0] -= f * dx;
            disp[u][1] -= f * dy;
            disp[v][0] += f * dx;
            disp[v][1] += f * dy;
        }
        for (p, d) in pos.iter_mut().zip(&disp) {
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if len > 0.0 {
                let step = len.min(temperature) / len;
                p[0] += d[0] * step;
                p[1] += d[1] * step;
            }
        }
    }
    normalize_unit_square(&mut pos);
    pos
}

fn normalize_unit_square(pos: &mut [[f64; 2]]) {
    for axis in 0..2 {
        let lo = pos.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let hi = pos.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        for p in pos.iter_mut() {
            p[axis] = if span > 0.0 { (p[axis] - lo) / span } else { 0.5 };
        }
    }
}
