
use super::{GraphError, Result, WeightedDigraph};

/// Kahn's algorithm. Returns `None` when the graph has a directed cycle.
/// Among ready nodes the smallest id is emitted first, so the order is
/// deterministic.
pub fn topological_order(graph: &WeightedDigraph) -> Option<Vec<usize>> {
    let n = graph.node_count();
    let succ = graph.successors();
    let mut indegree = vec![0usize; n];
    for e in graph.edges() {
        indegree[e.target] += 1;
    }
    let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = (0..n)
        .filter(|&v| indegree[v] == 0)
        .map(std::cmp::Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(std::cmp::Reverse(v)) = ready.pop() {
        order.push(v);
        for &w in &succ[v] {
            indegree[w] -= 1;
            if indegree[w] == 0 {
                ready.push(std::cmp::Reverse(w));
            }
        }
    }
    (order.len() == n).then_some(order)
}

pub fn is_dag(graph: &WeightedDigraph) -> bool {
    topological_order(graph).is_some()
}

/// Finite poset stored as a dense `k x k` relation matrix with
/// `relation[u][v] == true` iff `u <= v`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poset {
    n: usize,
    rel: Vec<bool>,
}

impl Poset {
    /// Validates reflexivity, antisymmetry and transitivity.
    pub fn from_relation(relation: Vec<Vec<bool>>) -> Result<Self> {
        let n = relation.len();
        if relation.iter().any(|row| row.len() != n) {
            return Err(GraphError::NotAPoset("relation matrix is not square".into()));
        }
        let rel: Vec<bool> = relation.into_iter().flatten().collect();
        let p = Self { n, rel };
        p.check_axioms()?;
        Ok(p)
    }

    /// The discrete order (identity relation) on `n` elements.
    pub fn antichain(n: usize) -> Self {
        let mut rel = vec![false; n * n];
        for i in 0..n {
            rel[i * n + i] = true;
        }
        Self { n, rel }
    }

    /// The total order `0 < 1 < ... < n-1`.
    pub fn chain(n: usize) -> Self {
        let mut rel = vec![false; n * n];
        for i in 0..n {
            for j in i..n {
                rel[i * n + j] = true;
            }
        }
        Self { n, rel }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn leq(&self, u: usize, v: usize) -> bool {
        self.rel[u * self.n + v]
    }

    /// Strict order `u < v`.
    #[inline]
    pub fn lt(&self, u: usize, v: usize) -> bool {
        u != v && self.leq(u, v)
    }

    pub fn comparable(&self, u: usize, v: usize) -> bool {
        self.leq(u, v) || self.leq(v, u)
    }

    pub fn relation(&self) -> Vec<Vec<bool>> {
        self.rel.chunks(self.n.max(1)).take(self.n).map(<[bool]>::to_vec).collect()
    }

    /// All strict pairs `(u, v)` with `u < v`, row-major.
    pub fn strict_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in 0..self.n {
                if self.lt(u, v) {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn check_axioms(&self) -> Result<()> {
        let n = self.n;
        for u in 0..n {
            if !self.leq(u, u) {
                return Err(GraphError::NotAPoset(format!("{u} is not <= itself")));
            }
            for v in 0..n {
                if u != v && self.leq(u, v) && self.leq(v, u) {
                    return Err(GraphError::NotAPoset(format!(
                        "{u} and {v} violate antisymmetry"
                    )));
                }
                if !self.leq(u, v) {
                    continue;
                }
                for w in 0..n {
                    if self.leq(v, w) && !self.leq(u, w) {
                        return Err(GraphError::NotAPoset(format!(
                            "{u} <= {v} <= {w} but not {u} <= {w}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Reflexive transitive closure of the reachability relation.
pub fn dag_to_poset(graph: &WeightedDigraph) -> Result<Poset> {
    let order = topological_order(graph).ok_or(GraphError::CyclicInput)?;
    let n = graph.node_count();
    let succ = graph.successors();
    let mut rel = vec![false; n * n];
    // Reverse topological order: every successor's reach set is final first.
    for &u in order.iter().rev() {
        rel[u * n + u] = true;
        for &v in &succ[u] {
            for w in 0..n {
                if rel[v * n + w] {
                    rel[u * n + w] = true;
                }
            }
        }
    }
    Ok(Poset { n, rel })
}

/// Cover relations of the poset: `u < v` with no `w` strictly between.
pub fn hasse_reduction(p: &Poset) -> Vec<(usize, usize)> {
    let n = p.len();
    let mut covers = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if !p.lt(u, v) {
                continue;
            }
            let composite = (0..n).any(|w| w != u && w != v && p.leq(u, w) && p.leq(w, v));
            if !composite {
                covers.push((u, v));
            }
        }
    }
    covers
}

/// Size of the largest antichain.
///
/// By Dilworth's theorem this equals the minimum number of chains covering
/// the poset, which is `k - |M|` for a maximum matching `M` of the bipartite
/// graph with an edge `u -> v` for every strict pair `u < v`. Augmenting
/// paths are tried in increasing vertex index order.
pub fn poset_width(p: &Poset) -> usize {
    let n = p.len();
    if n == 0 {
        return 0;
    }
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|u| (0..n).filter(|&v| p.lt(u, v)).collect())
        .collect();
    let mut match_right: Vec<Option<usize>> = vec![None; n];
    let mut matched = 0;
    for u in 0..n {
        let mut visited = vec![false; n];
        if augment(u, &adj, &mut visited, &mut match_right) {
            matched += 1;
        }
    }
    n - matched
}

fn augment(
    u: usize,
    adj: &[Vec<usize>],
    visited: &mut [bool],
    match_right: &mut [Option<usize>],
) -> bool {
    for &v in &adj[u] {
        if visited[v] {
            continue;
        }
        visited[v] = true;
        let free = match match_right[v] {
            None => true,
            Some(w) => augment(w, adj, visited, match_right),
        };
        if free {
            match_right[v] = Some(u);
            return true;
        }
    }
    false
}

/// Breadth-first reachability from `start`.
#[cfg(test)]
fn reachable_from(graph: &WeightedDigraph, start: usize) -> Vec<bool> {
    let succ = graph.successors();
    let mut seen = vec![false; graph.node_count()];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &succ[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}
