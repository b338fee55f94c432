use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GraphError, Result, UndirectedView};

/// All-pairs geodesic distances; `None` marks an unreachable pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<Option<f64>>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        self.entries[u * self.n + v]
    }

    pub fn rows(&self) -> Vec<Vec<Option<f64>>> {
        self.entries
            .chunks(self.n.max(1))
            .take(self.n)
            .map(<[Option<f64>]>::to_vec)
            .collect()
    }

    /// Converts into a finite metric; fails if any pair is unreachable.
    pub fn to_metric(&self) -> Result<FiniteMetric> {
        let d = self
            .entries
            .iter()
            .map(|e| e.ok_or(GraphError::Disconnected))
            .collect::<Result<Vec<_>>>()?;
        Ok(FiniteMetric { n: self.n, d })
    }
}

const PARALLEL_ROWS: usize = 256;

/// Floyd-Warshall over the symmetrized weights.
///
/// Row updates for a fixed pivot are independent of each other (the pivot
/// row cannot change while it is the pivot), so large inputs are updated in
/// parallel with a result bit-identical to the serial loop.
pub fn shortest_paths(view: &UndirectedView) -> Result<DistanceMatrix> {
    let n = view.node_count();
    let mut d = vec![f64::INFINITY; n * n];
    for u in 0..n {
        for v in 0..n {
            if let Some(w) = view.weight(u, v) {
                if w < 0.0 {
                    return Err(GraphError::NegativeWeight(w));
                }
                d[u * n + v] = w;
            }
        }
    }
    let mut pivot_row = vec![0.0; n];
    for k in 0..n {
        pivot_row.copy_from_slice(&d[k * n..(k + 1) * n]);
        let relax = |row: &mut [f64]| {
            let dik = row[k];
            if dik.is_infinite() {
                return;
            }
            for (dij, &dkj) in row.iter_mut().zip(&pivot_row) {
                let via = dik + dkj;
                if via < *dij {
                    *dij = via;
                }
            }
        };
        if n >= PARALLEL_ROWS {
            d.par_chunks_mut(n).for_each(relax);
        } else {
            d.chunks_mut(n).for_each(relax);
        }
    }
    let entries = d
        .into_iter()
        .map(|x| if x.is_finite() { Some(x) } else { None })
        .collect();
    Ok(DistanceMatrix { n, entries })
}

/// A finite set of points with a complete pairwise distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetric {
    n: usize,
    d: Vec<f64>,
}

impl FiniteMetric {
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(GraphError::InvalidArgument(
                "distance matrix is not square".into(),
            ));
        }
        let d: Vec<f64> = rows.into_iter().flatten().collect();
        if d.iter().any(|&x| x < 0.0 || x.is_nan()) {
            return Err(GraphError::InvalidArgument(
                "distances must be non-negative".into(),
            ));
        }
        Ok(Self { n, d })
    }

    /// Pairwise distances of `points` under `dist`.
    pub fn from_points<P>(points: &[P], dist: impl Fn(&P, &P) -> f64) -> Self {
        let n = points.len();
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = dist(&points[i], &points[j]);
            }
        }
        Self { n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}

pub fn diameter(m: &FiniteMetric) -> f64 {
    m.d.iter().copied().fold(0.0, f64::max)
}

/// Smallest positive distance between distinct points; 1 for fewer than two.
pub fn separation(m: &FiniteMetric) -> f64 {
    if m.n < 2 {
        return 1.0;
    }
    let mut best = f64::INFINITY;
    for i in 0..m.n {
        for j in 0..m.n {
            let x = m.dist(i, j);
            if i != j && x > 0.0 && x < best {
                best = x;
            }
        }
    }
    if best.is_finite() {
        best
    } else {
        1.0
    }
}

pub const MAX_DOUBLING_POINTS: usize = 16;

/// Exact doubling constant of a tiny metric space, by exhaustive search.
///
/// Balls are open, centred at points of the space. The ball `B(x, r)` and the
/// half-radius cover candidates `B(c, r/2)` only change when `r` crosses a
/// realized distance `d` or twice one, so it suffices to probe one radius in
/// each open interval between consecutive breakpoints (plus one beyond the
/// last). For each probe the minimum cover is found by enumerating subsets of
/// centres in increasing size.
pub fn doubling_constant_estimate(m: &FiniteMetric) -> Result<usize> {
    let n = m.n;
    if n > MAX_DOUBLING_POINTS {
        return Err(GraphError::TooLarge(n, MAX_DOUBLING_POINTS));
    }
    if n <= 1 {
        return Ok(1);
    }
    let mut breaks: Vec<f64> = vec![0.0];
    for &x in &m.d {
        if x > 0.0 {
            breaks.push(x);
            breaks.push(2.0 * x);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut probes: Vec<f64> = breaks.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    probes.push(breaks[breaks.len() - 1] + 1.0);

    let ball = |c: usize, r: f64| -> u32 {
        (0..n)
            .filter(|&u| m.dist(c, u) < r)
            .fold(0u32, |acc, u| acc | (1 << u))
    };

    // Subsets of centres grouped by popcount, built once.
    let mut by_size: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    for mask in 1u32..(1u32 << n) {
        by_size[mask.count_ones() as usize].push(mask);
    }

    let mut worst = 1;
    for &r in &probes {
        let halves: Vec<u32> = (0..n).map(|c| ball(c, r / 2.0)).collect();
        for x in 0..n {
            let target = ball(x, r);
            let need = min_cover(target, &halves, &by_size, worst);
            worst = worst.max(need);
        }
    }
    Ok(worst)
}

/// Minimum number of `sets` whose union contains `target`. Sizes at or below
/// `known` are skipped since they cannot raise the running maximum.
fn min_cover(target: u32, sets: &[u32], by_size: &[Vec<u32>], known: usize) -> usize {
    let covers = |mask: u32| {
        let mut acc = 0u32;
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            acc |= sets[i];
            bits &= bits - 1;
        }
        acc & target == target
    };
    // Quick accept: if `known` centres suffice there is no new maximum here.
    if by_size[1..=known.min(sets.len())]
        .iter()
        .flatten()
        .any(|&mask| covers(mask))
    {
        return known;
    }
    for (size, masks) in by_size.iter().enumerate().skip(known + 1) {
        if masks.iter().any(|&mask| covers(mask)) {
            return size;
        }
    }
    sets.len()
}
