//! Fuzzy neighborhood graph: per-node bandwidth calibration and fuzzy-union
//! symmetrization of the directed membership strengths.

use std::collections::BTreeMap;

use super::knn::KnnGraph;

const SIGMA_ITERATIONS: usize = 64;
const SIGMA_TOLERANCE: f64 = 1e-5;

/// Local kernel parameters of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    /// Distance to the nearest neighbor.
    pub rho: f64,
    pub sigma: f64,
}

impl Bandwidth {
    /// Membership strength of a neighbor at distance `d`.
    pub fn membership(&self, d: f64) -> f64 {
        let excess = (d - self.rho).max(0.0);
        if excess == 0.0 {
            1.0
        } else {
            (-excess / self.sigma).exp()
        }
    }
}

/// Finds sigma such that `sum_j exp(-max(0, d_j - rho) / sigma) = log2(n_neighbors)`
/// by bisection. `distances` must be sorted ascending.
pub fn calibrate(distances: &[f64], n_neighbors: usize) -> Bandwidth {
    let target = (n_neighbors as f64).log2();
    let rho = distances.first().copied().unwrap_or(0.0);
    let (mut lo, mut hi, mut mid) = (0.0f64, f64::INFINITY, 1.0f64);
    for _ in 0..SIGMA_ITERATIONS {
        let bw = Bandwidth { rho, sigma: mid };
        let sum: f64 = distances.iter().map(|&d| bw.membership(d)).sum();
        if (sum - target).abs() < SIGMA_TOLERANCE {
            break;
        }
        if sum > target {
            hi = mid;
            mid = (lo + hi) / 2.0;
        } else {
            lo = mid;
            mid = if hi.is_infinite() { mid * 2.0 } else { (lo + hi) / 2.0 };
        }
    }
    Bandwidth { rho, sigma: mid }
}

pub fn calibrate_all(knn: &KnnGraph, n_neighbors: usize) -> Vec<Bandwidth> {
    knn.distances
        .rows()
        .into_iter()
        .map(|row| calibrate(row.as_slice().expect("standard layout"), n_neighbors))
        .collect()
}

/// Fuzzy union of two membership strengths.
pub fn fuzzy_union(a: f64, b: f64) -> f64 {
    a + b - a * b
}

/// Symmetric weighted graph. Both directions of every edge are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    pub n: usize,
    /// `(i, j, w)` sorted by `(i, j)`, `i != j`, `0 < w <= 1`.
    pub edges: Vec<(usize, usize, f64)>,
    pub bandwidths: Vec<Bandwidth>,
}

impl FuzzyGraph {
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.edges
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&(i, j)))
            .ok()
            .map(|pos| self.edges[pos].2)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|e| e.0 == i).count()
    }
}

pub fn fuzzy_simplicial_set(knn: &KnnGraph, n_neighbors: usize) -> FuzzyGraph {
    let n = knn.n();
    let bandwidths = calibrate_all(knn, n_neighbors);
    let mut directed: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..n {
        for slot in 0..knn.k() {
            let j = knn.indices[[i, slot]];
            if j == i {
                continue;
            }
            let w = bandwidths[i].membership(knn.distances[[i, slot]]);
            directed.insert((i, j), w);
        }
    }
    let mut sym: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(i, j), &w) in &directed {
        let back = directed.get(&(j, i)).copied().unwrap_or(0.0);
        let u = fuzzy_union(w, back);
        if u > 0.0 {
            sym.insert((i, j), u);
            sym.insert((j, i), u);
        }
    }
    FuzzyGraph {
        n,
        edges: sym.into_iter().map(|((i, j), w)| (i, j, w)).collect(),
        bandwidths,
    }
}
