//! Exact k-nearest-neighbor search by exhaustive scan.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView1, ArrayView2};

use super::ReduceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

impl Metric {
    pub(crate) fn code(self) -> u32 {
        match self {
            Metric::Cosine => 0,
            Metric::Euclidean => 1,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Metric::Cosine),
            1 => Some(Metric::Euclidean),
            _ => None,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

/// Precomputed row norms so cosine distance is one dot product per pair.
pub(crate) struct DistanceTable<'a> {
    rows: ArrayView2<'a, f32>,
    norms: Vec<f64>,
    metric: Metric,
}

impl<'a> DistanceTable<'a> {
    pub(crate) fn new(rows: ArrayView2<'a, f32>, metric: Metric) -> Self {
        let norms = match metric {
            Metric::Cosine => rows.rows().into_iter().map(|r| norm(r)).collect(),
            Metric::Euclidean => Vec::new(),
        };
        Self { rows, norms, metric }
    }

    pub(crate) fn len(&self) -> usize {
        self.rows.nrows()
    }

    /// Distance from row `i` to an arbitrary vector with norm `q_norm`.
    pub(crate) fn to_vector(&self, i: usize, q: ArrayView1<f32>, q_norm: f64) -> f64 {
        let row = self.rows.row(i);
        match self.metric {
            Metric::Euclidean => row
                .iter()
                .zip(q.iter())
                .map(|(&a, &b)| {
                    let d = a as f64 - b as f64;
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            Metric::Cosine => cosine_distance(dot(row, q), self.norms[i], q_norm),
        }
    }

    pub(crate) fn between(&self, i: usize, j: usize) -> f64 {
        let q_norm = self.norms.get(j).copied().unwrap_or(0.0);
        self.to_vector(i, self.rows.row(j), q_norm)
    }

    pub(crate) fn query_norm(&self, q: ArrayView1<f32>) -> f64 {
        match self.metric {
            Metric::Cosine => norm(q),
            Metric::Euclidean => 0.0,
        }
    }
}

fn dot(a: ArrayView1<f32>, b: ArrayView1<f32>) -> f64 {
    a.iter().zip(b.iter()).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn norm(a: ArrayView1<f32>) -> f64 {
    dot(a, a).sqrt()
}

fn cosine_distance(dot: f64, na: f64, nb: f64) -> f64 {
    if na == 0.0 && nb == 0.0 {
        0.0
    } else if na == 0.0 || nb == 0.0 {
        1.0
    } else {
        (1.0 - dot / (na * nb)).max(0.0)
    }
}

/// Per-node neighbor lists, each sorted by ascending distance (ties by index).
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    pub indices: Array2<usize>,
    pub distances: Array2<f64>,
}

impl KnnGraph {
    pub fn n(&self) -> usize {
        self.indices.nrows()
    }

    pub fn k(&self) -> usize {
        self.indices.ncols()
    }
}

fn by_distance(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` nearest entries of `candidates`, sorted.
pub(crate) fn nearest(mut candidates: Vec<(f64, usize)>, k: usize) -> Vec<(f64, usize)> {
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k, by_distance);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(by_distance);
    candidates
}

/// Exact kNN over the rows of `vectors`, excluding each point itself.
pub fn knn_graph(vectors: ArrayView2<f32>, k: usize, metric: Metric) -> Result<KnnGraph, ReduceError> {
    let n = vectors.nrows();
    if k == 0 || n <= k {
        return Err(ReduceError::TooFewPoints { n, k });
    }
    if vectors.iter().any(|v| !v.is_finite()) {
        return Err(ReduceError::NonFiniteInput);
    }
    let table = DistanceTable::new(vectors, metric);
    let mut indices = Array2::zeros((n, k));
    let mut distances = Array2::zeros((n, k));
    for i in 0..n {
        let candidates = (0..n)
            .filter(|&j| j != i)
            .map(|j| (table.between(i, j), j))
            .collect();
        for (slot, (d, j)) in nearest(candidates, k).into_iter().enumerate() {
            indices[[i, slot]] = j;
            distances[[i, slot]] = d;
        }
    }
    Ok(KnnGraph { indices, distances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn points_on_a_line() {
        let v = array![[0.0f32], [1.0], [10.0]];
        let g = knn_graph(v.view(), 1, Metric::Euclidean).unwrap();
        assert_eq!(g.indices.column(0).to_vec(), vec![1, 0, 1]);
        assert_eq!(g.distances.column(0).to_vec(), vec![1.0, 1.0, 9.0]);
    }

    #[test]
    fn too_few_points() {
        let v = array![[0.0f32], [1.0]];
        assert_eq!(
            knn_graph(v.view(), 2, Metric::Euclidean),
            Err(ReduceError::TooFewPoints { n: 2, k: 2 })
        );
    }

    #[test]
    fn non_finite_rejected() {
        let v = array![[0.0f32], [f32::NAN], [2.0]];
        assert_eq!(
            knn_graph(v.view(), 1, Metric::Euclidean),
            Err(ReduceError::NonFiniteInput)
        );
    }

    #[test]
    fn cosine_ignores_scale() {
        let v = array![[1.0f32, 0.0], [5.0, 0.0], [0.0, 1.0], [0.7, 0.7]];
        let g = knn_graph(v.view(), 1, Metric::Cosine).unwrap();
        assert_eq!(g.indices[[0, 0]], 1);
        assert!(g.distances[[0, 0]].abs() < 1e-12);
        assert_eq!(g.indices[[2, 0]], 3);
    }

    #[test]
    fn ties_break_by_index() {
        let v = array![[0.0f32], [1.0], [-1.0]];
        let g = knn_graph(v.view(), 2, Metric::Euclidean).unwrap();
        assert_eq!(g.indices.row(0).to_vec(), vec![1, 2]);
    }
}
