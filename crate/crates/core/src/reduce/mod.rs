//! UMAP-style nonlinear reduction of embeddings to a 2D map.
//!
//! [`fit`] builds an exact kNN graph, turns it into a fuzzy neighborhood
//! graph, fits the low-dimensional similarity curve and lays the graph out
//! with stochastic gradient steps. The resulting [`ReducerModel`] keeps the
//! training vectors so that [`ReducerModel::transform`] can place unseen
//! vectors (search queries) as a membership-weighted mean of their nearest
//! training points.

pub mod curve;
pub mod fuzzy;
mod io;
pub mod knn;
pub mod layout;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::MapPoint;

pub use fuzzy::{fuzzy_simplicial_set, Bandwidth, FuzzyGraph};
pub use io::{load_model, model_from_bytes, model_to_bytes, save_model, MAGIC, MODEL_FILE, MODEL_VERSION};
pub use knn::{knn_graph, KnnGraph, Metric};

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("need more than {k} points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("vector has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid reducer parameters: {0}")]
    InvalidParams(String),
    #[error("model i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("not a reducer model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt model file: {0}")]
    Corrupt(String),
}

impl PartialEq for ReduceError {
    fn eq(&self, other: &Self) -> bool {
        use ReduceError::*;
        match (self, other) {
            (TooFewPoints { n: a, k: b }, TooFewPoints { n: c, k: d }) => a == c && b == d,
            (NonFiniteInput, NonFiniteInput) | (BadMagic, BadMagic) => true,
            (
                DimensionMismatch { expected: a, got: b },
                DimensionMismatch { expected: c, got: d },
            ) => a == c && b == d,
            (InvalidParams(a), InvalidParams(b)) | (Corrupt(a), Corrupt(b)) => a == b,
            (UnsupportedVersion(a), UnsupportedVersion(b)) => a == b,
            (IoFailure(a), IoFailure(b)) => a.kind() == b.kind(),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducerParams {
    pub n_neighbors: usize,
    pub min_dist: f64,
    pub spread: f64,
    /// `None` picks 200 epochs for up to 10 000 points and 500 above.
    pub n_epochs: Option<usize>,
    pub negative_sample_rate: usize,
    pub metric: Metric,
    pub seed: u64,
}

impl Default for ReducerParams {
    fn default() -> Self {
        Self {
            n_neighbors: 15,
            min_dist: 0.1,
            spread: 1.0,
            n_epochs: None,
            negative_sample_rate: 5,
            metric: Metric::Cosine,
            seed: 42,
        }
    }
}

impl ReducerParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn epochs_for(&self, n: usize) -> usize {
        self.n_epochs
            .unwrap_or(if n <= 10_000 { 200 } else { 500 })
    }

    pub fn validate(&self, n: usize) -> Result<(), ReduceError> {
        let bad = |m: String| Err(ReduceError::InvalidParams(m));
        if self.n_neighbors < 2 {
            return bad(format!("n_neighbors must be >= 2, got {}", self.n_neighbors));
        }
        if !(self.min_dist > 0.0 && self.min_dist.is_finite()) {
            return bad(format!("min_dist must be > 0, got {}", self.min_dist));
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return bad(format!("spread must be > 0, got {}", self.spread));
        }
        if self.min_dist >= self.spread {
            return bad("min_dist must be < spread".into());
        }
        if self.n_epochs == Some(0) {
            return bad("n_epochs must be positive".into());
        }
        if self.negative_sample_rate == 0 {
            return bad("negative_sample_rate must be positive".into());
        }
        if n <= self.n_neighbors {
            return Err(ReduceError::TooFewPoints {
                n,
                k: self.n_neighbors,
            });
        }
        Ok(())
    }
}

/// Fitted reduction state. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducerModel {
    params: ReducerParams,
    training: Array2<f32>,
    coords: Array2<f32>,
    curve_a: f64,
    curve_b: f64,
    version: u32,
    /// Per-training-point kernel, derived from `training` and `params`.
    bandwidths: Vec<Bandwidth>,
}

impl ReducerModel {
    /// Reassembles a model from stored parts, recomputing the per-point
    /// kernel bandwidths from the training vectors.
    pub fn from_parts(
        params: ReducerParams,
        training: Array2<f32>,
        coords: Array2<f32>,
        curve_a: f64,
        curve_b: f64,
    ) -> Result<Self, ReduceError> {
        let n = training.nrows();
        if coords.nrows() != n || coords.ncols() != 2 {
            return Err(ReduceError::Corrupt(format!(
                "coords shape {:?} does not match {n} training rows",
                coords.shape()
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) || training.iter().any(|v| !v.is_finite()) {
            return Err(ReduceError::NonFiniteInput);
        }
        if !(curve_a > 0.0 && curve_b > 0.0) {
            return Err(ReduceError::Corrupt(format!("curve ({curve_a}, {curve_b}) not positive")));
        }
        params.validate(n)?;
        let knn = knn_graph(training.view(), params.n_neighbors, params.metric)?;
        let bandwidths = fuzzy::calibrate_all(&knn, params.n_neighbors);
        Ok(Self {
            params,
            training,
            coords,
            curve_a,
            curve_b,
            version: MODEL_VERSION,
            bandwidths,
        })
    }

    pub fn params(&self) -> &ReducerParams {
        &self.params
    }

    pub fn training_vectors(&self) -> ArrayView2<'_, f32> {
        self.training.view()
    }

    pub fn coords(&self) -> ArrayView2<'_, f32> {
        self.coords.view()
    }

    pub fn coord(&self, i: usize) -> MapPoint {
        MapPoint::new(self.coords[[i, 0]] as f64, self.coords[[i, 1]] as f64)
    }

    pub fn curve(&self) -> (f64, f64) {
        (self.curve_a, self.curve_b)
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn bandwidths(&self) -> &[Bandwidth] {
        &self.bandwidths
    }

    pub fn n(&self) -> usize {
        self.training.nrows()
    }

    pub fn dim(&self) -> usize {
        self.training.ncols()
    }

    /// Places `vector` on the map using `params.n_neighbors` neighbors.
    pub fn transform(&self, vector: &[f32]) -> Result<MapPoint, ReduceError> {
        self.transform_with_k(vector, self.params.n_neighbors)
    }

    /// Membership-weighted mean of the fitted coordinates of the `k` nearest
    /// training points. Weights use each neighbor's own `rho`/`sigma` and are
    /// normalized to sum to one; if every weight underflows the plain mean
    /// is used.
    pub fn transform_with_k(&self, vector: &[f32], k: usize) -> Result<MapPoint, ReduceError> {
        if vector.len() != self.dim() {
            return Err(ReduceError::DimensionMismatch {
                expected: self.dim(),
                got: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(ReduceError::NonFiniteInput);
        }
        let k = k.clamp(1, self.n());
        let q = ArrayView1::from(vector);
        let table = knn::DistanceTable::new(self.training.view(), self.params.metric);
        let q_norm = table.query_norm(q);
        let candidates = (0..table.len())
            .map(|i| (table.to_vector(i, q, q_norm), i))
            .collect();
        let neighbors = knn::nearest(candidates, k);

        let mut weights: Vec<f64> = neighbors
            .iter()
            .map(|&(d, i)| self.bandwidths[i].membership(d))
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            weights.iter_mut().for_each(|w| *w = 1.0);
        }
        let total: f64 = weights.iter().sum();
        let (mut x, mut y) = (0.0, 0.0);
        for (&(_, i), w) in neighbors.iter().zip(&weights) {
            let p = self.coord(i);
            x += w / total * p.x;
            y += w / total * p.y;
        }
        Ok(MapPoint::new(x, y))
    }
}

/// Fits a 2D layout of the rows of `vectors`.
pub fn fit(vectors: ArrayView2<f32>, params: &ReducerParams) -> Result<ReducerModel, ReduceError> {
    let n = vectors.nrows();
    if vectors.ncols() == 0 {
        return Err(ReduceError::InvalidParams("vectors have zero dimensions".into()));
    }
    params.validate(n)?;
    if vectors.iter().any(|v| !v.is_finite()) {
        return Err(ReduceError::NonFiniteInput);
    }
    let n_epochs = params.epochs_for(n);
    let knn = knn_graph(vectors, params.n_neighbors, params.metric)?;
    let graph = fuzzy_simplicial_set(&knn, params.n_neighbors);
    let (a, b) = curve::fit_ab(params.min_dist, params.spread);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut coords = layout::random_init(n, &mut rng);
    let settings = layout::LayoutSettings {
        a,
        b,
        n_epochs,
        negative_sample_rate: params.negative_sample_rate,
        initial_alpha: 1.0,
    };
    layout::optimize_layout(&graph, &mut coords, &settings, &mut rng);

    let flat: Vec<f32> = coords.iter().flat_map(|p| [p[0] as f32, p[1] as f32]).collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(ReduceError::NonFiniteInput);
    }
    tracing::debug!(n, edges = graph.edges.len(), n_epochs, a, b, "layout finished");
    Ok(ReducerModel {
        params: ReducerParams {
            n_epochs: Some(n_epochs),
            ..params.clone()
        },
        training: vectors.to_owned(),
        coords: Array2::from_shape_vec((n, 2), flat).expect("n x 2 coords"),
        curve_a: a,
        curve_b: b,
        version: MODEL_VERSION,
        bandwidths: graph.bandwidths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    fn random_matrix(n: usize, d: usize, seed: u64) -> Array2<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0f32..1.0))
    }

    fn small_params() -> ReducerParams {
        ReducerParams {
            n_neighbors: 5,
            n_epochs: Some(50),
            metric: Metric::Euclidean,
            ..ReducerParams::default()
        }
    }

    #[test]
    fn fit_shape_and_finiteness() {
        let m = fit(random_matrix(20, 8, 1).view(), &small_params()).unwrap();
        assert_eq!(m.coords().shape(), &[20, 2]);
        assert!(m.coords().iter().all(|v| v.is_finite()));
        assert_eq!(m.params().n_epochs, Some(50));
    }

    #[test]
    fn fit_is_deterministic() {
        let x = random_matrix(30, 4, 2);
        let a = fit(x.view(), &small_params()).unwrap();
        let b = fit(x.view(), &small_params()).unwrap();
        assert_eq!(a, b);
        let other = fit(
            x.view(),
            &ReducerParams {
                seed: 7,
                ..small_params()
            },
        )
        .unwrap();
        assert_ne!(a.coords(), other.coords());
    }

    #[test]
    fn param_validation() {
        let x = random_matrix(5, 2, 3);
        assert_eq!(
            fit(x.view(), &small_params()).unwrap_err(),
            ReduceError::TooFewPoints { n: 5, k: 5 }
        );
        let bad = ReducerParams {
            min_dist: 2.0,
            ..small_params()
        };
        assert!(matches!(
            fit(random_matrix(10, 2, 3).view(), &bad),
            Err(ReduceError::InvalidParams(_))
        ));
        let mut y = random_matrix(10, 2, 3);
        y[[4, 1]] = f32::INFINITY;
        let p = ReducerParams {
            n_neighbors: 3,
            ..small_params()
        };
        assert_eq!(fit(y.view(), &p).unwrap_err(), ReduceError::NonFiniteInput);
    }

    #[test]
    fn default_epochs_depend_on_size() {
        let p = ReducerParams::default();
        assert_eq!(p.epochs_for(10_000), 200);
        assert_eq!(p.epochs_for(10_001), 500);
    }

    #[test]
    fn transform_rejects_wrong_dimension() {
        let m = fit(random_matrix(20, 8, 1).view(), &small_params()).unwrap();
        assert_eq!(
            m.transform(&[0.0; 3]).unwrap_err(),
            ReduceError::DimensionMismatch {
                expected: 8,
                got: 3
            }
        );
    }

    #[test]
    fn transform_of_training_point_with_k1() {
        let x = random_matrix(25, 6, 9);
        let m = fit(x.view(), &small_params()).unwrap();
        for i in 0..25 {
            let p = m.transform_with_k(x.row(i).as_slice().unwrap(), 1).unwrap();
            assert!(p.distance(&m.coord(i)) < 1e-6);
        }
    }

    #[test]
    fn equidistant_query_lands_on_midpoint() {
        // Symmetric square: every point has the same neighbor distances.
        let training = array![[-1.0f32, 0.0], [1.0, 0.0], [-1.0, 5.0], [1.0, 5.0]];
        let coords = array![[0.0f32, 0.0], [4.0, 2.0], [9.0, 9.0], [-9.0, 9.0]];
        let params = ReducerParams {
            n_neighbors: 2,
            metric: Metric::Euclidean,
            ..ReducerParams::default()
        };
        let m = ReducerModel::from_parts(params, training, coords, 1.5, 0.9).unwrap();
        assert_eq!(m.bandwidths()[0], m.bandwidths()[1]);
        let p = m.transform_with_k(&[0.0, 0.0], 2).unwrap();
        assert!((p.x - 2.0).abs() < 1e-12 && (p.y - 1.0).abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn far_query_falls_back_to_plain_mean() {
        let training = array![[0.0f32], [1.0], [2.0], [3.0]];
        let coords = array![[0.0f32, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        let params = ReducerParams {
            n_neighbors: 2,
            metric: Metric::Euclidean,
            ..ReducerParams::default()
        };
        let m = ReducerModel::from_parts(params, training, coords, 1.5, 0.9).unwrap();
        let p = m.transform_with_k(&[1.0e6], 2).unwrap();
        assert!(p.is_finite());
        assert!((p.x - 2.5).abs() < 1e-9);
    }
}
