//! Stochastic-gradient layout of the fuzzy graph in 2D.
//!
//! Each positive edge is sampled in proportion to its weight and pulls its
//! endpoints together along the gradient of `log q(d)`, with
//! `q(d) = 1 / (1 + a d^(2b))`. Every positive sample is followed by
//! `negative_sample_rate` repulsive updates against uniformly drawn nodes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::fuzzy::FuzzyGraph;

const GRADIENT_CLIP: f64 = 4.0;
const REPULSION_EPS: f64 = 0.001;
pub const INIT_HALF_WIDTH: f64 = 10.0;

pub type Point = [f64; 2];

fn squared_distance(p: &Point, q: &Point) -> f64 {
    let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
    dx * dx + dy * dy
}

/// `log q(d)` for one edge, as a function of both endpoints.
pub fn attractive_log_likelihood(p: &Point, q: &Point, a: f64, b: f64) -> f64 {
    -(1.0 + a * squared_distance(p, q).powf(b)).ln()
}

/// Analytic gradient of [`attractive_log_likelihood`] with respect to `p`.
pub fn attractive_gradient(p: &Point, q: &Point, a: f64, b: f64) -> Point {
    let d2 = squared_distance(p, q);
    if d2 <= 0.0 {
        return [0.0, 0.0];
    }
    let coeff = -2.0 * a * b * d2.powf(b - 1.0) / (1.0 + a * d2.powf(b));
    [coeff * (p[0] - q[0]), coeff * (p[1] - q[1])]
}

/// Gradient of `log(1 - q(d))` with respect to `p`, smoothed near zero.
pub fn repulsive_gradient(p: &Point, q: &Point, a: f64, b: f64) -> Point {
    let d2 = squared_distance(p, q);
    if d2 <= 0.0 {
        return [GRADIENT_CLIP, GRADIENT_CLIP];
    }
    let coeff = 2.0 * b / ((REPULSION_EPS + d2) * (1.0 + a * d2.powf(b)));
    [coeff * (p[0] - q[0]), coeff * (p[1] - q[1])]
}

fn clip(v: f64) -> f64 {
    v.clamp(-GRADIENT_CLIP, GRADIENT_CLIP)
}

pub fn random_init(n: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    (0..n)
        .map(|_| {
            [
                rng.random_range(-INIT_HALF_WIDTH..INIT_HALF_WIDTH),
                rng.random_range(-INIT_HALF_WIDTH..INIT_HALF_WIDTH),
            ]
        })
        .collect()
}

pub struct LayoutSettings {
    pub a: f64,
    pub b: f64,
    pub n_epochs: usize,
    pub negative_sample_rate: usize,
    pub initial_alpha: f64,
}

/// Runs the optimization in place. Single-threaded and fully determined by
/// the graph, the starting layout and the RNG state.
pub fn optimize_layout(
    graph: &FuzzyGraph,
    coords: &mut [Point],
    settings: &LayoutSettings,
    rng: &mut ChaCha8Rng,
) {
    let n = coords.len();
    let n_epochs = settings.n_epochs;
    let max_w = graph.edges.iter().map(|e| e.2).fold(0.0, f64::max);
    if n < 2 || max_w <= 0.0 || n_epochs == 0 {
        return;
    }
    // Edges that would be sampled less than once over the run are dropped.
    let edges: Vec<(usize, usize, f64)> = graph
        .edges
        .iter()
        .filter(|e| e.2 * n_epochs as f64 / max_w >= 1.0)
        .map(|&(i, j, w)| (i, j, max_w / w))
        .collect();
    let neg_rate = settings.negative_sample_rate.max(1) as f64;
    let mut next_sample: Vec<f64> = edges.iter().map(|e| e.2).collect();
    let mut next_negative: Vec<f64> = edges.iter().map(|e| e.2 / neg_rate).collect();
    let (a, b) = (settings.a, settings.b);

    for epoch in 0..n_epochs {
        let alpha = settings.initial_alpha * (1.0 - epoch as f64 / n_epochs as f64);
        let now = epoch as f64;
        for (e, &(i, j, period)) in edges.iter().enumerate() {
            if next_sample[e] > now {
                continue;
            }
            let g = attractive_gradient(&coords[i], &coords[j], a, b);
            for dim in 0..2 {
                let step = clip(g[dim]) * alpha;
                coords[i][dim] += step;
                coords[j][dim] -= step;
            }
            next_sample[e] += period;

            let neg_period = period / neg_rate;
            let n_neg = ((now - next_negative[e]) / neg_period).floor().max(0.0) as usize;
            for _ in 0..n_neg {
                let k = rng.random_range(0..n);
                if k == i {
                    continue;
                }
                let g = repulsive_gradient(&coords[i], &coords[k], a, b);
                for dim in 0..2 {
                    coords[i][dim] += clip(g[dim]) * alpha;
                }
            }
            next_negative[e] += n_neg as f64 * neg_period;
        }
    }
}
