//! Fits the low-dimensional similarity curve `1 / (1 + a * x^(2b))` to the
//! target falloff defined by `min_dist` and `spread`.

const SAMPLES: usize = 300;
const MAX_ITERATIONS: usize = 500;

/// Target membership at low-dimensional distance `x`.
pub fn target_falloff(x: f64, min_dist: f64, spread: f64) -> f64 {
    if x < min_dist {
        1.0
    } else {
        (-(x - min_dist) / spread).exp()
    }
}

pub fn curve(x: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * x.powf(2.0 * b))
}

/// Sample abscissae: 300 evenly spaced points on `[0, 3 * spread]`.
pub fn sample_points(spread: f64) -> Vec<f64> {
    let hi = 3.0 * spread;
    (0..SAMPLES)
        .map(|i| hi * i as f64 / (SAMPLES - 1) as f64)
        .collect()
}

pub fn sum_squared_error(a: f64, b: f64, min_dist: f64, spread: f64) -> f64 {
    sample_points(spread)
        .into_iter()
        .map(|x| {
            let r = curve(x, a, b) - target_falloff(x, min_dist, spread);
            r * r
        })
        .sum()
}

/// Levenberg-Marquardt least squares for `(a, b)`.
pub fn fit_ab(min_dist: f64, spread: f64) -> (f64, f64) {
    let xs = sample_points(spread);
    let ys: Vec<f64> = xs.iter().map(|&x| target_falloff(x, min_dist, spread)).collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| (curve(x, a, b) - y).powi(2))
            .sum()
    };

    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut cost = sse(a, b);
    for _ in 0..MAX_ITERATIONS {
        // Normal equations J^T J and J^T r.
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in xs.iter().zip(&ys) {
            let f = curve(x, a, b);
            let r = f - y;
            let (da, db) = if x > 0.0 {
                let u = x.powf(2.0 * b);
                let f2 = f * f;
                (-u * f2, -a * u * 2.0 * x.ln() * f2)
            } else {
                (0.0, 0.0)
            };
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let mut improved = false;
        while lambda < 1e12 {
            let (m00, m11) = (jaa * (1.0 + lambda), jbb * (1.0 + lambda));
            let det = m00 * m11 - jab * jab;
            if det.abs() < f64::MIN_POSITIVE {
                lambda *= 10.0;
                continue;
            }
            let step_a = -(m11 * ga - jab * gb) / det;
            let step_b = -(m00 * gb - jab * ga) / det;
            let (na, nb) = (a + step_a, b + step_b);
            let new_cost = if na > 0.0 && nb > 0.0 { sse(na, nb) } else { f64::INFINITY };
            if new_cost < cost {
                let converged = (step_a.abs() < 1e-12 * a.abs().max(1.0))
                    && (step_b.abs() < 1e-12 * b.abs().max(1.0));
                a = na;
                b = nb;
                cost = new_cost;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if converged {
                    return (a, b);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_curve_matches_reference_values() {
        let (a, b) = fit_ab(0.1, 1.0);
        // Reference: a ~ 1.577, b ~ 0.895.
        assert!((a - 1.577).abs() / 1.577 < 0.01, "a = {a}");
        assert!((b - 0.895).abs() / 0.895 < 0.01, "b = {b}");
    }

    #[test]
    fn fitted_curve_is_positive_for_other_settings() {
        for (md, sp) in [(0.0, 1.0), (0.5, 1.0), (0.25, 2.0), (0.01, 0.5)] {
            let (a, b) = fit_ab(md, sp);
            assert!(a > 0.0 && b > 0.0, "min_dist={md} spread={sp}: a={a} b={b}");
        }
    }
}
