use serde::{Deserialize, Serialize};

use super::CartographyError;
use crate::corpus::MapPoint;

/// Axis-aligned extent in map units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Bounds {
    pub fn of_points(points: &[MapPoint]) -> Option<Bounds> {
        let first = points.first()?;
        let init = Bounds {
            xmin: first.x,
            ymin: first.y,
            xmax: first.x,
            ymax: first.y,
        };
        Some(points.iter().fold(init, |b, p| Bounds {
            xmin: b.xmin.min(p.x),
            ymin: b.ymin.min(p.y),
            xmax: b.xmax.max(p.x),
            ymax: b.ymax.max(p.y),
        }))
    }

    pub fn padded(&self, pad: f64) -> Bounds {
        Bounds {
            xmin: self.xmin - pad,
            ymin: self.ymin - pad,
            xmax: self.xmax + pad,
            ymax: self.ymax + pad,
        }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn contains(&self, p: &MapPoint) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    fn is_valid(&self) -> bool {
        [self.xmin, self.ymin, self.xmax, self.ymax]
            .iter()
            .all(|v| v.is_finite())
            && self.width() > 0.0
            && self.height() > 0.0
    }
}

/// Scalar field sampled at the centers of a `width x height` grid of cells
/// covering `bounds`. Row-major, row index is the y cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    width: usize,
    height: usize,
    values: Vec<f64>,
    bounds: Bounds,
    bandwidth: f64,
}

impl DensityField {
    /// Wraps precomputed samples, e.g. an analytic test field.
    pub fn from_grid(
        width: usize,
        height: usize,
        values: Vec<f64>,
        bounds: Bounds,
        bandwidth: f64,
    ) -> Result<Self, CartographyError> {
        if width < 2 || height < 2 || values.len() != width * height {
            return Err(CartographyError::InvalidResolution { width, height });
        }
        if !bounds.is_valid() {
            return Err(CartographyError::DegenerateBounds);
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(CartographyError::InvalidBandwidth(bandwidth));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CartographyError::InvalidField);
        }
        Ok(Self {
            width,
            height,
            values,
            bounds,
            bandwidth,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.width + ix]
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (
            self.bounds.width() / self.width as f64,
            self.bounds.height() / self.height as f64,
        )
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> MapPoint {
        let (cw, ch) = self.cell_size();
        MapPoint::new(
            self.bounds.xmin + (ix as f64 + 0.5) * cw,
            self.bounds.ymin + (iy as f64 + 0.5) * ch,
        )
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Scott's rule for 2D: `n^(-1/6)` times the mean marginal standard
/// deviation. `None` when the points have no spread.
pub fn scott_bandwidth(points: &[MapPoint]) -> Option<f64> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let std = |f: fn(&MapPoint) -> f64| {
        let mean = points.iter().map(f).sum::<f64>() / nf;
        (points.iter().map(|p| (f(p) - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
    };
    let spread = (std(|p| p.x) + std(|p| p.y)) / 2.0;
    let h = nf.powf(-1.0 / 6.0) * spread;
    (h > 0.0 && h.is_finite()).then_some(h)
}

/// Gaussian KDE evaluated at cell centers over the data bounds padded by
/// `3 * bandwidth`: `f(c) = 1/(n 2 pi h^2) * sum exp(-|c - p|^2 / (2 h^2))`.
pub fn density_grid(
    points: &[MapPoint],
    width: usize,
    height: usize,
    bandwidth: f64,
) -> Result<DensityField, CartographyError> {
    let data = Bounds::of_points(points).ok_or(CartographyError::NoPoints)?;
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(CartographyError::InvalidBandwidth(bandwidth));
    }
    if width < 2 || height < 2 {
        return Err(CartographyError::InvalidResolution { width, height });
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(CartographyError::NonFinitePoint);
    }
    let bounds = data.padded(3.0 * bandwidth);
    let norm = 1.0 / (points.len() as f64 * 2.0 * std::f64::consts::PI * bandwidth * bandwidth);
    let inv_two_h2 = 1.0 / (2.0 * bandwidth * bandwidth);
    let cw = bounds.width() / width as f64;
    let ch = bounds.height() / height as f64;

    // The kernel is separable: precompute per-column and per-row factors.
    let mut values = vec![0.0; width * height];
    let mut gx = vec![0.0; width];
    let mut gy = vec![0.0; height];
    for p in points {
        for (ix, g) in gx.iter_mut().enumerate() {
            let dx = bounds.xmin + (ix as f64 + 0.5) * cw - p.x;
            *g = (-dx * dx * inv_two_h2).exp();
        }
        for (iy, g) in gy.iter_mut().enumerate() {
            let dy = bounds.ymin + (iy as f64 + 0.5) * ch - p.y;
            *g = (-dy * dy * inv_two_h2).exp();
        }
        for (iy, &fy) in gy.iter().enumerate() {
            let row = &mut values[iy * width..(iy + 1) * width];
            for (v, &fx) in row.iter_mut().zip(&gx) {
                *v += fx * fy;
            }
        }
    }
    values.iter_mut().for_each(|v| *v *= norm);
    DensityField::from_grid(width, height, values, bounds, bandwidth)
}
