//! Map furniture: density fields, contour lines and label visibility.

mod contour;
mod density;
mod labels;

use thiserror::Error;

pub use contour::{contours, default_levels, ContourLevel, ContourSet};
pub use density::{density_grid, scott_bandwidth, Bounds, DensityField};
pub use labels::{
    labels_for_tier, place_labels, visible_detail, DetailTier, LabelBox, LabelStyle, Rect,
    TierThresholds, Viewport,
};

/// Grid resolution used for map payload contours.
pub const DEFAULT_RESOLUTION: usize = 64;
pub const DEFAULT_LEVEL_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CartographyError {
    #[error("no points to estimate density from")]
    NoPoints,
    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error("grid must be at least 2x2 with matching samples, got {width}x{height}")]
    InvalidResolution { width: usize, height: usize },
    #[error("field bounds are degenerate")]
    DegenerateBounds,
    #[error("field values must be finite and nonnegative")]
    InvalidField,
    #[error("non-finite point")]
    NonFinitePoint,
    #[error("invalid viewport {0:?}")]
    InvalidViewport(Viewport),
}
