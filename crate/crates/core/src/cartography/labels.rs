//! Zoom-dependent topic label visibility.
//!
//! Labels are visited in popularity order and a label is shown iff its
//! screen-space box intersects the viewport and overlaps none of the boxes
//! already shown. Labels are never moved, only hidden.

use serde::{Deserialize, Serialize};

use super::CartographyError;
use crate::corpus::{topic_order, MapPoint, TopicLabel};

/// Map window plus zoom factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewport {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub zoom: f64,
}

impl Viewport {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64, zoom: f64) -> Result<Self, CartographyError> {
        let v = Self { x0, y0, x1, y1, zoom };
        let finite = [x0, y0, x1, y1, zoom].iter().all(|c| c.is_finite());
        if !finite || x0 >= x1 || y0 >= y1 || zoom <= 0.0 {
            return Err(CartographyError::InvalidViewport(v));
        }
        Ok(v)
    }

    pub fn contains(&self, p: &MapPoint) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn center(&self) -> MapPoint {
        MapPoint::new((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }
}

/// Text box metrics. There are no font metrics on the server, so width is
/// estimated per character; clients must render with the same constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelStyle {
    pub font_px: f64,
    pub char_width_ratio: f64,
    pub line_height_ratio: f64,
    /// Screen pixels per map unit at zoom 1.
    pub px_per_unit: f64,
}

impl Default for LabelStyle {
    fn default() -> Self {
        Self {
            font_px: 14.0,
            char_width_ratio: 0.62,
            line_height_ratio: 1.3,
            px_per_unit: 40.0,
        }
    }
}

impl LabelStyle {
    pub fn box_size(&self, text: &str) -> (f64, f64) {
        (
            self.char_width_ratio * self.font_px * text.chars().count().max(1) as f64,
            self.line_height_ratio * self.font_px,
        )
    }

    fn scale(&self, zoom: f64) -> f64 {
        self.px_per_unit * zoom
    }

    /// Screen position (pixels, y down) of a map point.
    pub fn to_screen(&self, viewport: &Viewport, p: &MapPoint) -> (f64, f64) {
        let s = self.scale(viewport.zoom);
        ((p.x - viewport.x0) * s, (viewport.y1 - p.y) * s)
    }

    pub fn screen_rect(&self, viewport: &Viewport) -> Rect {
        let s = self.scale(viewport.zoom);
        Rect {
            x0: 0.0,
            y0: 0.0,
            x1: (viewport.x1 - viewport.x0) * s,
            y1: (viewport.y1 - viewport.y0) * s,
        }
    }
}

/// Axis-aligned rectangle in screen pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn centered(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self {
            x0: cx - w / 2.0,
            y0: cy - h / 2.0,
            x1: cx + w / 2.0,
            y1: cy + h / 2.0,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    /// Positive-area overlap; touching edges do not count.
    pub fn overlaps(&self, other: &Rect) -> bool {
        self.intersection_area(other) > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelBox {
    pub label: TopicLabel,
    pub bbox: Rect,
}

/// Greedy popularity-ordered occlusion.
pub fn place_labels(labels: &[TopicLabel], viewport: &Viewport, style: &LabelStyle) -> Vec<LabelBox> {
    let mut ordered: Vec<&TopicLabel> = labels.iter().collect();
    ordered.sort_by(|a, b| topic_order(a, b));
    let screen = style.screen_rect(viewport);
    let mut accepted: Vec<LabelBox> = Vec::new();
    for label in ordered {
        if !label.position.is_finite() {
            continue;
        }
        let (cx, cy) = style.to_screen(viewport, &label.position);
        let (w, h) = style.box_size(&label.text);
        let bbox = Rect::centered(cx, cy, w, h);
        if !bbox.overlaps(&screen) || accepted.iter().any(|a| a.bbox.overlaps(&bbox)) {
            continue;
        }
        accepted.push(LabelBox {
            label: label.clone(),
            bbox,
        });
    }
    accepted
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetailTier {
    Overview,
    Subtopics,
    Projects,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierThresholds {
    /// Zoom at which labels beyond the top `top_labels` appear.
    pub subtopics: f64,
    /// Zoom at which project details appear.
    pub projects: f64,
    pub top_labels: usize,
}

impl Default for TierThresholds {
    fn default() -> Self {
        Self {
            subtopics: 3.0,
            projects: 8.0,
            top_labels: 12,
        }
    }
}

pub fn visible_detail(zoom: f64, thresholds: &TierThresholds) -> DetailTier {
    if zoom >= thresholds.projects {
        DetailTier::Projects
    } else if zoom >= thresholds.subtopics {
        DetailTier::Subtopics
    } else {
        DetailTier::Overview
    }
}

/// Labels eligible at a tier: the top `top_labels` at overview, all otherwise.
/// Input must already be in popularity order.
pub fn labels_for_tier<'a>(
    labels: &'a [TopicLabel],
    tier: DetailTier,
    thresholds: &TierThresholds,
) -> &'a [TopicLabel] {
    match tier {
        DetailTier::Overview => &labels[..labels.len().min(thresholds.top_labels)],
        _ => labels,
    }
}
