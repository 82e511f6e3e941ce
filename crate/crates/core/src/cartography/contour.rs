//! Marching squares over the cell-center lattice of a [`DensityField`].
//!
//! A lattice node is inside a level when its value is `>= level`. Crossing
//! points are linearly interpolated along lattice edges. Ambiguous saddle
//! cells are resolved by comparing the mean of the four corners with the
//! level. Segments are chained into polylines by shared edge crossings;
//! closed loops repeat their first point at the end.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::DensityField;
use crate::corpus::MapPoint;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContourSet {
    /// Strictly ascending.
    pub levels: Vec<f64>,
    /// `polylines[i]` holds the paths traced at `levels[i]`.
    pub polylines: Vec<Vec<Vec<MapPoint>>>,
}

/// Wire shape: `{level, paths: [[[x, y], ...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourLevel {
    pub level: f64,
    pub paths: Vec<Vec<[f64; 2]>>,
}

impl ContourSet {
    pub fn is_empty(&self) -> bool {
        self.polylines.iter().all(Vec::is_empty)
    }

    pub fn path_count(&self) -> usize {
        self.polylines.iter().map(Vec::len).sum()
    }

    pub fn to_wire(&self) -> Vec<ContourLevel> {
        self.levels
            .iter()
            .zip(&self.polylines)
            .map(|(&level, paths)| ContourLevel {
                level,
                paths: paths
                    .iter()
                    .map(|path| path.iter().map(|p| [p.x, p.y]).collect())
                    .collect(),
            })
            .collect()
    }
}

/// Lattice edge: `H(ix, iy)` joins nodes (ix, iy)-(ix+1, iy), `V(ix, iy)`
/// joins (ix, iy)-(ix, iy+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// `count` levels evenly spaced from 10% to 90% of the field maximum.
pub fn default_levels(field: &DensityField, count: usize) -> Vec<f64> {
    let max = field.max();
    if max <= 0.0 || count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![0.5 * max];
    }
    (0..count)
        .map(|i| max * (0.1 + 0.8 * i as f64 / (count - 1) as f64))
        .collect()
}

pub fn contours(field: &DensityField, levels: &[f64]) -> ContourSet {
    let mut levels: Vec<f64> = levels.iter().copied().filter(|l| l.is_finite()).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let polylines = levels.iter().map(|&l| trace_level(field, l)).collect();
    ContourSet { levels, polylines }
}

fn crossing(field: &DensityField, edge: Edge, level: f64) -> MapPoint {
    let ((ax, ay), (bx, by)) = match edge {
        Edge::H(ix, iy) => ((ix, iy), (ix + 1, iy)),
        Edge::V(ix, iy) => ((ix, iy), (ix, iy + 1)),
    };
    let (va, vb) = (field.value(ax, ay), field.value(bx, by));
    let t = if vb == va { 0.5 } else { ((level - va) / (vb - va)).clamp(0.0, 1.0) };
    let (pa, pb) = (field.cell_center(ax, ay), field.cell_center(bx, by));
    MapPoint::new(pa.x + t * (pb.x - pa.x), pa.y + t * (pb.y - pa.y))
}

fn cell_segments(field: &DensityField, ix: usize, iy: usize, level: f64) -> Vec<(Edge, Edge)> {
    // Corners counter-clockwise from bottom-left; edge k joins corner k and k+1.
    let corners = [(ix, iy), (ix + 1, iy), (ix + 1, iy + 1), (ix, iy + 1)];
    let edges = [Edge::H(ix, iy), Edge::V(ix + 1, iy), Edge::H(ix, iy + 1), Edge::V(ix, iy)];
    let values = corners.map(|(x, y)| field.value(x, y));
    let inside = values.map(|v| v >= level);
    let crossed: Vec<usize> = (0..4).filter(|&k| inside[k] != inside[(k + 1) % 4]).collect();
    match crossed.len() {
        2 => vec![(edges[crossed[0]], edges[crossed[1]])],
        4 => {
            let center_inside = values.iter().sum::<f64>() / 4.0 >= level;
            // Cut off each corner that disagrees with the center.
            (0..4)
                .filter(|&k| inside[k] != center_inside)
                .map(|k| (edges[(k + 3) % 4], edges[k]))
                .collect()
        }
        _ => Vec::new(),
    }
}

fn trace_level(field: &DensityField, level: f64) -> Vec<Vec<MapPoint>> {
    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for iy in 0..field.height() - 1 {
        for ix in 0..field.width() - 1 {
            segments.extend(cell_segments(field, ix, iy, level));
        }
    }
    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(s);
        by_edge.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];

    let walk = |start: usize, from: Edge, used: &mut Vec<bool>| -> Vec<Edge> {
        let mut chain = vec![from];
        let mut seg = start;
        let mut at = from;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == at { b } else { a };
            chain.push(next);
            at = next;
            match by_edge[&at].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        chain
    };

    let mut chains = Vec::new();
    // Open chains start at crossings owned by a single segment (grid border).
    for s in 0..segments.len() {
        if used[s] {
            continue;
        }
        let (a, b) = segments[s];
        let start = if by_edge[&a].len() == 1 {
            Some(a)
        } else if by_edge[&b].len() == 1 {
            Some(b)
        } else {
            None
        };
        if let Some(from) = start {
            chains.push(walk(s, from, &mut used));
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            chains.push(walk(s, segments[s].0, &mut used));
        }
    }
    chains
        .into_iter()
        .map(|chain| chain.into_iter().map(|e| crossing(field, e, level)).collect())
        .collect()
}
