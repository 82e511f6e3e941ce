//! Read-only exploration operations over a loaded [`ServiceState`].

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use atlas_core::cartography::{
    contours, default_levels, density_grid, labels_for_tier, place_labels, scott_bandwidth,
    visible_detail, Bounds, CartographyError, ContourLevel, Viewport, DEFAULT_LEVEL_COUNT, DEFAULT_RESOLUTION,
};
use atlas_core::corpus::{cosine_similarity, parse_date, topic_order, MapPoint, Project, TopicLabel};
use atlas_core::gateway::{ChatRequest, GatewayError};
use atlas_core::reduce::ReduceError;

use crate::state::ServiceState;

pub const DEFAULT_K: usize = 10;
pub const SUMMARY_CAP: usize = 20;
pub const SUMMARY_EXCERPT_CHARS: usize = 240;
pub const SUMMARY_SYSTEM_PROMPT: &str = "You summarize research project collections in 3 sentences.";
/// Bandwidth used when the visible points have no spread.
const FALLBACK_BANDWIDTH: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("window start {start} is after end {end}")]
    InvalidWindow { start: NaiveDate, end: NaiveDate },
    #[error("cannot parse date {0:?}")]
    BadDate(String),
    #[error("no projects in the requested region")]
    EmptyRegion,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("projecting query failed: {0}")]
    Transform(#[from] ReduceError),
}

/// Inclusive date window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl TimeWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, ExploreError> {
        if start > end {
            return Err(ExploreError::InvalidWindow { start, end });
        }
        Ok(Self { start, end })
    }

    /// Window from optional `YYYY[-MM[-DD]]` bounds. A partial end date
    /// covers its whole year or month. `None` when both bounds are absent.
    pub fn parse(start: Option<&str>, end: Option<&str>) -> Result<Option<Self>, ExploreError> {
        let parse = |s: &str| parse_date(s).map_err(|_| ExploreError::BadDate(s.to_string()));
        let start = start.map(str::trim).filter(|s| !s.is_empty());
        let end = end.map(str::trim).filter(|s| !s.is_empty());
        if start.is_none() && end.is_none() {
            return Ok(None);
        }
        let lo = match start {
            Some(s) => parse(s)?.unwrap_or(NaiveDate::MIN),
            None => NaiveDate::MIN,
        };
        let hi = match end {
            Some(s) => parse(s)?.map(|d| end_of_period(s, d)).unwrap_or(NaiveDate::MAX),
            None => NaiveDate::MAX,
        };
        Self::new(lo, hi).map(Some)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

fn end_of_period(raw: &str, d: NaiveDate) -> NaiveDate {
    match raw.trim().split('-').count() {
        1 => NaiveDate::from_ymd_opt(d.year(), 12, 31).unwrap_or(d),
        2 => {
            let (y, m) = if d.month() == 12 { (d.year() + 1, 1) } else { (d.year(), d.month() + 1) };
            NaiveDate::from_ymd_opt(y, m, 1).and_then(|n| n.pred_opt()).unwrap_or(d)
        }
        _ => d,
    }
}

/// Project positions in corpus order.
fn position(p: &Project) -> MapPoint {
    p.position.expect("state validated positions")
}

fn in_window(p: &Project, window: Option<&TimeWindow>) -> bool {
    match window {
        None => true,
        Some(w) => p.date.is_some_and(|d| w.contains(d)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchHit {
    pub id: String,
    pub title: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub query: String,
    pub x: f64,
    pub y: f64,
    pub hits: Vec<SearchHit>,
}

/// Indices of the `k` rows most cosine-similar to `query`, scores
/// descending, ties by index.
pub fn rank_by_cosine<'a>(
    query: &[f32],
    rows: impl Iterator<Item = &'a [f32]>,
    k: usize,
) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = rows
        .enumerate()
        .map(|(i, r)| (i, cosine_similarity(query, r)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Embeds the query, ranks projects in embedding space and projects the
/// query onto the map.
pub fn search(state: &ServiceState, query: &str, k: usize) -> Result<SearchResult, ExploreError> {
    if query.trim().is_empty() {
        return Err(ExploreError::EmptyQuery);
    }
    if k == 0 {
        return Err(ExploreError::InvalidK);
    }
    let embedding = state.gateway.embed_text(query)?;
    let point = state.model.transform(embedding.values())?;
    let rows = state
        .corpus
        .projects
        .iter()
        .map(|p| p.embedding.as_ref().expect("state validated embeddings").values());
    let hits = rank_by_cosine(embedding.values(), rows, k)
        .into_iter()
        .map(|(i, score)| {
            let p = &state.corpus.projects[i];
            SearchHit {
                id: p.id.clone(),
                title: p.title.clone(),
                score,
            }
        })
        .collect();
    Ok(SearchResult {
        query: query.to_string(),
        x: point.x,
        y: point.y,
        hits,
    })
}

/// Ids of dated projects inside the window, ordered by date then id.
pub fn filter_timeline(state: &ServiceState, window: &TimeWindow) -> Vec<String> {
    let mut hits: Vec<(NaiveDate, &str)> = state
        .corpus
        .projects
        .iter()
        .filter_map(|p| p.date.filter(|d| window.contains(*d)).map(|d| (d, p.id.as_str())))
        .collect();
    hits.sort();
    hits.into_iter().map(|(_, id)| id.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSummary {
    pub summary: String,
    pub project_ids: Vec<String>,
}

fn excerpt(text: &str) -> String {
    text.chars().take(SUMMARY_EXCERPT_CHARS).collect()
}

/// The chat request and contributing projects for a region, nearest to the
/// viewport center first.
pub fn summary_request(
    state: &ServiceState,
    viewport: &Viewport,
    window: Option<&TimeWindow>,
) -> Result<(ChatRequest, Vec<String>), ExploreError> {
    let center = viewport.center();
    let mut members: Vec<(f64, usize)> = state
        .corpus
        .projects
        .iter()
        .enumerate()
        .filter(|(_, p)| viewport.contains(&position(p)) && in_window(p, window))
        .map(|(i, p)| (position(p).distance(&center), i))
        .collect();
    if members.is_empty() {
        return Err(ExploreError::EmptyRegion);
    }
    members.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    members.truncate(SUMMARY_CAP);
    let projects: Vec<&Project> = members.iter().map(|&(_, i)| &state.corpus.projects[i]).collect();
    let user = projects
        .iter()
        .map(|p| format!("- {}: {}", p.title, excerpt(&p.description)))
        .collect::<Vec<_>>()
        .join("\n");
    let ids = projects.iter().map(|p| p.id.clone()).collect();
    Ok((ChatRequest::new(SUMMARY_SYSTEM_PROMPT, user, 0.2), ids))
}

pub fn summarize_region(
    state: &ServiceState,
    viewport: &Viewport,
    window: Option<&TimeWindow>,
) -> Result<RegionSummary, ExploreError> {
    let (request, project_ids) = summary_request(state, viewport, window)?;
    let summary = state.gateway.complete_chat(&request)?;
    Ok(RegionSummary { summary, project_ids })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapProject {
    pub id: String,
    pub title: String,
    pub group: String,
    pub x: f64,
    pub y: f64,
    pub date: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapLabel {
    pub text: String,
    pub count: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapPayload {
    pub projects: Vec<MapProject>,
    pub labels: Vec<MapLabel>,
    pub contours: Vec<ContourLevel>,
}

/// Smallest viewport showing every project, padded by 5% on each side.
pub fn full_viewport(state: &ServiceState, zoom: f64) -> Result<Viewport, CartographyError> {
    let points: Vec<MapPoint> = state.corpus.projects.iter().map(position).collect();
    let b = Bounds::of_points(&points).unwrap_or(Bounds {
        xmin: -1.0,
        ymin: -1.0,
        xmax: 1.0,
        ymax: 1.0,
    });
    let pad_x = (b.width() * 0.05).max(0.5);
    let pad_y = (b.height() * 0.05).max(0.5);
    Viewport::new(b.xmin - pad_x, b.ymin - pad_y, b.xmax + pad_x, b.ymax + pad_y, zoom)
}

/// Topic labels restricted to the given member set, with counts and
/// centroids recomputed over the members that remain.
fn filtered_labels(state: &ServiceState, keep: &[bool]) -> Vec<TopicLabel> {
    let index = state.corpus.index();
    let mut labels: Vec<TopicLabel> = state
        .corpus
        .topics
        .iter()
        .filter_map(|t| {
            let members: Vec<usize> = t
                .project_ids
                .iter()
                .filter_map(|id| index.get(id.as_str()).copied())
                .filter(|&i| keep[i])
                .collect();
            if members.is_empty() {
                return None;
            }
            let n = members.len() as f64;
            let pts = members.iter().map(|&i| position(&state.corpus.projects[i]));
            let (sx, sy) = pts.fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
            Some(TopicLabel {
                text: t.text.clone(),
                count: members.len() as u32,
                project_ids: members.iter().map(|&i| state.corpus.projects[i].id.clone()).collect(),
                position: MapPoint::new(sx / n, sy / n),
            })
        })
        .collect();
    labels.sort_by(topic_order);
    labels
}

/// Dots inside the viewport, visible labels and contours for the window.
pub fn map_payload(state: &ServiceState, viewport: &Viewport, window: Option<&TimeWindow>) -> MapPayload {
    let keep: Vec<bool> = state.corpus.projects.iter().map(|p| in_window(p, window)).collect();
    let projects = state
        .corpus
        .projects
        .iter()
        .zip(&keep)
        .filter(|(p, k)| **k && viewport.contains(&position(p)))
        .map(|(p, _)| {
            let pos = position(p);
            MapProject {
                id: p.id.clone(),
                title: p.title.clone(),
                group: p.group.clone(),
                x: pos.x,
                y: pos.y,
                date: p.date,
            }
        })
        .collect();

    let labels = filtered_labels(state, &keep);
    let tier = visible_detail(viewport.zoom, &state.tiers);
    let eligible = labels_for_tier(&labels, tier, &state.tiers);
    let labels = place_labels(eligible, viewport, &state.label_style)
        .into_iter()
        .map(|b| MapLabel {
            text: b.label.text,
            count: b.label.count,
            x: b.label.position.x,
            y: b.label.position.y,
        })
        .collect();

    let points: Vec<MapPoint> = state
        .corpus
        .projects
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(p, _)| position(p))
        .collect();
    let contours = window_contours(&points);
    MapPayload {
        projects,
        labels,
        contours,
    }
}

fn window_contours(points: &[MapPoint]) -> Vec<ContourLevel> {
    if points.is_empty() {
        return Vec::new();
    }
    let h = scott_bandwidth(points).unwrap_or(FALLBACK_BANDWIDTH);
    match density_grid(points, DEFAULT_RESOLUTION, DEFAULT_RESOLUTION, h) {
        Ok(field) => contours(&field, &default_levels(&field, DEFAULT_LEVEL_COUNT)).to_wire(),
        Err(e) => {
            tracing::warn!("density grid failed: {e}");
            Vec::new()
        }
    }
}
