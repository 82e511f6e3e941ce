//! Shared domain types for a knowledge-map corpus, plus validation and the
//! `projects.json` / `topics.json` artifact formats.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dimension of the default ada-class text embedder.
pub const DEFAULT_EMBEDDING_DIM: usize = 1536;

pub const PROJECTS_FILE: &str = "projects.json";
pub const TOPICS_FILE: &str = "topics.json";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid date {0:?}")]
    BadDate(String),
    #[error("invalid embedding: {0}")]
    BadEmbedding(&'static str),
}

/// A point in 2D map space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub x: f64,
    pub y: f64,
}

impl MapPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &MapPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// High-dimensional text embedding. The dimension is the vector length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// Checked constructor: rejects non-finite and all-zero vectors.
    pub fn new(values: Vec<f32>) -> Result<Self, CorpusError> {
        let v = Self(values);
        match v.defect() {
            Some(why) => Err(CorpusError::BadEmbedding(why)),
            None => Ok(v),
        }
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    fn defect(&self) -> Option<&'static str> {
        if self.0.is_empty() {
            Some("empty")
        } else if self.0.iter().any(|v| !v.is_finite()) {
            Some("non-finite value")
        } else if self.0.iter().all(|&v| v == 0.0) {
            Some("all-zero")
        } else {
            None
        }
    }

    /// Cosine similarity computed in f64.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        cosine_similarity(&self.0, &other.0)
    }
}

pub fn cosine_similarity(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub id: String,
    pub title: String,
    pub description: String,
    /// Categorical attribute used as the color key on the map.
    pub group: String,
    pub date: Option<NaiveDate>,
    pub embedding: Option<EmbeddingVector>,
    pub position: Option<MapPoint>,
}

impl Project {
    /// Text that is sent to the embedder for this project.
    pub fn embedding_text(&self) -> String {
        embedding_text(&self.title, &self.description)
    }
}

pub fn embedding_text(title: &str, description: &str) -> String {
    if description.trim().is_empty() {
        title.to_string()
    } else {
        format!("{title}\n{description}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicLabel {
    pub text: String,
    pub count: u32,
    pub project_ids: Vec<String>,
    #[serde(flatten)]
    pub position: MapPoint,
}

/// Lowercase + trim. No stemming.
pub fn normalize_topic(raw: &str) -> String {
    raw.trim().to_lowercase()
}

/// Total order used for topic lists: count descending, then text ascending.
pub fn topic_order(a: &TopicLabel, b: &TopicLabel) -> std::cmp::Ordering {
    b.count.cmp(&a.count).then_with(|| a.text.cmp(&b.text))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub projects: Vec<Project>,
    pub topics: Vec<TopicLabel>,
    pub date_range: Option<(NaiveDate, NaiveDate)>,
}

impl Corpus {
    /// Builds a corpus, deriving the date range from the projects. Topics are
    /// kept in the given order; `validate_corpus` reports a bad ordering.
    pub fn new(projects: Vec<Project>, topics: Vec<TopicLabel>) -> Self {
        let date_range = date_range(&projects);
        Self {
            projects,
            topics,
            date_range,
        }
    }

    pub fn project(&self, id: &str) -> Option<&Project> {
        self.projects.iter().find(|p| p.id == id)
    }

    pub fn index(&self) -> HashMap<&str, usize> {
        self.projects
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.as_str(), i))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.projects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projects.is_empty()
    }

    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let projects = read_projects(&dir.join(PROJECTS_FILE))?;
        let topics = read_topics(&dir.join(TOPICS_FILE))?;
        Ok(Self::new(projects, topics))
    }

    pub fn save(&self, dir: &Path) -> Result<(), CorpusError> {
        write_projects(&dir.join(PROJECTS_FILE), &self.projects)?;
        write_topics(&dir.join(TOPICS_FILE), &self.topics)
    }
}

fn date_range(projects: &[Project]) -> Option<(NaiveDate, NaiveDate)> {
    let mut dates = projects.iter().filter_map(|p| p.date);
    let first = dates.next()?;
    Some(dates.fold((first, first), |(lo, hi), d| (lo.min(d), hi.max(d))))
}

/// Parses `YYYY`, `YYYY-MM` or `YYYY-MM-DD`. Year-only input maps to January 1.
pub fn parse_date(raw: &str) -> Result<Option<NaiveDate>, CorpusError> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(None);
    }
    let bad = || CorpusError::BadDate(raw.to_string());
    let parts: Vec<&str> = s.split('-').collect();
    let num = |p: &str| p.parse::<u32>().map_err(|_| bad());
    let date = match parts.as_slice() {
        [y] if y.len() == 4 => NaiveDate::from_ymd_opt(num(y)? as i32, 1, 1),
        [y, m] if y.len() == 4 => NaiveDate::from_ymd_opt(num(y)? as i32, num(m)?, 1),
        [y, m, d] if y.len() == 4 => NaiveDate::from_ymd_opt(num(y)? as i32, num(m)?, num(d)?),
        _ => None,
    };
    date.map(Some).ok_or_else(bad)
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    IdUnique,
    IdNonempty,
    TitleNonempty,
    PositionFinite,
    EmbeddingValid,
    EmbeddingDimension,
    CountMatchesIds,
    ProjectIdsNonempty,
    ProjectIdsUnique,
    ProjectIdResolves,
    TopicTextNormalized,
    TopicPositionFinite,
    TopicsSorted,
    DateRangeConsistent,
}

impl Rule {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rule::IdUnique => "id unique",
            Rule::IdNonempty => "id nonempty",
            Rule::TitleNonempty => "title nonempty",
            Rule::PositionFinite => "position finite",
            Rule::EmbeddingValid => "embedding finite and nonzero",
            Rule::EmbeddingDimension => "embedding dimension consistent",
            Rule::CountMatchesIds => "count == |project_ids|",
            Rule::ProjectIdsNonempty => "project_ids nonempty",
            Rule::ProjectIdsUnique => "project_ids unique",
            Rule::ProjectIdResolves => "project_id resolves",
            Rule::TopicTextNormalized => "topic text normalized and nonempty",
            Rule::TopicPositionFinite => "topic position finite",
            Rule::TopicsSorted => "topics sorted by (count desc, text asc)",
            Rule::DateRangeConsistent => "date_range consistent",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Project id or topic text the violation is about.
    pub subject: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule)
    }
}

/// Checks every corpus invariant. An empty list means the corpus is valid.
pub fn validate_corpus(corpus: &Corpus) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |subject: &str, rule| {
        out.push(Violation {
            subject: subject.to_string(),
            rule,
        })
    };

    let mut seen = HashSet::new();
    let mut reported_dupes = HashSet::new();
    let mut dim = None;
    for p in &corpus.projects {
        if p.id.is_empty() {
            push(&p.id, Rule::IdNonempty);
        }
        if !seen.insert(p.id.as_str()) && reported_dupes.insert(p.id.as_str()) {
            push(&p.id, Rule::IdUnique);
        }
        if p.title.trim().is_empty() {
            push(&p.id, Rule::TitleNonempty);
        }
        if p.position.is_some_and(|pt| !pt.is_finite()) {
            push(&p.id, Rule::PositionFinite);
        }
        if let Some(e) = &p.embedding {
            if e.defect().is_some() {
                push(&p.id, Rule::EmbeddingValid);
            }
            match dim {
                None => dim = Some(e.dimension()),
                Some(d) if d != e.dimension() => push(&p.id, Rule::EmbeddingDimension),
                _ => {}
            }
        }
    }

    for t in &corpus.topics {
        if t.text.is_empty() || normalize_topic(&t.text) != t.text {
            push(&t.text, Rule::TopicTextNormalized);
        }
        if t.project_ids.is_empty() {
            push(&t.text, Rule::ProjectIdsNonempty);
        }
        if t.count as usize != t.project_ids.len() {
            push(&t.text, Rule::CountMatchesIds);
        }
        let unique: BTreeSet<&str> = t.project_ids.iter().map(String::as_str).collect();
        if unique.len() != t.project_ids.len() {
            push(&t.text, Rule::ProjectIdsUnique);
        }
        if unique.iter().any(|id| !seen.contains(id)) {
            push(&t.text, Rule::ProjectIdResolves);
        }
        if !t.position.is_finite() {
            push(&t.text, Rule::TopicPositionFinite);
        }
    }
    for pair in corpus.topics.windows(2) {
        if topic_order(&pair[0], &pair[1]) == std::cmp::Ordering::Greater {
            push(&pair[1].text, Rule::TopicsSorted);
        }
    }

    if corpus.date_range != date_range(&corpus.projects) {
        push("corpus", Rule::DateRangeConsistent);
    }
    out
}

// ---------------------------------------------------------------------------
// Artifact files

/// Wire shape of one `projects.json` element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectRecord {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub group: String,
    #[serde(default)]
    pub date: Option<String>,
    #[serde(default)]
    pub embedding: Option<Vec<f32>>,
    #[serde(default)]
    pub x: Option<f64>,
    #[serde(default)]
    pub y: Option<f64>,
}

impl From<&Project> for ProjectRecord {
    fn from(p: &Project) -> Self {
        Self {
            id: p.id.clone(),
            title: p.title.clone(),
            description: p.description.clone(),
            group: p.group.clone(),
            date: p.date.map(|d| d.format("%Y-%m-%d").to_string()),
            embedding: p.embedding.as_ref().map(|e| e.values().to_vec()),
            x: p.position.map(|pt| pt.x),
            y: p.position.map(|pt| pt.y),
        }
    }
}

impl TryFrom<ProjectRecord> for Project {
    type Error = CorpusError;

    fn try_from(r: ProjectRecord) -> Result<Self, Self::Error> {
        let date = match r.date.as_deref() {
            Some(s) => parse_date(s)?,
            None => None,
        };
        let position = match (r.x, r.y) {
            (Some(x), Some(y)) => Some(MapPoint::new(x, y)),
            _ => None,
        };
        Ok(Project {
            id: r.id,
            title: r.title,
            description: r.description,
            group: r.group,
            date,
            // Checked later by validate_corpus so bad vectors become violations.
            embedding: r.embedding.map(EmbeddingVector),
            position,
        })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> CorpusError + '_ {
    move |source| CorpusError::Json {
        path: path.display().to_string(),
        source,
    }
}

pub fn projects_to_json(projects: &[Project]) -> String {
    let records: Vec<ProjectRecord> = projects.iter().map(ProjectRecord::from).collect();
    serde_json::to_string(&records).expect("project records always serialize")
}

pub fn projects_from_json(text: &str) -> Result<Vec<Project>, serde_json::Error> {
    let records: Vec<ProjectRecord> = serde_json::from_str(text)?;
    records
        .into_iter()
        .map(|r| Project::try_from(r).map_err(serde::de::Error::custom))
        .collect()
}

pub fn write_projects(path: &Path, projects: &[Project]) -> Result<(), CorpusError> {
    fs::write(path, projects_to_json(projects)).map_err(io_err(path))
}

pub fn read_projects(path: &Path) -> Result<Vec<Project>, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    projects_from_json(&text).map_err(json_err(path))
}

pub fn write_topics(path: &Path, topics: &[TopicLabel]) -> Result<(), CorpusError> {
    let text = serde_json::to_string_pretty(topics).expect("topics always serialize");
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_topics(path: &Path) -> Result<Vec<TopicLabel>, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(json_err(path))
}
