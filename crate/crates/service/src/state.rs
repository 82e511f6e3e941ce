use std::path::{Path, PathBuf};

use thiserror::Error;

use atlas_core::cartography::{LabelStyle, TierThresholds};
use atlas_core::corpus::{validate_corpus, Corpus, CorpusError, PROJECTS_FILE, TOPICS_FILE};
use atlas_core::gateway::Gateway;
use atlas_core::reduce::{load_model, ReduceError, ReducerModel, MODEL_FILE, MODEL_VERSION};
use atlas_core::synthesis::{IdeaLog, SynthesisError};

#[derive(Debug, Error)]
pub enum StateError {
    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error("reducer model: {0}")]
    VersionMismatch(ReduceError),
    #[error("artifact validation failed: {}", .0.join("; "))]
    ValidationFailed(Vec<String>),
    #[error("cannot open idea log: {0}")]
    IdeaLog(#[from] SynthesisError),
}

/// Everything the service reads, loaded once and never mutated.
#[derive(Debug)]
pub struct ServiceState {
    pub corpus: Corpus,
    pub model: ReducerModel,
    pub gateway: Gateway,
    pub label_style: LabelStyle,
    pub tiers: TierThresholds,
    pub idea_log: Option<IdeaLog>,
}

impl ServiceState {
    /// Cross-checks an already loaded corpus and model.
    pub fn new(corpus: Corpus, model: ReducerModel, gateway: Gateway) -> Result<Self, StateError> {
        let mut problems: Vec<String> = validate_corpus(&corpus).iter().map(ToString::to_string).collect();
        if model.n() != corpus.len() {
            problems.push(format!(
                "reducer model has {} points but projects.json has {} projects",
                model.n(),
                corpus.len()
            ));
        }
        for p in &corpus.projects {
            match &p.embedding {
                None => problems.push(format!("{}: embedding missing", p.id)),
                Some(e) if e.dimension() != model.dim() => problems.push(format!(
                    "{}: embedding dimension {} differs from model dimension {}",
                    p.id,
                    e.dimension(),
                    model.dim()
                )),
                Some(_) => {}
            }
            if p.position.is_none() {
                problems.push(format!("{}: map position missing", p.id));
            }
        }
        if gateway.dimension() != model.dim() {
            problems.push(format!(
                "provider dimension {} differs from model dimension {}",
                gateway.dimension(),
                model.dim()
            ));
        }
        if !problems.is_empty() {
            return Err(StateError::ValidationFailed(problems));
        }
        Ok(Self {
            corpus,
            model,
            gateway,
            label_style: LabelStyle::default(),
            tiers: TierThresholds::default(),
            idea_log: None,
        })
    }

    pub fn with_idea_log(mut self, path: &Path) -> Result<Self, StateError> {
        self.idea_log = Some(IdeaLog::open(path)?);
        Ok(self)
    }

    pub fn artifact_version(&self) -> u32 {
        self.model.version()
    }
}

/// Loads and cross-validates `projects.json`, `topics.json` and `reducer.model`.
pub fn load_state(dir: &Path, gateway: Gateway) -> Result<ServiceState, StateError> {
    for name in [PROJECTS_FILE, TOPICS_FILE, MODEL_FILE] {
        let path = dir.join(name);
        if !path.is_file() {
            return Err(StateError::MissingArtifact(path));
        }
    }
    let corpus = Corpus::load(dir).map_err(|e| match e {
        CorpusError::Io { path, .. } => StateError::MissingArtifact(path.into()),
        other => StateError::ValidationFailed(vec![other.to_string()]),
    })?;
    let model = load_model(&dir.join(MODEL_FILE)).map_err(|e| match e {
        ReduceError::BadMagic | ReduceError::UnsupportedVersion(_) => StateError::VersionMismatch(e),
        other => StateError::ValidationFailed(vec![other.to_string()]),
    })?;
    debug_assert_eq!(model.version(), MODEL_VERSION);
    ServiceState::new(corpus, model, gateway)
}
