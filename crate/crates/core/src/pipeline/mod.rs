//! Offline pipeline turning a raw dataset into the three map artifacts:
//! `projects.json`, `topics.json` and `reducer.model`.
//!
//! Stages run in order: ingest, embed, fit, assign positions, extract and
//! aggregate topics, write. Per-record failures are isolated and reported;
//! a stage-fatal error aborts the run and leaves no artifacts behind.

mod ingest;
mod topics;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use ndarray::Array2;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{
    self, parse_date, CorpusError, EmbeddingVector, Project, TopicLabel, PROJECTS_FILE, TOPICS_FILE,
};
use crate::gateway::{Gateway, GatewayError};
use crate::reduce::{self, ReduceError, ReducerModel, ReducerParams, MODEL_FILE};

pub use ingest::{ingest, InputFormat, Ingested, RawRecord};
pub use topics::{
    aggregate_topics, extract_topics, parse_topic_reply, topic_request, TaggedProject,
    MAX_TOPICS_PER_RECORD, TOPIC_SYSTEM_PROMPT,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown input format {0:?} (expected json or csv)")]
    UnknownFormat(String),
    #[error("malformed input {path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error("no valid records in input")]
    NoRecords,
    #[error("every record failed to embed: {0}")]
    ProviderUnavailable(GatewayError),
    #[error("reduction failed: {0}")]
    Reduce(#[from] ReduceError),
    #[error("writing artifacts failed: {0}")]
    Write(String),
}

impl From<CorpusError> for PipelineError {
    fn from(e: CorpusError) -> Self {
        PipelineError::Write(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Embed,
    Fit,
    Positions,
    Topics,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Ingest => "ingest",
            Stage::Embed => "embed",
            Stage::Fit => "fit",
            Stage::Positions => "positions",
            Stage::Topics => "topics",
            Stage::Write => "write",
        };
        f.write_str(s)
    }
}

/// A record that dropped out (or lost its topics) at some stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub stage: Stage,
    /// Record id, or `row N` when the row had no usable id.
    pub record: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PipelineReport {
    pub rows_read: usize,
    pub ingest_failed: usize,
    pub embedded: usize,
    pub embed_failed: usize,
    pub topics_extracted: usize,
    pub topics_failed: usize,
    pub topic_labels: usize,
    pub failures: Vec<Failure>,
    pub stage_seconds: Vec<(Stage, f64)>,
    pub notes: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

impl PipelineReport {
    /// Stage counts add up: every row is accounted for at every stage.
    pub fn reconciles(&self) -> bool {
        let ingested = self.rows_read - self.ingest_failed.min(self.rows_read);
        let per_stage = |stage| self.failures.iter().filter(|f| f.stage == stage).count();
        ingested == self.embedded + self.embed_failed
            && self.embedded == self.topics_extracted + self.topics_failed
            && per_stage(Stage::Ingest) == self.ingest_failed
            && per_stage(Stage::Embed) == self.embed_failed
            && per_stage(Stage::Topics) == self.topics_failed
    }
}

impl fmt::Display for PipelineReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rows read:        {}", self.rows_read)?;
        writeln!(f, "ingest failures:  {}", self.ingest_failed)?;
        writeln!(f, "embedded:         {}", self.embedded)?;
        writeln!(f, "embed failures:   {}", self.embed_failed)?;
        writeln!(f, "topics extracted: {}", self.topics_extracted)?;
        writeln!(f, "topic failures:   {}", self.topics_failed)?;
        writeln!(f, "topic labels:     {}", self.topic_labels)?;
        for (stage, secs) in &self.stage_seconds {
            writeln!(f, "stage {stage:<10} {secs:.3}s")?;
        }
        for note in &self.notes {
            writeln!(f, "note: {note}")?;
        }
        for fail in &self.failures {
            writeln!(f, "failed [{}] {}: {}", fail.stage, fail.record, fail.reason)?;
        }
        for a in &self.artifacts {
            writeln!(f, "wrote {}", a.display())?;
        }
        Ok(())
    }
}

/// A fatal pipeline error together with the report up to the failure.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct PipelineFailure {
    pub error: PipelineError,
    pub report: PipelineReport,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineConfig {
    pub reducer: ReducerParams,
}

/// Maps `f` over `items` on up to `workers` threads; results keep input order.
pub(crate) fn fan_out<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| {
            s.into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .expect("every slot filled")
        })
        .collect()
}

#[derive(Debug, Default)]
pub struct EmbedOutcome {
    pub embedded: Vec<(RawRecord, EmbeddingVector)>,
    pub failures: Vec<Failure>,
}

/// Embeds `title + "\n" + description` for every record under the gateway's
/// concurrency bound. Fails only if every record fails.
pub fn embed_corpus(records: &[RawRecord], gateway: &Gateway) -> Result<EmbedOutcome, PipelineError> {
    let results = fan_out(records, gateway.max_concurrency(), |r| {
        gateway.embed_text(&corpus::embedding_text(&r.title, &r.description))
    });
    let mut out = EmbedOutcome::default();
    let mut last_err = None;
    for (record, result) in records.iter().zip(results) {
        match result {
            Ok(v) => out.embedded.push((record.clone(), v)),
            Err(e) => {
                out.failures.push(Failure {
                    stage: Stage::Embed,
                    record: record.id.clone(),
                    reason: e.to_string(),
                });
                last_err = Some(e);
            }
        }
    }
    if out.embedded.is_empty() {
        if let Some(e) = last_err {
            return Err(PipelineError::ProviderUnavailable(e));
        }
    }
    Ok(out)
}

struct Run<'a> {
    report: PipelineReport,
    clock: Instant,
    gateway: &'a Gateway,
}

impl Run<'_> {
    fn lap(&mut self, stage: Stage) {
        let now = Instant::now();
        self.report
            .stage_seconds
            .push((stage, (now - self.clock).as_secs_f64()));
        self.clock = now;
    }

    fn fail(self, error: PipelineError) -> PipelineFailure {
        PipelineFailure {
            error,
            report: self.report,
        }
    }
}

/// Runs every stage and writes the three artifacts into `out_dir`.
pub fn run_pipeline(
    input: &Path,
    format: InputFormat,
    out_dir: &Path,
    config: &PipelineConfig,
    gateway: &Gateway,
) -> Result<PipelineReport, PipelineFailure> {
    let mut run = Run {
        report: PipelineReport::default(),
        clock: Instant::now(),
        gateway,
    };

    let ingested = match ingest(input, format) {
        Ok(i) => i,
        Err(e) => return Err(run.fail(e)),
    };
    run.report.rows_read = ingested.rows_read();
    run.report.ingest_failed = ingested.failures.len();
    run.report.failures.extend(ingested.failures);
    run.lap(Stage::Ingest);
    if ingested.records.is_empty() {
        run.report
            .notes
            .push("input contained no valid records; nothing written".into());
        return Err(run.fail(PipelineError::NoRecords));
    }

    let embedded = match embed_corpus(&ingested.records, run.gateway) {
        Ok(e) => e,
        Err(e) => {
            run.report.embed_failed = ingested.records.len();
            return Err(run.fail(e));
        }
    };
    run.report.embedded = embedded.embedded.len();
    run.report.embed_failed = embedded.failures.len();
    run.report.failures.extend(embedded.failures);
    run.lap(Stage::Embed);

    let n = embedded.embedded.len();
    let mut params = config.reducer.clone();
    if n <= params.n_neighbors && n >= 3 {
        run.report.notes.push(format!(
            "n_neighbors lowered from {} to {} for a {n}-record corpus",
            params.n_neighbors,
            n - 1
        ));
        params.n_neighbors = n - 1;
    }
    let dim = embedded.embedded[0].1.dimension();
    let flat: Vec<f32> = embedded
        .embedded
        .iter()
        .flat_map(|(_, v)| v.values().iter().copied())
        .collect();
    let matrix = Array2::from_shape_vec((n, dim), flat).expect("uniform embedding dimension");
    let model = match reduce::fit(matrix.view(), &params) {
        Ok(m) => m,
        Err(e) => return Err(run.fail(e.into())),
    };
    run.lap(Stage::Fit);

    let projects = match build_projects(&embedded.embedded, &model) {
        Ok(p) => p,
        Err(e) => return Err(run.fail(e)),
    };
    run.lap(Stage::Positions);

    let topic_results = fan_out(&projects, run.gateway.max_concurrency(), |p| {
        extract_topics(run.gateway, &p.title, &p.description)
    });
    let mut topic_lists = Vec::with_capacity(projects.len());
    for (p, result) in projects.iter().zip(topic_results) {
        match result {
            Ok(t) => {
                run.report.topics_extracted += 1;
                topic_lists.push(t);
            }
            Err(e) => {
                run.report.topics_failed += 1;
                run.report.failures.push(Failure {
                    stage: Stage::Topics,
                    record: p.id.clone(),
                    reason: e.to_string(),
                });
                topic_lists.push(Vec::new());
            }
        }
    }
    let tagged: Vec<TaggedProject> = projects
        .iter()
        .zip(&topic_lists)
        .map(|(p, t)| TaggedProject {
            id: &p.id,
            topics: t,
            position: p.position.expect("positions assigned"),
        })
        .collect();
    let labels = aggregate_topics(&tagged);
    run.report.topic_labels = labels.len();
    run.lap(Stage::Topics);

    match write_artifacts(out_dir, &projects, &labels, &model) {
        Ok(paths) => run.report.artifacts = paths,
        Err(e) => return Err(run.fail(e)),
    }
    run.lap(Stage::Write);
    Ok(run.report)
}

fn build_projects(
    embedded: &[(RawRecord, EmbeddingVector)],
    model: &ReducerModel,
) -> Result<Vec<Project>, PipelineError> {
    embedded
        .iter()
        .enumerate()
        .map(|(row, (r, v))| {
            Ok(Project {
                id: r.id.clone(),
                title: r.title.clone(),
                description: r.description.clone(),
                group: r.group.clone(),
                date: parse_date(&r.date).map_err(|e| PipelineError::Write(e.to_string()))?,
                embedding: Some(v.clone()),
                position: Some(model.coord(row)),
            })
        })
        .collect()
}

/// Writes all artifacts to temporary names first, then renames them into
/// place. On any error the temporaries are removed.
fn write_artifacts(
    out_dir: &Path,
    projects: &[Project],
    labels: &[TopicLabel],
    model: &ReducerModel,
) -> Result<Vec<PathBuf>, PipelineError> {
    let write_err = |e: std::io::Error| PipelineError::Write(e.to_string());
    fs::create_dir_all(out_dir).map_err(write_err)?;
    let names = [PROJECTS_FILE, TOPICS_FILE, MODEL_FILE];
    let tmp: Vec<PathBuf> = names
        .iter()
        .map(|n| out_dir.join(format!(".{n}.partial")))
        .collect();
    let finals: Vec<PathBuf> = names.iter().map(|n| out_dir.join(n)).collect();

    let attempt = || -> Result<(), PipelineError> {
        corpus::write_projects(&tmp[0], projects)?;
        corpus::write_topics(&tmp[1], labels)?;
        reduce::save_model(model, &tmp[2])?;
        for (from, to) in tmp.iter().zip(&finals) {
            fs::rename(from, to).map_err(write_err)?;
        }
        Ok(())
    };
    if let Err(e) = attempt() {
        for p in tmp.iter() {
            let _ = fs::remove_file(p);
        }
        return Err(e);
    }
    Ok(finals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{ChatRequest, Provider, ProviderConfig};
    use std::sync::atomic::AtomicUsize;
    use std::sync::Arc;
    use std::time::Duration;

    fn records(n: usize) -> Vec<RawRecord> {
        (0..n)
            .map(|i| RawRecord {
                id: format!("r{i}"),
                title: format!("Record {i}"),
                description: format!("about topic{} and voting", i % 3),
                group: "g".into(),
                date: "2020".into(),
            })
            .collect()
    }

    /// Fails to embed any text containing the given token.
    struct Flaky {
        bad: &'static str,
        calls: Arc<AtomicUsize>,
        in_flight: Arc<AtomicUsize>,
        peak: Arc<AtomicUsize>,
    }

    impl Provider for Flaky {
        fn embed(&self, text: &str) -> Result<Vec<f32>, GatewayError> {
            let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            self.calls.fetch_add(1, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(2));
            self.in_flight.fetch_sub(1, Ordering::SeqCst);
            if text.contains(self.bad) {
                Err(GatewayError::ProviderUnavailable("boom".into()))
            } else {
                crate::gateway::MockProvider::new(1536).embed(text)
            }
        }
        fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
            crate::gateway::MockProvider::new(1536).chat(req)
        }
    }

    fn flaky(bad: &'static str, max_concurrency: usize) -> (Gateway, Arc<AtomicUsize>) {
        let peak = Arc::new(AtomicUsize::new(0));
        let p = Flaky {
            bad,
            calls: Arc::new(AtomicUsize::new(0)),
            in_flight: Arc::new(AtomicUsize::new(0)),
            peak: peak.clone(),
        };
        let cfg = ProviderConfig {
            max_concurrency,
            retry_limit: 1,
            retry_base: Duration::ZERO,
            ..ProviderConfig::mock()
        };
        (Gateway::with_provider(Box::new(p), &cfg), peak)
    }

    #[test]
    fn embeds_every_record() {
        let out = embed_corpus(&records(10), &Gateway::mock()).unwrap();
        assert_eq!(out.embedded.len(), 10);
        assert!(out.embedded.iter().all(|(_, v)| v.dimension() == 1536));
        assert_eq!(out.embedded[3].0.id, "r3");
    }

    #[test]
    fn empty_description_embeds_title_alone() {
        let mut r = records(1);
        r[0].description.clear();
        let gw = Gateway::mock();
        let out = embed_corpus(&r, &gw).unwrap();
        assert_eq!(out.embedded[0].1, gw.embed_text("Record 0").unwrap());
    }

    #[test]
    fn single_failure_is_isolated() {
        let (gw, _) = flaky("Record 3\n", 3);
        let out = embed_corpus(&records(10), &gw).unwrap();
        assert_eq!(out.embedded.len(), 9);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].record, "r3");
    }

    #[test]
    fn all_failing_is_fatal() {
        let (gw, _) = flaky("Record", 2);
        assert!(matches!(
            embed_corpus(&records(4), &gw),
            Err(PipelineError::ProviderUnavailable(_))
        ));
    }

    #[test]
    fn concurrency_is_bounded() {
        let (gw, peak) = flaky("never", 3);
        embed_corpus(&records(40), &gw).unwrap();
        let peak = peak.load(Ordering::SeqCst);
        assert!(peak <= 3 && peak >= 1, "peak {peak}");
    }

    #[test]
    fn fan_out_keeps_order() {
        let items: Vec<usize> = (0..100).collect();
        assert_eq!(fan_out(&items, 7, |x| x * 2), (0..100).map(|x| x * 2).collect::<Vec<_>>());
        assert!(fan_out(&Vec::<u8>::new(), 4, |x| *x).is_empty());
    }
}
