mod common;

use std::fs;

use atlas_core::corpus::TOPICS_FILE;
use atlas_core::gateway::Gateway;
use atlas_core::reduce::{fit, load_model, model_to_bytes, save_model, MODEL_FILE};
use atlas_service::{load_state, StateError};

/// Refits the model on all but the last training vector.
fn truncate_model(dir: &std::path::Path) -> usize {
    let m = load_model(&dir.join(MODEL_FILE)).unwrap();
    let fewer = m.training_vectors().slice(ndarray::s![..m.n() - 1, ..]).to_owned();
    let out = fit(fewer.view(), m.params()).unwrap();
    save_model(&out, &dir.join(MODEL_FILE)).unwrap();
    out.n()
}

#[test]
fn valid_artifacts_load() {
    let tmp = tempfile::tempdir().unwrap();
    let state = common::synthetic_state(tmp.path(), 50);
    assert_eq!(state.corpus.len(), 50);
    assert_eq!(state.model.n(), 50);
    assert_eq!(state.artifact_version(), 1);
}

#[test]
fn point_count_mismatch_fails_validation() {
    let tmp = tempfile::tempdir().unwrap();
    common::synthetic_state(tmp.path(), 50);
    assert_eq!(truncate_model(tmp.path()), 49);
    match load_state(tmp.path(), Gateway::mock()) {
        Err(StateError::ValidationFailed(problems)) => {
            assert!(problems.iter().any(|p| p.contains("49")), "{problems:?}")
        }
        other => panic!("expected ValidationFailed, got {other:?}"),
    }
}

#[test]
fn missing_topics_file() {
    let tmp = tempfile::tempdir().unwrap();
    common::synthetic_state(tmp.path(), 20);
    fs::remove_file(tmp.path().join(TOPICS_FILE)).unwrap();
    assert!(matches!(
        load_state(tmp.path(), Gateway::mock()),
        Err(StateError::MissingArtifact(p)) if p.ends_with(TOPICS_FILE)
    ));
}

#[test]
fn wrong_model_version_or_magic() {
    let tmp = tempfile::tempdir().unwrap();
    let state = common::synthetic_state(tmp.path(), 20);
    let mut bytes = model_to_bytes(&state.model);
    bytes[4..8].copy_from_slice(&999u32.to_le_bytes());
    fs::write(tmp.path().join(MODEL_FILE), &bytes).unwrap();
    assert!(matches!(load_state(tmp.path(), Gateway::mock()), Err(StateError::VersionMismatch(_))));
    bytes[0] = b'X';
    fs::write(tmp.path().join(MODEL_FILE), &bytes).unwrap();
    assert!(matches!(load_state(tmp.path(), Gateway::mock()), Err(StateError::VersionMismatch(_))));
}

#[test]
fn corrupt_projects_file() {
    let tmp = tempfile::tempdir().unwrap();
    common::synthetic_state(tmp.path(), 20);
    fs::write(tmp.path().join("projects.json"), "[{\"id\": 1}]").unwrap();
    assert!(matches!(load_state(tmp.path(), Gateway::mock()), Err(StateError::ValidationFailed(_))));
}
