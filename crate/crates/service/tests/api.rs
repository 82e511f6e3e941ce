mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::http::StatusCode;
use chrono::NaiveDate;
use serde_json::{json, Value};

use atlas_core::cartography::{LabelStyle, Rect};
use atlas_core::corpus::embedding_text;
use atlas_core::gateway::Gateway;
use atlas_core::synthesis::IDEA_LOG_FILE;
use atlas_service::{filter_timeline, load_state, ServiceState, TimeWindow};

use common::{get, post_json, record};

fn three_doc_state(dir: &std::path::Path) -> Arc<ServiceState> {
    common::build_artifacts(
        dir,
        &[
            record("v", "voting systems", "", "2012"),
            record("c", "cat pictures", "", "2016"),
            record("q", "quantum computing", "", "2020"),
        ],
    );
    Arc::new(load_state(dir, Gateway::mock()).unwrap())
}

fn synthetic(dir: &std::path::Path, n: usize) -> Arc<ServiceState> {
    Arc::new(common::synthetic_state(dir, n))
}

/// Independent cosine scan: f64 dot products over the stored embeddings.
fn oracle_ranking(state: &ServiceState, query: &[f32]) -> Vec<(String, f64)> {
    let norm = |v: &[f32]| v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
    let mut scored: Vec<(usize, f64)> = state
        .corpus
        .projects
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let e = p.embedding.as_ref().unwrap().values();
            let dot: f64 = e.iter().zip(query).map(|(a, b)| *a as f64 * *b as f64).sum();
            (i, dot / (norm(e) * norm(query)))
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored
        .into_iter()
        .map(|(i, s)| (state.corpus.projects[i].id.clone(), s))
        .collect()
}

#[tokio::test]
async fn health_reports_size_and_style() {
    let tmp = tempfile::tempdir().unwrap();
    let state = synthetic(tmp.path(), 30);
    let (status, body) = get(&state, "/api/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["corpus_size"], 30);
    assert_eq!(body["artifact_version"], 1);
    assert_eq!(body["label_style"]["font_px"], 14.0);
}

#[tokio::test]
async fn search_ranks_voting_first() {
    let tmp = tempfile::tempdir().unwrap();
    let state = three_doc_state(tmp.path());
    let (status, body) = get(&state, "/api/search?q=quadratic%20voting").await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["x"].as_f64().unwrap().is_finite());
    assert!(body["y"].as_f64().unwrap().is_finite());
    let hits = body["hits"].as_array().unwrap();
    assert_eq!(hits.len(), 3);
    assert_eq!(hits[0]["id"], "v");
    assert!((hits[0]["score"].as_f64().unwrap() - 0.5).abs() < 1e-12);

    let q = Gateway::mock().embed_text("quadratic voting").unwrap();
    let oracle = oracle_ranking(&state, q.values());
    let got: Vec<&str> = hits.iter().map(|h| h["id"].as_str().unwrap()).collect();
    let want: Vec<&str> = oracle.iter().map(|h| h.0.as_str()).collect();
    assert_eq!(got, want);
}

#[tokio::test]
async fn search_matches_oracle_on_synthetic_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let state = synthetic(tmp.path(), 60);
    let gw = Gateway::mock();
    for q in ["voting democracy", "robot grippers", "opera", "housing transit neural", "zzz unknown"] {
        let (status, body) = get(&state, &format!("/api/search?q={}&k=60", q.replace(' ', "+"))).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        let oracle = oracle_ranking(&state, gw.embed_text(q).unwrap().values());
        let hits = body["hits"].as_array().unwrap();
        assert_eq!(hits.len(), 60);
        for (h, (id, score)) in hits.iter().zip(&oracle) {
            assert_eq!(h["id"].as_str().unwrap(), id, "query {q}");
            assert!((h["score"].as_f64().unwrap() - score).abs() < 1e-12);
        }
    }
}

#[tokio::test]
async fn self_query_scores_one() {
    let tmp = tempfile::tempdir().unwrap();
    let state = synthetic(tmp.path(), 40);
    let p = &state.corpus.projects[7];
    let text = embedding_text(&p.title, &p.description);
    let uri = format!("/api/search?q={}&k=3", urlencode(&text));
    let (status, body) = get(&state, &uri).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["hits"][0]["id"], p.id.as_str());
    assert!((body["hits"][0]["score"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(body["hits"].as_array().unwrap().len(), 3);
}

fn urlencode(s: &str) -> String {
    s.bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' => (b as char).to_string(),
            _ => format!("%{b:02X}"),
        })
        .collect()
}

#[tokio::test]
async fn search_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let state = three_doc_state(tmp.path());
    let (status, body) = get(&state, "/api/search?q=").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error_code"], "empty_query");
    assert!(body["message"].is_string());
    let (status, _) = get(&state, "/api/search?q=x&k=0").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) = get(&state, "/api/search?q=x&k=abc").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error_code"], "invalid_parameter");
}

#[tokio::test]
async fn project_lookup() {
    let tmp = tempfile::tempdir().unwrap();
    let state = three_doc_state(tmp.path());
    let (status, body) = get(&state, "/api/project/c").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["title"], "cat pictures");
    assert_eq!(body["date"], "2016-01-01");
    assert_eq!(body["embedding"].as_array().unwrap().len(), 1536);
    let (status, body) = get(&state, "/api/project/nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error_code"], "unknown_project");
}

#[test]
fn timeline_filter_since_2018() {
    let tmp = tempfile::tempdir().unwrap();
    let state = common::synthetic_state(tmp.path(), 100);
    let start = NaiveDate::from_ymd_opt(2018, 1, 1).unwrap();
    let end = state.corpus.date_range.unwrap().1;
    let got: BTreeSet<String> = filter_timeline(&state, &TimeWindow::new(start, end).unwrap()).into_iter().collect();
    let want: BTreeSet<String> = state
        .corpus
        .projects
        .iter()
        .filter(|p| p.date.unwrap() >= start)
        .map(|p| p.id.clone())
        .collect();
    assert_eq!(got, want);

    let (lo, hi) = state.corpus.date_range.unwrap();
    assert_eq!(filter_timeline(&state, &TimeWindow::new(lo, hi).unwrap()).len(), 100);
    assert!(TimeWindow::new(hi, lo).is_err() || lo == hi);
}

#[test]
fn timeline_order_is_date_then_id() {
    let tmp = tempfile::tempdir().unwrap();
    let state = common::synthetic_state(tmp.path(), 50);
    let all = TimeWindow::new(NaiveDate::MIN, NaiveDate::MAX).unwrap();
    let ids = filter_timeline(&state, &all);
    let keyed: Vec<(NaiveDate, &str)> = ids
        .iter()
        .map(|id| (state.corpus.project(id).unwrap().date.unwrap(), id.as_str()))
        .collect();
    let mut sorted = keyed.clone();
    sorted.sort();
    assert_eq!(keyed, sorted);
}

#[tokio::test]
async fn summary_of_whole_map_and_empty_corner() {
    let tmp = tempfile::tempdir().unwrap();
    common::build_artifacts(
        tmp.path(),
        &(0..5)
            .map(|i| record(&format!("s{i}"), &format!("Robot study {i}"), "robotic arms", "2019"))
            .collect::<Vec<_>>(),
    );
    let state = Arc::new(load_state(tmp.path(), Gateway::mock()).unwrap());
    let (status, body) = get(&state, "/api/summary").await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let ids: BTreeSet<&str> = body["project_ids"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(ids.len(), 5);
    assert!(body["summary"].as_str().unwrap().starts_with("TITLE: Synthesized Idea"));
    let (_, again) = get(&state, "/api/summary").await;
    assert_eq!(body, again);

    let (status, body) = get(&state, "/api/summary?x0=1000&y0=1000&x1=1001&y1=1001").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error_code"], "empty_region");
}

#[tokio::test]
async fn summary_caps_at_twenty_nearest_center() {
    let tmp = tempfile::tempdir().unwrap();
    let state = synthetic(tmp.path(), 60);
    let (status, body) = get(&state, "/api/summary").await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = body["project_ids"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(ids.len(), 20);
}

fn assert_no_overlap(labels: &[Value], zoom: f64, x0: f64, y1: f64) {
    let style = LabelStyle::default();
    let s = style.px_per_unit * zoom;
    let rects: Vec<Rect> = labels
        .iter()
        .map(|l| {
            let (w, h) = style.box_size(l["text"].as_str().unwrap());
            let cx = (l["x"].as_f64().unwrap() - x0) * s;
            let cy = (y1 - l["y"].as_f64().unwrap()) * s;
            Rect::centered(cx, cy, w, h)
        })
        .collect();
    for (i, a) in rects.iter().enumerate() {
        for b in &rects[i + 1..] {
            assert_eq!(a.intersection_area(b), 0.0);
        }
    }
}

#[tokio::test]
async fn map_payload_full_view() {
    let tmp = tempfile::tempdir().unwrap();
    let state = synthetic(tmp.path(), 100);
    let (status, body) = get(&state, "/api/map?x0=-100&y0=-100&x1=100&y1=100&zoom=1").await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["projects"].as_array().unwrap().len(), 100);
    let labels = body["labels"].as_array().unwrap();
    assert!(!labels.is_empty());
    assert_no_overlap(labels, 1.0, -100.0, 100.0);
    let contours = body["contours"].as_array().unwrap();
    assert!(!contours.is_empty());
    assert!(contours[0]["paths"][0][0].as_array().unwrap().len() == 2);
    let p = &body["projects"][0];
    for key in ["id", "title", "group", "x", "y", "date"] {
        assert!(!p[key].is_null(), "{key}");
    }
}

#[tokio::test]
async fn map_payload_defaults_to_whole_map() {
    let tmp = tempfile::tempdir().unwrap();
    let state = synthetic(tmp.path(), 40);
    let (status, body) = get(&state, "/api/map").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["projects"].as_array().unwrap().len(), 40);
}

#[tokio::test]
async fn map_payload_window_filters_and_recomputes() {
    let tmp = tempfile::tempdir().unwrap();
    let state = synthetic(tmp.path(), 100);
    let (_, full) = get(&state, "/api/map").await;
    let (_, recent) = get(&state, "/api/map?start=2018-01-01").await;
    let n_recent = recent["projects"].as_array().unwrap().len();
    let expected = state
        .corpus
        .projects
        .iter()
        .filter(|p| p.date.unwrap() >= NaiveDate::from_ymd_opt(2018, 1, 1).unwrap())
        .count();
    assert_eq!(n_recent, expected);
    assert!(recent["projects"].as_array().unwrap().iter().all(|p| p["date"].as_str().unwrap() >= "2018"));
    assert_ne!(full["contours"], recent["contours"]);

    let (status, empty) = get(&state, "/api/map?start=1900&end=1901").await;
    assert_eq!(status, StatusCode::OK);
    assert!(empty["projects"].as_array().unwrap().is_empty());
    assert!(empty["labels"].as_array().unwrap().is_empty());
    assert!(empty["contours"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn map_payload_rejects_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let state = synthetic(tmp.path(), 20);
    let (status, body) = get(&state, "/api/map?x0=5&x1=1").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error_code"], "invalid_viewport");
    let (status, body) = get(&state, "/api/map?start=2020&end=2010").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error_code"], "invalid_window");
    let (status, _) = get(&state, "/api/map?zoom=-1").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn overview_shows_fewer_labels_than_subtopic_zoom() {
    let tmp = tempfile::tempdir().unwrap();
    let state = synthetic(tmp.path(), 100);
    let (_, wide) = get(&state, "/api/map?x0=-60&y0=-60&x1=60&y1=60&zoom=1").await;
    assert!(wide["labels"].as_array().unwrap().len() <= 12);
}

#[tokio::test]
async fn generate_with_provenance_and_log() {
    let tmp = tempfile::tempdir().unwrap();
    let base = common::synthetic_state(tmp.path(), 20)
        .with_idea_log(&tmp.path().join(IDEA_LOG_FILE))
        .unwrap();
    let state = Arc::new(base);
    let body = json!({"items": [
        {"project_id": "p001", "aspect": "whole"},
        {"project_id": "p002", "aspect": "technology"}
    ]});
    let (status, idea) = post_json(&state, "/api/generate", &body).await;
    assert_eq!(status, StatusCode::OK, "{idea}");
    assert_eq!(idea["title"], "Synthesized Idea");
    let prompt = idea["prompt_used"].as_str().unwrap();
    let p1 = state.corpus.project("p001").unwrap();
    assert!(prompt.contains(&format!("{}\n{}", p1.title, p1.description)));
    assert!(prompt.find("[ELEMENT 1").unwrap() < prompt.find("[ELEMENT 2").unwrap());

    let log = std::fs::read_to_string(tmp.path().join(IDEA_LOG_FILE)).unwrap();
    assert_eq!(log.lines().count(), 1);
    let logged: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(logged["prompt_used"], idea["prompt_used"]);
}

#[tokio::test]
async fn generate_rejects_bad_recipes() {
    let tmp = tempfile::tempdir().unwrap();
    let state = synthetic(tmp.path(), 20);
    let cases = [
        (json!({"items": []}), StatusCode::BAD_REQUEST, "invalid_recipe"),
        (json!({"items": [{"project_id": "p001", "aspect": "vibes"}]}), StatusCode::BAD_REQUEST, "invalid_recipe"),
        (
            json!({"items": [{"project_id": "p001", "aspect": "whole"}, {"project_id": "p001", "aspect": "whole"}]}),
            StatusCode::BAD_REQUEST,
            "invalid_recipe",
        ),
        (json!({"items": [{"project_id": "zzz", "aspect": "whole"}]}), StatusCode::NOT_FOUND, "unknown_project"),
        (json!({"nope": 1}), StatusCode::BAD_REQUEST, "invalid_recipe"),
    ];
    for (body, status, code) in cases {
        let (got, resp) = post_json(&state, "/api/generate", &body).await;
        assert_eq!(got, status, "{body} -> {resp}");
        assert_eq!(resp["error_code"], code);
    }
    let nine: Vec<Value> = (0..9).map(|i| json!({"project_id": format!("p{i:03}"), "aspect": "whole"})).collect();
    let (got, _) = post_json(&state, "/api/generate", &json!({ "items": nine })).await;
    assert_eq!(got, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_route_uses_error_body() {
    let tmp = tempfile::tempdir().unwrap();
    let state = three_doc_state(tmp.path());
    let (status, body) = get(&state, "/api/nothing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error_code"], "not_found");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_reads_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let state = synthetic(tmp.path(), 50);
    let (_, reference) = get(&state, "/api/search?q=robot+music&k=10").await;
    let mut tasks = Vec::new();
    for _ in 0..16 {
        let s = state.clone();
        tasks.push(tokio::spawn(async move { get(&s, "/api/search?q=robot+music&k=10").await.1 }));
    }
    for t in tasks {
        assert_eq!(t.await.unwrap(), reference);
    }
}
