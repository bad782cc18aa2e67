mod common;

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use teamalloc_service::api::{router, AppState};
use teamalloc_service::manager::{Pacing, RunHandle, RunManager, RunOptions};
use tower::ServiceExt;

fn state(dir: Option<std::path::PathBuf>) -> AppState {
    AppState {
        manager: Arc::new(RunManager::new(dir)),
        default_job: Some(Arc::new(common::job("table-assembly.json"))),
        defaults: RunOptions {
            pacing: Some(Pacing::Manual),
            ..RunOptions::default()
        },
    }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = raw(app, method, uri, body).await;
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn raw(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let body = body.map_or_else(Body::empty, |b| Body::from(b.to_string()));
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body)
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn start(app: &Router, body: Value) -> String {
    let (status, summary) = call(app, "POST", "/runs", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{summary}");
    summary["run"].as_str().unwrap().to_string()
}

fn handle(state: &AppState, id: &str) -> Arc<RunHandle> {
    state.manager.get(id).unwrap()
}

/// Ticks until the console has an offer for `h`.
fn until_offer(run: &RunHandle) {
    let session = run.session().unwrap();
    for _ in 0..50 {
        if !session.pending("h").is_empty() {
            return;
        }
        run.step();
    }
    panic!("no offer for h");
}

fn code(body: &Value) -> &str {
    body["error"]["code"].as_str().unwrap()
}

#[tokio::test]
async fn default_job_runs_and_is_listed() {
    let state = state(None);
    let app = router(state.clone());
    let id = start(&app, json!({})).await;
    let run = handle(&state, &id);
    while !run.step() {}

    let (status, list) = call(&app, "GET", "/runs", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(list["runs"][0]["run"], id.as_str());

    let (status, snapshot) = call(&app, "GET", &format!("/runs/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(snapshot["status"], "success");
    assert_eq!(snapshot["job"], "table-assembly-19");
    assert_eq!(snapshot["actions"].as_array().unwrap().len(), 19);
    assert!(snapshot["actions"].as_array().unwrap().iter().all(|a| a["status"] == "completed"));

    let (status, log) = raw(&app, "GET", &format!("/runs/{id}/log"), None).await;
    assert_eq!(status, StatusCode::OK);
    let text = String::from_utf8(log).unwrap();
    let mut last = None;
    for line in text.lines() {
        let mut parts = line.splitn(4, ',');
        let seq = parts.next().unwrap().parse::<u64>().unwrap();
        assert!(last < Some(seq));
        last = Some(seq);
        parts.next().unwrap().parse::<f64>().unwrap();
        parts.next().unwrap();
        serde_json::from_str::<Value>(parts.next().unwrap()).unwrap();
    }
    assert!(text.lines().last().unwrap().contains(",run_finished,"));
}

#[tokio::test]
async fn inline_job_errors_carry_diagnostics() {
    let app = router(state(None));
    let mut doc: Value =
        serde_json::from_str(&std::fs::read_to_string(common::job_path("table-assembly.json")).unwrap()).unwrap();
    doc["actions"][0]["costs"] = json!({"h": 19.0, "q": 28.0});
    let (status, body) = call(&app, "POST", "/runs", Some(json!({ "job": doc }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(code(&body), "invalid_job");
    let diagnostics = body["error"]["diagnostics"].as_array().unwrap();
    assert!(!diagnostics.is_empty());
    assert!(diagnostics[0]["message"].as_str().unwrap().contains('q'));
    assert!(diagnostics[0]["line"].as_u64().unwrap() > 0);

    let (status, body) = call(&app, "POST", "/runs", Some(json!({ "mode": "sideways" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(code(&body), "invalid_body");
}

#[tokio::test]
async fn inline_job_replaces_the_default() {
    let state = state(None);
    let app = router(state.clone());
    let doc: Value =
        serde_json::from_str(&std::fs::read_to_string(common::job_path("simulated-13.json")).unwrap()).unwrap();
    let id = start(&app, json!({ "job": doc, "variant": "coop-mt" })).await;
    let (_, snapshot) = call(&app, "GET", &format!("/runs/{id}/state"), None).await;
    assert_eq!(snapshot["actions"].as_array().unwrap().len(), 13);
    assert_eq!(snapshot["variant"], "coop-mt");
}

#[tokio::test]
async fn missing_job_without_default_is_rejected() {
    let mut state = state(None);
    state.default_job = None;
    let app = router(state);
    let (status, body) = call(&app, "POST", "/runs", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(code(&body), "no_job");
}

#[tokio::test]
async fn unknown_ids_are_not_found() {
    let app = router(state(None));
    for uri in ["/runs/run-9/state", "/runs/run-9/log", "/workers/nobody/pending"] {
        let (status, body) = call(&app, "GET", uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert!(["unknown_run", "unknown_worker"].contains(&code(&body)));
    }
}

#[tokio::test]
async fn console_worker_negotiates_over_http() {
    let state = state(None);
    let app = router(state.clone());
    let id = start(&app, json!({ "mode": "live" })).await;
    let run = handle(&state, &id);
    until_offer(&run);

    let (status, pending) = call(&app, "GET", "/workers/h/pending", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(pending["run"], id.as_str());
    let offer = &pending["requests"][0];
    assert_eq!(offer["kind"], "offer");
    assert_eq!(offer["action"], "a1");
    assert_eq!(offer["instruction"]["kind"], "move");
    let request = offer["request"].as_u64().unwrap();

    let (status, body) = call(&app, "POST", "/workers/h/decision", Some(json!({"request": 999, "decision": "accept"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(code(&body), "unknown_request");

    let (status, body) = call(&app, "POST", "/workers/h/decision", Some(json!({"request": request}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(code(&body), "invalid_body");

    let (status, body) = call(&app, "POST", "/workers/h/completion", Some(json!({"request": request}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(code(&body), "not_accepted");

    let decision = json!({"request": request, "decision": "accept"});
    let (status, ack) = call(&app, "POST", "/workers/h/decision", Some(decision.clone())).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!((ack["state"].as_str(), ack["duplicate"].as_bool()), (Some("accepted"), Some(false)));
    let (status, ack) = call(&app, "POST", "/workers/h/decision", Some(decision)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ack["duplicate"], true);
    let (status, body) = call(&app, "POST", "/workers/h/decision", Some(json!({"request": request, "decision": "reject"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(code(&body), "conflicting_decision");

    // The robot never talks to the console.
    let (status, body) = call(&app, "POST", "/workers/r/decision", Some(json!({"request": request, "decision": "accept"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(code(&body), "not_console");

    run.step();
    let (status, ack) = call(&app, "POST", "/workers/h/completion", Some(json!({"request": request}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ack["state"], "completed");
    run.step();
    run.step();
    let (_, snapshot) = call(&app, "GET", &format!("/runs/{id}/state"), None).await;
    let a1 = snapshot["actions"].as_array().unwrap().iter().find(|a| a["id"] == "a1").unwrap().clone();
    assert_eq!(a1["status"], "completed");
    assert_eq!(a1["candidate"], "h");
}

#[tokio::test]
async fn positions_are_accepted_for_known_workers() {
    let state = state(None);
    let app = router(state.clone());
    let id = start(&app, json!({ "mode": "live" })).await;
    let (status, body) = call(&app, "POST", "/workers/h/position", Some(json!({"position": [1.0, 2.0, 0.0]}))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(body["run"], id.as_str());
    handle(&state, &id).step();
    let (_, snapshot) = call(&app, "GET", &format!("/runs/{id}/state"), None).await;
    let h = snapshot["workers"].as_array().unwrap().iter().find(|w| w["id"] == "h").unwrap().clone();
    assert_eq!(h["position"], json!([1.0, 2.0, 0.0]));

    let uri = format!("/workers/q/position?run={id}");
    let (status, _) = call(&app, "POST", &uri, Some(json!({"position": [0.0, 0.0, 0.0], "run": id}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/workers/h/position", Some(json!({"position": [0.0, 0.0]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn stop_ends_the_run() {
    let state = state(None);
    let app = router(state.clone());
    let id = start(&app, json!({ "mode": "live" })).await;
    let run = handle(&state, &id);
    until_offer(&run);
    let (status, _) = call(&app, "POST", &format!("/runs/{id}/stop"), None).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    run.step();
    let (_, snapshot) = call(&app, "GET", &format!("/runs/{id}/state"), None).await;
    assert_eq!(snapshot["status"], "stopped");
    let (_, pending) = call(&app, "GET", "/workers/h/pending", None).await;
    assert!(pending["requests"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn log_stream_replays_a_finished_run() {
    let dir = tempfile::tempdir().unwrap();
    let state = state(Some(dir.path().to_path_buf()));
    let app = router(state.clone());
    let id = start(&app, json!({})).await;
    let run = handle(&state, &id);
    while !run.step() {}

    let (status, body) = raw(&app, "GET", &format!("/runs/{id}/stream"), None).await;
    assert_eq!(status, StatusCode::OK);
    let text = String::from_utf8(body).unwrap();
    let events: Vec<&str> = text.lines().filter_map(|l| l.strip_prefix("event: ")).collect();
    assert_eq!(events.first(), Some(&"run_started"));
    assert_eq!(events.last(), Some(&"run_finished"));
    let on_disk = std::fs::read_to_string(dir.path().join(format!("{id}.log"))).unwrap();
    assert_eq!(events.len(), on_disk.lines().count());
}

#[tokio::test]
async fn worker_stream_starts_with_the_open_offer() {
    let state = state(None);
    let app = router(state.clone());
    let id = start(&app, json!({ "mode": "live" })).await;
    until_offer(&handle(&state, &id));

    let request = Request::builder().uri("/workers/h/stream").body(Body::empty()).unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    assert_eq!(response.status(), StatusCode::OK);
    let mut body = response.into_body();
    let frame = tokio::time::timeout(Duration::from_secs(5), body.frame())
        .await
        .unwrap()
        .unwrap()
        .unwrap();
    let text = String::from_utf8(frame.into_data().unwrap().to_vec()).unwrap();
    assert!(text.contains("event: request"), "{text}");
    let data = text.lines().find_map(|l| l.strip_prefix("data: ")).unwrap();
    let offer: Value = serde_json::from_str(data).unwrap();
    assert_eq!(offer["action"], "a1");

    let (status, body) = call(&app, "GET", "/workers/r/stream", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(code(&body), "not_console");
}
