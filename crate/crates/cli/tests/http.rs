use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sota_cli::service::{router, AppState};
use sota_cli::service_networks;
use sota_core::policy::{extract_policy, simulate};
use sota_core::solver::{solve, Mode, SolveConfig};
use sota_core::synth::{example1, syn3, Syn3Config};
use tower::ServiceExt;

fn app() -> Router {
    app_with_log(None)
}

fn app_with_log(log: Option<std::path::PathBuf>) -> Router {
    router(Arc::new(AppState::new(service_networks(&[]).unwrap(), 2, log).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap()
    };
    (status, value)
}

async fn session(app: &Router, body: Value) -> String {
    let (status, v) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

async fn event(app: &Router, id: &str, body: Value) -> (StatusCode, Value) {
    call(app, "POST", &format!("/sessions/{id}/events"), Some(body)).await
}

#[tokio::test]
async fn networks_are_listed() {
    let (status, v) = call(&app(), "GET", "/networks", None).await;
    assert_eq!(status, StatusCode::OK);
    let nets = v["networks"].as_array().unwrap();
    let syn = nets.iter().find(|n| n["id"] == "syn3").unwrap();
    assert_eq!((syn["stations"].as_u64(), syn["lines"].as_u64()), (Some(3), Some(3)));
    let ex = nets.iter().find(|n| n["id"] == "example1").unwrap();
    assert_eq!((ex["stations"].as_u64(), ex["lines"].as_u64()), (Some(2), Some(3)));
}

#[tokio::test]
async fn solve_job_reports_root_utility() {
    let app = app();
    let (status, v) = call(
        &app,
        "POST",
        "/solve",
        Some(json!({"network": "syn3", "budget": "22.5m"})),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let job = v["job_id"].as_u64().unwrap();
    let mut result = Value::Null;
    for _ in 0..600 {
        let (status, v) = call(&app, "GET", &format!("/jobs/{job}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if v["status"] == "done" {
            result = v["result"].clone();
            break;
        }
        assert_ne!(v["status"], "failed", "{v}");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    let g = syn3(&Syn3Config::default()).unwrap().graph().unwrap();
    let expected = solve(&g, &SolveConfig::new(90, Mode::Plain)).unwrap().root_utility();
    assert_eq!(result["budget_ticks"], 90);
    assert_eq!(result["root_utility"].as_f64().unwrap(), expected);
    assert!(result["stats"]["station_evaluations"].as_u64().unwrap() > 0);
}

#[tokio::test]
async fn bad_solve_requests() {
    let app = app();
    let (status, v) = call(&app, "POST", "/solve", Some(json!({"network": "nowhere"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND, "{v}");
    let (status, v) = call(&app, "POST", "/solve", Some(json!({"network": "syn3", "budget": 500}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["kind"], "budget-exceeds-grid");
    let (status, _) = call(
        &app,
        "POST",
        "/solve",
        Some(json!({"network": "syn3", "origin": "Z", "destination": "C"})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, "GET", "/jobs/999", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn simulate_is_seeded() {
    let app = app();
    let body = json!({"network": "example1", "n": 1000, "seed": 7});
    let (status, a) = call(&app, "POST", "/simulate", Some(body.clone())).await;
    assert_eq!(status, StatusCode::OK, "{a}");
    let (_, b) = call(&app, "POST", "/simulate", Some(body)).await;
    assert_eq!(a, b);
    let g = example1().graph().unwrap();
    let direct = simulate(
        &extract_policy(&solve(&g, &SolveConfig::new(20, Mode::Plain)).unwrap()),
        1000,
        7,
    )
    .unwrap();
    assert_eq!(a["successes"].as_u64().unwrap(), direct.successes);
    assert_eq!(a["n"], 1000);
    let (status, _) = call(&app, "POST", "/simulate", Some(json!({"network": "example1", "n": 0}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn example_session_follows_the_golden_policy() {
    let app = app();
    let (status, v) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"network": "example1", "budget": 20})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    assert!((v["root_utility"].as_f64().unwrap() - 0.801125).abs() < 1e-12);
    assert_eq!(v["state"]["remaining"], json!(["1", "2", "3"]));
    let id = v["session_id"].as_str().unwrap();

    let (status, v) = event(&app, id, json!({"type": "line-arrived", "line": "3", "tick": 2})).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["advice"]["decision"], "wait");
    assert!(v["advice"]["u_wait"].as_f64().unwrap() > 0.70);
    assert!(v["advice"]["u_wait"].as_f64().unwrap() > v["advice"]["u_board"].as_f64().unwrap());

    let (_, v) = event(&app, id, json!({"type": "line-arrived", "line": "1", "tick": 3})).await;
    assert_eq!(v["advice"]["decision"], "board");
    assert_eq!(v["advice"]["line"], "1");
    assert_eq!(v["state"]["t"], 17);
    assert_eq!(v["state"]["remaining"], json!(["2"]));

    let (status, v) = event(&app, id, json!({"type": "line-arrived", "line": "3", "tick": 4})).await;
    assert_eq!(status, StatusCode::CONFLICT, "{v}");

    let (_, v) = event(&app, id, json!({"type": "boarded", "line": "1"})).await;
    assert_eq!(v["state"]["status"], "riding");
    let (_, v) = event(&app, id, json!({"type": "alighted", "station": "D", "ticks": 17})).await;
    assert_eq!(v["state"]["status"], "arrived");
    assert_eq!(v["state"]["t"], 0);
    let (status, _) = event(&app, id, json!({"type": "tick-advance", "n": 1})).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn first_arrival_of_line_one_is_boarded() {
    let app = app();
    let id = session(&app, json!({"network": "example1"})).await;
    let (_, v) = event(&app, &id, json!({"type": "line-arrived", "line": "1", "tick": 1})).await;
    assert_eq!(v["advice"]["decision"], "board");
    assert!((v["advice"]["u_board"].as_f64().unwrap() - 0.9).abs() < 1e-12);
}

#[tokio::test]
async fn waiting_out_every_line_fails_the_trip() {
    let app = app();
    let id = session(&app, json!({"network": "example1"})).await;
    let (_, v) = event(&app, &id, json!({"type": "tick-advance", "n": 16})).await;
    assert_eq!(v["state"]["status"], "failed");
    assert!(v["advice"].is_null());
    let id = session(&app, json!({"network": "example1"})).await;
    let (status, v) = event(&app, &id, json!({"type": "tick-advance", "n": 21})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    let (status, _) = event(&app, &id, json!({"type": "line-arrived", "line": "2", "tick": 25})).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn session_errors() {
    let app = app();
    let (status, _) = event(&app, "s404", json!({"type": "tick-advance", "n": 1})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"network": "atlantis"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let id = session(&app, json!({"network": "example1"})).await;
    let (status, _) = event(&app, &id, json!({"type": "boarded", "line": "2"})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = event(&app, &id, json!({"type": "line-arrived", "line": "9", "tick": 1})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = event(&app, &id, json!({"type": "line-arrived", "line": "2", "tick": 5})).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = event(&app, &id, json!({"type": "line-arrived", "line": "3", "tick": 4})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = event(&app, &id, json!({"type": "alighted", "station": "D"})).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, v) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["events"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn transfer_trip_on_syn3() {
    let app = app();
    let id = session(&app, json!({"network": "syn3", "budget": "15m", "mode": "dominance"})).await;
    let (_, v) = event(&app, &id, json!({"type": "line-arrived", "line": "3", "tick": 4})).await;
    assert!(v["advice"]["decision"].is_string());
    event(&app, &id, json!({"type": "boarded", "line": "3"})).await;
    let (status, v) = event(&app, &id, json!({"type": "alighted", "station": "B", "ticks": 28})).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["state"]["station"], "B");
    assert_eq!(v["state"]["t"], 60 - 4 - 28);
    assert_eq!(v["state"]["remaining"], json!(["1", "2"]));
    assert_eq!(v["advice"]["line"], "3");
    let (status, _) = event(&app, &id, json!({"type": "alighted", "station": "C"})).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

async fn replay(app: &Router, events: &[Value]) -> Vec<Value> {
    let id = session(app, json!({"network": "example1", "budget": "20m"})).await;
    let mut out = Vec::new();
    for e in events {
        let (status, v) = event(app, &id, e.clone()).await;
        out.push(json!({"status": status.as_u16(), "advice": v["advice"], "state": v["state"]}));
    }
    out
}

#[tokio::test]
async fn restart_replays_identically_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("sessions.jsonl");
    let events = [
        json!({"type": "line-arrived", "line": "3", "tick": 2}),
        json!({"type": "tick-advance", "n": 1}),
        json!({"type": "line-arrived", "line": "2", "tick": 5}),
        json!({"type": "boarded", "line": "2"}),
        json!({"type": "alighted", "station": "D", "ticks": 15}),
    ];
    let first = replay(&app_with_log(Some(log.clone())), &events).await;
    let second = replay(&app(), &events).await;
    assert_eq!(first, second);
    assert_eq!(first[2]["advice"]["decision"], "board");
    assert_eq!(first[4]["state"]["status"], "arrived");
    let text = std::fs::read_to_string(&log).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 1 + events.len());
    assert_eq!(lines[1]["event"], events[0]);
}

#[tokio::test]
async fn advice_matches_extracted_policy() {
    let app = app();
    let g = example1().graph().unwrap();
    let policy = extract_policy(&solve(&g, &SolveConfig::new(20, Mode::Plain)).unwrap());
    let names = ["1", "2", "3"];
    for first in 0..3 {
        for tick in 1..=12 {
            let id = session(&app, json!({"network": "example1"})).await;
            let (status, v) = event(
                &app,
                &id,
                json!({"type": "line-arrived", "line": names[first], "tick": tick}),
            )
            .await;
            assert_eq!(status, StatusCode::OK);
            let rest = 0b111 & !(1u32 << first);
            let expected = policy.decide(0, first, rest, 20 - tick, tick).unwrap();
            assert_eq!(
                v["advice"]["decision"],
                serde_json::to_value(expected).unwrap(),
                "line {first} at {tick}"
            );
        }
    }
}
