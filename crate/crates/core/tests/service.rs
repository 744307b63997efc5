mod common;

use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chart_reward::service::{router, RewardResponse};
use chart_reward::serialize_chart_document;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use common::*;

async fn call(app: axum::Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn post(body: impl Into<Body>) -> Request<Body> {
    Request::post("/v1/reward")
        .header("content-type", "application/json")
        .body(body.into())
        .unwrap()
}

fn app() -> axum::Router {
    router(shell_engine(Duration::from_secs(10)))
}

#[tokio::test]
async fn health_reports_versions() {
    let (status, body) = call(app(), Request::get("/v1/health").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["schema_version"], "1.0");
    assert_eq!(body["engine_version"], env!("CARGO_PKG_VERSION"));
}

#[tokio::test]
async fn identical_rollouts_get_constant_group() {
    let code = script_emitting(&bar_chart());
    let req = json!({ "gt": {"code": code}, "rollouts": [response_wrapping(&code), response_wrapping(&code)] });
    let (status, body) = call(app(), post(req.to_string())).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let resp: RewardResponse = serde_json::from_value(body).unwrap();
    assert_eq!(resp.rewards, vec![2.0, 2.0]);
    assert_eq!(resp.advantages, vec![0.0, 0.0]);
    assert!(resp.details.iter().all(|d| d.exec == 1 && d.format == 1));
}

#[tokio::test]
async fn perfect_and_malformed_rollouts() {
    let code = script_emitting(&bar_chart());
    let req = json!({
        "gt": {"code": code},
        "rollouts": [response_wrapping(&code), "<think>forgot the tags</think> x=1"],
    });
    let (status, body) = call(app(), post(req.to_string())).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let resp: RewardResponse = serde_json::from_value(body).unwrap();
    assert_eq!(resp.rewards, vec![2.0, 0.0]);
    assert!((resp.advantages[0] - 1.0).abs() < 1e-6);
    assert!((resp.advantages[1] + 1.0).abs() < 1e-6);
    assert_eq!(resp.details[1].format, 0);
    assert_eq!(resp.details[1].exec, 0);
}

#[tokio::test]
async fn inline_chart_json_and_overrides() {
    let gt: Value = serde_json::from_slice(&serialize_chart_document(&bar_chart())).unwrap();
    let code = script_emitting(&bar_chart());
    let req = json!({
        "gt": {"chart_json": gt},
        "rollouts": [response_wrapping(&code), response_wrapping("exit 1\n")],
        "config_overrides": {"type_weights": {"patch": 1.0}},
    });
    let (status, body) = call(app(), post(req.to_string())).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let resp: RewardResponse = serde_json::from_value(body).unwrap();
    assert_eq!(resp.details[0].render, 1.0);
    assert_eq!(resp.details[1].exec, 0);
    assert_eq!(resp.rewards, vec![2.0, 1.0]);
}

#[tokio::test]
async fn malformed_bodies_are_400() {
    for body in [
        "not json".to_string(),
        json!({"rollouts": ["x"]}).to_string(),
        json!({"gt": {"code": "x"}, "rollouts": []}).to_string(),
        json!({"gt": {"code": "x"}, "rollouts": ["a"], "config_overrides": {"lambda_font": 2.0}}).to_string(),
        json!({"gt": {"code": "x"}, "rollouts": ["a"], "surprise": 1}).to_string(),
    ] {
        let (status, resp) = call(app(), post(body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body} -> {resp}");
        assert!(resp["error"].is_string());
    }
}

#[tokio::test]
async fn failing_ground_truth_is_422() {
    let req = json!({"gt": {"code": "exit 1"}, "rollouts": ["<think>a</think><code>x</code>"]});
    let (status, _) = call(app(), post(req.to_string())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let req = json!({"gt": {"chart_json": {"schema_version": "1.0"}}, "rollouts": ["x"]});
    let (status, _) = call(app(), post(req.to_string())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn missing_runner_is_503() {
    let mut cfg = shell_engine(Duration::from_secs(10));
    cfg.runner.command_template = vec!["/no/such/runner".into(), "{script}".into(), "{out}".into()];
    let gt: Value = serde_json::from_slice(&serialize_chart_document(&bar_chart())).unwrap();
    let req = json!({"gt": {"chart_json": gt}, "rollouts": ["<think>a</think><code>x</code>"]});
    let (status, _) = call(router(cfg), post(req.to_string())).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
}
