//! HTTP reward service for RL training loops.
//!
//! `POST /v1/reward` scores a group of rollouts against one reference chart
//! and returns rewards, group-normalized advantages and per-rollout details.
//! `GET /v1/health` reports engine and schema versions.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::chart::{parse_chart_document, read_chart_document, ChartDocument, SCHEMA_VERSION};
use crate::config::{EngineConfig, RewardOverrides};
use crate::error::Error;
use crate::harness::Evaluator;
use crate::reward::{group_advantages, RewardConfig, RolloutScore};
use crate::sandbox::execution_reward;

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Reference chart for a request: plotting code, a path to Chart JSON, or
/// an inline Chart JSON object.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestGt {
    Code(String),
    ChartJson(serde_json::Value),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RewardRequest {
    pub gt: RequestGt,
    pub rollouts: Vec<String>,
    #[serde(default)]
    pub config_overrides: Option<RewardOverrides>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct RewardResponse {
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    pub details: Vec<RolloutScore>,
}

struct ServiceState {
    evaluator: Evaluator,
    reward: RewardConfig,
}

pub fn router(config: EngineConfig) -> Router {
    let state = Arc::new(ServiceState {
        evaluator: Evaluator::new(config.runner),
        reward: config.reward,
    });
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/reward", post(reward))
        .with_state(state)
}

/// Bind and serve until the process is interrupted.
pub async fn serve(bind: &str, config: EngineConfig) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("reward service listening on {}", listener.local_addr()?);
    axum::serve(listener, router(config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "engine_version": ENGINE_VERSION,
        "schema_version": SCHEMA_VERSION,
    }))
}

fn problem(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

async fn reward(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let request: RewardRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return problem(StatusCode::BAD_REQUEST, format!("malformed request: {e}")),
    };
    if request.rollouts.is_empty() {
        return problem(StatusCode::BAD_REQUEST, "rollouts must not be empty");
    }
    let cfg = match &request.config_overrides {
        Some(over) => match over.apply(&state.reward) {
            Ok(cfg) => cfg,
            Err(e) => return problem(StatusCode::BAD_REQUEST, e.to_string()),
        },
        None => state.reward.clone(),
    };

    let gt = {
        let state = state.clone();
        let cfg = cfg.clone();
        let gt = request.gt.clone();
        tokio::task::spawn_blocking(move || load_gt(&state.evaluator, &gt, &cfg)).await
    };
    let gt = match gt {
        Ok(Ok(doc)) => Arc::new(doc),
        Ok(Err((status, message))) => return problem(status, message),
        Err(e) => return problem(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    };

    let tasks: Vec<_> = request
        .rollouts
        .into_iter()
        .map(|rollout| {
            let state = state.clone();
            let gt = gt.clone();
            let cfg = cfg.clone();
            tokio::task::spawn_blocking(move || state.evaluator.score_rollout(&rollout, &gt, &cfg))
        })
        .collect();

    let mut details = Vec::with_capacity(tasks.len());
    for task in tasks {
        match task.await {
            Ok(Ok(score)) => details.push(score),
            Ok(Err(e @ Error::Infrastructure(_))) => {
                return problem(StatusCode::SERVICE_UNAVAILABLE, e.to_string())
            }
            Ok(Err(e @ Error::Config(_))) => return problem(StatusCode::BAD_REQUEST, e.to_string()),
            Ok(Err(e)) => return problem(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
            Err(e) => return problem(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        }
    }

    let rewards: Vec<f64> = details.iter().map(|d| d.total).collect();
    match group_advantages(&rewards, &cfg) {
        Ok(group) => Json(RewardResponse {
            rewards: group.rewards,
            advantages: group.advantages,
            details,
        })
        .into_response(),
        Err(e) => problem(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

fn load_gt(evaluator: &Evaluator, gt: &RequestGt, cfg: &RewardConfig) -> Result<ChartDocument, (StatusCode, String)> {
    match gt {
        RequestGt::ChartJson(serde_json::Value::String(path)) => {
            read_chart_document(path.as_ref()).map_err(|e| (StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
        }
        RequestGt::ChartJson(inline @ serde_json::Value::Object(_)) => {
            let bytes = serde_json::to_vec(inline).expect("JSON values serialize");
            parse_chart_document(&bytes).map_err(|e| (StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
        }
        RequestGt::ChartJson(_) => Err((
            StatusCode::BAD_REQUEST,
            "gt.chart_json must be a path or a Chart JSON object".into(),
        )),
        RequestGt::Code(code) => match evaluator.run_code(code, cfg) {
            Ok(result) if execution_reward(&result) == 1 => {
                Ok(result.document.expect("ok results carry a document"))
            }
            Ok(result) => Err((
                StatusCode::UNPROCESSABLE_ENTITY,
                format!(
                    "ground truth execution failed: {}",
                    result.diagnostic.unwrap_or_default()
                ),
            )),
            Err(e) => Err((StatusCode::SERVICE_UNAVAILABLE, e.to_string())),
        },
    }
}
