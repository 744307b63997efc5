//! Rendering-aware chart similarity metrics and reinforcement-learning
//! rewards for chart-editing and chart-to-code models.
//!
//! Charts are compared as [`ChartDocument`]s: structured lists of the
//! patches, lines, points and texts a plotting script actually rendered.
//! Predicted and reference objects are paired by optimal assignment and the
//! pair similarities are normalized by the larger object count.

pub mod assignment;
pub mod chart;
pub mod config;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod reward;
pub mod sandbox;
pub mod service;

pub use assignment::{hungarian_max, matched_type_score, Matching, SimilarityMatrix};
pub use chart::{
    parse_chart_document, serialize_chart_document, BBox, ChartDocument, Color, GraphicalKind,
    GraphicalObject, ObjectKind, TextObject, Vec2, SCHEMA_VERSION,
};
pub use config::{EngineConfig, RewardOverrides, RunnerConfig};
pub use error::{Error, Result};
pub use harness::{AggregateReport, BatchReport, EvalRecord, Evaluator, RecordReport};
pub use kernels::KernelParams;
pub use reward::{
    format_reward, group_advantages, layout_metric, rendering_reward, text_metric, total_reward,
    GroupAdvantages, RewardConfig, RolloutScore,
};
pub use sandbox::{execution_reward, ExecStatus, ExecutionRequest, ExecutionResult, Sandbox};
