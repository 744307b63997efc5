//! Pair scoring and batch benchmark evaluation.

use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chart::{read_chart_document, ChartDocument};
use crate::config::{ConfigEcho, RunnerConfig};
use crate::error::{Error, Result};
use crate::reward::{
    format_reward, layout_metric, rendering_reward, text_metric, total_reward, RewardConfig, RolloutScore,
};
use crate::sandbox::{execution_reward, ExecutionRequest, ExecutionResult, Sandbox};

/// JSON Schema for the report written by `eval`.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

/// Where the prediction comes from. Serialized as a one-key object, e.g.
/// `{"response": "<think>…</think><code>…</code>"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredSource {
    /// Raw model output with `<think>` and `<code>` segments.
    Response(String),
    Code(String),
    ChartJson(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GtSource {
    Code(String),
    ChartJson(PathBuf),
}

/// One benchmark item: an editing instruction applied to a source chart,
/// the model's prediction and the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    #[serde(default)]
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<PathBuf>,
    pub pred: PredSource,
    pub gt: GtSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Scored,
    /// The reference could not be rendered; the record is excluded from means.
    InvalidGt,
    /// An input file could not be read or the runner could not be launched.
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordReport {
    pub id: String,
    pub status: RecordStatus,
    /// Present only when the prediction was a raw response.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<u8>,
    pub exec_pred: u8,
    pub exec_gt: u8,
    pub t_r: f64,
    pub l_r: f64,
    pub render: f64,
    pub total: f64,
    pub status_notes: Vec<String>,
}

impl RecordReport {
    fn new(id: &str) -> Self {
        RecordReport {
            id: id.to_string(),
            status: RecordStatus::Scored,
            format: None,
            exec_pred: 0,
            exec_gt: 0,
            t_r: 0.0,
            l_r: 0.0,
            render: 0.0,
            total: 0.0,
            status_notes: Vec::new(),
        }
    }

    fn fail(mut self, status: RecordStatus, note: String) -> Self {
        self.status = status;
        self.status_notes.push(note);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    /// Records that were scored; the means run over these.
    pub n: usize,
    pub exec_pct: f64,
    pub t_r_mean: f64,
    pub l_r_mean: f64,
    pub render_mean: f64,
    pub n_invalid_gt: usize,
    pub n_errors: usize,
    pub n_malformed: usize,
    pub diagnostics: Vec<String>,
    pub config_echo: ConfigEcho,
}

impl AggregateReport {
    pub fn from_records(records: &[RecordReport], cfg: &RewardConfig) -> Self {
        let scored: Vec<&RecordReport> = records
            .iter()
            .filter(|r| r.status == RecordStatus::Scored)
            .collect();
        let n = scored.len();
        let pct = |f: &dyn Fn(&RecordReport) -> f64| {
            if n == 0 {
                0.0
            } else {
                (100.0 * scored.iter().map(|r| f(r)).sum::<f64>() / n as f64).clamp(0.0, 100.0)
            }
        };
        let mut diagnostics = Vec::new();
        if n == 0 {
            diagnostics.push("no records were scored; aggregates reported as 0".to_string());
        }
        AggregateReport {
            n,
            exec_pct: pct(&|r| f64::from(r.exec_pred)),
            t_r_mean: pct(&|r| r.t_r),
            l_r_mean: pct(&|r| r.l_r),
            render_mean: pct(&|r| r.render),
            n_invalid_gt: count(records, RecordStatus::InvalidGt),
            n_errors: count(records, RecordStatus::Error),
            n_malformed: 0,
            diagnostics,
            config_echo: ConfigEcho::from(cfg),
        }
    }
}

fn count(records: &[RecordReport], status: RecordStatus) -> usize {
    records.iter().filter(|r| r.status == status).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub aggregate: AggregateReport,
    pub records: Vec<RecordReport>,
}

impl BatchReport {
    /// True when some record could not be scored because the runner itself
    /// failed to launch.
    pub fn has_infrastructure_errors(&self) -> bool {
        self.records
            .iter()
            .any(|r| r.status_notes.iter().any(|n| n.starts_with(INFRA_NOTE)))
    }
}

const INFRA_NOTE: &str = "sandbox infrastructure error";

/// How a chart was obtained for scoring.
enum Rendered {
    Doc(ChartDocument),
    Failed(String),
}

/// Scores records: runs code through the sandbox, loads documents and
/// applies the metrics.
#[derive(Debug, Clone)]
pub struct Evaluator {
    runner: RunnerConfig,
    sandbox: Sandbox,
    base_dir: PathBuf,
}

impl Evaluator {
    pub fn new(runner: RunnerConfig) -> Self {
        let sandbox = Sandbox::new(runner.max_concurrent_runs);
        Evaluator {
            runner,
            sandbox,
            base_dir: PathBuf::from("."),
        }
    }

    /// Resolve relative `chart_json` paths against `dir`.
    pub fn with_base_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.base_dir = dir.into();
        self
    }

    pub fn sandbox(&self) -> &Sandbox {
        &self.sandbox
    }

    pub fn request(&self, code: &str, cfg: &RewardConfig) -> ExecutionRequest {
        ExecutionRequest {
            code: code.to_string(),
            command_template: self.runner.command_template.clone(),
            timeout: cfg.exec_timeout,
            env_allowlist: self.runner.env_allowlist.clone(),
            workdir_root: self.runner.workdir_root.clone(),
            script_name: self.runner.script_name.clone(),
        }
    }

    /// Run `code` through the configured runner.
    pub fn run_code(&self, code: &str, cfg: &RewardConfig) -> Result<ExecutionResult> {
        self.sandbox.execute(&self.request(code, cfg))
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    fn render(&self, code: &str, cfg: &RewardConfig) -> Result<Rendered> {
        let result = self.run_code(code, cfg)?;
        if execution_reward(&result) == 1 {
            Ok(Rendered::Doc(result.document.expect("ok results carry a document")))
        } else {
            let why = result.diagnostic.unwrap_or_else(|| format!("{:?}", result.status));
            Ok(Rendered::Failed(why))
        }
    }

    pub fn score_pair(&self, record: &EvalRecord, cfg: &RewardConfig) -> RecordReport {
        let mut report = RecordReport::new(&record.id);

        let gt = match &record.gt {
            GtSource::ChartJson(path) => match read_chart_document(&self.resolve(path)) {
                Ok(doc) => doc,
                Err(e) => return report.fail(RecordStatus::Error, format!("ground truth: {e}")),
            },
            GtSource::Code(code) => match self.render(code, cfg) {
                Ok(Rendered::Doc(doc)) => doc,
                Ok(Rendered::Failed(why)) => {
                    return report.fail(
                        RecordStatus::InvalidGt,
                        format!("ground truth execution failed: {why}"),
                    )
                }
                Err(e) => return report.fail(RecordStatus::Error, format!("{INFRA_NOTE}: {e}")),
            },
        };
        report.exec_gt = 1;

        let code = match &record.pred {
            PredSource::Response(text) => {
                let (format, code) = format_reward(text);
                report.format = Some(format);
                match code {
                    Some(code) => Some(code),
                    None => {
                        report.status_notes.push("format check failed: no code extracted".into());
                        return report;
                    }
                }
            }
            PredSource::Code(code) => Some(code.clone()),
            PredSource::ChartJson(_) => None,
        };

        let pred = match (&record.pred, code) {
            (PredSource::ChartJson(path), _) => match read_chart_document(&self.resolve(path)) {
                Ok(doc) => doc,
                Err(e) => return report.fail(RecordStatus::Error, format!("prediction: {e}")),
            },
            (_, Some(code)) => match self.render(&code, cfg) {
                Ok(Rendered::Doc(doc)) => doc,
                Ok(Rendered::Failed(why)) => {
                    report.status_notes.push(format!("execution failed: {why}"));
                    report.total = total_reward(report.format.unwrap_or(0), 0.0);
                    return report;
                }
                Err(e) => return report.fail(RecordStatus::Error, format!("{INFRA_NOTE}: {e}")),
            },
            (_, None) => unreachable!("code-bearing predictions always yield code"),
        };
        report.exec_pred = 1;

        let metrics = (|| -> Result<(f64, f64, f64)> {
            Ok((
                text_metric(&pred, &gt, cfg)?,
                layout_metric(&pred, &gt, cfg)?,
                rendering_reward(&pred, &gt, 1, cfg)?,
            ))
        })();
        match metrics {
            Ok((t_r, l_r, render)) => {
                report.t_r = t_r;
                report.l_r = l_r;
                report.render = render;
                report.total = total_reward(report.format.unwrap_or(0), render);
                report
            }
            Err(e) => report.fail(RecordStatus::Error, format!("scoring: {e}")),
        }
    }

    /// Score one RL rollout against an already rendered reference.
    ///
    /// `Err` only for sandbox infrastructure failures.
    pub fn score_rollout(&self, response: &str, gt: &ChartDocument, cfg: &RewardConfig) -> Result<RolloutScore> {
        let (format, code) = format_reward(response);
        let Some(code) = code else {
            return Ok(RolloutScore::new(format, 0, 0.0, None));
        };
        let result = self.run_code(&code, cfg)?;
        let exec = execution_reward(&result);
        let render = match &result.document {
            Some(pred) if exec == 1 => rendering_reward(pred, gt, exec, cfg)?,
            _ => 0.0,
        };
        Ok(RolloutScore::new(format, exec, render, Some(code)))
    }

    /// Score a line-delimited JSON dataset with at most `jobs` records in
    /// flight. Output order matches input order.
    pub fn eval_batch<R: BufRead>(&self, input: R, cfg: &RewardConfig, jobs: usize) -> Result<BatchReport> {
        let mut records = Vec::new();
        let mut malformed = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<dataset>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<EvalRecord>(&line) {
                Ok(r) => records.push(r),
                Err(e) => malformed.push(format!("line {}: {e}", i + 1)),
            }
        }

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::Infrastructure(e.to_string()))?;
        let reports: Vec<RecordReport> = pool.install(|| {
            use rayon::prelude::*;
            records.par_iter().map(|r| self.score_pair(r, cfg)).collect()
        });

        let mut aggregate = AggregateReport::from_records(&reports, cfg);
        aggregate.n_malformed = malformed.len();
        aggregate.diagnostics.extend(malformed);
        Ok(BatchReport {
            aggregate,
            records: reports,
        })
    }

    pub fn eval_dataset(&self, path: &Path, cfg: &RewardConfig, jobs: usize) -> Result<BatchReport> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let evaluator = self.clone().with_base_dir(dir);
        evaluator.eval_batch(std::io::BufReader::new(file), cfg, jobs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_variants_parse() {
        let r: EvalRecord = serde_json::from_str(
            r#"{"id":"a","instruction":"make bars red","pred":{"response":"x"},"gt":{"chart_json":"g.json"}}"#,
        )
        .unwrap();
        assert_eq!(r.pred, PredSource::Response("x".into()));
        assert_eq!(r.gt, GtSource::ChartJson("g.json".into()));
    }

    #[test]
    fn record_needs_exactly_one_variant() {
        let two = r#"{"id":"a","pred":{"code":"x","response":"y"},"gt":{"code":"z"}}"#;
        assert!(serde_json::from_str::<EvalRecord>(two).is_err());
        let none = r#"{"id":"a","pred":{},"gt":{"code":"z"}}"#;
        assert!(serde_json::from_str::<EvalRecord>(none).is_err());
        let response_gt = r#"{"id":"a","pred":{"code":"x"},"gt":{"response":"z"}}"#;
        assert!(serde_json::from_str::<EvalRecord>(response_gt).is_err());
    }

    #[test]
    fn empty_aggregate_warns() {
        let agg = AggregateReport::from_records(&[], &RewardConfig::default());
        assert_eq!(agg.n, 0);
        assert_eq!(agg.exec_pct, 0.0);
        assert!(!agg.diagnostics.is_empty());
    }

    #[test]
    fn missing_tags_cascade_to_zero() {
        let dir = tempfile::tempdir().unwrap();
        let gt = dir.path().join("gt.json");
        std::fs::write(&gt, crate::chart::serialize_chart_document(&ChartDocument::default())).unwrap();
        let rec = EvalRecord {
            id: "r".into(),
            instruction: String::new(),
            image_ref: None,
            pred: PredSource::Response("<think>hmm</think> no code".into()),
            gt: GtSource::ChartJson(gt),
        };
        let report = Evaluator::new(RunnerConfig::default()).score_pair(&rec, &RewardConfig::default());
        assert_eq!(report.format, Some(0));
        assert_eq!(report.exec_pred, 0);
        assert_eq!((report.t_r, report.l_r, report.render, report.total), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn unreadable_file_is_record_error() {
        let rec = EvalRecord {
            id: "r".into(),
            instruction: String::new(),
            image_ref: None,
            pred: PredSource::ChartJson("/nonexistent/p.json".into()),
            gt: GtSource::ChartJson("/nonexistent/g.json".into()),
        };
        let report = Evaluator::new(RunnerConfig::default()).score_pair(&rec, &RewardConfig::default());
        assert_eq!(report.status, RecordStatus::Error);
    }
}
