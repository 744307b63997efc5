//! Engine configuration and its JSON file format.
//!
//! Layers apply in order: built-in defaults, then a config file, then CLI
//! flags, then per-request overrides. Every layer uses the same flat field
//! names, so a config file and a request's `config_overrides` look alike.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::chart::ObjectKind;
use crate::error::{Error, Result};
use crate::reward::RewardConfig;
use crate::sandbox::{default_command_template, default_env_allowlist};

/// Optional reward settings; unset fields leave the lower layer untouched.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardOverrides {
    pub lambda_font: Option<f64>,
    pub alpha_size: Option<f64>,
    pub size_rel_tol: Option<f64>,
    pub eps: Option<f64>,
    pub line_resample_count: Option<usize>,
    pub type_weights: Option<BTreeMap<ObjectKind, f64>>,
    pub exec_timeout_secs: Option<f64>,
    pub zscore_eps: Option<f64>,
}

impl RewardOverrides {
    pub fn apply(&self, base: &RewardConfig) -> Result<RewardConfig> {
        let mut cfg = base.clone();
        let k = &mut cfg.kernel_params;
        if let Some(v) = self.lambda_font {
            k.lambda_font = v;
        }
        if let Some(v) = self.alpha_size {
            k.alpha_size = v;
        }
        if let Some(v) = self.size_rel_tol {
            k.size_rel_tol = v;
        }
        if let Some(v) = self.eps {
            k.eps = v;
        }
        if let Some(v) = self.line_resample_count {
            k.line_resample_count = v;
        }
        if let Some(w) = &self.type_weights {
            cfg.type_weights = Some(w.clone());
        }
        if let Some(secs) = self.exec_timeout_secs {
            cfg.exec_timeout = seconds(secs)?;
        }
        if let Some(v) = self.zscore_eps {
            cfg.zscore_eps = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn seconds(secs: f64) -> Result<Duration> {
    if !(secs.is_finite() && secs > 0.0) {
        return Err(Error::Config(format!("exec_timeout_secs must be positive, got {secs}")));
    }
    Duration::try_from_secs_f64(secs).map_err(|e| Error::Config(e.to_string()))
}

/// How scripts are run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunnerConfig {
    pub command_template: Vec<String>,
    pub env_allowlist: Vec<String>,
    pub max_concurrent_runs: usize,
    pub script_name: String,
    pub workdir_root: Option<PathBuf>,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig {
            command_template: default_command_template(),
            env_allowlist: default_env_allowlist(),
            max_concurrent_runs: std::thread::available_parallelism().map_or(4, usize::from),
            script_name: "script.py".to_string(),
            workdir_root: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EngineConfig {
    pub reward: RewardConfig,
    pub runner: RunnerConfig,
}

/// On-disk config file. Reward fields sit at the top level next to the
/// runner settings.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    lambda_font: Option<f64>,
    alpha_size: Option<f64>,
    size_rel_tol: Option<f64>,
    eps: Option<f64>,
    line_resample_count: Option<usize>,
    type_weights: Option<BTreeMap<ObjectKind, f64>>,
    exec_timeout_secs: Option<f64>,
    zscore_eps: Option<f64>,
    runner_command: Option<Vec<String>>,
    env_allowlist: Option<Vec<String>>,
    max_concurrent_runs: Option<usize>,
    script_name: Option<String>,
    workdir_root: Option<PathBuf>,
}

impl EngineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ConfigFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))?;
        let overrides = RewardOverrides {
            lambda_font: file.lambda_font,
            alpha_size: file.alpha_size,
            size_rel_tol: file.size_rel_tol,
            eps: file.eps,
            line_resample_count: file.line_resample_count,
            type_weights: file.type_weights,
            exec_timeout_secs: file.exec_timeout_secs,
            zscore_eps: file.zscore_eps,
        };
        let mut runner = RunnerConfig::default();
        if let Some(cmd) = file.runner_command {
            runner.command_template = cmd;
        }
        if let Some(env) = file.env_allowlist {
            runner.env_allowlist = env;
        }
        if let Some(n) = file.max_concurrent_runs {
            if n == 0 {
                return Err(Error::Config("max_concurrent_runs must be at least 1".into()));
            }
            runner.max_concurrent_runs = n;
        }
        if let Some(name) = file.script_name {
            runner.script_name = name;
        }
        runner.workdir_root = file.workdir_root;
        Ok(EngineConfig {
            reward: overrides.apply(&RewardConfig::default())?,
            runner,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Defaults, or the given file when present.
    pub fn load_optional(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(EngineConfig::default()),
        }
    }
}

/// Resolved reward settings as echoed in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub lambda_font: f64,
    pub alpha_size: f64,
    pub size_rel_tol: f64,
    pub eps: f64,
    pub line_resample_count: usize,
    /// `null` means uniform over the kinds present.
    pub type_weights: Option<BTreeMap<ObjectKind, f64>>,
    pub exec_timeout_secs: f64,
    pub zscore_eps: f64,
}

impl From<&RewardConfig> for ConfigEcho {
    fn from(cfg: &RewardConfig) -> Self {
        let k = &cfg.kernel_params;
        ConfigEcho {
            lambda_font: k.lambda_font,
            alpha_size: k.alpha_size,
            size_rel_tol: k.size_rel_tol,
            eps: k.eps,
            line_resample_count: k.line_resample_count,
            type_weights: cfg.type_weights.clone(),
            exec_timeout_secs: cfg.exec_timeout.as_secs_f64(),
            zscore_eps: cfg.zscore_eps,
        }
    }
}
