use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use chart_reward::chart::read_chart_document;
use chart_reward::harness::{GtSource, PredSource};
use chart_reward::{EngineConfig, EvalRecord, Evaluator, RewardOverrides};

#[derive(Parser)]
#[command(name = "chart-reward", version, about = "Score rendered charts and compute RL rewards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score one prediction against one reference.
    Score {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// How to read --pred; `auto` uses the file extension.
        #[arg(long, value_enum, default_value_t = PredKind::Auto)]
        pred_kind: PredKind,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        timeout: Option<f64>,
    },
    /// Evaluate a JSONL dataset and write an aggregate report.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        /// Execution timeout in seconds.
        #[arg(long)]
        timeout: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the HTTP reward service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check that a file is valid Chart JSON.
    Validate {
        #[arg(long)]
        chart_json: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PredKind {
    Auto,
    ChartJson,
    Code,
    Response,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(4, usize::from)
}

fn load_config(path: Option<&Path>, timeout: Option<f64>) -> anyhow::Result<EngineConfig> {
    let mut cfg = EngineConfig::load_optional(path)?;
    if timeout.is_some() {
        let flags = RewardOverrides {
            exec_timeout_secs: timeout,
            ..RewardOverrides::default()
        };
        cfg.reward = flags.apply(&cfg.reward)?;
    }
    Ok(cfg)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn score(
    pred: &Path,
    gt: &Path,
    kind: PredKind,
    json: bool,
    config: Option<&Path>,
    timeout: Option<f64>,
) -> anyhow::Result<ExitCode> {
    let cfg = load_config(config, timeout)?;
    let kind = match kind {
        PredKind::Auto if is_json(pred) => PredKind::ChartJson,
        PredKind::Auto => match pred.extension().and_then(|e| e.to_str()) {
            Some("txt" | "md") => PredKind::Response,
            _ => PredKind::Code,
        },
        k => k,
    };
    let pred = match kind {
        PredKind::ChartJson => PredSource::ChartJson(pred.to_path_buf()),
        PredKind::Response => PredSource::Response(read_text(pred)?),
        _ => PredSource::Code(read_text(pred)?),
    };
    let gt = if is_json(gt) {
        GtSource::ChartJson(gt.to_path_buf())
    } else {
        GtSource::Code(read_text(gt)?)
    };
    let record = EvalRecord {
        id: "pair".into(),
        instruction: String::new(),
        image_ref: None,
        pred,
        gt,
    };
    let report = Evaluator::new(cfg.runner).score_pair(&record, &cfg.reward);
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        if let Some(f) = report.format {
            println!("format  {f}");
        }
        println!("exec    {}", report.exec_pred);
        println!("T_R     {:.6}", report.t_r);
        println!("L_R     {:.6}", report.l_r);
        println!("render  {:.6}", report.render);
        println!("total   {:.6}", report.total);
        for note in &report.status_notes {
            println!("note    {note}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn eval(
    dataset: &Path,
    out: &Path,
    jobs: usize,
    timeout: Option<f64>,
    config: Option<&Path>,
) -> anyhow::Result<ExitCode> {
    let cfg = load_config(config, timeout)?;
    let report = Evaluator::new(cfg.runner).eval_dataset(dataset, &cfg.reward, jobs)?;
    let body = serde_json::to_string_pretty(&report)?;
    std::fs::write(out, body).with_context(|| format!("writing {}", out.display()))?;

    let a = &report.aggregate;
    for d in &a.diagnostics {
        log::warn!("{d}");
    }
    println!(
        "n={} exec={:.2} T_R={:.2} L_R={:.2} render={:.2} (invalid gt {}, errors {}, malformed {})",
        a.n, a.exec_pct, a.t_r_mean, a.l_r_mean, a.render_mean, a.n_invalid_gt, a.n_errors, a.n_malformed
    );
    if report.has_infrastructure_errors() {
        eprintln!("sandbox infrastructure errors occurred; see report");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(path: &Path) -> anyhow::Result<ExitCode> {
    match read_chart_document(path) {
        Ok(doc) => {
            println!(
                "valid: schema {} with {} graphical and {} text objects",
                doc.schema_version,
                doc.graphical.len(),
                doc.texts.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(chart_reward::Error::Io { path, source }) => bail!("{}: {source}", path.display()),
        Err(e) => {
            println!("invalid: {e}");
            Ok(ExitCode::from(1))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Score {
            pred,
            gt,
            pred_kind,
            json,
            config,
            timeout,
        } => score(&pred, &gt, pred_kind, json, config.as_deref(), timeout),
        Command::Eval {
            dataset,
            out,
            jobs,
            timeout,
            config,
        } => eval(&dataset, &out, jobs, timeout, config.as_deref()),
        Command::Serve { bind, config } => EngineConfig::load_optional(config.as_deref())
            .map_err(anyhow::Error::from)
            .and_then(|cfg| {
                let rt = tokio::runtime::Runtime::new()?;
                rt.block_on(chart_reward::service::serve(&bind, cfg))?;
                Ok(ExitCode::SUCCESS)
            }),
        Command::Validate { chart_json } => validate(&chart_json),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
