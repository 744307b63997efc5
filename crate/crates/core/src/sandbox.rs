//! Supervised execution of untrusted plotting scripts.
//!
//! The engine never interprets scripts itself. Each run writes the code into
//! a fresh temporary directory and launches a configured runner command with
//! `{script}` and `{out}` substituted; the runner must write Chart JSON to
//! `{out}` and exit 0. The child gets a cleared environment (plus an
//! allowlist), runs in its own process group and is killed as a group on
//! timeout. Network and memory confinement are left to the deployment.

use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::chart::{parse_chart_document, ChartDocument};
use crate::error::{Error, Result};

pub const SCRIPT_PLACEHOLDER: &str = "{script}";
pub const OUT_PLACEHOLDER: &str = "{out}";
pub const STREAM_LIMIT: usize = 64 * 1024;

const POLL_INTERVAL: Duration = Duration::from_millis(5);

pub fn default_command_template() -> Vec<String> {
    ["chart-extract", "--script", SCRIPT_PLACEHOLDER, "--out", OUT_PLACEHOLDER]
        .map(String::from)
        .to_vec()
}

pub fn default_env_allowlist() -> Vec<String> {
    ["PATH", "HOME", "MPLBACKEND", "MPLCONFIGDIR", "LANG", "LC_ALL"]
        .map(String::from)
        .to_vec()
}

#[derive(Debug, Clone)]
pub struct ExecutionRequest {
    pub code: String,
    pub command_template: Vec<String>,
    pub timeout: Duration,
    pub env_allowlist: Vec<String>,
    /// Parent of the per-run directories; the system temp dir when `None`.
    pub workdir_root: Option<PathBuf>,
    pub script_name: String,
}

impl ExecutionRequest {
    pub fn new(code: impl Into<String>, command_template: Vec<String>, timeout: Duration) -> Self {
        ExecutionRequest {
            code: code.into(),
            command_template,
            timeout,
            env_allowlist: default_env_allowlist(),
            workdir_root: None,
            script_name: "script.py".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.timeout.is_zero() {
            return Err(Error::Usage("execution timeout must be positive".into()));
        }
        if self.command_template.is_empty() {
            return Err(Error::Usage("empty runner command".into()));
        }
        for placeholder in [SCRIPT_PLACEHOLDER, OUT_PLACEHOLDER] {
            if !self.command_template.iter().any(|a| a.contains(placeholder)) {
                return Err(Error::Usage(format!(
                    "runner command must contain the {placeholder} placeholder"
                )));
            }
        }
        if self.script_name.is_empty() || self.script_name.contains('/') {
            return Err(Error::Usage(format!("invalid script name {:?}", self.script_name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecStatus {
    Ok,
    Error,
    Timeout,
}

#[derive(Debug)]
pub struct ExecutionResult {
    pub status: ExecStatus,
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    /// Location of the emitted Chart JSON; valid while the result is alive.
    pub artifact_path: Option<PathBuf>,
    /// The parsed artifact, present exactly when `status` is `Ok`.
    pub document: Option<ChartDocument>,
    pub duration: Duration,
    pub diagnostic: Option<String>,
    _workdir: Option<tempfile::TempDir>,
}

impl ExecutionResult {
    pub fn workdir(&self) -> Option<&Path> {
        self._workdir.as_ref().map(tempfile::TempDir::path)
    }
}

/// Execution reward: 1 iff the run finished in time, exited 0 and produced a
/// valid document.
pub fn execution_reward(result: &ExecutionResult) -> u8 {
    u8::from(result.status == ExecStatus::Ok)
}

/// Counting semaphore bounding concurrent child processes.
#[derive(Debug)]
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Executes requests while capping how many children run at once.
#[derive(Debug, Clone)]
pub struct Sandbox {
    slots: Arc<Slots>,
}

impl Default for Sandbox {
    fn default() -> Self {
        Sandbox::new(thread::available_parallelism().map_or(4, usize::from))
    }
}

impl Sandbox {
    pub fn new(max_concurrent: usize) -> Self {
        Sandbox {
            slots: Arc::new(Slots {
                free: Mutex::new(max_concurrent.max(1)),
                cv: Condvar::new(),
            }),
        }
    }

    /// Run one request to completion. Blocks the calling thread.
    ///
    /// `Err` is reserved for failures of the supervisor itself (the runner
    /// cannot be spawned, the work directory cannot be created); everything
    /// the script does maps to a status.
    pub fn execute(&self, req: &ExecutionRequest) -> Result<ExecutionResult> {
        req.validate()?;
        let _slot = self.slots.acquire();

        let workdir = match &req.workdir_root {
            Some(root) => tempfile::Builder::new().prefix("run-").tempdir_in(root),
            None => tempfile::Builder::new().prefix("chart-reward-run-").tempdir(),
        }
        .map_err(|e| Error::Infrastructure(format!("cannot create work directory: {e}")))?;

        let script = workdir.path().join(&req.script_name);
        let out = workdir.path().join("chart.json");
        std::fs::write(&script, &req.code)
            .map_err(|e| Error::Infrastructure(format!("cannot write script: {e}")))?;

        let args: Vec<String> = req
            .command_template
            .iter()
            .map(|a| {
                a.replace(SCRIPT_PLACEHOLDER, &script.to_string_lossy())
                    .replace(OUT_PLACEHOLDER, &out.to_string_lossy())
            })
            .collect();

        let mut cmd = Command::new(&args[0]);
        cmd.args(&args[1..])
            .current_dir(workdir.path())
            .env_clear()
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .process_group(0);
        for name in &req.env_allowlist {
            if let Some(value) = std::env::var_os(name) {
                cmd.env(name, value);
            }
        }

        let started = Instant::now();
        let mut child = cmd
            .spawn()
            .map_err(|e| Error::Infrastructure(format!("cannot launch runner `{}`: {e}", args[0])))?;
        let stdout = spawn_reader(child.stdout.take());
        let stderr = spawn_reader(child.stderr.take());

        let waited = wait_with_deadline(&mut child, started + req.timeout);
        // Reap anything the script left running in its group.
        kill_group(&child);
        let exit = match waited {
            Ok(exit) => exit,
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::Infrastructure(format!("lost track of runner: {e}")));
            }
        };
        let duration = started.elapsed();
        let stdout = stdout.join().unwrap_or_default();
        let stderr = stderr.join().unwrap_or_default();

        let mut result = ExecutionResult {
            status: ExecStatus::Error,
            exit_code: None,
            stdout,
            stderr,
            artifact_path: None,
            document: None,
            duration,
            diagnostic: None,
            _workdir: None,
        };

        match exit {
            None => {
                result.status = ExecStatus::Timeout;
                result.diagnostic = Some(format!("timed out after {:?}", req.timeout));
            }
            Some(status) => {
                result.exit_code = status.code();
                if status.success() {
                    match std::fs::read(&out) {
                        Ok(bytes) => match parse_chart_document(&bytes) {
                            Ok(doc) => {
                                result.status = ExecStatus::Ok;
                                result.document = Some(doc);
                                result.artifact_path = Some(out);
                            }
                            Err(e) => result.diagnostic = Some(format!("invalid artifact: {e}")),
                        },
                        Err(e) => result.diagnostic = Some(format!("missing artifact: {e}")),
                    }
                } else {
                    result.diagnostic = Some(describe_exit(status));
                }
            }
        }
        result._workdir = Some(workdir);
        Ok(result)
    }
}

fn describe_exit(status: ExitStatus) -> String {
    use std::os::unix::process::ExitStatusExt;
    match (status.code(), status.signal()) {
        (Some(code), _) => format!("runner exited with code {code}"),
        (None, Some(sig)) => format!("runner killed by signal {sig}"),
        _ => "runner failed".to_string(),
    }
}

/// `Ok(None)` means the deadline passed and the group was killed.
fn wait_with_deadline(child: &mut Child, deadline: Instant) -> std::io::Result<Option<ExitStatus>> {
    loop {
        if let Some(status) = child.try_wait()? {
            return Ok(Some(status));
        }
        let now = Instant::now();
        if now >= deadline {
            kill_group(child);
            child.wait()?;
            return Ok(None);
        }
        thread::sleep(POLL_INTERVAL.min(deadline - now));
    }
}

fn kill_group(child: &Child) {
    let pgid = child.id() as libc::pid_t;
    // SAFETY: killpg has no memory-safety preconditions; the group id is the
    // child's pid because it was spawned with process_group(0).
    unsafe {
        libc::killpg(pgid, libc::SIGKILL);
    }
}

/// Read a stream to EOF, keeping at most `STREAM_LIMIT` bytes.
fn spawn_reader<R: Read + Send + 'static>(stream: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let Some(mut stream) = stream else {
            return String::new();
        };
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match stream.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = STREAM_LIMIT.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                }
            }
        }
        String::from_utf8_lossy(&kept).into_owned()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(code: &str, timeout: Duration) -> ExecutionRequest {
        ExecutionRequest::new(
            code,
            vec!["sh".into(), SCRIPT_PLACEHOLDER.into(), OUT_PLACEHOLDER.into()],
            timeout,
        )
    }

    const EMPTY_CHART: &str = r#"{"schema_version":"1.0","figure_width":6.4,"figure_height":4.8,"graphical":[],"texts":[]}"#;

    #[test]
    fn success_path() {
        let code = format!("printf '%s' '{EMPTY_CHART}' > \"$1\"\necho done");
        let r = Sandbox::new(2).execute(&sh(&code, Duration::from_secs(10))).unwrap();
        assert_eq!(r.status, ExecStatus::Ok, "{r:?}");
        assert_eq!(r.exit_code, Some(0));
        assert_eq!(r.stdout.trim(), "done");
        assert!(r.artifact_path.as_ref().unwrap().exists());
        assert_eq!(execution_reward(&r), 1);
    }

    #[test]
    fn failing_script() {
        let r = Sandbox::new(2)
            .execute(&sh("echo boom >&2; exit 3", Duration::from_secs(10)))
            .unwrap();
        assert_eq!(r.status, ExecStatus::Error);
        assert_eq!(r.exit_code, Some(3));
        assert!(r.stderr.contains("boom"));
        assert_eq!(execution_reward(&r), 0);
    }

    #[test]
    fn exit_zero_without_artifact_is_error() {
        let r = Sandbox::new(1).execute(&sh("true", Duration::from_secs(10))).unwrap();
        assert_eq!(r.status, ExecStatus::Error);
        assert!(r.diagnostic.unwrap().contains("missing artifact"));

        let r = Sandbox::new(1)
            .execute(&sh("echo '{}' > \"$1\"", Duration::from_secs(10)))
            .unwrap();
        assert_eq!(r.status, ExecStatus::Error);
        assert!(r.diagnostic.unwrap().contains("invalid artifact"));
    }

    #[test]
    fn timeout_kills_process_group() {
        let started = Instant::now();
        let r = Sandbox::new(1)
            .execute(&sh("sleep 5 & sleep 5", Duration::from_millis(300)))
            .unwrap();
        assert_eq!(r.status, ExecStatus::Timeout);
        assert!(r.duration >= Duration::from_millis(300));
        assert!(started.elapsed() < Duration::from_secs(2));
        assert_eq!(execution_reward(&r), 0);
    }

    #[test]
    fn streams_are_truncated() {
        let r = Sandbox::new(1)
            .execute(&sh("head -c 200000 /dev/zero | tr '\\0' 'a'", Duration::from_secs(10)))
            .unwrap();
        assert_eq!(r.stdout.len(), STREAM_LIMIT);
    }

    #[test]
    fn environment_is_filtered() {
        std::env::set_var("CHART_REWARD_SECRET_TEST", "leak");
        let r = Sandbox::new(1)
            .execute(&sh("echo \"[$CHART_REWARD_SECRET_TEST]\"; exit 1", Duration::from_secs(10)))
            .unwrap();
        assert_eq!(r.stdout.trim(), "[]");
    }

    #[test]
    fn missing_runner_is_infrastructure_error() {
        let req = ExecutionRequest::new(
            "",
            vec!["/nonexistent/runner".into(), "{script}".into(), "{out}".into()],
            Duration::from_secs(1),
        );
        assert!(matches!(Sandbox::new(1).execute(&req), Err(Error::Infrastructure(_))));
    }

    #[test]
    fn template_requires_placeholders() {
        let req = ExecutionRequest::new("", vec!["sh".into(), "{script}".into()], Duration::from_secs(1));
        assert!(matches!(req.validate(), Err(Error::Usage(_))));
    }
}
