//! Client side of the CAD program executor.
//!
//! Programs run in a separate runner process that speaks line-delimited
//! JSON on stdin/stdout: one [`ExecRequest`] per line in, one
//! [`ExecResult`] per line out, in order. [`SubprocessRunner`] keeps a pool
//! of such processes. [`MockRunner`] answers in-process from directives
//! embedded in the program text and is what the offline tests use; [`serve`]
//! exposes any [`Runner`] over the same wire protocol.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::tail_bytes;

/// Byte budget for `stderr_tail` in results produced on this side.
pub const STDERR_TAIL_BYTES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecRequest {
    pub program_text: String,
    pub timeout_s: f64,
    pub workdir: PathBuf,
    pub want_kernel_check: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    ExecError,
    Timeout,
    /// The runner could not decode the request line.
    ProtocolError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecResult {
    pub status: ExecStatus,
    #[serde(default)]
    pub step_path: Option<PathBuf>,
    #[serde(default)]
    pub stl_path: Option<PathBuf>,
    #[serde(default)]
    pub stderr_tail: String,
    #[serde(default)]
    pub kernel_valid: Option<bool>,
    #[serde(default)]
    pub wall_time: f64,
}

impl ExecResult {
    fn failed(status: ExecStatus, stderr: &str) -> Self {
        ExecResult {
            status,
            step_path: None,
            stl_path: None,
            stderr_tail: tail_bytes(stderr, STDERR_TAIL_BYTES).to_string(),
            kernel_valid: None,
            wall_time: 0.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunnerError {
    /// The runner process could not be started or died mid-request.
    #[error("runner unreachable: {0}")]
    Unreachable(String),
    #[error("runner protocol error: {0}")]
    Protocol(String),
}

pub trait Runner: Send + Sync {
    fn execute(&self, request: &ExecRequest) -> Result<ExecResult, RunnerError>;
}

/// Reads requests from `input` until EOF and answers each on `output`.
/// Undecodable lines get an in-band `protocol_error` result.
pub fn serve(runner: &dyn Runner, input: impl BufRead, output: impl Write) -> std::io::Result<()> {
    let mut out = BufWriter::new(output);
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let result = match serde_json::from_str::<ExecRequest>(&line) {
            Ok(req) => match runner.execute(&req) {
                Ok(r) => r,
                Err(e) => ExecResult::failed(ExecStatus::ProtocolError, &e.to_string()),
            },
            Err(e) => ExecResult::failed(ExecStatus::ProtocolError, &format!("bad request: {e}")),
        };
        serde_json::to_writer(&mut out, &result)?;
        out.write_all(b"\n")?;
        out.flush()?;
    }
    Ok(())
}

// --- subprocess pool ------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubprocessConfig {
    /// Runner command line, e.g. `["python3", "-m", "cad_runner"]`.
    pub command: Vec<String>,
    /// Extra seconds past a request's own timeout before the runner is
    /// presumed wedged and killed.
    pub grace_s: f64,
    /// Environment variables not passed on to runner processes.
    pub withhold_env: Vec<String>,
}

impl Default for SubprocessConfig {
    fn default() -> Self {
        SubprocessConfig {
            command: vec!["python3".into(), "-m".into(), "cad_runner".into()],
            grace_s: 10.0,
            withhold_env: vec!["OPENAI_API_KEY".into()],
        }
    }
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Worker {
    fn spawn(config: &SubprocessConfig) -> Result<Self, RunnerError> {
        let (program, args) = config
            .command
            .split_first()
            .ok_or_else(|| RunnerError::Unreachable("empty runner command".into()))?;
        let mut cmd = Command::new(program);
        cmd.args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit());
        for var in &config.withhold_env {
            cmd.env_remove(var);
        }
        let mut child = cmd
            .spawn()
            .map_err(|e| RunnerError::Unreachable(format!("cannot start {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped");
        let stdout = child.stdout.take().expect("piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Worker {
            child,
            stdin,
            lines: rx,
        })
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Pool of long-lived runner processes, one request in flight per process.
/// Idle processes are reused; a process that dies or stops answering is
/// discarded and replaced on the next request.
pub struct SubprocessRunner {
    config: SubprocessConfig,
    idle: Mutex<Vec<Worker>>,
}

impl SubprocessRunner {
    pub fn new(config: SubprocessConfig) -> Self {
        SubprocessRunner {
            config,
            idle: Mutex::new(Vec::new()),
        }
    }

    fn checkout(&self) -> Result<Worker, RunnerError> {
        let pooled = self.idle.lock().unwrap_or_else(|e| e.into_inner()).pop();
        match pooled {
            Some(w) => Ok(w),
            None => Worker::spawn(&self.config),
        }
    }

    fn exchange(&self, worker: &mut Worker, request: &ExecRequest) -> Result<Option<ExecResult>, RunnerError> {
        let mut line = serde_json::to_string(request).expect("request serializes");
        line.push('\n');
        worker
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| worker.stdin.flush())
            .map_err(|e| RunnerError::Unreachable(format!("write to runner: {e}")))?;
        let deadline = Duration::from_secs_f64((request.timeout_s + self.config.grace_s).max(0.0));
        match worker.lines.recv_timeout(deadline) {
            Ok(Ok(reply)) => {
                let result: ExecResult = serde_json::from_str(&reply)
                    .map_err(|e| RunnerError::Protocol(format!("{e}: {reply}")))?;
                if result.status == ExecStatus::ProtocolError {
                    return Err(RunnerError::Protocol(result.stderr_tail));
                }
                Ok(Some(result))
            }
            Ok(Err(e)) => Err(RunnerError::Unreachable(format!("read from runner: {e}"))),
            Err(RecvTimeoutError::Disconnected) => {
                Err(RunnerError::Unreachable("runner exited".into()))
            }
            Err(RecvTimeoutError::Timeout) => Ok(None),
        }
    }
}

impl Runner for SubprocessRunner {
    fn execute(&self, request: &ExecRequest) -> Result<ExecResult, RunnerError> {
        let mut worker = self.checkout()?;
        let start = Instant::now();
        match self.exchange(&mut worker, request) {
            Ok(Some(result)) => {
                self.idle.lock().unwrap_or_else(|e| e.into_inner()).push(worker);
                Ok(result)
            }
            Ok(None) => {
                log::warn!("runner ignored its {} s deadline; killing it", request.timeout_s);
                worker.kill();
                let mut r = ExecResult::failed(ExecStatus::Timeout, "runner did not answer before the deadline");
                r.wall_time = start.elapsed().as_secs_f64();
                Ok(r)
            }
            Err(e) => {
                worker.kill();
                Err(e)
            }
        }
    }
}

impl Drop for SubprocessRunner {
    fn drop(&mut self) {
        let workers = std::mem::take(self.idle.get_mut().unwrap_or_else(|e| e.into_inner()));
        for w in workers {
            // Closing stdin lets a well-behaved runner exit on EOF.
            drop(w.stdin);
            let mut child = w.child;
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

// --- mock -----------------------------------------------------------------

/// Marker for mock-runner directives inside program text.
pub const MOCK_DIRECTIVE: &str = "# mock-runner:";

/// What a directive line asks the mock to do.
#[derive(Debug, Clone, PartialEq)]
pub enum MockAction {
    /// Export the named fixture as `output.step`.
    Export { fixture: String, kernel_valid: Option<bool> },
    ExecError(String),
    Timeout,
    /// Behave as if the runner process had died.
    Crash,
}

impl MockAction {
    /// Parses the first directive line in `program`.
    /// Syntax: `ok <fixture> [kernel_valid=true|false]`, `exec_error <msg>`,
    /// `timeout`, `crash`.
    pub fn find(program: &str) -> Option<Result<Self, String>> {
        let line = program
            .lines()
            .find_map(|l| l.trim().strip_prefix(MOCK_DIRECTIVE))?
            .trim();
        let (verb, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        Some(match verb {
            "ok" => {
                let mut words = rest.split_whitespace();
                let fixture = words.next().unwrap_or("cube").to_string();
                let mut kernel_valid = None;
                for w in words {
                    match w {
                        "kernel_valid=true" => kernel_valid = Some(true),
                        "kernel_valid=false" => kernel_valid = Some(false),
                        other => return Some(Err(format!("unknown mock option {other:?}"))),
                    }
                }
                Ok(MockAction::Export { fixture, kernel_valid })
            }
            "exec_error" => Ok(MockAction::ExecError(rest.to_string())),
            "timeout" => Ok(MockAction::Timeout),
            "crash" => Ok(MockAction::Crash),
            other => Err(format!("unknown mock verb {other:?}")),
        })
    }
}

pub fn mock_directive(action: &MockAction) -> String {
    match action {
        MockAction::Export { fixture, kernel_valid } => match kernel_valid {
            Some(v) => format!("{MOCK_DIRECTIVE} ok {fixture} kernel_valid={v}"),
            None => format!("{MOCK_DIRECTIVE} ok {fixture}"),
        },
        MockAction::ExecError(m) => format!("{MOCK_DIRECTIVE} exec_error {m}"),
        MockAction::Timeout => format!("{MOCK_DIRECTIVE} timeout"),
        MockAction::Crash => format!("{MOCK_DIRECTIVE} crash"),
    }
}

/// In-process stand-in for the CAD runner. Deterministic: identical
/// requests give identical results, with `wall_time` always 0.
pub struct MockRunner {
    fixtures: BTreeMap<String, String>,
}

impl Default for MockRunner {
    fn default() -> Self {
        Self::new()
    }
}

impl MockRunner {
    /// A mock that knows the built-in fixtures: `cube`, `gaussian_plate`,
    /// `saddle_face`, `cube_missing_face` and `cube_open_shell`.
    pub fn new() -> Self {
        let mut fixtures = BTreeMap::new();
        for (name, text) in [
            ("cube", include_str!("../tests/fixtures/corpus/cube.step")),
            ("gaussian_plate", include_str!("../tests/fixtures/corpus/gaussian_plate.step")),
            ("saddle_face", include_str!("../tests/fixtures/corpus/saddle_face.step")),
            ("cube_missing_face", include_str!("../tests/fixtures/invalid/cube_missing_face.step")),
            ("cube_open_shell", include_str!("../tests/fixtures/invalid/cube_open_shell.step")),
        ] {
            fixtures.insert(name.to_string(), text.to_string());
        }
        MockRunner { fixtures }
    }

    pub fn with_fixture(mut self, name: impl Into<String>, step_text: impl Into<String>) -> Self {
        self.fixtures.insert(name.into(), step_text.into());
        self
    }

    fn export(&self, workdir: &Path, fixture: &str) -> Result<(PathBuf, PathBuf), String> {
        let text = self
            .fixtures
            .get(fixture)
            .ok_or_else(|| format!("mock runner has no fixture {fixture:?}"))?;
        std::fs::create_dir_all(workdir).map_err(|e| e.to_string())?;
        let step = workdir.join("output.step");
        let stl = workdir.join("output.stl");
        std::fs::write(&step, text).map_err(|e| e.to_string())?;
        std::fs::write(&stl, format!("solid {fixture}\nendsolid {fixture}\n")).map_err(|e| e.to_string())?;
        Ok((step, stl))
    }
}

impl Runner for MockRunner {
    fn execute(&self, request: &ExecRequest) -> Result<ExecResult, RunnerError> {
        let action = match MockAction::find(&request.program_text) {
            None => {
                return Ok(ExecResult::failed(
                    ExecStatus::ExecError,
                    "Traceback (most recent call last):\nRuntimeError: program produced no output.step",
                ))
            }
            Some(Err(e)) => return Err(RunnerError::Protocol(e)),
            Some(Ok(a)) => a,
        };
        match action {
            MockAction::Export { fixture, kernel_valid } => {
                let (step, stl) = self
                    .export(&request.workdir, &fixture)
                    .map_err(RunnerError::Protocol)?;
                Ok(ExecResult {
                    status: ExecStatus::Ok,
                    step_path: Some(step),
                    stl_path: Some(stl),
                    stderr_tail: String::new(),
                    kernel_valid: kernel_valid.filter(|_| request.want_kernel_check),
                    wall_time: 0.0,
                })
            }
            MockAction::ExecError(msg) => Ok(ExecResult::failed(
                ExecStatus::ExecError,
                &format!("Traceback (most recent call last):\n  File \"program.py\", line 1\nRuntimeError: {msg}"),
            )),
            MockAction::Timeout => Ok(ExecResult::failed(
                ExecStatus::Timeout,
                &format!("killed after {} s", request.timeout_s),
            )),
            MockAction::Crash => Err(RunnerError::Unreachable("mock runner crashed".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(program: &str, dir: &Path) -> ExecRequest {
        ExecRequest {
            program_text: program.into(),
            timeout_s: 5.0,
            workdir: dir.to_path_buf(),
            want_kernel_check: true,
        }
    }

    #[test]
    fn wire_field_names() {
        let r = ExecRequest {
            program_text: "x".into(),
            timeout_s: 2.0,
            workdir: "/tmp/w".into(),
            want_kernel_check: false,
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 4);
        for k in ["program_text", "timeout_s", "workdir", "want_kernel_check"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        let res: ExecResult = serde_json::from_str(
            r#"{"status":"exec_error","step_path":null,"stl_path":null,"stderr_tail":"boom","kernel_valid":null,"wall_time":0.5}"#,
        )
        .unwrap();
        assert_eq!(res.status, ExecStatus::ExecError);
        let v = serde_json::to_value(&res).unwrap();
        assert_eq!(v["status"], "exec_error");
        for k in ["step_path", "stl_path", "stderr_tail", "kernel_valid", "wall_time"] {
            assert!(v.get(k).is_some(), "{k}");
        }
    }

    #[test]
    fn directive_parsing() {
        let p = format!("import cadquery as cq\n{}\n", mock_directive(&MockAction::Export {
            fixture: "cube".into(),
            kernel_valid: Some(false),
        }));
        assert_eq!(
            MockAction::find(&p),
            Some(Ok(MockAction::Export {
                fixture: "cube".into(),
                kernel_valid: Some(false)
            }))
        );
        assert_eq!(
            MockAction::find("# mock-runner: exec_error bad fillet radius"),
            Some(Ok(MockAction::ExecError("bad fillet radius".into())))
        );
        assert_eq!(MockAction::find("print(1)"), None);
        assert!(matches!(MockAction::find("# mock-runner: dance"), Some(Err(_))));
    }

    #[test]
    fn mock_exports_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let r = MockRunner::new()
            .execute(&req("# mock-runner: ok cube kernel_valid=true", dir.path()))
            .unwrap();
        assert_eq!(r.status, ExecStatus::Ok);
        assert_eq!(r.kernel_valid, Some(true));
        let step = std::fs::read_to_string(r.step_path.unwrap()).unwrap();
        assert!(crate::step::parse_step(&step).is_ok());
        assert!(r.stl_path.unwrap().exists());
    }

    #[test]
    fn kernel_flag_only_when_requested() {
        let dir = tempfile::tempdir().unwrap();
        let mut q = req("# mock-runner: ok cube kernel_valid=false", dir.path());
        q.want_kernel_check = false;
        assert_eq!(MockRunner::new().execute(&q).unwrap().kernel_valid, None);
    }

    #[test]
    fn mock_failures() {
        let dir = tempfile::tempdir().unwrap();
        let m = MockRunner::new();
        let e = m.execute(&req("# mock-runner: exec_error x", dir.path())).unwrap();
        assert_eq!(e.status, ExecStatus::ExecError);
        assert!(e.stderr_tail.ends_with("RuntimeError: x"));
        assert!(e.step_path.is_none());
        let t = m.execute(&req("# mock-runner: timeout", dir.path())).unwrap();
        assert_eq!(t.status, ExecStatus::Timeout);
        assert!(matches!(
            m.execute(&req("# mock-runner: crash", dir.path())),
            Err(RunnerError::Unreachable(_))
        ));
        assert!(matches!(
            m.execute(&req("# mock-runner: ok nosuch", dir.path())),
            Err(RunnerError::Protocol(_))
        ));
    }

    #[test]
    fn serve_answers_in_order_and_survives_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let lines: Vec<String> = ["exec_error one", "timeout", "exec_error three"]
            .iter()
            .map(|d| serde_json::to_string(&req(&format!("{MOCK_DIRECTIVE} {d}"), dir.path())).unwrap())
            .collect();
        let input = format!("{}\n{{not json\n{}\n{}\n", lines[0], lines[1], lines[2]);
        let mut out = Vec::new();
        serve(&MockRunner::new(), input.as_bytes(), &mut out).unwrap();
        let results: Vec<ExecResult> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        let statuses: Vec<_> = results.iter().map(|r| r.status).collect();
        assert_eq!(
            statuses,
            [ExecStatus::ExecError, ExecStatus::ProtocolError, ExecStatus::Timeout, ExecStatus::ExecError]
        );
        assert!(results[0].stderr_tail.ends_with("one"));
        assert!(results[3].stderr_tail.ends_with("three"));
    }

    fn sh_runner(script: &str) -> SubprocessRunner {
        SubprocessRunner::new(SubprocessConfig {
            command: vec!["sh".into(), "-c".into(), script.into()],
            grace_s: 0.5,
            withhold_env: vec![],
        })
    }

    #[test]
    fn subprocess_roundtrip_reuses_process() {
        // Replies with its own pid so reuse is observable.
        let runner = sh_runner(
            r#"while read line; do echo "{\"status\":\"exec_error\",\"stderr_tail\":\"$$\"}"; done"#,
        );
        let dir = tempfile::tempdir().unwrap();
        let a = runner.execute(&req("x", dir.path())).unwrap();
        let b = runner.execute(&req("y", dir.path())).unwrap();
        assert_eq!(a.status, ExecStatus::ExecError);
        assert_eq!(a.stderr_tail, b.stderr_tail);
    }

    #[test]
    fn subprocess_missing_binary_is_unreachable() {
        let runner = SubprocessRunner::new(SubprocessConfig {
            command: vec!["/nonexistent/runner-binary".into()],
            ..Default::default()
        });
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(runner.execute(&req("x", dir.path())), Err(RunnerError::Unreachable(_))));
    }

    #[test]
    fn subprocess_exit_is_unreachable() {
        let runner = sh_runner("read line; exit 0");
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(runner.execute(&req("x", dir.path())), Err(RunnerError::Unreachable(_))));
    }

    #[test]
    fn subprocess_garbage_reply_is_protocol_error() {
        let runner = sh_runner("while read line; do echo nope; done");
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(runner.execute(&req("x", dir.path())), Err(RunnerError::Protocol(_))));
    }

    #[test]
    fn wedged_subprocess_times_out() {
        let runner = sh_runner("read line; sleep 30");
        let dir = tempfile::tempdir().unwrap();
        let mut q = req("x", dir.path());
        q.timeout_s = 0.2;
        let start = Instant::now();
        let r = runner.execute(&q).unwrap();
        assert_eq!(r.status, ExecStatus::Timeout);
        assert!(start.elapsed() < Duration::from_secs(5));
    }
}
