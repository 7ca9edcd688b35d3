//! Runs executable units with a wall-clock deadline and a retrieval budget.
//!
//! Retrievals always go through the parent's [`Llm`], so replay covers them.
//! In subprocess isolation the worker speaks JSON lines over its standard
//! streams:
//!
//! ```text
//! parent -> worker  {"type":"run","unit":...,"timeout_ms":...}
//! worker -> parent  {"type":"ask","query":...,"kind":"str"}
//! parent -> worker  {"type":"answer","kind":"str","value":...} | {"type":"error","message":...}
//! worker -> parent  {"type":"done","status":"ok","output":...,"error":null}
//! ```

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::{assemble, rewrite_soft_operators, ProgramCandidate, RewrittenProgram};
use crate::conceptualizer::Bindings;
use crate::gateway::{GatewayError, Llm};
use crate::lang::{self, Host, HostError, Interpreter, Limits, RunError};
use crate::typed::{TypedValue, ValueKind};
use crate::verdict::{normalize_output, Verdict};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Isolation {
    /// Interpreter on a dedicated thread of the calling process.
    InProcess,
    /// A separate worker process started as `program args...`.
    Subprocess { program: PathBuf, args: Vec<String> },
}

impl Isolation {
    /// Worker mode of the `concept` binary.
    pub fn worker(program: impl Into<PathBuf>) -> Self {
        Isolation::Subprocess {
            program: program.into(),
            args: vec!["sandbox-worker".into()],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SandboxPolicy {
    pub timeout: Duration,
    pub max_llm_calls: u32,
    pub isolation: Isolation,
    pub stack_bytes: usize,
}

impl Default for SandboxPolicy {
    fn default() -> Self {
        SandboxPolicy {
            timeout: Duration::from_secs(120),
            max_llm_calls: 200,
            isolation: Isolation::InProcess,
            stack_bytes: 256 << 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecStatus {
    Ok,
    RuntimeError,
    Timeout,
    ParseError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExecStatus,
    pub raw_output: String,
    pub verdict: Verdict,
    pub llm_calls: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExecutionOutcome {
    fn new(status: ExecStatus, raw_output: String, llm_calls: u32, error: Option<String>) -> Self {
        let verdict = match status {
            ExecStatus::Ok => normalize_output(&raw_output),
            _ => Verdict::Unknown,
        };
        ExecutionOutcome {
            status,
            raw_output,
            verdict,
            llm_calls,
            error,
        }
    }

    pub fn parse_error(message: impl Into<String>) -> Self {
        ExecutionOutcome::new(ExecStatus::ParseError, String::new(), 0, Some(message.into()))
    }

    /// Counts toward the execution success rate.
    pub fn succeeded(&self) -> bool {
        self.status == ExecStatus::Ok && self.verdict.is_definite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    #[serde(flatten)]
    pub outcome: ExecutionOutcome,
    /// Seconds.
    pub wall_time: f64,
}

/// Rewrites, assembles, and runs a program against one set of bindings.
///
/// Execution failures are reported in the outcome. Only infrastructure
/// failures of the gateway (a replay miss or an unreachable backend) are
/// returned as errors, since they say nothing about the program.
pub fn execute(
    program: &RewrittenProgram,
    bindings: &Bindings,
    llm: &dyn Llm,
    policy: &SandboxPolicy,
) -> Result<ExecutionReport, GatewayError> {
    match assemble(program, bindings) {
        Ok(unit) => execute_unit(&unit, llm, policy),
        Err(e) => Ok(ExecutionReport {
            outcome: ExecutionOutcome::parse_error(e.to_string()),
            wall_time: 0.0,
        }),
    }
}

pub fn execute_candidate(
    candidate: &ProgramCandidate,
    bindings: &Bindings,
    llm: &dyn Llm,
    policy: &SandboxPolicy,
) -> Result<ExecutionReport, GatewayError> {
    match &candidate.program {
        Ok(p) => execute(&rewrite_soft_operators(p), bindings, llm, policy),
        Err(e) => Ok(ExecutionReport {
            outcome: ExecutionOutcome::parse_error(e.to_string()),
            wall_time: 0.0,
        }),
    }
}

/// Runs an already assembled unit.
pub fn execute_unit(unit: &str, llm: &dyn Llm, policy: &SandboxPolicy) -> Result<ExecutionReport, GatewayError> {
    let start = Instant::now();
    let deadline = start + policy.timeout;
    let mut bridge = Bridge {
        llm,
        calls: 0,
        max_calls: policy.max_llm_calls,
        deadline,
        fatal: None,
    };
    let (status, output, error) = match &policy.isolation {
        Isolation::InProcess => run_in_thread(unit, &mut bridge, policy),
        Isolation::Subprocess { program, args } => run_in_worker(unit, &mut bridge, program, args, policy),
    };
    if let Some(e) = bridge.fatal {
        return Err(e);
    }
    Ok(ExecutionReport {
        outcome: ExecutionOutcome::new(status, output, bridge.calls, error),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Parent-side retrieval handler shared by both isolation modes.
struct Bridge<'a> {
    llm: &'a dyn Llm,
    calls: u32,
    max_calls: u32,
    deadline: Instant,
    fatal: Option<GatewayError>,
}

impl Host for Bridge<'_> {
    fn ask(&mut self, query: &str, kind: ValueKind) -> Result<TypedValue, HostError> {
        if Instant::now() >= self.deadline {
            return Err(HostError("deadline passed".into()));
        }
        if self.calls >= self.max_calls {
            return Err(HostError(format!("retrieval budget of {} calls exhausted", self.max_calls)));
        }
        self.calls += 1;
        self.llm.ask_typed(query, kind).map_err(|e| {
            if matches!(e, GatewayError::ReplayMiss { .. } | GatewayError::BackendUnavailable(_)) {
                self.fatal.get_or_insert(e.clone());
            }
            HostError(e.to_string())
        })
    }
}

type RunResult = (ExecStatus, String, Option<String>);

fn interpret(unit: &str, host: &mut dyn Host, deadline: Instant) -> RunResult {
    let module = match lang::parse_module(unit) {
        Ok(m) => m,
        Err(e) => return (ExecStatus::ParseError, String::new(), Some(e.to_string())),
    };
    let limits = Limits {
        deadline: Some(deadline),
        ..Limits::default()
    };
    let mut interp = Interpreter::new(host, limits);
    let result = interp.run_module(&module);
    let output = interp.output().to_string();
    match result {
        Ok(()) => (ExecStatus::Ok, output, None),
        Err(RunError::Timeout) => (ExecStatus::Timeout, output, None),
        Err(RunError::Host(_)) if Instant::now() >= deadline => (ExecStatus::Timeout, output, None),
        Err(e) => (ExecStatus::RuntimeError, output, Some(e.to_string())),
    }
}

fn run_in_thread(unit: &str, bridge: &mut Bridge<'_>, policy: &SandboxPolicy) -> RunResult {
    let deadline = bridge.deadline;
    std::thread::scope(|s| {
        let handle = std::thread::Builder::new()
            .name("sandbox".into())
            .stack_size(policy.stack_bytes)
            .spawn_scoped(s, move || interpret(unit, bridge, deadline))
            .expect("spawn sandbox thread");
        handle.join().unwrap_or_else(|_| {
            (ExecStatus::RuntimeError, String::new(), Some("interpreter panicked".into()))
        })
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ToWorker {
    Run { unit: String, timeout_ms: u64 },
    Answer { kind: ValueKind, value: Json },
    Error { message: String },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum FromWorker {
    Ask { query: String, kind: ValueKind },
    Done { status: ExecStatus, output: String, error: Option<String> },
}

fn send<T: Serialize>(w: &mut impl Write, msg: &T) -> std::io::Result<()> {
    let mut line = serde_json::to_string(msg).expect("message serializes");
    line.push('\n');
    w.write_all(line.as_bytes())?;
    w.flush()
}

/// Grace period for the worker to report its own timeout.
const WORKER_GRACE: Duration = Duration::from_secs(2);

fn run_in_worker(
    unit: &str,
    bridge: &mut Bridge<'_>,
    program: &PathBuf,
    args: &[String],
    policy: &SandboxPolicy,
) -> RunResult {
    let failed = |msg: String| (ExecStatus::RuntimeError, String::new(), Some(msg));
    let mut child = match Command::new(program)
        .args(args)
        .env_clear()
        .current_dir(std::env::temp_dir())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => return failed(format!("could not start sandbox worker: {e}")),
    };
    let mut stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    let (tx, rx) = mpsc::channel();
    let reader = std::thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            if tx.send(line).is_err() {
                break;
            }
        }
    });

    let run = ToWorker::Run {
        unit: unit.to_string(),
        timeout_ms: policy.timeout.as_millis() as u64,
    };
    let hard_deadline = bridge.deadline + WORKER_GRACE;
    let result = if let Err(e) = send(&mut stdin, &run) {
        failed(format!("sandbox worker rejected the unit: {e}"))
    } else {
        loop {
            let wait = hard_deadline.saturating_duration_since(Instant::now());
            match rx.recv_timeout(wait) {
                Ok(Ok(line)) => match serde_json::from_str::<FromWorker>(&line) {
                    Ok(FromWorker::Ask { query, kind }) => {
                        let reply = match bridge.ask(&query, kind) {
                            Ok(v) => ToWorker::Answer {
                                kind: v.kind(),
                                value: v.to_json(),
                            },
                            Err(e) => ToWorker::Error { message: e.0 },
                        };
                        if send(&mut stdin, &reply).is_err() {
                            break failed("sandbox worker closed its input".into());
                        }
                    }
                    Ok(FromWorker::Done { status, output, error }) => break (status, output, error),
                    Err(e) => break failed(format!("malformed worker message: {e}")),
                },
                Ok(Err(e)) => break failed(format!("reading from sandbox worker: {e}")),
                Err(mpsc::RecvTimeoutError::Timeout) => break (ExecStatus::Timeout, String::new(), None),
                Err(mpsc::RecvTimeoutError::Disconnected) => break failed("sandbox worker exited".into()),
            }
        }
    };
    let _ = child.kill();
    let _ = child.wait();
    drop(stdin);
    let _ = reader.join();
    result
}

/// Forwards retrievals from the worker to the parent over the pipes.
struct PipeHost<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> Host for PipeHost<R, W> {
    fn ask(&mut self, query: &str, kind: ValueKind) -> Result<TypedValue, HostError> {
        let io = |e: std::io::Error| HostError(format!("sandbox channel: {e}"));
        send(
            &mut self.output,
            &FromWorker::Ask {
                query: query.to_string(),
                kind,
            },
        )
        .map_err(io)?;
        let mut line = String::new();
        self.input.read_line(&mut line).map_err(io)?;
        match serde_json::from_str::<ToWorker>(&line) {
            Ok(ToWorker::Answer { kind, value }) => TypedValue::from_json(kind, &value)
                .ok_or_else(|| HostError("answer does not match its kind".into())),
            Ok(ToWorker::Error { message }) => Err(HostError(message)),
            _ => Err(HostError("unexpected message from parent".into())),
        }
    }
}

/// Entry point of the worker process: runs one unit and exits.
pub fn worker_main() -> std::io::Result<()> {
    let stack = SandboxPolicy::default().stack_bytes;
    std::thread::Builder::new()
        .stack_size(stack)
        .spawn(|| {
            let mut input = std::io::stdin().lock();
            let mut line = String::new();
            input.read_line(&mut line)?;
            let (unit, timeout_ms) = match serde_json::from_str::<ToWorker>(&line) {
                Ok(ToWorker::Run { unit, timeout_ms }) => (unit, timeout_ms),
                _ => {
                    return Err(std::io::Error::new(
                        std::io::ErrorKind::InvalidData,
                        "expected a run message",
                    ))
                }
            };
            let deadline = Instant::now() + Duration::from_millis(timeout_ms);
            let mut host = PipeHost {
                input,
                output: std::io::stdout(),
            };
            let (status, output, error) = interpret(&unit, &mut host, deadline);
            send(&mut std::io::stdout(), &FromWorker::Done { status, output, error })
        })?
        .join()
        .unwrap_or_else(|_| Err(std::io::Error::other("worker thread panicked")))
}

#[cfg(test)]
mod tests {
    use super::super::{parse_program, PREAMBLE};
    use super::*;
    use crate::gateway::{catalog::Catalog, LlmRequest, LlmResponse, Source};
    use std::sync::atomic::{AtomicU32, Ordering};

    /// Answers every typed query with a fixed reply; counts completions.
    struct Canned {
        catalog: Catalog,
        reply: String,
        calls: AtomicU32,
    }

    impl Canned {
        fn new(reply: &str) -> Self {
            Canned {
                catalog: Catalog::standard(),
                reply: reply.into(),
                calls: AtomicU32::new(0),
            }
        }
    }

    impl Llm for Canned {
        fn catalog(&self) -> &Catalog {
            &self.catalog
        }
        fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, GatewayError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self.reply == "miss" {
                return Err(GatewayError::ReplayMiss {
                    key: req.key(),
                    template: req.template.clone(),
                });
            }
            Ok(LlmResponse {
                text: self.reply.clone(),
                source: Source::Replay,
                key: req.key(),
            })
        }
    }

    fn run(body: &str, reply: &str, policy: &SandboxPolicy) -> Result<ExecutionReport, GatewayError> {
        let p = parse_program(body).unwrap();
        let llm = Canned::new(reply);
        execute(&rewrite_soft_operators(&p), &Bindings::new(), &llm, policy)
    }

    fn quick() -> SandboxPolicy {
        SandboxPolicy {
            timeout: Duration::from_millis(300),
            ..SandboxPolicy::default()
        }
    }

    #[test]
    fn constant_program() {
        let r = run("def answer():\n    return \"Must be yes\"\n", "", &quick()).unwrap();
        assert_eq!(r.outcome.status, ExecStatus::Ok);
        assert_eq!(r.outcome.raw_output, "Must be yes\n");
        assert_eq!(r.outcome.verdict, Verdict::Yes);
        assert_eq!(r.outcome.llm_calls, 0);
        assert!(r.outcome.succeeded());
    }

    #[test]
    fn infinite_loop_times_out() {
        let src = "def answer():\n    for i in range(10 ** 15):\n        pass\n    return 'Must be yes'\n";
        let r = run(src, "", &quick()).unwrap();
        assert_eq!(r.outcome.status, ExecStatus::Timeout);
        assert_eq!(r.outcome.verdict, Verdict::Unknown);
    }

    #[test]
    fn exhausted_retrieval_is_a_runtime_error() {
        let src = "def answer(x: str = 'a'):\n    n = ask_llm('How many?', int)\n    return 'Must be yes'\n";
        let r = run(src, "no idea", &quick()).unwrap();
        assert_eq!(r.outcome.status, ExecStatus::RuntimeError);
        assert_eq!(r.outcome.verdict, Verdict::Unknown);
        assert_eq!(r.outcome.llm_calls, 1);
        assert!(r.outcome.error.unwrap().contains("10 attempts"));
    }

    #[test]
    fn retrievals_are_typed() {
        let src = "def answer():\n    n = ask_gpt('How many?', int)\n    return 'Must be yes' if n > 3 else 'Must be no'\n";
        let r = run(src, "{\"answer\": 5}", &quick()).unwrap();
        assert_eq!((r.outcome.verdict, r.outcome.llm_calls), (Verdict::Yes, 1));
    }

    #[test]
    fn call_budget() {
        let src = "def answer():\n    for i in range(1000):\n        ask_llm('q', str)\n    return 'Must be yes'\n";
        let policy = SandboxPolicy {
            max_llm_calls: 5,
            ..quick()
        };
        let r = run(src, "{\"answer\": \"x\"}", &policy).unwrap();
        assert_eq!(r.outcome.status, ExecStatus::RuntimeError);
        assert_eq!(r.outcome.llm_calls, 5);
    }

    #[test]
    fn replay_miss_propagates() {
        let src = "def answer():\n    return ask_llm('q', str)\n";
        assert!(matches!(run(src, "miss", &quick()), Err(GatewayError::ReplayMiss { .. })));
    }

    #[test]
    fn deep_recursion_stays_contained() {
        let src = "def f(n):\n    return f(n + 1)\ndef answer():\n    return f(0)\n";
        let r = run(src, "", &quick()).unwrap();
        assert_eq!(r.outcome.status, ExecStatus::RuntimeError);
        assert!(r.outcome.error.unwrap().contains("RecursionError"));
    }

    #[test]
    fn report_json_shape() {
        let r = run("def answer():\n    return 'Must be no'\n", "", &quick()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in ["status", "raw_output", "verdict", "llm_calls", "wall_time"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["verdict"], "no");
        assert!(PREAMBLE.contains("def not_in_override"));
    }
}
