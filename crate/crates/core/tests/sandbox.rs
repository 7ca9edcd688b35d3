mod common;

use std::time::{Duration, Instant};

use common::hermetic::{candidate, contain, hermeticity_suite, yes_backend, Contained};
use concept_core::conceptualizer::Bindings;
use concept_core::gateway::{Cache, Gateway};
use concept_core::program::{execute_candidate, ExecStatus, Isolation, SandboxPolicy};

fn worker_policy(timeout: Duration) -> SandboxPolicy {
    SandboxPolicy {
        timeout,
        isolation: Isolation::worker(env!("CARGO_BIN_EXE_concept")),
        ..SandboxPolicy::default()
    }
}

fn in_process(timeout: Duration) -> SandboxPolicy {
    SandboxPolicy {
        timeout,
        ..SandboxPolicy::default()
    }
}

#[test]
fn worker_runs_programs_with_retrieval() {
    let g = yes_backend();
    let c = candidate("def answer(x: str):\n    if ask_llm(f\"Is {x} big?\", bool):\n        return 'Must be yes'\n    return 'Must be no'");
    let mut b = Bindings::new();
    b.insert("x".into(), concept_core::typed::TypedValue::Text("Jupiter".into()));
    let r = execute_candidate(&c, &b, &g, &worker_policy(Duration::from_secs(20))).unwrap();
    assert_eq!(r.outcome.status, ExecStatus::Ok, "{:?}", r.outcome.error);
    assert_eq!(r.outcome.raw_output.trim(), "Must be yes");
    assert_eq!(r.outcome.llm_calls, 1);
    assert_eq!(r.outcome, execute_candidate(&c, &b, &g, &in_process(Duration::from_secs(20))).unwrap().outcome);
}

#[test]
fn worker_enforces_call_budget() {
    let g = yes_backend();
    let c = candidate("def answer():\n    n = 0\n    for i in range(50):\n        if ask_llm(f\"q{i}\", bool):\n            n = n + 1\n    return n");
    let policy = SandboxPolicy {
        max_llm_calls: 5,
        ..worker_policy(Duration::from_secs(20))
    };
    let r = execute_candidate(&c, &Bindings::new(), &g, &policy).unwrap();
    assert_eq!(r.outcome.status, ExecStatus::RuntimeError);
    assert_eq!(r.outcome.llm_calls, 5);
}

#[test]
fn worker_timeout_kills_runaway() {
    let g = yes_backend();
    let c = candidate("def f(n: int) -> int:\n    if n == 0:\n        return 1\n    return f(n - 1) + f(n - 1)\n\ndef answer():\n    return f(60)");
    let start = Instant::now();
    let r = execute_candidate(&c, &Bindings::new(), &g, &worker_policy(Duration::from_millis(500))).unwrap();
    assert_eq!(r.outcome.status, ExecStatus::Timeout);
    assert!(start.elapsed() < Duration::from_secs(10));
}

#[test]
fn replay_miss_in_worker_is_fatal() {
    let g = Gateway::replay(Cache::in_memory());
    let c = candidate("def answer():\n    return ask_llm('Is water wet?', bool)");
    let e = execute_candidate(&c, &Bindings::new(), &g, &worker_policy(Duration::from_secs(20))).unwrap_err();
    assert!(matches!(e, concept_core::gateway::GatewayError::ReplayMiss { .. }));
}

#[test]
fn adversarial_programs_are_contained_in_process() {
    hermeticity_suite(&in_process(Duration::from_secs(2))).unwrap();
}

#[test]
fn adversarial_programs_are_contained_in_worker() {
    hermeticity_suite(&worker_policy(Duration::from_secs(2))).unwrap();
}

#[test]
fn worker_environment_is_cleared() {
    // Nothing in the language reads the environment, and the worker starts
    // with an empty one regardless.
    assert!(contain("def answer():\n    return os.environ", &in_process(Duration::from_secs(2)))
        .iter()
        .all(|c| *c != Contained::Timeout));
}
