//! Adversarial programs for the sandbox: every one must end as a forbidden
//! construct, a runtime error, or a timeout, and none may touch the sentinel
//! file or the listening socket.

use std::net::TcpListener;
use std::path::Path;

use concept_core::conceptualizer::Bindings;
use concept_core::gateway::{Cache, Gateway, ScriptedBackend};
use concept_core::program::{
    execute_candidate, sandbox::execute_unit, ExecStatus, ProgramCandidate, ProgramError, SandboxPolicy,
};

pub fn yes_backend() -> Gateway {
    Gateway::recording(ScriptedBackend::new(|_| Ok("{\"answer\": true}".into())), Cache::in_memory())
}

pub fn candidate(source: &str) -> ProgramCandidate {
    ProgramCandidate::from_completion(0, format!("```python\n{source}\n```"))
}

/// Classification of an adversarial run.
#[derive(Debug, PartialEq)]
pub enum Contained {
    Forbidden,
    RuntimeError,
    Timeout,
}

/// Runs an adversarial source both through validation and as a raw unit
/// that skips it, under the given policy.
pub fn contain(source: &str, policy: &SandboxPolicy) -> Vec<Contained> {
    let g = yes_backend();
    let mut out = Vec::new();
    let c = candidate(source);
    match &c.program {
        Err(ProgramError::ForbiddenConstruct { .. }) => out.push(Contained::Forbidden),
        Err(e) => panic!("{source:?} rejected as {e:?}, not as a forbidden construct"),
        Ok(_) => {
            let r = execute_candidate(&c, &Bindings::new(), &g, policy).unwrap();
            out.push(classify(r.outcome.status, source));
        }
    }
    let unit = format!("{source}\nprint(answer())\n");
    let r = execute_unit(&unit, &g, policy).unwrap();
    out.push(classify(r.outcome.status, source));
    out
}

fn classify(status: ExecStatus, source: &str) -> Contained {
    match status {
        ExecStatus::RuntimeError | ExecStatus::ParseError => Contained::RuntimeError,
        ExecStatus::Timeout => Contained::Timeout,
        ExecStatus::Ok => panic!("{source:?} ran to completion"),
    }
}

pub fn adversarial(sentinel: &Path, port: u16) -> Vec<String> {
    let s = sentinel.display();
    vec![
        format!("import os\ndef answer():\n    os.system('touch {s}')\n    return 1"),
        format!("from os import system\ndef answer():\n    return system('touch {s}')"),
        format!("def answer():\n    f = open('{s}', 'w')\n    f.write('x')\n    return 1"),
        format!("def answer():\n    return __import__('os').system('touch {s}')"),
        format!("def answer():\n    return __import__('subprocess').run(['touch', '{s}'])"),
        format!("def answer():\n    return exec(\"open('{s}', 'w')\")"),
        format!("def answer():\n    return eval(\"open('{s}', 'w')\")"),
        format!("def answer():\n    return getattr(__builtins__, 'open')('{s}', 'w')"),
        format!("def answer():\n    return ().__class__.__bases__[0].__subclasses__()"),
        format!("def answer():\n    return globals()['__builtins__']"),
        format!("import socket\ndef answer():\n    s = socket.socket()\n    s.connect(('127.0.0.1', {port}))\n    return 1"),
        format!("def answer():\n    return __import__('socket').create_connection(('127.0.0.1', {port}))"),
        format!("def answer():\n    return __import__('urllib.request').urlopen('http://127.0.0.1:{port}/')"),
        format!("def answer():\n    with open('{s}', 'w') as f:\n        f.write('x')\n    return 1"),
        format!("def answer():\n    try:\n        x = open('{s}', 'w')\n    except Exception:\n        pass\n    return 1"),
        "def answer():\n    while True:\n        pass\n    return 1".into(),
        "def answer():\n    return [x for x in iter(int, 1)]".into(),
        "def answer():\n    f = lambda: f()\n    return f()".into(),
        "def loop(n: int) -> int:\n    return loop(n + 1)\n\ndef answer():\n    return loop(0)".into(),
        "def f(n: int) -> int:\n    if n == 0:\n        return 1\n    return f(n - 1) + f(n - 1)\n\ndef answer():\n    return f(64)".into(),
        "def answer():\n    x = 'a' * 1000000000\n    return len(x)".into(),
        "def answer():\n    return list(range(10000000000))".into(),
        "def answer():\n    n = 0\n    for i in range(1000000):\n        for j in range(1000000):\n            n = n + 1\n    return n".into(),
        "class Evil:\n    pass\n\ndef answer():\n    return Evil()".into(),
        "def answer():\n    global x\n    x = 1\n    return x".into(),
        "def answer():\n    return (1).__class__".into(),
        "def answer():\n    yield 1".into(),
        "def answer():\n    raise SystemExit(0)".into(),
        "async def answer():\n    return 1".into(),
    ]
}

/// Runs the whole adversarial suite; returns `(programs, runs)` on success.
pub fn hermeticity_suite(policy: &SandboxPolicy) -> Result<(usize, usize), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sentinel = dir.path().join("escaped");
    let listener = TcpListener::bind("127.0.0.1:0").map_err(|e| e.to_string())?;
    listener.set_nonblocking(true).map_err(|e| e.to_string())?;
    let port = listener.local_addr().map_err(|e| e.to_string())?.port();
    let programs = adversarial(&sentinel, port);
    let mut runs = 0;
    for src in &programs {
        let r = std::panic::catch_unwind(|| contain(src, policy)).map_err(|_| format!("not contained: {src:?}"))?;
        runs += r.len();
    }
    if sentinel.exists() {
        return Err("a program wrote the sentinel file".into());
    }
    if listener.accept().is_ok() {
        return Err("a program opened a network connection".into());
    }
    Ok((programs.len(), runs))
}

