//! Candidate programs: extraction, validation, soft-operator rewriting, and
//! assembly into an executable unit.

pub mod sandbox;

use serde::{Deserialize, Serialize};

use crate::conceptualizer::{AbstractQuestion, Bindings};
use crate::gateway::{catalog, slots, GatewayError, Llm, LlmRequest, INFERENCE_TEMPERATURE};
use crate::lang::{self, ast, unparse::str_repr, validate};
use crate::typed::TypedValue;

pub use sandbox::{execute, execute_candidate, ExecStatus, ExecutionOutcome, ExecutionReport, Isolation, SandboxPolicy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionProgram {
    pub source: String,
    pub entry_params: Vec<String>,
    pub helper_names: Vec<String>,
    /// Entry parameters that declare a default value.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub optional_params: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProgramError {
    #[error("syntax error on line {line}: {message}")]
    SyntaxError { line: usize, message: String },
    #[error("forbidden construct: {construct}")]
    ForbiddenConstruct { construct: String },
    #[error("program defines no `answer` function")]
    MissingEntry,
    #[error("no binding for entry parameter `{name}`")]
    MissingBinding { name: String },
}

impl From<lang::ParseError> for ProgramError {
    fn from(e: lang::ParseError) -> Self {
        match e {
            lang::ParseError::Syntax { line, message } => ProgramError::SyntaxError { line, message },
            lang::ParseError::Forbidden { construct, .. } => ProgramError::ForbiddenConstruct { construct },
        }
    }
}

pub const ENTRY: &str = "answer";

/// Parses and validates program text.
pub fn parse_program(source: &str) -> Result<SolutionProgram, ProgramError> {
    let module = lang::parse_module(source)?;
    validate::check_whitelist(&module)?;
    let mut entry: Option<&ast::FunctionDef> = None;
    let mut helper_names = Vec::new();
    for stmt in &module.body {
        if let ast::Stmt::FunctionDef(def) = stmt {
            if def.name == ENTRY {
                if entry.is_some() {
                    return Err(ProgramError::SyntaxError {
                        line: 0,
                        message: "more than one `answer` function".into(),
                    });
                }
                entry = Some(def);
            } else if !helper_names.contains(&def.name) {
                helper_names.push(def.name.clone());
            }
        }
    }
    let entry = entry.ok_or(ProgramError::MissingEntry)?;
    Ok(SolutionProgram {
        source: source.to_string(),
        entry_params: entry.params.iter().map(|p| p.name.clone()).collect(),
        optional_params: entry
            .params
            .iter()
            .filter(|p| p.default.is_some())
            .map(|p| p.name.clone())
            .collect(),
        helper_names,
    })
}

/// Pulls program text out of a completion: the first fenced block if there
/// is one, otherwise the whole reply up to the end marker.
pub fn extract_code(reply: &str) -> String {
    let body = match reply.find("```") {
        Some(open) => {
            let after = &reply[open + 3..];
            let after = after.find('\n').map_or("", |nl| &after[nl + 1..]);
            match after.find("```") {
                Some(close) => &after[..close],
                None => after,
            }
        }
        None => reply,
    };
    let body = match body.find("#The program ends here") {
        Some(end) => &body[..end],
        None => body,
    };
    body.trim_matches('\n').to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewrittenProgram {
    pub source: String,
    pub rewrite_count: usize,
    pub entry_params: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub optional_params: Vec<String>,
}

/// Replaces relational operators with soft-helper calls. Source without any
/// such operator is returned unchanged, so the pass is idempotent on text.
pub fn rewrite_soft_operators(program: &SolutionProgram) -> RewrittenProgram {
    let module = lang::parse_module(&program.source).expect("program was parsed before rewriting");
    let (rewritten, count) = lang::rewrite_module(&module);
    RewrittenProgram {
        source: if count == 0 {
            program.source.clone()
        } else {
            lang::unparse_module(&rewritten)
        },
        rewrite_count: count,
        entry_params: program.entry_params.clone(),
        optional_params: program.optional_params.clone(),
    }
}

/// Helper implementations prepended to every unit.
pub const PREAMBLE: &str = r#"def ask_llm(query, kind=str):
    return __ask__(query, kind)

def ask_gpt(query, kind=str):
    return __ask__(query, kind)

def eq_override(a, b):
    return __soft__('eq', a, b)

def neq_override(a, b):
    return __soft__('neq', a, b)

def gt_override(a, b):
    return __soft__('gt', a, b)

def gte_override(a, b):
    return __soft__('gte', a, b)

def lt_override(a, b):
    return __soft__('lt', a, b)

def lte_override(a, b):
    return __soft__('lte', a, b)

def in_override(a, b):
    return __soft__('inc', a, b)

def not_in_override(a, b):
    return __soft__('ninc', a, b)
"#;

/// Source literal for a bound value.
pub fn literal(v: &TypedValue) -> String {
    match v {
        TypedValue::Boolean(true) => "True".into(),
        TypedValue::Boolean(false) => "False".into(),
        TypedValue::Integer(i) => i.to_string(),
        TypedValue::Real(x) => lang::value::float_repr(*x),
        TypedValue::Text(s) => str_repr(s),
        TypedValue::TextList(items) => {
            let parts: Vec<String> = items.iter().map(|s| str_repr(s)).collect();
            format!("[{}]", parts.join(", "))
        }
    }
}

/// Preamble, rewritten source, and a trailing call that prints the value
/// returned by `answer`.
pub fn assemble(program: &RewrittenProgram, bindings: &Bindings) -> Result<String, ProgramError> {
    let mut args = Vec::with_capacity(program.entry_params.len());
    for name in &program.entry_params {
        match bindings.get(name) {
            Some(v) => args.push(format!("{name}={}", literal(v))),
            None if program.optional_params.contains(name) => {}
            None => return Err(ProgramError::MissingBinding { name: name.clone() }),
        }
    }
    Ok(format!(
        "{PREAMBLE}\n{}\n\nprint({ENTRY}({}))\n",
        program.source.trim_end(),
        args.join(", ")
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramCandidate {
    pub index: u32,
    pub completion: String,
    pub program: Result<SolutionProgram, ProgramError>,
}

impl ProgramCandidate {
    pub fn from_completion(index: u32, completion: String) -> Self {
        let program = parse_program(&extract_code(&completion));
        if let Err(e) = &program {
            tracing::debug!(index, error = %e, "candidate failed to parse");
        }
        ProgramCandidate {
            index,
            completion,
            program,
        }
    }
}

/// Samples `k` programs for an abstract question. Unparseable completions
/// stay in the list as failed candidates.
pub fn generate_candidates(
    llm: &dyn Llm,
    question: &AbstractQuestion,
    k: u32,
) -> Result<Vec<ProgramCandidate>, GatewayError> {
    generate_candidates_at(llm, question, k, INFERENCE_TEMPERATURE)
}

pub fn generate_candidates_at(
    llm: &dyn Llm,
    question: &AbstractQuestion,
    k: u32,
    temperature: f64,
) -> Result<Vec<ProgramCandidate>, GatewayError> {
    assert!(k >= 1, "at least one candidate is required");
    let s = slots([("question", question.annotated())]);
    let responses = llm.sample_n(catalog::PROGRAM, &s, k, temperature)?;
    Ok(responses
        .into_iter()
        .enumerate()
        .map(|(i, r)| ProgramCandidate::from_completion(i as u32, r.text))
        .collect())
}

/// Builds a request for one program sample; exposed for cache tooling.
pub fn program_request(question: &AbstractQuestion, sample_index: u32, temperature: f64) -> LlmRequest {
    LlmRequest::new(
        catalog::PROGRAM,
        slots([("question", question.annotated())]),
        temperature,
        sample_index,
    )
}
