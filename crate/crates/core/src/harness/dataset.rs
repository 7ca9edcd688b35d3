use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::gateway::{catalog, slots, GatewayError, Llm, LlmRequest, INFERENCE_TEMPERATURE};
use crate::verdict::Verdict;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Verdict>,
    pub origin: String,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed record on line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
}

/// Reads a JSONL dataset of `{"id", "question", "answer"}` objects. The
/// origin defaults to the file stem. With `require_gold`, a missing or
/// non-binary answer is an error.
pub fn load_dataset(path: &Path, require_gold: bool) -> Result<Vec<DatasetRecord>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let default_origin = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dataset(&text, &default_origin, require_gold)
}

pub fn parse_dataset(text: &str, default_origin: &str, require_gold: bool) -> Result<Vec<DatasetRecord>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| DatasetError::MalformedRecord { line: i + 1, message };
        let v: Json = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let field = |k: &str| v.get(k).and_then(Json::as_str).map(str::to_string);
        let id = match v.get("id") {
            Some(Json::String(s)) => s.clone(),
            Some(Json::Number(n)) => n.to_string(),
            _ => return Err(bad("missing \"id\"".into())),
        };
        let question = field("question").ok_or_else(|| bad("missing \"question\"".into()))?;
        let gold = match v.get("answer") {
            Some(Json::Bool(b)) => Some(if *b { Verdict::Yes } else { Verdict::No }),
            Some(Json::String(s)) => match Verdict::parse(s) {
                Some(v) if v.is_definite() => Some(v),
                _ => return Err(bad(format!("answer {s:?} is not yes/no"))),
            },
            None | Some(Json::Null) => None,
            Some(other) => return Err(bad(format!("answer {other} is not yes/no"))),
        };
        if require_gold && gold.is_none() {
            return Err(bad("missing \"answer\"".into()));
        }
        out.push(DatasetRecord {
            id,
            question,
            gold,
            origin: field("origin").unwrap_or_else(|| default_origin.to_string()),
        });
    }
    Ok(out)
}

/// `n` records chosen by a seeded generator, in their original order.
pub fn sample_records(records: &[DatasetRecord], n: usize, seed: u64) -> Vec<DatasetRecord> {
    if n >= records.len() {
        return records.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, records.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| records[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConversionError {
    #[error("could not turn `{id}` into a yes/no question: {reply:?}")]
    ConversionFailed { id: String, reply: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Merges a multiple-choice question and its correct answer into one
/// yes/no question whose gold answer is yes.
pub fn convert_mcq_to_binary(
    llm: &dyn Llm,
    id: &str,
    question: &str,
    correct_choice: &str,
    origin: &str,
) -> Result<DatasetRecord, ConversionError> {
    assert!(!correct_choice.trim().is_empty(), "correct choice must be non-empty");
    let req = LlmRequest::new(
        catalog::MCQ_TO_BINARY,
        slots([("question", question), ("answer", correct_choice)]),
        INFERENCE_TEMPERATURE,
        0,
    );
    let reply = llm.complete(&req)?.text;
    let line = reply.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let line = line.strip_prefix("Question:").map_or(line, str::trim);
    if !line.ends_with('?') || squash(line) == squash(question) {
        return Err(ConversionError::ConversionFailed {
            id: id.to_string(),
            reply,
        });
    }
    Ok(DatasetRecord {
        id: id.to_string(),
        question: line.to_string(),
        gold: Some(Verdict::Yes),
        origin: origin.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_records() {
        let text = "{\"id\":\"q1\",\"question\":\"Is water wet?\",\"answer\":\"yes\"}\n\n{\"id\":2,\"question\":\"Q?\",\"answer\":false,\"origin\":\"boolq\"}\n";
        let r = parse_dataset(text, "strategyqa", true).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!((r[0].gold, r[0].origin.as_str()), (Some(Verdict::Yes), "strategyqa"));
        assert_eq!((r[1].id.as_str(), r[1].gold, r[1].origin.as_str()), ("2", Some(Verdict::No), "boolq"));
        assert!(parse_dataset("", "x", true).unwrap().is_empty());
    }

    #[test]
    fn missing_answer() {
        let text = "{\"id\":\"a\",\"question\":\"Q?\",\"answer\":\"yes\"}\n{\"id\":\"b\",\"question\":\"Q?\"}\n";
        match parse_dataset(text, "x", true) {
            Err(DatasetError::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_dataset(text, "x", false).unwrap()[1].gold, None);
    }

    #[test]
    fn seeded_sampling() {
        let records: Vec<DatasetRecord> = (0..50)
            .map(|i| DatasetRecord {
                id: i.to_string(),
                question: String::new(),
                gold: None,
                origin: String::new(),
            })
            .collect();
        let a = sample_records(&records, 10, 7);
        assert_eq!(a, sample_records(&records, 10, 7));
        assert_ne!(a, sample_records(&records, 10, 8));
        assert_eq!(a.len(), 10);
        let ids: Vec<usize> = a.iter().map(|r| r.id.parse().unwrap()).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(sample_records(&records, 80, 1).len(), 50);
    }
}
