//! A small scripted world shared by the replay tests and the acceptance suite.
//!
//! One question ("Is Miami on the Gold Coast?", gold no) whose pipeline run
//! touches every template except `declarativize` and `mcq_to_binary`.

#![allow(dead_code)]

pub mod hermetic;

use std::path::PathBuf;

use concept_core::gateway::{BackendRequest, ScriptedBackend};
use concept_core::harness::{DatasetRecord, IsolationMode, RunConfig, RunMode};
use concept_core::verdict::Verdict;

pub const HOMES: &[(&str, &str)] = &[
    ("Hong Kong", "China's southern coast"),
    ("Nice", "the French Riviera"),
    ("Cannes", "the French Riviera"),
    ("Houston", "the Gulf Coast"),
    ("Tampa", "the Gulf Coast"),
    ("Miami", "the Atlantic coast"),
    ("Surfers Paradise", "the Gold Coast"),
];

const EUROPE: &[&str] = &["Nice", "Cannes"];

pub fn home(city: &str) -> Option<&'static str> {
    HOMES.iter().find(|(c, _)| *c == city).map(|(_, h)| *h)
}

pub const CONCEPTUALIZATION: &str = "We first identify all named entities: Miami, the Gold Coast. As a result, we can replace \"Miami\" to \"City X\" (city_x: str) \"the Gold Coast\" to \"Coast Y\" (coast_y: str) So the question becomes Is City X on Coast Y? With parameters city_x=\"Miami\", coast_y=\"the Gold Coast\"";

/// Correct on every case.
pub const PROGRAM_EXACT: &str = "```python
def city_coast(city: str) -> str:
    return ask_llm(f\"Which coast is {city} on?\", str)

def answer(city_x: str, coast_y: str):
    coast = city_coast(city_x)
    if coast == coast_y:
        return \"Must be yes\"
    return \"Must be no\"
```";

/// Always yes.
pub const PROGRAM_YES: &str = "```python
def answer(city_x: str, coast_y: str):
    return \"Must be yes\"
```";

/// Confuses being on a coast with being in Europe.
pub const PROGRAM_EUROPE: &str = "```python
def in_europe(city: str) -> bool:
    return ask_llm(f\"Is {city} in Europe?\", bool)

def answer(city_x: str, coast_y: str):
    if in_europe(city_x):
        return \"Must be yes\"
    return \"Must be no\"
```";

pub const PROGRAM_REFINED: &str = "```python
def coasts_of(city: str) -> list:
    return ask_llm(f\"Which coasts is {city} on?\", list)

def answer(city_x: str, coast_y: str):
    coasts = coasts_of(city_x)
    if coast_y in coasts:
        return \"Must be yes\"
    return \"Must be no\"
```";

/// The one similar question whose CoT samples disagree.
pub const CONTESTED: &str = "Is Hong Kong on the French Riviera?";

fn split_question(q: &str) -> Option<(&str, &str)> {
    q.strip_prefix("Is ")?.strip_suffix('?')?.split_once(" on ")
}

fn answer_json(v: impl serde::Serialize) -> String {
    serde_json::json!({ "answer": v }).to_string()
}

fn statement(req: &BackendRequest<'_>) -> Result<String, String> {
    let s = &req.slots["statement"];
    let negative = s.contains(" is not on ");
    let (subject, object) = s
        .trim_end_matches('.')
        .split_once(if negative { " is not on " } else { " is on " })
        .ok_or_else(|| format!("unexpected statement {s:?}"))?;
    let line = if subject == "City X" {
        // coast fixed, choose a city
        let city = HOMES
            .iter()
            .rev()
            .find(|(_, h)| (*h == object) != negative)
            .map(|(c, _)| *c)
            .ok_or("no city")?;
        let text = s.replace("City X", city);
        serde_json::json!({ "City X": city, "statement": text })
    } else {
        let own = home(subject).ok_or("unknown city")?;
        let coast = if negative {
            if own == "the French Riviera" { "the Gulf Coast" } else { "the French Riviera" }
        } else {
            own
        };
        let text = s.replace("Coast Y", coast);
        serde_json::json!({ "Coast Y": coast, "statement": text })
    };
    Ok(line.to_string())
}

fn ask(query: &str) -> Result<String, String> {
    if let Some(rest) = query.strip_prefix("Which coast is ") {
        let city = rest.trim_end_matches(" on?");
        return Ok(answer_json(home(city).unwrap_or("none")));
    }
    if let Some(rest) = query.strip_prefix("Which coasts is ") {
        let city = rest.trim_end_matches(" on?");
        return Ok(answer_json(home(city).into_iter().collect::<Vec<_>>()));
    }
    if let Some(rest) = query.strip_prefix("Is ").and_then(|r| r.strip_suffix(" in Europe?")) {
        return Ok(answer_json(EUROPE.contains(&rest)));
    }
    if let Some(rest) = query.strip_prefix("Consider the implied value, is ") {
        let (a, b) = rest
            .trim_end_matches('?')
            .split_once(" roughly the same as ")
            .ok_or("bad soft query")?;
        return Ok(answer_json(a.trim_matches('\'') == b.trim_matches('\'')));
    }
    if let Some(rest) = query.strip_prefix("Considered the implied value, is ") {
        let (a, list) = rest.split_once(" included or mentioned by the list ").ok_or("bad soft query")?;
        return Ok(answer_json(list.contains(a.trim_matches('\''))));
    }
    Err(format!("unscripted query {query:?}"))
}

/// Backend answering every request the scenario issues.
pub fn world() -> ScriptedBackend {
    ScriptedBackend::new(|req| match req.template {
        "conceptualize" => Ok(CONCEPTUALIZATION.into()),
        "program" => Ok([PROGRAM_EXACT, PROGRAM_YES, PROGRAM_EUROPE]
            [req.sample_index as usize % 3]
            .into()),
        "entities" => Ok(match req.slots["entity"].as_str() {
            "City X" => "1. Hong Kong\n2. Nice\nEND",
            _ => "the French Riviera\nthe Gulf Coast\nEND",
        }
        .into()),
        "statements" => statement(req),
        "cot" => {
            let q = req.slots["question"].as_str();
            let (city, coast) = split_question(q).ok_or_else(|| format!("unscripted cot {q:?}"))?;
            let truth = home(city) == Some(coast);
            let says = if q == CONTESTED && req.sample_index == 0 { !truth } else { truth };
            Ok(format!(
                "{city} lies on {}. So the answer is {}.",
                home(city).unwrap_or("no known coast"),
                if says { "yes" } else { "no" }
            ))
        }
        "ask_typed" => ask(&req.slots["query"]),
        "refine" => Ok(PROGRAM_REFINED.into()),
        other => Err(format!("unscripted template {other}")),
    })
}

pub fn record() -> DatasetRecord {
    DatasetRecord {
        id: "miami-gold".into(),
        question: "Is Miami on the Gold Coast?".into(),
        gold: Some(Verdict::No),
        origin: "coasts".into(),
    }
}

pub fn config(mode: RunMode) -> RunConfig {
    RunConfig {
        mode,
        k_samples: 3,
        entities_per_parameter: 2,
        statements_per_entity: 1,
        similar_target: 4,
        similar_minimum: 4,
        isolation: IsolationMode::InProcess,
        workers: 1,
        ..RunConfig::default()
    }
}

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e_cache.jsonl")
}
