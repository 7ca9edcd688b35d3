//! Similar-question acquisition: new entities, statements that hold (or do
//! not hold) for them, and a CoT agreement filter that turns the survivors
//! into silver-labeled test cases.

use std::collections::{BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::conceptualizer::{replace_labels, surface, AbstractQuestion, Bindings, ParameterSpec};
use crate::cot::{cot_consensus, CoTSample};
use crate::fraction::Fraction;
use crate::gateway::{catalog, slots, GatewayError, Llm, LlmRequest, GENERATION_TEMPERATURE, INFERENCE_TEMPERATURE};
use crate::typed::TypedValue;
use crate::verdict::Verdict;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalogyConfig {
    pub entities_per_parameter: usize,
    pub statements_per_entity: usize,
    pub target: usize,
    pub minimum: usize,
    pub k: u32,
    pub threshold: Fraction,
    pub inference_temperature: f64,
    pub generation_temperature: f64,
}

impl Default for AnalogyConfig {
    fn default() -> Self {
        AnalogyConfig {
            entities_per_parameter: 6,
            statements_per_entity: 5,
            target: 10,
            minimum: 4,
            k: 10,
            threshold: Fraction::new(8, 10),
            inference_temperature: INFERENCE_TEMPERATURE,
            generation_temperature: GENERATION_TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn intended(self) -> Verdict {
        match self {
            Polarity::Positive => Verdict::Yes,
            Polarity::Negative => Verdict::No,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityCandidate {
    pub parameter_name: String,
    pub value: TypedValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedStatement {
    pub text: String,
    pub polarity: Polarity,
    pub bindings: Bindings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarQuestion {
    pub id: String,
    pub text: String,
    pub bindings: Bindings,
    pub silver_label: Verdict,
    pub agreement: Fraction,
    pub polarity: Polarity,
    /// The CoT samples behind the silver label, kept for refinement feedback.
    pub rationales: Vec<CoTSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarSet {
    pub abstract_id: String,
    pub questions: Vec<SimilarQuestion>,
    /// Candidates that went through the agreement filter.
    pub validated: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalogyError {
    #[error("`{parameter}` is not a parameter of the abstract question")]
    UnknownParameter { parameter: String },
    #[error("no usable {stage} were generated for `{parameter}`")]
    EmptyGeneration { stage: &'static str, parameter: String },
    #[error("no binding for `{0}`")]
    MissingBinding(String),
    #[error("only {} similar questions survived, {minimum} required", .partial.questions.len())]
    InsufficientSimilarQuestions { minimum: usize, partial: SimilarSet },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

fn lookup<'a>(q: &'a AbstractQuestion, name: &str) -> Result<&'a ParameterSpec, AnalogyError> {
    q.parameter(name).ok_or_else(|| AnalogyError::UnknownParameter {
        parameter: name.to_string(),
    })
}

/// Strips list numbering and bullets from a generated line.
fn clean_entity_line(line: &str) -> &str {
    let t = line.trim();
    let t = t.trim_start_matches(['-', '*', '\u{2022}']).trim_start();
    let digits = t.chars().take_while(char::is_ascii_digit).count();
    let t = if digits > 0 && t[digits..].starts_with(['.', ')']) {
        t[digits + 1..].trim_start()
    } else {
        t
    };
    t.trim_matches('"').trim()
}

/// Parses one entity per line up to `END`, deduplicated, without the original value.
pub fn parse_entities(text: &str, spec: &ParameterSpec, n: usize) -> Vec<TypedValue> {
    let original = surface(&spec.value).to_lowercase();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for line in text.lines() {
        let t = clean_entity_line(line);
        if t == "END" {
            break;
        }
        if t.is_empty() || t.to_lowercase() == original || !seen.insert(t.to_lowercase()) {
            continue;
        }
        if let Some(v) = TypedValue::cast(spec.value_kind, &Json::String(t.to_string())) {
            out.push(v);
            if out.len() == n {
                break;
            }
        }
    }
    out
}

pub fn generate_entities(
    llm: &dyn Llm,
    q: &AbstractQuestion,
    parameter: &str,
    n: usize,
    temperature: f64,
) -> Result<Vec<EntityCandidate>, AnalogyError> {
    let spec = lookup(q, parameter)?;
    let req = LlmRequest::new(
        catalog::ENTITIES,
        slots([
            ("question", q.template_text.clone()),
            ("entity", spec.semantic_label.clone()),
            ("example", surface(&spec.value)),
        ]),
        temperature,
        0,
    );
    let text = llm.complete(&req)?.text;
    let values = parse_entities(&text, spec, n);
    if values.is_empty() {
        return Err(AnalogyError::EmptyGeneration {
            stage: "entities",
            parameter: parameter.to_string(),
        });
    }
    Ok(values
        .into_iter()
        .map(|value| EntityCandidate {
            parameter_name: parameter.to_string(),
            value,
        })
        .collect())
}

const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "do", "does", "did", "can", "could", "will", "would", "should", "shall", "may",
    "might", "must", "has", "have", "had",
];

fn is_aux(word: &str) -> bool {
    AUXILIARIES.contains(&word.to_ascii_lowercase().as_str())
}

/// `Aux Label rest?` becomes `Label aux rest.`; anything else is left to the model.
pub fn mechanical_declarative(template: &str, labels: &[&str]) -> Option<String> {
    let t = template.trim().strip_suffix('?')?.trim_end();
    let (aux, rest) = t.split_once(' ')?;
    if !is_aux(aux) {
        return None;
    }
    let label = labels
        .iter()
        .filter(|l| rest.starts_with(**l) && rest[l.len()..].starts_with(' '))
        .max_by_key(|l| l.len())?;
    let tail = rest[label.len()..].trim_start();
    Some(format!("{label} {} {tail}.", aux.to_ascii_lowercase()))
}

/// Declarative form of the abstract question, with every label intact.
pub fn declarativize(llm: &dyn Llm, q: &AbstractQuestion) -> Result<Option<String>, GatewayError> {
    let labels: Vec<&str> = q.parameters.iter().map(|p| p.semantic_label.as_str()).collect();
    if let Some(s) = mechanical_declarative(&q.template_text, &labels) {
        return Ok(Some(s));
    }
    let req = LlmRequest::new(
        catalog::DECLARATIVIZE,
        slots([("question", q.template_text.as_str())]),
        INFERENCE_TEMPERATURE,
        0,
    );
    let text = llm.complete(&req)?.text;
    let line = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let ok = !line.is_empty() && !line.ends_with('?') && labels.iter().all(|l| line.contains(l));
    if !ok {
        tracing::debug!(template = %q.template_text, reply = %line, "declarativization failed");
        return Ok(None);
    }
    let mut s = line.to_string();
    if !s.ends_with(['.', '!']) {
        s.push('.');
    }
    Ok(Some(s))
}

/// Negates a declarative statement: `not` after the first auxiliary, or an
/// explicit prefix when there is none.
pub fn negate(statement: &str, labels: &[&str]) -> String {
    let mut offset = 0;
    for word in statement.split(' ') {
        let bare = word.trim_matches(|c: char| !c.is_alphanumeric());
        if is_aux(bare) && bare == word && offset > 0 {
            let at = offset + word.len();
            return format!("{} not{}", &statement[..at], &statement[at..]);
        }
        offset += word.len() + 1;
    }
    let keep_case = labels.iter().any(|l| statement.starts_with(l));
    let body = if keep_case {
        statement.to_string()
    } else {
        let mut c = statement.chars();
        c.next()
            .map(|f| f.to_lowercase().collect::<String>() + c.as_str())
            .unwrap_or_default()
    };
    format!("It is not true that {body}")
}

/// Parses JSON lines of the form `{"Label": value, ..., "statement": text}`.
pub fn parse_statements(text: &str, free: &[&ParameterSpec], m: usize) -> Vec<(Bindings, String)> {
    let mut out = Vec::new();
    for line in text.lines() {
        let Some(start) = line.find('{') else { continue };
        let mut stream = serde_json::Deserializer::from_str(&line[start..]).into_iter::<Json>();
        let Some(Ok(Json::Object(obj))) = stream.next() else { continue };
        let Some(statement) = obj.get("statement").and_then(Json::as_str) else { continue };
        let mut b = Bindings::new();
        for p in free {
            let raw = obj.get(&p.semantic_label).or_else(|| obj.get(&p.name));
            match raw.and_then(|v| TypedValue::cast(p.value_kind, v)) {
                Some(v) => {
                    b.insert(p.name.clone(), v);
                }
                None => break,
            }
        }
        if b.len() == free.len() {
            out.push((b, statement.trim().to_string()));
            if out.len() == m {
                break;
            }
        }
    }
    out
}

/// Statements for one fixed entity; the remaining parameters are filled by
/// the model.
pub fn generate_statements(
    llm: &dyn Llm,
    q: &AbstractQuestion,
    declarative: &str,
    entity: &EntityCandidate,
    polarity: Polarity,
    m: usize,
    temperature: f64,
) -> Result<Vec<GeneratedStatement>, AnalogyError> {
    let fixed = lookup(q, &entity.parameter_name)?;
    let labels: Vec<&str> = q.parameters.iter().map(|p| p.semantic_label.as_str()).collect();
    let template = match polarity {
        Polarity::Positive => declarative.to_string(),
        Polarity::Negative => negate(declarative, &labels),
    };
    let statement = replace_labels(&template, &[(fixed.semantic_label.as_str(), surface(&entity.value))]);
    let free: Vec<&ParameterSpec> = q.parameters.iter().filter(|p| p.name != fixed.name).collect();
    let base: Bindings = [(fixed.name.clone(), entity.value.clone())].into_iter().collect();

    if free.is_empty() {
        // Nothing left to fill: the statement is already concrete.
        return Ok(vec![GeneratedStatement {
            text: statement,
            polarity,
            bindings: base,
        }]);
    }
    let entities = free
        .iter()
        .map(|p| format!("{}: {} (e.g., {})", p.semantic_label, p.value_kind.label(), surface(&p.value)))
        .collect::<Vec<_>>()
        .join(", ");
    let req = LlmRequest::new(
        catalog::STATEMENTS,
        slots([("statement", statement.as_str()), ("entities", entities.as_str())]),
        temperature,
        0,
    );
    let text = llm.complete(&req)?.text;
    let parsed = parse_statements(&text, &free, m);
    if parsed.is_empty() {
        return Err(AnalogyError::EmptyGeneration {
            stage: "statements",
            parameter: entity.parameter_name.clone(),
        });
    }
    Ok(parsed
        .into_iter()
        .map(|(mut b, text)| {
            b.extend(base.clone());
            GeneratedStatement { text, polarity, bindings: b }
        })
        .collect())
}

pub fn statement_to_question(statement: &GeneratedStatement, q: &AbstractQuestion) -> Result<String, AnalogyError> {
    q.instantiate(&statement.bindings).map_err(AnalogyError::MissingBinding)
}

/// Runs the agreement filter; `None` means rejected.
pub fn validate(
    llm: &dyn Llm,
    id: &str,
    text: &str,
    bindings: &Bindings,
    polarity: Polarity,
    cfg: &AnalogyConfig,
) -> Result<Option<SimilarQuestion>, GatewayError> {
    let consensus = cot_consensus(llm, text, cfg.k, cfg.inference_temperature)?;
    let accepted = consensus.verdict.is_definite() && consensus.agreement.cmp_value(cfg.threshold).is_ge();
    Ok(accepted.then(|| SimilarQuestion {
        id: id.to_string(),
        text: text.to_string(),
        bindings: bindings.clone(),
        silver_label: consensus.verdict,
        agreement: consensus.agreement,
        polarity,
        rationales: consensus.samples,
    }))
}

struct Candidate {
    text: String,
    bindings: Bindings,
    polarity: Polarity,
}

/// Generates and validates similar questions for `q`, alternating polarity
/// so the accepted set stays as balanced as the survivors allow.
pub fn acquire_similar_set(llm: &dyn Llm, q: &AbstractQuestion, cfg: &AnalogyConfig) -> Result<SimilarSet, AnalogyError> {
    let mut pools: [VecDeque<Candidate>; 2] = [VecDeque::new(), VecDeque::new()];
    let mut seen: BTreeSet<String> = BTreeSet::new();
    if let Ok(original) = q.instantiate(&q.bindings()) {
        seen.insert(original);
    }

    if let Some(declarative) = declarativize(llm, q)? {
        for param in &q.parameters {
            let entities = match generate_entities(llm, q, &param.name, cfg.entities_per_parameter, cfg.generation_temperature) {
                Ok(e) => e,
                Err(AnalogyError::Gateway(e)) => return Err(e.into()),
                Err(e) => {
                    tracing::debug!(error = %e, "skipping parameter");
                    continue;
                }
            };
            let jobs: Vec<(&EntityCandidate, Polarity)> = entities
                .iter()
                .flat_map(|e| [(e, Polarity::Positive), (e, Polarity::Negative)])
                .collect();
            let results: Vec<Result<Vec<GeneratedStatement>, AnalogyError>> = jobs
                .par_iter()
                .map(|(e, pol)| {
                    generate_statements(llm, q, &declarative, e, *pol, cfg.statements_per_entity, cfg.generation_temperature)
                })
                .collect();
            for r in results {
                let statements = match r {
                    Ok(s) => s,
                    Err(AnalogyError::Gateway(e)) => return Err(e.into()),
                    Err(e) => {
                        tracing::debug!(error = %e, "no statements");
                        continue;
                    }
                };
                for s in statements {
                    let Ok(text) = statement_to_question(&s, q) else { continue };
                    if seen.insert(text.clone()) {
                        let slot = usize::from(s.polarity == Polarity::Negative);
                        pools[slot].push_back(Candidate {
                            text,
                            bindings: s.bindings,
                            polarity: s.polarity,
                        });
                    }
                }
            }
        }
    }

    let mut accepted: Vec<SimilarQuestion> = Vec::new();
    let mut per_polarity = [0usize; 2];
    let mut validated = 0;
    while accepted.len() < cfg.target {
        let preferred = usize::from(per_polarity[1] < per_polarity[0]);
        let slot = if pools[preferred].is_empty() { 1 - preferred } else { preferred };
        let Some(c) = pools[slot].pop_front() else { break };
        validated += 1;
        let id = format!("{}-s{}", q.source_id, accepted.len() + 1);
        if let Some(sq) = validate(llm, &id, &c.text, &c.bindings, c.polarity, cfg)? {
            per_polarity[slot] += 1;
            accepted.push(sq);
        }
    }

    let set = SimilarSet {
        abstract_id: q.source_id.clone(),
        questions: accepted,
        validated,
    };
    if set.questions.len() < cfg.minimum.max(1) {
        return Err(AnalogyError::InsufficientSimilarQuestions {
            minimum: cfg.minimum,
            partial: set,
        });
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conceptualizer::parse_conceptualization;
    use crate::typed::ValueKind;

    fn city_coast() -> AbstractQuestion {
        AbstractQuestion {
            source_id: "q".into(),
            template_text: "Is City X on Coast Y?".into(),
            parameters: vec![
                ParameterSpec {
                    name: "city_x".into(),
                    semantic_label: "City X".into(),
                    value_kind: ValueKind::Text,
                    value: TypedValue::Text("Miami".into()),
                },
                ParameterSpec {
                    name: "coast_y".into(),
                    semantic_label: "Coast Y".into(),
                    value_kind: ValueKind::Text,
                    value: TypedValue::Text("the Gold Coast".into()),
                },
            ],
        }
    }

    #[test]
    fn entities_follow_the_end_marker() {
        let q = city_coast();
        let text = "1. Hong Kong\n2. New York\nMiami\n- London\nHong Kong\nEND\nParis";
        let got = parse_entities(text, &q.parameters[0], 6);
        assert_eq!(
            got,
            ["Hong Kong", "New York", "London"].map(|s| TypedValue::Text(s.into())).to_vec()
        );
        assert!(parse_entities("Miami\nEND", &q.parameters[0], 6).is_empty());
    }

    #[test]
    fn declarative_and_negated_forms() {
        let labels = ["City X", "Coast Y"];
        let d = mechanical_declarative("Is City X on Coast Y?", &labels).unwrap();
        assert_eq!(d, "City X is on Coast Y.");
        assert_eq!(negate(&d, &labels), "City X is not on Coast Y.");
        let s = replace_labels(&negate(&d, &labels), &[("City X", "Hong Kong".into()), ("Coast Y", "the French Riviera".into())]);
        assert_eq!(s, "Hong Kong is not on the French Riviera.");
        assert_eq!(mechanical_declarative("Did any country in War X take part?", &["War X"]), None);
        assert_eq!(
            negate("If someone loves chocolate, they enjoy Compound Y.", &["Compound Y"]),
            "It is not true that if someone loves chocolate, they enjoy Compound Y."
        );
    }

    #[test]
    fn statement_lines() {
        let compound = ParameterSpec {
            name: "compound_y".into(),
            semantic_label: "Compound Y".into(),
            value_kind: ValueKind::Text,
            value: TypedValue::Text("capsaicin".into()),
        };
        let text = "{\"Compound Y\": \"Theobromine\", \"statement\": \"If someone loves chocolate, they enjoy Theobromine.\"}\nnot json\n{\"statement\": \"missing binding\"}";
        let got = parse_statements(text, &[&compound], 5);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].0["compound_y"], TypedValue::Text("Theobromine".into()));
    }

    #[test]
    fn question_from_statement() {
        let q = city_coast();
        let mut b = Bindings::new();
        b.insert("city_x".into(), TypedValue::Text("Hong Kong".into()));
        b.insert("coast_y".into(), TypedValue::Text("China's southern coast".into()));
        let s = GeneratedStatement {
            text: "Hong Kong is on China's southern coast".into(),
            polarity: Polarity::Positive,
            bindings: b.clone(),
        };
        assert_eq!(statement_to_question(&s, &q).unwrap(), "Is Hong Kong on China's southern coast?");
        b.remove("coast_y");
        let s = GeneratedStatement { bindings: b, ..s };
        assert_eq!(statement_to_question(&s, &q), Err(AnalogyError::MissingBinding("coast_y".into())));

        let p = parse_conceptualization(catalog::CONCEPTUALIZE_SHOTS[3].1).unwrap();
        let q = AbstractQuestion {
            source_id: "fuji".into(),
            template_text: p.template_text,
            parameters: p.parameters,
        };
        let identity = GeneratedStatement {
            text: String::new(),
            polarity: Polarity::Positive,
            bindings: q.bindings(),
        };
        assert_eq!(
            statement_to_question(&identity, &q).unwrap(),
            "Would the top of Mount Fuji stick out of the Sea of Japan?"
        );
    }
}
