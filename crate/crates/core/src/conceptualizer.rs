//! Question conceptualization: replacing concrete nouns with typed parameters.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::gateway::{catalog, slots, GatewayError, Llm, LlmRequest, INFERENCE_TEMPERATURE};
use crate::typed::{TypedValue, ValueKind};
use crate::verdict::Verdict;

pub type Bindings = BTreeMap<String, TypedValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteQuestion {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParameterJson", into = "ParameterJson")]
pub struct ParameterSpec {
    pub name: String,
    pub semantic_label: String,
    pub value_kind: ValueKind,
    pub value: TypedValue,
}

#[derive(Serialize, Deserialize)]
struct ParameterJson {
    name: String,
    semantic_label: String,
    value_kind: ValueKind,
    value: Json,
}

impl TryFrom<ParameterJson> for ParameterSpec {
    type Error = String;

    fn try_from(p: ParameterJson) -> Result<Self, String> {
        let value = TypedValue::from_json(p.value_kind, &p.value)
            .ok_or_else(|| format!("value of `{}` does not match kind {}", p.name, p.value_kind))?;
        Ok(ParameterSpec {
            name: p.name,
            semantic_label: p.semantic_label,
            value_kind: p.value_kind,
            value,
        })
    }
}

impl From<ParameterSpec> for ParameterJson {
    fn from(p: ParameterSpec) -> Self {
        ParameterJson {
            value: p.value.to_json(),
            name: p.name,
            semantic_label: p.semantic_label,
            value_kind: p.value_kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractQuestion {
    pub source_id: String,
    pub template_text: String,
    pub parameters: Vec<ParameterSpec>,
}

impl AbstractQuestion {
    pub fn parameter(&self, name: &str) -> Option<&ParameterSpec> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.parameters.iter().map(|p| p.name.clone()).collect()
    }

    /// The original concrete bindings.
    pub fn bindings(&self) -> Bindings {
        self.parameters
            .iter()
            .map(|p| (p.name.clone(), p.value.clone()))
            .collect()
    }

    /// Template with every label followed by `(name: kind)`, the form the
    /// program prompt expects.
    pub fn annotated(&self) -> String {
        let pairs: Vec<(&str, String)> = self
            .parameters
            .iter()
            .map(|p| {
                (
                    p.semantic_label.as_str(),
                    format!("{} ({}: {})", p.semantic_label, p.name, p.value_kind.label()),
                )
            })
            .collect();
        replace_labels(&self.template_text, &pairs)
    }

    /// Concrete question text for a set of bindings.
    pub fn instantiate(&self, bindings: &Bindings) -> Result<String, String> {
        let mut pairs = Vec::with_capacity(self.parameters.len());
        for p in &self.parameters {
            let v = bindings.get(&p.name).ok_or_else(|| p.name.clone())?;
            pairs.push((p.semantic_label.as_str(), surface(v)));
        }
        Ok(replace_labels(&self.template_text, &pairs))
    }
}

/// Plain text form of a value as it reads inside a question.
pub fn surface(v: &TypedValue) -> String {
    match v {
        TypedValue::Text(s) => s.clone(),
        TypedValue::TextList(items) => items.join(", "),
        other => other.to_json().to_string(),
    }
}

/// Replaces label occurrences in one left-to-right pass, preferring the
/// longest label at each position.
pub fn replace_labels(template: &str, pairs: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut i = 0;
    let bytes = template.as_bytes();
    'outer: while i < template.len() {
        let mut best: Option<(usize, &String)> = None;
        for (label, value) in pairs {
            if !label.is_empty()
                && template[i..].starts_with(label)
                && best.is_none_or(|(len, _)| label.len() > len)
            {
                best = Some((label.len(), value));
            }
        }
        if let Some((len, value)) = best {
            out.push_str(value);
            i += len;
            continue 'outer;
        }
        let ch_len = utf8_len(bytes[i]);
        out.push_str(&template[i..i + ch_len]);
        i += ch_len;
    }
    out
}

fn utf8_len(first: u8) -> usize {
    match first {
        b if b < 0x80 => 1,
        b if b >> 5 == 0b110 => 2,
        b if b >> 4 == 0b1110 => 3,
        _ => 4,
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("reply lacks the abstract question marker")]
    MissingAbstractQuestionMarker,
    #[error("reply lacks the parameters marker")]
    MissingParametersMarker,
    #[error("replacements and parameters disagree: {0}")]
    NameMismatch(String),
    #[error("parameter `{name}` has unknown kind `{kind}`")]
    UnknownKind { name: String, kind: String },
    #[error("parameter `{name}` has a value that does not fit its kind: {raw}")]
    BadValue { name: String, raw: String },
    #[error("label `{0}` does not occur in the abstract question")]
    LabelNotInTemplate(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConceptualization {
    pub template_text: String,
    pub parameters: Vec<ParameterSpec>,
}

fn replacement_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#""([^"]+)"\s+to\s+"([^"]+)"\s*\(\s*([A-Za-z_][A-Za-z0-9_]*)\s*:\s*([A-Za-z\[\]]+)\s*\)"#)
            .expect("valid regex")
    })
}

fn assignment_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*("(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*'|\[[^\]]*\]|[^,\s]+)"#)
            .expect("valid regex")
    })
}

const QUESTION_MARKER: &str = "so the question becomes";
const PARAMETERS_MARKER: &str = "with parameters";

/// Parses a reply in the few-shot format: replacement clauses, the
/// abstract question, and the parameter assignments.
pub fn parse_conceptualization(raw: &str) -> Result<ParsedConceptualization, ParseError> {
    let text = raw.replace("$\\_$", "_").replace("\\_", "_");
    let lower = text.to_ascii_lowercase();
    let q_at = lower
        .rfind(QUESTION_MARKER)
        .ok_or(ParseError::MissingAbstractQuestionMarker)?;
    let p_rel = lower[q_at..]
        .find(PARAMETERS_MARKER)
        .ok_or(ParseError::MissingParametersMarker)?;
    let p_at = q_at + p_rel;
    let template_text = text[q_at + QUESTION_MARKER.len()..p_at]
        .trim()
        .trim_start_matches(':')
        .trim()
        .to_string();

    let mut replacements: Vec<(String, String, String)> = Vec::new();
    for c in replacement_re().captures_iter(&text[..q_at]) {
        let (label, name, kind) = (c[2].to_string(), c[3].to_string(), c[4].to_string());
        if replacements.iter().any(|(_, n, _)| *n == name) {
            return Err(ParseError::NameMismatch(format!("`{name}` replaced twice")));
        }
        replacements.push((label, name, kind));
    }

    let assign_text = text[p_at + PARAMETERS_MARKER.len()..]
        .lines()
        .next()
        .unwrap_or("")
        .trim()
        .trim_start_matches(':');
    let mut assignments: BTreeMap<String, String> = BTreeMap::new();
    for c in assignment_re().captures_iter(assign_text) {
        if assignments.insert(c[1].to_string(), c[2].to_string()).is_some() {
            return Err(ParseError::NameMismatch(format!("`{}` assigned twice", &c[1])));
        }
    }

    let replaced: BTreeSet<&str> = replacements.iter().map(|(_, n, _)| n.as_str()).collect();
    let assigned: BTreeSet<&str> = assignments.keys().map(String::as_str).collect();
    if replaced != assigned || replaced.is_empty() {
        let only_r: Vec<_> = replaced.difference(&assigned).collect();
        let only_a: Vec<_> = assigned.difference(&replaced).collect();
        return Err(ParseError::NameMismatch(format!(
            "replaced only {only_r:?}, assigned only {only_a:?}"
        )));
    }

    let mut parameters = Vec::with_capacity(replacements.len());
    for (label, name, kind_s) in replacements {
        let kind = ValueKind::from_label(&kind_s).ok_or_else(|| ParseError::UnknownKind {
            name: name.clone(),
            kind: kind_s.clone(),
        })?;
        if !matches!(kind, ValueKind::Text | ValueKind::Integer) {
            tracing::warn!(%name, kind = %kind, "parameter kind outside text/int");
        }
        let raw_value = &assignments[&name];
        let value = parse_value(kind, raw_value).ok_or_else(|| ParseError::BadValue {
            name: name.clone(),
            raw: raw_value.clone(),
        })?;
        if !template_text.contains(&label) {
            return Err(ParseError::LabelNotInTemplate(label));
        }
        parameters.push(ParameterSpec {
            name,
            semantic_label: label,
            value_kind: kind,
            value,
        });
    }
    Ok(ParsedConceptualization {
        template_text,
        parameters,
    })
}

fn parse_value(kind: ValueKind, raw: &str) -> Option<TypedValue> {
    let json = if raw.starts_with('"') {
        Json::String(serde_json::from_str::<String>(raw).ok()?)
    } else if let Some(inner) = raw.strip_prefix('\'').and_then(|r| r.strip_suffix('\'')) {
        Json::String(inner.replace("\\'", "'"))
    } else {
        serde_json::from_str(raw).unwrap_or_else(|_| Json::String(raw.to_string()))
    };
    TypedValue::cast(kind, &json)
}

fn render_value(v: &TypedValue) -> String {
    match v {
        TypedValue::Text(s) => serde_json::to_string(s).expect("string serializes"),
        other => other.to_json().to_string(),
    }
}

/// Writes an abstract question in the reply format understood by
/// [`parse_conceptualization`].
pub fn serialize_conceptualization(q: &ParsedConceptualization) -> String {
    let mut out = String::from("As a result, we can replace");
    for p in &q.parameters {
        out.push_str(&format!(
            " \"{}\" to \"{}\" ({}: {})",
            surface(&p.value).replace('"', "'"),
            p.semantic_label,
            p.name,
            p.value_kind.label()
        ));
    }
    out.push_str(" So the question becomes ");
    out.push_str(&q.template_text);
    out.push_str(" With parameters ");
    let assigns: Vec<String> = q
        .parameters
        .iter()
        .map(|p| format!("{}={}", p.name, render_value(&p.value)))
        .collect();
    out.push_str(&assigns.join(", "));
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConceptualizeError {
    #[error("conceptualization of `{source_id}` failed: {reason}")]
    Failed {
        source_id: String,
        reason: ParseError,
        raw: String,
    },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Abstracts a question with a single completion from `llm`.
pub fn conceptualize(llm: &dyn Llm, question: &ConcreteQuestion) -> Result<AbstractQuestion, ConceptualizeError> {
    let req = LlmRequest::new(
        catalog::CONCEPTUALIZE,
        slots([("question", question.text.as_str())]),
        INFERENCE_TEMPERATURE,
        0,
    );
    let resp = llm.complete(&req)?;
    match parse_conceptualization(&resp.text) {
        Ok(p) => Ok(AbstractQuestion {
            source_id: question.id.clone(),
            template_text: p.template_text,
            parameters: p.parameters,
        }),
        Err(reason) => {
            tracing::warn!(id = %question.id, %reason, "question could not be conceptualized");
            Err(ConceptualizeError::Failed {
                source_id: question.id.clone(),
                reason,
                raw: resp.text,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn all_few_shot_replies_parse() {
        let expected: [&[&str]; 6] = [
            &["person_x"],
            &["telescope_x", "geo_feature_y"],
            &["city_x", "population_y", "city_z"],
            &["mountain_x", "body_of_water_y"],
            &["war_x", "war_y"],
            &["artist_x", "group_y"],
        ];
        for ((question, reply), names) in catalog::CONCEPTUALIZE_SHOTS.iter().zip(expected) {
            let p = parse_conceptualization(reply).unwrap_or_else(|e| panic!("{question}: {e}"));
            let got: Vec<&str> = p.parameters.iter().map(|x| x.name.as_str()).collect();
            assert_eq!(got, names);
            let aq = AbstractQuestion {
                source_id: "s".into(),
                template_text: p.template_text.clone(),
                parameters: p.parameters.clone(),
            };
            // no label survives substitution
            let concrete = aq.instantiate(&aq.bindings()).unwrap();
            for param in &aq.parameters {
                assert!(!concrete.contains(&param.semantic_label), "{concrete}");
            }
        }
    }

    #[test]
    fn rusev_and_albany() {
        let p = parse_conceptualization(catalog::CONCEPTUALIZE_SHOTS[0].1).unwrap();
        assert_eq!(
            p.template_text,
            "Does Person X have to worry about human overpopulation in his homeland?"
        );
        assert_eq!(p.parameters[0].value, TypedValue::Text("Rusev".into()));
        assert_eq!(p.parameters[0].semantic_label, "Person X");

        let p = parse_conceptualization(catalog::CONCEPTUALIZE_SHOTS[2].1).unwrap();
        assert_eq!(p.template_text, "Will City X reach Population Y before City Z?");
        assert_eq!(p.parameters[0].value, TypedValue::Text("Albany, Georgia".into()));
        assert_eq!(p.parameters[1].value_kind, ValueKind::Integer);
        assert_eq!(p.parameters[1].value, TypedValue::Integer(100000));
        assert_eq!(p.parameters[2].value, TypedValue::Text("Albany, New York".into()));

        let p = parse_conceptualization(catalog::CONCEPTUALIZE_SHOTS[4].1).unwrap();
        assert_eq!(p.parameters[0].value, TypedValue::Text("Portuguese Colonial War".into()));
        assert_eq!(p.parameters[1].value_kind, ValueKind::Text);
    }

    #[test]
    fn parse_failures() {
        assert_eq!(
            parse_conceptualization("I cannot help with that."),
            Err(ParseError::MissingAbstractQuestionMarker)
        );
        assert_eq!(
            parse_conceptualization("So the question becomes Is X good?"),
            Err(ParseError::MissingParametersMarker)
        );
        assert!(matches!(
            parse_conceptualization("So the question becomes Is Person X tall? With parameters person_x=\"Yao\""),
            Err(ParseError::NameMismatch(_))
        ));
        assert!(matches!(
            parse_conceptualization(
                "replace \"Yao\" to \"Person X\" (person_x: str) So the question becomes Is Person Z tall? With parameters person_x=\"Yao\""
            ),
            Err(ParseError::LabelNotInTemplate(_))
        ));
    }

    #[test]
    fn annotated_form_matches_program_prompt_style() {
        let p = parse_conceptualization(catalog::CONCEPTUALIZE_SHOTS[4].1).unwrap();
        let aq = AbstractQuestion {
            source_id: "s".into(),
            template_text: p.template_text,
            parameters: p.parameters,
        };
        assert_eq!(
            aq.annotated(),
            "Did any country in War X (war_x: str) take a general neutral role in War Y (war_y: str)?"
        );
    }

    #[test]
    fn json_document_shape() {
        let p = parse_conceptualization(catalog::CONCEPTUALIZE_SHOTS[2].1).unwrap();
        let aq = AbstractQuestion {
            source_id: "q1".into(),
            template_text: p.template_text,
            parameters: p.parameters,
        };
        let v = serde_json::to_value(&aq).unwrap();
        assert_eq!(v["parameters"][1]["value_kind"], "int");
        assert_eq!(v["parameters"][1]["value"], 100000);
        let back: AbstractQuestion = serde_json::from_value(v).unwrap();
        assert_eq!(back, aq);
    }

    fn arb_question() -> impl Strategy<Value = ParsedConceptualization> {
        let letters = ["X", "Y", "Z", "W", "V"];
        (1usize..=4)
            .prop_flat_map(move |n| {
                (
                    proptest::collection::vec("[A-Z][a-z]{2,8}", n),
                    proptest::collection::vec(
                        prop_oneof![
                            "[A-Za-z][A-Za-z ,.'-]{0,20}[a-z]".prop_map(TypedValue::Text),
                            (-1_000_000i64..1_000_000).prop_map(TypedValue::Integer),
                        ],
                        n,
                    ),
                    "[A-Z][a-z]{1,6}",
                )
            })
            .prop_map(move |(types, values, verb)| {
                let mut parameters = Vec::new();
                let mut template = format!("{verb}");
                for (i, (ty, value)) in types.iter().zip(values).enumerate() {
                    let label = format!("{ty} {}", letters[i]);
                    let name = format!("{}_{}", ty.to_lowercase(), letters[i].to_lowercase());
                    template.push_str(&format!(" {label} and"));
                    parameters.push(ParameterSpec {
                        name,
                        semantic_label: label,
                        value_kind: value.kind(),
                        value,
                    });
                }
                template.push_str(" more?");
                ParsedConceptualization {
                    template_text: template,
                    parameters,
                }
            })
    }

    proptest! {
        #[test]
        fn parse_inverts_serialize(q in arb_question()) {
            let text = serialize_conceptualization(&q);
            prop_assert_eq!(parse_conceptualization(&text).unwrap(), q);
        }
    }
}
