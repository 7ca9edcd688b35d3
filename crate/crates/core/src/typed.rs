//! Typed values exchanged between programs and the retrieval primitive.

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueKind {
    #[serde(rename = "bool")]
    Boolean,
    #[serde(rename = "int")]
    Integer,
    #[serde(rename = "float")]
    Real,
    #[serde(rename = "str")]
    Text,
    #[serde(rename = "list")]
    TextList,
}

impl ValueKind {
    pub const ALL: [ValueKind; 5] = [
        ValueKind::Boolean,
        ValueKind::Integer,
        ValueKind::Real,
        ValueKind::Text,
        ValueKind::TextList,
    ];

    /// Label used in prompts and in program source, e.g. `int`.
    pub fn label(self) -> &'static str {
        match self {
            ValueKind::Boolean => "bool",
            ValueKind::Integer => "int",
            ValueKind::Real => "float",
            ValueKind::Text => "str",
            ValueKind::TextList => "list",
        }
    }

    pub fn from_label(s: &str) -> Option<ValueKind> {
        let s = s.trim().to_ascii_lowercase();
        Some(match s.as_str() {
            "bool" | "boolean" => ValueKind::Boolean,
            "int" | "integer" => ValueKind::Integer,
            "float" | "real" => ValueKind::Real,
            "str" | "text" | "string" => ValueKind::Text,
            "list" | "list[str]" => ValueKind::TextList,
            _ => return None,
        })
    }
}

impl std::fmt::Display for ValueKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TypedValue {
    Boolean(bool),
    Integer(i64),
    Real(f64),
    Text(String),
    TextList(Vec<String>),
}

impl TypedValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            TypedValue::Boolean(_) => ValueKind::Boolean,
            TypedValue::Integer(_) => ValueKind::Integer,
            TypedValue::Real(_) => ValueKind::Real,
            TypedValue::Text(_) => ValueKind::Text,
            TypedValue::TextList(_) => ValueKind::TextList,
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            TypedValue::Boolean(b) => Json::Bool(*b),
            TypedValue::Integer(i) => Json::from(*i),
            TypedValue::Real(x) => Json::from(*x),
            TypedValue::Text(s) => Json::String(s.clone()),
            TypedValue::TextList(v) => Json::Array(v.iter().cloned().map(Json::String).collect()),
        }
    }

    /// Strict inverse of [`TypedValue::to_json`].
    pub fn from_json(kind: ValueKind, v: &Json) -> Option<TypedValue> {
        Some(match (kind, v) {
            (ValueKind::Boolean, Json::Bool(b)) => TypedValue::Boolean(*b),
            (ValueKind::Integer, Json::Number(n)) => TypedValue::Integer(n.as_i64()?),
            (ValueKind::Real, Json::Number(n)) => TypedValue::Real(n.as_f64()?),
            (ValueKind::Text, Json::String(s)) => TypedValue::Text(s.clone()),
            (ValueKind::TextList, Json::Array(items)) => TypedValue::TextList(
                items
                    .iter()
                    .map(|i| i.as_str().map(str::to_string))
                    .collect::<Option<_>>()?,
            ),
            _ => return None,
        })
    }

    /// Lenient cast of a model answer into `kind`.
    pub fn cast(kind: ValueKind, v: &Json) -> Option<TypedValue> {
        match kind {
            ValueKind::Boolean => match v {
                Json::Bool(b) => Some(TypedValue::Boolean(*b)),
                Json::String(s) => match s.trim().to_ascii_lowercase().as_str() {
                    "true" | "yes" => Some(TypedValue::Boolean(true)),
                    "false" | "no" => Some(TypedValue::Boolean(false)),
                    _ => None,
                },
                _ => None,
            },
            ValueKind::Integer => match v {
                Json::Number(n) => match n.as_i64() {
                    Some(i) => Some(TypedValue::Integer(i)),
                    None => {
                        let f = n.as_f64()?;
                        (f.fract() == 0.0 && f.abs() < 9.0e18).then(|| TypedValue::Integer(f as i64))
                    }
                },
                Json::String(s) => {
                    let t = s.trim().replace(',', "");
                    let digits = t.strip_prefix('-').unwrap_or(&t);
                    if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
                        t.parse().ok().map(TypedValue::Integer)
                    } else {
                        None
                    }
                }
                _ => None,
            },
            ValueKind::Real => match v {
                Json::Number(n) => n.as_f64().map(TypedValue::Real),
                Json::String(s) => s
                    .trim()
                    .replace(',', "")
                    .parse::<f64>()
                    .ok()
                    .filter(|f| f.is_finite())
                    .map(TypedValue::Real),
                _ => None,
            },
            ValueKind::Text => match v {
                Json::String(s) => Some(TypedValue::Text(s.clone())),
                Json::Bool(_) | Json::Number(_) => Some(TypedValue::Text(v.to_string())),
                _ => None,
            },
            ValueKind::TextList => match v {
                Json::Array(items) => Some(TypedValue::TextList(
                    items
                        .iter()
                        .map(|i| match i {
                            Json::String(s) => s.clone(),
                            other => other.to_string(),
                        })
                        .collect(),
                )),
                _ => None,
            },
        }
    }
}

/// Serialized as plain JSON; the kind is read back from the JSON type.
impl Serialize for TypedValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for TypedValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Json::deserialize(d)?;
        let kind = match &v {
            Json::Bool(_) => ValueKind::Boolean,
            Json::Number(n) if n.is_i64() => ValueKind::Integer,
            Json::Number(_) => ValueKind::Real,
            Json::String(_) => ValueKind::Text,
            Json::Array(_) => ValueKind::TextList,
            _ => return Err(serde::de::Error::custom(format!("not a typed value: {v}"))),
        };
        TypedValue::from_json(kind, &v).ok_or_else(|| serde::de::Error::custom(format!("not a typed value: {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn casting_rules() {
        let c = TypedValue::cast;
        assert_eq!(c(ValueKind::Boolean, &json!("Yes")), Some(TypedValue::Boolean(true)));
        assert_eq!(c(ValueKind::Boolean, &json!(false)), Some(TypedValue::Boolean(false)));
        assert_eq!(c(ValueKind::Boolean, &json!(1)), None);
        assert_eq!(c(ValueKind::Integer, &json!(35000000)), Some(TypedValue::Integer(35000000)));
        assert_eq!(c(ValueKind::Integer, &json!("120")), Some(TypedValue::Integer(120)));
        assert_eq!(c(ValueKind::Integer, &json!(2.5)), None);
        assert_eq!(c(ValueKind::Integer, &json!(3.0)), Some(TypedValue::Integer(3)));
        assert_eq!(
            c(ValueKind::TextList, &json!(["a", 1, true])),
            Some(TypedValue::TextList(vec!["a".into(), "1".into(), "true".into()]))
        );
        assert_eq!(c(ValueKind::Text, &json!(["a"])), None);
    }

    #[test]
    fn json_round_trip() {
        for v in [
            TypedValue::Boolean(true),
            TypedValue::Integer(-4),
            TypedValue::Real(2.25),
            TypedValue::Text("Rusev".into()),
            TypedValue::TextList(vec!["x".into(), "y".into()]),
        ] {
            assert_eq!(TypedValue::from_json(v.kind(), &v.to_json()), Some(v.clone()));
        }
    }
}
