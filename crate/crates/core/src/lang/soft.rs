//! Soft relational operators.
//!
//! A soft comparison first tries to decide natively: numeric operands (and
//! strings that read as numbers) compare exactly, and `eq` is reflexive. Only
//! when that fails is the base query for the operator asked as a boolean
//! question. `neq`, `gte`, `lte` and `ninc` are compositions of the four base
//! queries.

use serde::{Deserialize, Serialize};

use super::ast::CmpOp;
use super::value::{Number, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonKind {
    Eq,
    Neq,
    Gt,
    Gte,
    Lt,
    Lte,
    Inc,
    Ninc,
}

impl ComparisonKind {
    pub const ALL: [ComparisonKind; 8] = [
        ComparisonKind::Eq,
        ComparisonKind::Neq,
        ComparisonKind::Gt,
        ComparisonKind::Gte,
        ComparisonKind::Lt,
        ComparisonKind::Lte,
        ComparisonKind::Inc,
        ComparisonKind::Ninc,
    ];

    pub fn from_cmp_op(op: CmpOp) -> Option<ComparisonKind> {
        Some(match op {
            CmpOp::Eq => ComparisonKind::Eq,
            CmpOp::NotEq => ComparisonKind::Neq,
            CmpOp::Gt => ComparisonKind::Gt,
            CmpOp::GtE => ComparisonKind::Gte,
            CmpOp::Lt => ComparisonKind::Lt,
            CmpOp::LtE => ComparisonKind::Lte,
            CmpOp::In => ComparisonKind::Inc,
            CmpOp::NotIn => ComparisonKind::Ninc,
            CmpOp::Is | CmpOp::IsNot => return None,
        })
    }

    pub fn cmp_op(self) -> CmpOp {
        match self {
            ComparisonKind::Eq => CmpOp::Eq,
            ComparisonKind::Neq => CmpOp::NotEq,
            ComparisonKind::Gt => CmpOp::Gt,
            ComparisonKind::Gte => CmpOp::GtE,
            ComparisonKind::Lt => CmpOp::Lt,
            ComparisonKind::Lte => CmpOp::LtE,
            ComparisonKind::Inc => CmpOp::In,
            ComparisonKind::Ninc => CmpOp::NotIn,
        }
    }

    pub fn helper_name(self) -> &'static str {
        match self {
            ComparisonKind::Eq => "eq_override",
            ComparisonKind::Neq => "neq_override",
            ComparisonKind::Gt => "gt_override",
            ComparisonKind::Gte => "gte_override",
            ComparisonKind::Lt => "lt_override",
            ComparisonKind::Lte => "lte_override",
            ComparisonKind::Inc => "in_override",
            ComparisonKind::Ninc => "not_in_override",
        }
    }

    /// Short tag passed from the preamble helpers to the host.
    pub fn tag(self) -> &'static str {
        match self {
            ComparisonKind::Eq => "eq",
            ComparisonKind::Neq => "neq",
            ComparisonKind::Gt => "gt",
            ComparisonKind::Gte => "gte",
            ComparisonKind::Lt => "lt",
            ComparisonKind::Lte => "lte",
            ComparisonKind::Inc => "inc",
            ComparisonKind::Ninc => "ninc",
        }
    }

    pub fn from_tag(tag: &str) -> Option<ComparisonKind> {
        ComparisonKind::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

/// The four operators that have their own query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseQuery {
    Same,
    Larger,
    Smaller,
    Included,
}

impl BaseQuery {
    pub fn render(self, a: &Value, b: &Value) -> String {
        match self {
            BaseQuery::Same => {
                format!("Consider the implied value, is {a} roughly the same as {b}?")
            }
            BaseQuery::Larger => {
                format!("Consider the implied value, is {a} roughly larger than {b}?")
            }
            BaseQuery::Smaller => {
                format!("Consider the implied value, is {a} roughly smaller than {b}?")
            }
            BaseQuery::Included => {
                format!("Considered the implied value, is {a} included or mentioned by the list {b}?")
            }
        }
    }
}

/// Evaluates a soft comparison. `ask` resolves a rendered boolean query.
pub fn soft_compare<E>(
    kind: ComparisonKind,
    a: &Value,
    b: &Value,
    ask: &mut dyn FnMut(&str) -> Result<bool, E>,
) -> Result<bool, E> {
    Ok(match kind {
        ComparisonKind::Eq => soft_eq(a, b, ask)?,
        ComparisonKind::Neq => !soft_eq(a, b, ask)?,
        ComparisonKind::Gt => soft_order(a, b, BaseQuery::Larger, ask)?,
        ComparisonKind::Lt => soft_order(a, b, BaseQuery::Smaller, ask)?,
        ComparisonKind::Gte => {
            soft_order(a, b, BaseQuery::Larger, ask)? || soft_eq(a, b, ask)?
        }
        ComparisonKind::Lte => {
            soft_order(a, b, BaseQuery::Smaller, ask)? || soft_eq(a, b, ask)?
        }
        ComparisonKind::Inc => soft_inc(a, b, ask)?,
        ComparisonKind::Ninc => !soft_inc(a, b, ask)?,
    })
}

fn soft_eq<E>(
    a: &Value,
    b: &Value,
    ask: &mut dyn FnMut(&str) -> Result<bool, E>,
) -> Result<bool, E> {
    if let (Some(x), Some(y)) = (numeric(a), numeric(b)) {
        return Ok(x.eq_num(y));
    }
    if a.py_eq(b) {
        return Ok(true);
    }
    ask(&BaseQuery::Same.render(a, b))
}

fn soft_order<E>(
    a: &Value,
    b: &Value,
    query: BaseQuery,
    ask: &mut dyn FnMut(&str) -> Result<bool, E>,
) -> Result<bool, E> {
    if let (Some(x), Some(y)) = (numeric(a), numeric(b)) {
        let ord = x.partial_cmp_num(y);
        return Ok(match query {
            BaseQuery::Larger => ord == Some(std::cmp::Ordering::Greater),
            _ => ord == Some(std::cmp::Ordering::Less),
        });
    }
    ask(&query.render(a, b))
}

fn soft_inc<E>(
    a: &Value,
    b: &Value,
    ask: &mut dyn FnMut(&str) -> Result<bool, E>,
) -> Result<bool, E> {
    if let Some(x) = numeric(a) {
        let items: Option<Vec<Number>> = match b {
            Value::List(l) => l.borrow().iter().map(numeric).collect(),
            Value::Tuple(t) => t.iter().map(numeric).collect(),
            _ => None,
        };
        if let Some(items) = items {
            return Ok(items.into_iter().any(|y| x.eq_num(y)));
        }
    }
    ask(&BaseQuery::Included.render(a, b))
}

/// Numeric reading of a value: numbers, bools, and strings such as
/// `"5,895"` or `" 3.5 "`.
pub fn numeric(v: &Value) -> Option<Number> {
    match v {
        Value::Str(s) => parse_numeric_str(s),
        other => other.as_number(),
    }
}

fn parse_numeric_str(s: &str) -> Option<Number> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    let body = t.strip_prefix(['+', '-']).unwrap_or(t);
    if body.is_empty() || !body.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        return None;
    }
    if !body
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | 'e' | 'E' | '+' | '-'))
    {
        return None;
    }
    let cleaned = if t.contains(',') {
        // only accept well-formed thousands separators
        let int_part = body.split(['.', 'e', 'E']).next().unwrap_or("");
        let groups: Vec<&str> = int_part.split(',').collect();
        let ok = groups.len() > 1
            && (1..=3).contains(&groups[0].len())
            && groups[1..].iter().all(|g| g.len() == 3);
        if !ok {
            return None;
        }
        t.replace(',', "")
    } else {
        t.to_string()
    };
    if let Ok(i) = cleaned.parse::<i64>() {
        return Some(Number::Int(i));
    }
    cleaned.parse::<f64>().ok().filter(|f| f.is_finite()).map(Number::Float)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn never(_: &str) -> Result<bool, String> {
        Err("no query expected".into())
    }

    #[test]
    fn numeric_fast_path_needs_no_query() {
        let a = Value::Int(5895);
        let b = Value::Int(3742);
        assert!(soft_compare(ComparisonKind::Gt, &a, &b, &mut never).unwrap());
        let a = Value::str("5,895");
        let b = Value::str("3,742 ");
        assert!(soft_compare(ComparisonKind::Gt, &a, &b, &mut never).unwrap());
        assert!(!soft_compare(ComparisonKind::Lte, &a, &b, &mut never).unwrap());
    }

    #[test]
    fn eq_is_reflexive_on_text() {
        let x = Value::str("father-son");
        assert!(soft_compare(ComparisonKind::Eq, &x, &x.clone(), &mut never).unwrap());
        assert!(!soft_compare(ComparisonKind::Neq, &x, &x.clone(), &mut never).unwrap());
    }

    #[test]
    fn text_comparison_renders_query() {
        let mut seen = Vec::new();
        let r = soft_compare(
            ComparisonKind::Eq,
            &Value::str("father-son"),
            &Value::str("parent-child"),
            &mut |q: &str| -> Result<bool, String> {
                seen.push(q.to_string());
                Ok(true)
            },
        )
        .unwrap();
        assert!(r);
        assert_eq!(
            seen,
            ["Consider the implied value, is father-son roughly the same as parent-child?"]
        );
    }

    #[test]
    fn membership_query_uses_list_repr() {
        let mut seen = Vec::new();
        let list = Value::list(vec![Value::str("Portugal"), Value::str("Angola")]);
        soft_compare(ComparisonKind::Ninc, &Value::str("Spain"), &list, &mut |q: &str| {
            seen.push(q.to_string());
            Ok::<_, String>(false)
        })
        .unwrap();
        assert_eq!(
            seen,
            ["Considered the implied value, is Spain included or mentioned by the list ['Portugal', 'Angola']?"]
        );
    }

    #[test]
    fn gte_short_circuits_after_gt() {
        let (a, b) = (Value::str("big"), Value::str("small"));
        let mut calls = 0;
        let r = soft_compare(ComparisonKind::Gte, &a, &b, &mut |_q: &str| {
            calls += 1;
            Ok::<_, String>(true)
        })
        .unwrap();
        assert!(r);
        assert_eq!(calls, 1);
        let mut calls = 0;
        let r = soft_compare(ComparisonKind::Gte, &a, &b, &mut |_q: &str| {
            calls += 1;
            Ok::<_, String>(false)
        })
        .unwrap();
        assert!(!r);
        assert_eq!(calls, 2);
    }

    #[test]
    fn numeric_strings() {
        assert!(matches!(parse_numeric_str("42"), Some(Number::Int(42))));
        assert!(matches!(parse_numeric_str("-3.5"), Some(Number::Float(f)) if f == -3.5));
        assert!(matches!(parse_numeric_str("35,000,000"), Some(Number::Int(35_000_000))));
        assert!(parse_numeric_str("1,2").is_none());
        assert!(parse_numeric_str("inf").is_none());
        assert!(parse_numeric_str("twelve").is_none());
        assert!(parse_numeric_str("").is_none());
    }
}
