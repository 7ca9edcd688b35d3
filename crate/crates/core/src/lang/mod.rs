//! The solution language: a small, hermetic subset of Python in which
//! candidate programs are written.

pub mod ast;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod rewrite;
pub mod soft;
pub mod unparse;
pub mod validate;
pub mod value;

pub use interp::{Host, HostError, Interpreter, Limits, RunError};
pub use parser::{parse_expression, parse_module};
pub use rewrite::{count_soft_comparisons, rewrite_module};
pub use soft::ComparisonKind;
pub use unparse::{unparse_expr, unparse_module};
pub use value::Value;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("forbidden construct on line {line}: {construct}")]
    Forbidden { line: usize, construct: String },
}
