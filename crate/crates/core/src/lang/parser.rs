use std::rc::Rc;

use super::ast::*;
use super::lexer::{tokenize, unescape, Tok, Token};
use super::ParseError;

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in",
    "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with",
    "yield",
];

fn forbidden_keyword(word: &str) -> Option<&'static str> {
    Some(match word {
        "import" | "from" => "import statement",
        "while" => "while loop",
        "try" | "except" | "finally" => "exception handling",
        "raise" => "raise statement",
        "assert" => "assert statement",
        "with" => "with statement",
        "class" => "class definition",
        "lambda" => "lambda expression",
        "global" | "nonlocal" => "scope declaration",
        "del" => "del statement",
        "yield" => "generator function",
        "async" | "await" => "coroutine",
        _ => return None,
    })
}

/// Parses a complete source file.
pub fn parse_module(source: &str) -> Result<Module, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, pos: 0, depth: 0 };
    let mut body = Vec::new();
    loop {
        match p.peek() {
            Tok::Eof => break,
            Tok::Newline => {
                p.pos += 1;
            }
            Tok::Indent => return Err(p.syntax("unexpected indent")),
            _ => body.extend(p.statement()?),
        }
    }
    Ok(Module { body })
}

/// Parses a single expression (used for f-string replacement fields).
pub fn parse_expression(source: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(source.trim())?;
    let mut p = Parser { tokens, pos: 0, depth: 0 };
    let e = p.testlist()?;
    while matches!(p.peek(), Tok::Newline) {
        p.pos += 1;
    }
    if !matches!(p.peek(), Tok::Eof) {
        return Err(p.syntax("unexpected trailing tokens in expression"));
    }
    Ok(e)
}

/// Bound on syntactic nesting so later tree walks cannot exhaust the stack.
const MAX_NESTING: usize = 150;

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, off: usize) -> &Tok {
        let i = (self.pos + off).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn line(&self) -> usize {
        self.tokens[self.pos].line
    }

    fn next(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line(),
            message: message.into(),
        }
    }

    fn forbidden(&self, construct: impl Into<String>) -> ParseError {
        ParseError::Forbidden {
            line: self.line(),
            construct: construct.into(),
        }
    }

    fn nest(&mut self, n: usize) -> Result<(), ParseError> {
        if self.depth + n > MAX_NESTING {
            return Err(self.syntax("expression nested too deeply"));
        }
        self.depth += n;
        Ok(())
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<(), ParseError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected '{op}', found {}", describe(self.peek()))))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected '{kw}', found {}", describe(self.peek()))))
        }
    }

    fn identifier(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Name(n) if !KEYWORDS.contains(&n.as_str()) => {
                self.pos += 1;
                Ok(n)
            }
            other => Err(self.syntax(format!("expected identifier, found {}", describe(&other)))),
        }
    }

    // ---- statements ----

    fn statement(&mut self) -> Result<Vec<Stmt>, ParseError> {
        if let Tok::Name(word) = self.peek().clone() {
            if let Some(what) = forbidden_keyword(&word) {
                return Err(self.forbidden(what));
            }
            match word.as_str() {
                "def" => return Ok(vec![self.funcdef()?]),
                "if" => return Ok(vec![self.if_stmt()?]),
                "for" => return Ok(vec![self.for_stmt()?]),
                _ => {}
            }
        }
        if self.is_op("@") {
            return Err(self.forbidden("decorator"));
        }
        self.simple_statements()
    }

    fn simple_statements(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let mut out = vec![self.simple_statement()?];
        while self.eat_op(";") {
            if matches!(self.peek(), Tok::Newline | Tok::Eof) {
                break;
            }
            out.push(self.simple_statement()?);
        }
        match self.peek() {
            Tok::Newline => {
                self.pos += 1;
                Ok(out)
            }
            Tok::Eof | Tok::Dedent => Ok(out),
            other => Err(self.syntax(format!("expected end of statement, found {}", describe(other)))),
        }
    }

    fn simple_statement(&mut self) -> Result<Stmt, ParseError> {
        if let Tok::Name(word) = self.peek().clone() {
            if let Some(what) = forbidden_keyword(&word) {
                return Err(self.forbidden(what));
            }
            match word.as_str() {
                "return" => {
                    self.pos += 1;
                    if matches!(self.peek(), Tok::Newline | Tok::Eof | Tok::Dedent) || self.is_op(";") {
                        return Ok(Stmt::Return(None));
                    }
                    return Ok(Stmt::Return(Some(self.testlist()?)));
                }
                "pass" => {
                    self.pos += 1;
                    return Ok(Stmt::Pass);
                }
                "break" => {
                    self.pos += 1;
                    return Ok(Stmt::Break);
                }
                "continue" => {
                    self.pos += 1;
                    return Ok(Stmt::Continue);
                }
                _ => {}
            }
        }
        let first = self.testlist()?;
        if self.eat_op("=") {
            check_target(&first).map_err(|m| self.syntax(m))?;
            let value = self.testlist()?;
            if self.is_op("=") {
                return Err(self.syntax("chained assignment is not supported"));
            }
            return Ok(Stmt::Assign {
                target: first,
                value,
            });
        }
        if self.is_op(":") {
            if !matches!(first, Expr::Name(_)) {
                return Err(self.syntax("only simple names can be annotated"));
            }
            self.pos += 1;
            let annotation = self.test()?;
            let value = if self.eat_op("=") {
                Some(self.testlist()?)
            } else {
                None
            };
            return Ok(Stmt::AnnAssign {
                target: first,
                annotation,
                value,
            });
        }
        let aug = match self.peek() {
            Tok::Op("+=") => Some(BinOp::Add),
            Tok::Op("-=") => Some(BinOp::Sub),
            Tok::Op("*=") => Some(BinOp::Mul),
            Tok::Op("/=") => Some(BinOp::Div),
            Tok::Op("//=") => Some(BinOp::FloorDiv),
            Tok::Op("%=") => Some(BinOp::Mod),
            Tok::Op("**=") => Some(BinOp::Pow),
            Tok::Op("&=") | Tok::Op("|=") | Tok::Op("^=") | Tok::Op(">>=") | Tok::Op("<<=") => {
                return Err(self.forbidden("bitwise operator"));
            }
            _ => None,
        };
        if let Some(op) = aug {
            self.pos += 1;
            if !matches!(first, Expr::Name(_) | Expr::Subscript { .. }) {
                return Err(self.syntax("invalid target for augmented assignment"));
            }
            let value = self.testlist()?;
            return Ok(Stmt::AugAssign {
                target: first,
                op,
                value,
            });
        }
        if self.is_op(":=") {
            return Err(self.forbidden("assignment expression"));
        }
        Ok(Stmt::Expr(first))
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.nest(1)?;
        let r = self.block_inner();
        self.depth -= 1;
        r
    }

    fn block_inner(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect_op(":")?;
        if matches!(self.peek(), Tok::Newline) {
            self.pos += 1;
            if !matches!(self.peek(), Tok::Indent) {
                return Err(self.syntax("expected an indented block"));
            }
            self.pos += 1;
            let mut body = Vec::new();
            loop {
                match self.peek() {
                    Tok::Dedent => {
                        self.pos += 1;
                        break;
                    }
                    Tok::Eof => break,
                    Tok::Newline => self.pos += 1,
                    Tok::Indent => return Err(self.syntax("unexpected indent")),
                    _ => body.extend(self.statement()?),
                }
            }
            Ok(body)
        } else {
            self.simple_statements()
        }
    }

    fn funcdef(&mut self) -> Result<Stmt, ParseError> {
        self.expect_kw("def")?;
        let name = self.identifier()?;
        self.expect_op("(")?;
        let mut params = Vec::new();
        while !self.is_op(")") {
            if self.is_op("*") || self.is_op("**") {
                return Err(self.forbidden("variadic parameters"));
            }
            let pname = self.identifier()?;
            let annotation = if self.eat_op(":") {
                Some(self.test()?)
            } else {
                None
            };
            let default = if self.eat_op("=") {
                Some(self.test()?)
            } else {
                None
            };
            params.push(Param {
                name: pname,
                annotation,
                default,
            });
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        let returns = if self.eat_op("->") {
            Some(self.test()?)
        } else {
            None
        };
        let body = self.block()?;
        Ok(Stmt::FunctionDef(Rc::new(FunctionDef {
            name,
            params,
            returns,
            body,
        })))
    }

    fn if_stmt(&mut self) -> Result<Stmt, ParseError> {
        // consumes "if" or "elif"
        self.next();
        let test = self.test()?;
        let body = self.block()?;
        let orelse = if self.is_kw("elif") {
            vec![self.if_stmt()?]
        } else if self.eat_kw("else") {
            self.block()?
        } else {
            Vec::new()
        };
        Ok(Stmt::If { test, body, orelse })
    }

    fn for_stmt(&mut self) -> Result<Stmt, ParseError> {
        self.expect_kw("for")?;
        let target = self.target_list()?;
        self.expect_kw("in")?;
        let iter = self.testlist()?;
        let body = self.block()?;
        if self.is_kw("else") {
            return Err(self.forbidden("for-else clause"));
        }
        Ok(Stmt::For { target, iter, body })
    }

    fn target_list(&mut self) -> Result<Expr, ParseError> {
        let first = self.arith()?;
        let target = if self.is_op(",") {
            let mut items = vec![first];
            while self.eat_op(",") {
                if self.is_kw("in") {
                    break;
                }
                items.push(self.arith()?);
            }
            Expr::Tuple(items)
        } else {
            first
        };
        check_target(&target).map_err(|m| self.syntax(m))?;
        Ok(target)
    }

    // ---- expressions ----

    fn testlist(&mut self) -> Result<Expr, ParseError> {
        let first = self.test()?;
        if !self.is_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_expr_end() {
                break;
            }
            items.push(self.test()?);
        }
        Ok(Expr::Tuple(items))
    }

    fn at_expr_end(&self) -> bool {
        matches!(self.peek(), Tok::Newline | Tok::Eof | Tok::Dedent)
            || matches!(self.peek(), Tok::Op(o) if matches!(*o, ")" | "]" | "}" | "=" | ":" | ";"))
    }

    fn test(&mut self) -> Result<Expr, ParseError> {
        self.nest(1)?;
        let r = self.test_inner();
        self.depth -= 1;
        r
    }

    fn test_inner(&mut self) -> Result<Expr, ParseError> {
        if self.is_kw("lambda") {
            return Err(self.forbidden("lambda expression"));
        }
        let body = self.or_test()?;
        if self.is_kw("if") {
            self.pos += 1;
            let test = self.or_test()?;
            self.expect_kw("else")?;
            let orelse = self.test()?;
            return Ok(Expr::IfExp {
                test: Box::new(test),
                body: Box::new(body),
                orelse: Box::new(orelse),
            });
        }
        if self.is_op(":=") {
            return Err(self.forbidden("assignment expression"));
        }
        Ok(body)
    }

    fn or_test(&mut self) -> Result<Expr, ParseError> {
        let first = self.and_test()?;
        if !self.is_kw("or") {
            return Ok(first);
        }
        let mut values = vec![first];
        while self.eat_kw("or") {
            values.push(self.and_test()?);
        }
        Ok(Expr::BoolOp {
            op: BoolOp::Or,
            values,
        })
    }

    fn and_test(&mut self) -> Result<Expr, ParseError> {
        let first = self.not_test()?;
        if !self.is_kw("and") {
            return Ok(first);
        }
        let mut values = vec![first];
        while self.eat_kw("and") {
            values.push(self.not_test()?);
        }
        Ok(Expr::BoolOp {
            op: BoolOp::And,
            values,
        })
    }

    fn not_test(&mut self) -> Result<Expr, ParseError> {
        self.nest(1)?;
        let r = self.not_test_inner();
        self.depth -= 1;
        r
    }

    fn not_test_inner(&mut self) -> Result<Expr, ParseError> {
        if self.eat_kw("not") {
            let operand = self.not_test()?;
            return Ok(Expr::UnaryOp {
                op: UnaryOp::Not,
                operand: Box::new(operand),
            });
        }
        self.comparison()
    }

    fn comp_op(&mut self) -> Option<CmpOp> {
        let op = match self.peek() {
            Tok::Op("==") => CmpOp::Eq,
            Tok::Op("!=") => CmpOp::NotEq,
            Tok::Op("<") => CmpOp::Lt,
            Tok::Op("<=") => CmpOp::LtE,
            Tok::Op(">") => CmpOp::Gt,
            Tok::Op(">=") => CmpOp::GtE,
            Tok::Name(n) if n == "in" => CmpOp::In,
            Tok::Name(n) if n == "not" && matches!(self.peek_at(1), Tok::Name(m) if m == "in") => {
                self.pos += 2;
                return Some(CmpOp::NotIn);
            }
            Tok::Name(n) if n == "is" => {
                if matches!(self.peek_at(1), Tok::Name(m) if m == "not") {
                    self.pos += 2;
                    return Some(CmpOp::IsNot);
                }
                CmpOp::Is
            }
            _ => return None,
        };
        self.pos += 1;
        Some(op)
    }

    fn comparison(&mut self) -> Result<Expr, ParseError> {
        let left = self.bitwise()?;
        let mut ops = Vec::new();
        let mut comparators = Vec::new();
        while let Some(op) = self.comp_op() {
            ops.push(op);
            comparators.push(self.bitwise()?);
        }
        if ops.is_empty() {
            Ok(left)
        } else {
            Ok(Expr::Compare {
                left: Box::new(left),
                ops,
                comparators,
            })
        }
    }

    fn bitwise(&mut self) -> Result<Expr, ParseError> {
        let e = self.arith()?;
        if matches!(self.peek(), Tok::Op(o) if matches!(*o, "|" | "&" | "^" | "<<" | ">>")) {
            return Err(self.forbidden("bitwise operator"));
        }
        Ok(e)
    }

    fn arith(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.term()?;
        let mut chained = 0;
        loop {
            let op = match self.peek() {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                _ => {
                    self.depth -= chained;
                    return Ok(left);
                }
            };
            self.pos += 1;
            self.nest(1)?;
            chained += 1;
            let right = self.term()?;
            left = Expr::BinOp {
                op,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.factor()?;
        let mut chained = 0;
        loop {
            let op = match self.peek() {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                Tok::Op("//") => BinOp::FloorDiv,
                Tok::Op("%") => BinOp::Mod,
                Tok::Op("@") => return Err(self.forbidden("matrix multiplication")),
                _ => {
                    self.depth -= chained;
                    return Ok(left);
                }
            };
            self.pos += 1;
            self.nest(1)?;
            chained += 1;
            let right = self.factor()?;
            left = Expr::BinOp {
                op,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        self.nest(1)?;
        let r = self.factor_inner();
        self.depth -= 1;
        r
    }

    fn factor_inner(&mut self) -> Result<Expr, ParseError> {
        let op = match self.peek() {
            Tok::Op("-") => UnaryOp::Neg,
            Tok::Op("+") => UnaryOp::Pos,
            Tok::Op("~") => return Err(self.forbidden("bitwise operator")),
            _ => return self.power(),
        };
        self.pos += 1;
        let operand = self.factor()?;
        Ok(Expr::UnaryOp {
            op,
            operand: Box::new(operand),
        })
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat_op("**") {
            let exp = self.factor()?;
            return Ok(Expr::BinOp {
                op: BinOp::Pow,
                left: Box::new(base),
                right: Box::new(exp),
            });
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.atom()?;
        let mut chained = 0;
        loop {
            if self.is_op("(") || self.is_op("[") || self.is_op(".") {
                self.nest(1)?;
                chained += 1;
            }
            if self.eat_op("(") {
                let (args, keywords) = self.call_args()?;
                e = Expr::Call {
                    func: Box::new(e),
                    args,
                    keywords,
                };
            } else if self.eat_op("[") {
                let index = self.subscript()?;
                self.expect_op("]")?;
                e = Expr::Subscript {
                    value: Box::new(e),
                    index: Box::new(index),
                };
            } else if self.eat_op(".") {
                let attr = match self.next() {
                    Tok::Name(n) => n,
                    other => return Err(self.syntax(format!("expected attribute name, found {}", describe(&other)))),
                };
                e = Expr::Attribute {
                    value: Box::new(e),
                    attr,
                };
            } else {
                self.depth -= chained;
                return Ok(e);
            }
        }
    }

    fn call_args(&mut self) -> Result<(Vec<Expr>, Vec<(String, Expr)>), ParseError> {
        let mut args = Vec::new();
        let mut keywords: Vec<(String, Expr)> = Vec::new();
        while !self.is_op(")") {
            if self.is_op("*") || self.is_op("**") {
                return Err(self.forbidden("argument unpacking"));
            }
            if let (Tok::Name(n), Tok::Op("=")) = (self.peek().clone(), self.peek_at(1).clone()) {
                if !KEYWORDS.contains(&n.as_str()) {
                    self.pos += 2;
                    let v = self.test()?;
                    keywords.push((n, v));
                    if !self.eat_op(",") {
                        break;
                    }
                    continue;
                }
            }
            if !keywords.is_empty() {
                return Err(self.syntax("positional argument follows keyword argument"));
            }
            let a = self.test()?;
            if self.is_kw("for") {
                let generators = self.comprehension_clauses()?;
                args.push(Expr::GeneratorExp {
                    elt: Box::new(a),
                    generators,
                });
            } else {
                args.push(a);
            }
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        Ok((args, keywords))
    }

    fn subscript(&mut self) -> Result<Expr, ParseError> {
        let lower = if self.is_op(":") {
            None
        } else {
            let e = self.test()?;
            if !self.is_op(":") {
                return Ok(e);
            }
            Some(Box::new(e))
        };
        self.expect_op(":")?;
        let upper = if self.is_op(":") || self.is_op("]") {
            None
        } else {
            Some(Box::new(self.test()?))
        };
        let step = if self.eat_op(":") {
            if self.is_op("]") {
                None
            } else {
                Some(Box::new(self.test()?))
            }
        } else {
            None
        };
        Ok(Expr::Slice { lower, upper, step })
    }

    fn comprehension_clauses(&mut self) -> Result<Vec<Comprehension>, ParseError> {
        let mut generators = Vec::new();
        while self.eat_kw("for") {
            let target = self.target_list()?;
            self.expect_kw("in")?;
            let iter = self.or_test()?;
            let mut conditions = Vec::new();
            while self.eat_kw("if") {
                conditions.push(self.or_test()?);
            }
            generators.push(Comprehension {
                target,
                iter,
                conditions,
            });
        }
        if self.is_kw("async") {
            return Err(self.forbidden("coroutine"));
        }
        Ok(generators)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let line = self.line();
        match self.next() {
            Tok::Name(n) => match n.as_str() {
                "None" => Ok(Expr::Constant(Constant::None)),
                "True" => Ok(Expr::Constant(Constant::Bool(true))),
                "False" => Ok(Expr::Constant(Constant::Bool(false))),
                w => {
                    if let Some(what) = forbidden_keyword(w) {
                        self.pos -= 1;
                        return Err(self.forbidden(what));
                    }
                    if KEYWORDS.contains(&w) {
                        self.pos -= 1;
                        return Err(self.syntax(format!("unexpected keyword '{w}'")));
                    }
                    Ok(Expr::Name(n))
                }
            },
            Tok::Int(i) => Ok(Expr::Constant(Constant::Int(i))),
            Tok::Float(f) => Ok(Expr::Constant(Constant::Float(f))),
            first @ (Tok::Str(_) | Tok::FStr { .. }) => {
                let mut pieces = vec![first];
                while matches!(self.peek(), Tok::Str(_) | Tok::FStr { .. }) {
                    pieces.push(self.next());
                }
                string_atom(pieces, line)
            }
            Tok::Op("(") => {
                if self.eat_op(")") {
                    return Ok(Expr::Tuple(Vec::new()));
                }
                if self.is_kw("yield") {
                    return Err(self.forbidden("generator function"));
                }
                let first = self.test()?;
                if self.is_kw("for") {
                    let generators = self.comprehension_clauses()?;
                    self.expect_op(")")?;
                    return Ok(Expr::GeneratorExp {
                        elt: Box::new(first),
                        generators,
                    });
                }
                if self.eat_op(")") {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.is_op(")") {
                        break;
                    }
                    items.push(self.test()?);
                }
                self.expect_op(")")?;
                Ok(Expr::Tuple(items))
            }
            Tok::Op("[") => {
                if self.eat_op("]") {
                    return Ok(Expr::List(Vec::new()));
                }
                let first = self.test()?;
                if self.is_kw("for") {
                    let generators = self.comprehension_clauses()?;
                    self.expect_op("]")?;
                    return Ok(Expr::ListComp {
                        elt: Box::new(first),
                        generators,
                    });
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.is_op("]") {
                        break;
                    }
                    items.push(self.test()?);
                }
                self.expect_op("]")?;
                Ok(Expr::List(items))
            }
            Tok::Op("{") => {
                self.pos -= 1;
                Err(self.forbidden("dict or set literal"))
            }
            Tok::Op("...") => {
                self.pos -= 1;
                Err(self.forbidden("ellipsis"))
            }
            other => {
                self.pos -= 1;
                Err(self.syntax(format!("unexpected {}", describe(&other))))
            }
        }
    }
}

fn check_target(e: &Expr) -> Result<(), String> {
    match e {
        Expr::Name(_) | Expr::Subscript { .. } => Ok(()),
        Expr::Tuple(items) | Expr::List(items) => items.iter().try_for_each(check_target),
        _ => Err("cannot assign to expression".into()),
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Name(n) => format!("'{n}'"),
        Tok::Int(i) => format!("'{i}'"),
        Tok::Float(f) => format!("'{f}'"),
        Tok::Str(_) | Tok::FStr { .. } => "string literal".into(),
        Tok::Op(o) => format!("'{o}'"),
        Tok::Newline => "end of line".into(),
        Tok::Indent => "indent".into(),
        Tok::Dedent => "dedent".into(),
        Tok::Eof => "end of input".into(),
    }
}

fn string_atom(pieces: Vec<Tok>, line: usize) -> Result<Expr, ParseError> {
    if pieces.iter().all(|p| matches!(p, Tok::Str(_))) {
        let s: String = pieces
            .into_iter()
            .map(|p| match p {
                Tok::Str(s) => s,
                _ => unreachable!(),
            })
            .collect();
        return Ok(Expr::str(s));
    }
    let mut parts: Vec<FStringPart> = Vec::new();
    for p in pieces {
        match p {
            Tok::Str(s) => push_literal(&mut parts, s),
            Tok::FStr { body, raw } => {
                for part in split_fstring(&body, raw, line)? {
                    match part {
                        FStringPart::Literal(s) => push_literal(&mut parts, s),
                        e => parts.push(e),
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    Ok(Expr::FString(parts))
}

fn push_literal(parts: &mut Vec<FStringPart>, s: String) {
    if s.is_empty() {
        return;
    }
    if let Some(FStringPart::Literal(prev)) = parts.last_mut() {
        prev.push_str(&s);
    } else {
        parts.push(FStringPart::Literal(s));
    }
}

fn split_fstring(body: &str, raw: bool, line: usize) -> Result<Vec<FStringPart>, ParseError> {
    let err = |m: &str| ParseError::Syntax {
        line,
        message: format!("f-string: {m}"),
    };
    let chars: Vec<char> = body.chars().collect();
    let mut parts = Vec::new();
    let mut lit = String::new();
    let mut i = 0;
    let flush = |lit: &mut String, parts: &mut Vec<FStringPart>| {
        if !lit.is_empty() {
            let text = if raw { lit.clone() } else { unescape(lit) };
            parts.push(FStringPart::Literal(text));
            lit.clear();
        }
    };
    while i < chars.len() {
        let c = chars[i];
        if c == '{' && chars.get(i + 1) == Some(&'{') {
            lit.push('{');
            i += 2;
            continue;
        }
        if c == '}' && chars.get(i + 1) == Some(&'}') {
            lit.push('}');
            i += 2;
            continue;
        }
        if c == '}' {
            return Err(err("single '}' is not allowed"));
        }
        if c == '\\' && !raw {
            lit.push(c);
            if let Some(n) = chars.get(i + 1) {
                lit.push(*n);
            }
            i += 2;
            continue;
        }
        if c != '{' {
            lit.push(c);
            i += 1;
            continue;
        }
        flush(&mut lit, &mut parts);
        // scan the replacement field
        i += 1;
        let start = i;
        let mut depth = 0usize;
        let mut conv_at = None;
        let mut spec_at = None;
        while i < chars.len() {
            let ch = chars[i];
            match ch {
                '\'' | '"' => {
                    let q = ch;
                    i += 1;
                    while i < chars.len() && chars[i] != q {
                        if chars[i] == '\\' {
                            i += 1;
                        }
                        i += 1;
                    }
                }
                '(' | '[' | '{' => depth += 1,
                ')' | ']' => depth = depth.saturating_sub(1),
                '}' if depth > 0 => depth -= 1,
                '}' => break,
                '!' if depth == 0 && spec_at.is_none() && chars.get(i + 1) != Some(&'=') => {
                    conv_at = Some(i)
                }
                ':' if depth == 0 && spec_at.is_none() => spec_at = Some(i),
                _ => {}
            }
            i += 1;
        }
        if i >= chars.len() {
            return Err(err("expecting '}'"));
        }
        let end = i;
        let expr_end = conv_at.or(spec_at).unwrap_or(end);
        let expr_src: String = chars[start..expr_end].iter().collect();
        if expr_src.trim().is_empty() {
            return Err(err("empty expression not allowed"));
        }
        let conversion = match conv_at {
            Some(ci) => {
                let conv_end = spec_at.unwrap_or(end);
                let conv: String = chars[ci + 1..conv_end].iter().collect();
                match conv.as_str() {
                    "r" | "s" | "a" => conv.chars().next(),
                    _ => return Err(err("invalid conversion character")),
                }
            }
            None => None,
        };
        let spec = spec_at.map(|si| chars[si + 1..end].iter().collect::<String>());
        let expr = parse_expression(&expr_src).map_err(|e| match e {
            ParseError::Syntax { message, .. } => ParseError::Syntax { line, message },
            ParseError::Forbidden { construct, .. } => ParseError::Forbidden { line, construct },
        })?;
        parts.push(FStringPart::Expr {
            expr: Box::new(expr),
            conversion,
            spec,
        });
        i = end + 1;
    }
    flush(&mut lit, &mut parts);
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_function_with_annotations() {
        let m = parse_module("def f(a: str, b: int = 3) -> bool:\n    return a\n").unwrap();
        let Stmt::FunctionDef(f) = &m.body[0] else { panic!() };
        assert_eq!(f.params.len(), 2);
        assert!(f.params[1].default.is_some());
        assert!(f.returns.is_some());
    }

    #[test]
    fn elif_nests_into_orelse() {
        let m = parse_module("if a:\n    x = 1\nelif b:\n    x = 2\nelse:\n    x = 3\n").unwrap();
        let Stmt::If { orelse, .. } = &m.body[0] else { panic!() };
        assert!(matches!(&orelse[0], Stmt::If { orelse, .. } if orelse.len() == 1));
    }

    #[test]
    fn chained_comparison() {
        let e = parse_expression("a < b <= c").unwrap();
        assert!(matches!(e, Expr::Compare { ref ops, .. } if ops == &[CmpOp::Lt, CmpOp::LtE]));
    }

    #[test]
    fn not_in_and_is_not() {
        let e = parse_expression("a not in b").unwrap();
        assert!(matches!(e, Expr::Compare { ref ops, .. } if ops == &[CmpOp::NotIn]));
        let e = parse_expression("a is not None").unwrap();
        assert!(matches!(e, Expr::Compare { ref ops, .. } if ops == &[CmpOp::IsNot]));
    }

    #[test]
    fn fstring_parts() {
        let e = parse_expression("f\"Give {str(n)} of {name!r}: {x:.2f}\"").unwrap();
        let Expr::FString(parts) = e else { panic!() };
        assert_eq!(parts.len(), 6);
        assert!(matches!(&parts[3], FStringPart::Expr { conversion: Some('r'), .. }));
        assert!(matches!(&parts[5], FStringPart::Expr { spec: Some(s), .. } if s == ".2f"));
    }

    #[test]
    fn comprehension_and_generator() {
        let e = parse_expression("[x for x in xs if x > 1]").unwrap();
        assert!(matches!(e, Expr::ListComp { .. }));
        let e = parse_expression("any(x in ys for x in xs)").unwrap();
        let Expr::Call { args, .. } = e else { panic!() };
        assert!(matches!(args[0], Expr::GeneratorExp { .. }));
    }

    #[test]
    fn conditional_expression() {
        let e = parse_expression("\"Must be yes\" if c else \"Must be no\"").unwrap();
        assert!(matches!(e, Expr::IfExp { .. }));
    }

    #[test]
    fn forbidden_statements() {
        for src in [
            "import os\n",
            "from os import path\n",
            "while True:\n    pass\n",
            "try:\n    x = 1\nexcept:\n    pass\n",
            "with open('f') as fh:\n    pass\n",
            "class A:\n    pass\n",
            "f = lambda x: x\n",
            "x = {'a': 1}\n",
        ] {
            let err = parse_module(src).unwrap_err();
            assert!(matches!(err, ParseError::Forbidden { .. }), "{src}: {err:?}");
        }
    }

    #[test]
    fn syntax_errors() {
        for src in ["def f(:\n    pass\n", "x = = 1\n", "return (\n", "if x\n    y = 1\n"] {
            assert!(matches!(parse_module(src), Err(ParseError::Syntax { .. })), "{src}");
        }
    }

    #[test]
    fn tuple_unpacking_in_for() {
        let m = parse_module("for i, x in enumerate(xs):\n    pass\n").unwrap();
        assert!(matches!(&m.body[0], Stmt::For { target: Expr::Tuple(t), .. } if t.len() == 2));
    }
}
