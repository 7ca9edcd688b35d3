//! Tree-walking interpreter for the solution language.
//!
//! The interpreter has no access to the outside world. The only effects are
//! text appended to its output buffer by `print` and retrieval requests
//! forwarded to a [`Host`] through the `__ask__` and `__soft__` builtins used
//! by the preamble.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::time::Instant;

use super::ast::*;
use super::soft::{soft_compare, ComparisonKind};
use super::value::{float_repr, range_len, Number, TypeName, Value};
use crate::typed::{TypedValue, ValueKind};

/// Resolves retrievals issued by a running program.
pub trait Host {
    fn ask(&mut self, query: &str, kind: ValueKind) -> Result<TypedValue, HostError>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct HostError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Runtime(String),
    #[error("execution timed out")]
    Timeout,
    #[error("retrieval failed: {0}")]
    Host(String),
}

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub deadline: Option<Instant>,
    pub max_depth: usize,
    /// Longest list, string, or range a program may materialize.
    pub max_len: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            deadline: None,
            max_depth: 100,
            max_len: 1_000_000,
        }
    }
}

const BUILTINS: &[&str] = &[
    "len", "str", "int", "float", "bool", "list", "tuple", "range", "abs", "min", "max", "sum",
    "sorted", "reversed", "any", "all", "enumerate", "zip", "round", "isinstance", "print",
    "__ask__", "__soft__",
];

enum Items {
    Owned(std::vec::IntoIter<Value>),
    Range { next: i64, remaining: i64, step: i64 },
}

impl Iterator for Items {
    type Item = Value;

    fn next(&mut self) -> Option<Value> {
        match self {
            Items::Owned(it) => it.next(),
            Items::Range { next, remaining, step } => {
                if *remaining <= 0 {
                    return None;
                }
                let v = *next;
                *remaining -= 1;
                *next = next.wrapping_add(*step);
                Some(Value::Int(v))
            }
        }
    }
}

enum Flow {
    Normal,
    Return(Value),
    Break,
    Continue,
}

type R<T> = Result<T, RunError>;

fn err<T>(kind: &str, msg: impl std::fmt::Display) -> R<T> {
    Err(RunError::Runtime(format!("{kind}: {msg}")))
}

pub struct Interpreter<'h> {
    host: &'h mut dyn Host,
    limits: Limits,
    globals: HashMap<String, Value>,
    frames: Vec<HashMap<String, Value>>,
    output: String,
    ticks: u32,
}

impl<'h> Interpreter<'h> {
    pub fn new(host: &'h mut dyn Host, limits: Limits) -> Self {
        Interpreter {
            host,
            limits,
            globals: HashMap::new(),
            frames: Vec::new(),
            output: String::new(),
            ticks: 0,
        }
    }

    pub fn output(&self) -> &str {
        &self.output
    }

    pub fn run_module(&mut self, module: &Module) -> R<()> {
        match self.exec_block(&module.body)? {
            Flow::Normal => Ok(()),
            Flow::Return(_) => err("SyntaxError", "'return' outside function"),
            Flow::Break | Flow::Continue => err("SyntaxError", "loop control outside loop"),
        }
    }

    /// Calls a function defined by the module with keyword arguments.
    pub fn call_function(&mut self, name: &str, kwargs: Vec<(String, Value)>) -> R<Value> {
        let f = self.lookup(name)?;
        self.call_value(&f, Vec::new(), kwargs)
    }

    fn check_time(&mut self) -> R<()> {
        self.ticks = self.ticks.wrapping_add(1);
        if self.ticks % 64 == 0 {
            if let Some(d) = self.limits.deadline {
                if Instant::now() >= d {
                    return Err(RunError::Timeout);
                }
            }
        }
        Ok(())
    }

    fn check_len(&self, n: usize) -> R<()> {
        if n > self.limits.max_len {
            return err("MemoryError", format!("sequence of length {n} exceeds the limit"));
        }
        Ok(())
    }

    // ---- scopes ----

    fn lookup(&self, name: &str) -> R<Value> {
        if let Some(frame) = self.frames.last() {
            if let Some(v) = frame.get(name) {
                return Ok(v.clone());
            }
        }
        if let Some(v) = self.globals.get(name) {
            return Ok(v.clone());
        }
        if let Some(t) = TypeName::from_name(name) {
            return Ok(Value::Type(t));
        }
        if let Some(b) = BUILTINS.iter().find(|b| **b == name) {
            return Ok(Value::Builtin(b));
        }
        err("NameError", format!("name '{name}' is not defined"))
    }

    fn bind(&mut self, name: &str, v: Value) {
        match self.frames.last_mut() {
            Some(frame) => {
                frame.insert(name.to_string(), v);
            }
            None => {
                self.globals.insert(name.to_string(), v);
            }
        }
    }

    fn assign(&mut self, target: &Expr, v: Value) -> R<()> {
        match target {
            Expr::Name(n) => {
                self.bind(n, v);
                Ok(())
            }
            Expr::Tuple(items) | Expr::List(items) => {
                let vals = self.iterate(&v)?;
                if vals.len() != items.len() {
                    return err(
                        "ValueError",
                        format!("expected {} values to unpack, got {}", items.len(), vals.len()),
                    );
                }
                for (t, x) in items.iter().zip(vals) {
                    self.assign(t, x)?;
                }
                Ok(())
            }
            Expr::Subscript { value, index } => {
                let container = self.eval(value)?;
                let idx = self.eval(index)?;
                match &container {
                    Value::List(l) => {
                        let len = l.borrow().len();
                        let i = norm_index(&idx, len)?;
                        l.borrow_mut()[i] = v;
                        Ok(())
                    }
                    other => err(
                        "TypeError",
                        format!("'{}' object does not support item assignment", other.type_name()),
                    ),
                }
            }
            _ => err("SyntaxError", "cannot assign to expression"),
        }
    }

    // ---- statements ----

    fn exec_block(&mut self, body: &[Stmt]) -> R<Flow> {
        for s in body {
            match self.exec(s)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn exec(&mut self, stmt: &Stmt) -> R<Flow> {
        self.check_time()?;
        match stmt {
            Stmt::FunctionDef(def) => {
                self.bind(&def.name, Value::Function(def.clone()));
            }
            Stmt::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e)?,
                    None => Value::None,
                };
                return Ok(Flow::Return(v));
            }
            Stmt::Assign { target, value } => {
                let v = self.eval(value)?;
                self.assign(target, v)?;
            }
            Stmt::AnnAssign { target, value, .. } => {
                if let Some(value) = value {
                    let v = self.eval(value)?;
                    self.assign(target, v)?;
                }
            }
            Stmt::AugAssign { target, op, value } => {
                let cur = self.eval(target)?;
                let rhs = self.eval(value)?;
                let v = match (&cur, op) {
                    (Value::List(l), BinOp::Add) => {
                        let extra = self.iterate(&rhs)?;
                        self.check_len(l.borrow().len() + extra.len())?;
                        l.borrow_mut().extend(extra);
                        cur.clone()
                    }
                    _ => self.binop(*op, &cur, &rhs)?,
                };
                self.assign(target, v)?;
            }
            Stmt::If { test, body, orelse } => {
                let t = self.eval(test)?;
                return if t.truthy() {
                    self.exec_block(body)
                } else {
                    self.exec_block(orelse)
                };
            }
            Stmt::For { target, iter, body } => {
                let it = self.eval(iter)?;
                for item in self.items(&it)? {
                    self.check_time()?;
                    self.assign(target, item)?;
                    match self.exec_block(body)? {
                        Flow::Normal | Flow::Continue => {}
                        Flow::Break => break,
                        ret @ Flow::Return(_) => return Ok(ret),
                    }
                }
            }
            Stmt::Expr(e) => {
                self.eval(e)?;
            }
            Stmt::Pass => {}
            Stmt::Break => return Ok(Flow::Break),
            Stmt::Continue => return Ok(Flow::Continue),
        }
        Ok(Flow::Normal)
    }

    // ---- expressions ----

    fn eval(&mut self, e: &Expr) -> R<Value> {
        match e {
            Expr::Name(n) => self.lookup(n),
            Expr::Constant(c) => Ok(match c {
                Constant::None => Value::None,
                Constant::Bool(b) => Value::Bool(*b),
                Constant::Int(i) => Value::Int(*i),
                Constant::Float(f) => Value::Float(*f),
                Constant::Str(s) => Value::str(s),
            }),
            Expr::FString(parts) => {
                let mut out = String::new();
                for p in parts {
                    match p {
                        FStringPart::Literal(s) => out.push_str(s),
                        FStringPart::Expr {
                            expr,
                            conversion,
                            spec,
                        } => {
                            let v = self.eval(expr)?;
                            let s = match conversion {
                                Some('r') | Some('a') => v.repr(),
                                _ => match spec {
                                    Some(spec) if !spec.is_empty() => format_spec(&v, spec)?,
                                    _ => v.to_string(),
                                },
                            };
                            out.push_str(&s);
                        }
                    }
                }
                self.check_len(out.len())?;
                Ok(Value::str(out))
            }
            Expr::List(items) => {
                let vals = items.iter().map(|i| self.eval(i)).collect::<R<Vec<_>>>()?;
                Ok(Value::list(vals))
            }
            Expr::Tuple(items) => {
                let vals = items.iter().map(|i| self.eval(i)).collect::<R<Vec<_>>>()?;
                Ok(Value::Tuple(Rc::new(vals)))
            }
            Expr::BinOp { op, left, right } => {
                let l = self.eval(left)?;
                let r = self.eval(right)?;
                self.binop(*op, &l, &r)
            }
            Expr::UnaryOp { op, operand } => {
                let v = self.eval(operand)?;
                match op {
                    UnaryOp::Not => Ok(Value::Bool(!v.truthy())),
                    UnaryOp::Neg => match v.as_number() {
                        Some(Number::Int(i)) => i
                            .checked_neg()
                            .map(Value::Int)
                            .ok_or_else(|| overflow()),
                        Some(Number::Float(f)) => Ok(Value::Float(-f)),
                        None => err("TypeError", format!("bad operand type for unary -: '{}'", v.type_name())),
                    },
                    UnaryOp::Pos => match v.as_number() {
                        Some(Number::Int(i)) => Ok(Value::Int(i)),
                        Some(Number::Float(f)) => Ok(Value::Float(f)),
                        None => err("TypeError", format!("bad operand type for unary +: '{}'", v.type_name())),
                    },
                }
            }
            Expr::BoolOp { op, values } => {
                let mut last = Value::None;
                for (i, v) in values.iter().enumerate() {
                    last = self.eval(v)?;
                    let stop = match op {
                        BoolOp::And => !last.truthy(),
                        BoolOp::Or => last.truthy(),
                    };
                    if stop || i + 1 == values.len() {
                        break;
                    }
                }
                Ok(last)
            }
            Expr::Compare {
                left,
                ops,
                comparators,
            } => {
                let mut a = self.eval(left)?;
                for (op, c) in ops.iter().zip(comparators) {
                    let b = self.eval(c)?;
                    if !self.compare(*op, &a, &b)? {
                        return Ok(Value::Bool(false));
                    }
                    a = b;
                }
                Ok(Value::Bool(true))
            }
            Expr::Call {
                func,
                args,
                keywords,
            } => {
                if let Expr::Attribute { value, attr } = func.as_ref() {
                    let recv = self.eval(value)?;
                    let args = args.iter().map(|a| self.eval(a)).collect::<R<Vec<_>>>()?;
                    if !keywords.is_empty() && attr != "sort" && attr != "split" {
                        return err("TypeError", format!("{attr}() takes no keyword arguments"));
                    }
                    let kwargs = self.eval_keywords(keywords)?;
                    return self.method(&recv, attr, args, kwargs);
                }
                let f = self.eval(func)?;
                let args = args.iter().map(|a| self.eval(a)).collect::<R<Vec<_>>>()?;
                let kwargs = self.eval_keywords(keywords)?;
                self.call_value(&f, args, kwargs)
            }
            Expr::Attribute { attr, .. } => err("AttributeError", format!("attribute access '.{attr}' is not supported")),
            Expr::Subscript { value, index } => {
                let v = self.eval(value)?;
                if let Expr::Slice { lower, upper, step } = index.as_ref() {
                    let mut bound = |b: &Option<Box<Expr>>| -> R<Option<i64>> {
                        match b {
                            None => Ok(None),
                            Some(e) => match self.eval(e)? {
                                Value::None => Ok(None),
                                x => Ok(Some(as_int(&x)?)),
                            },
                        }
                    };
                    let (lo, hi, st) = (bound(lower)?, bound(upper)?, bound(step)?);
                    return slice(&v, lo, hi, st);
                }
                let idx = self.eval(index)?;
                subscript(&v, &idx)
            }
            Expr::Slice { .. } => err("SyntaxError", "slice outside subscript"),
            Expr::IfExp { test, body, orelse } => {
                if self.eval(test)?.truthy() {
                    self.eval(body)
                } else {
                    self.eval(orelse)
                }
            }
            Expr::ListComp { elt, generators } | Expr::GeneratorExp { elt, generators } => {
                let mut out = Vec::new();
                self.comprehension(elt, generators, &mut out)?;
                Ok(Value::list(out))
            }
        }
    }

    fn eval_keywords(&mut self, keywords: &[(String, Expr)]) -> R<Vec<(String, Value)>> {
        keywords
            .iter()
            .map(|(k, e)| Ok((k.clone(), self.eval(e)?)))
            .collect()
    }

    fn comprehension(&mut self, elt: &Expr, gens: &[Comprehension], out: &mut Vec<Value>) -> R<()> {
        let Some((g, rest)) = gens.split_first() else {
            let v = self.eval(elt)?;
            out.push(v);
            return self.check_len(out.len());
        };
        let it = self.eval(&g.iter)?;
        for item in self.items(&it)? {
            self.check_time()?;
            self.assign(&g.target, item)?;
            let mut keep = true;
            for c in &g.conditions {
                if !self.eval(c)?.truthy() {
                    keep = false;
                    break;
                }
            }
            if keep {
                self.comprehension(elt, rest, out)?;
            }
        }
        Ok(())
    }

    /// Iteration without materializing ranges.
    fn items(&self, v: &Value) -> R<Items> {
        Ok(match v {
            Value::Range { start, stop, step } => Items::Range {
                next: *start,
                remaining: range_len(*start, *stop, *step),
                step: *step,
            },
            other => Items::Owned(self.iterate(other)?.into_iter()),
        })
    }

    fn iterate(&self, v: &Value) -> R<Vec<Value>> {
        Ok(match v {
            Value::List(l) => l.borrow().clone(),
            Value::Tuple(t) => t.as_ref().clone(),
            Value::Str(s) => s.chars().map(|c| Value::str(c.to_string())).collect(),
            Value::Range { start, stop, step } => {
                let n = range_len(*start, *stop, *step);
                self.check_len(n as usize)?;
                (0..n).map(|i| Value::Int(start + i * step)).collect()
            }
            other => return err("TypeError", format!("'{}' object is not iterable", other.type_name())),
        })
    }

    fn compare(&mut self, op: CmpOp, a: &Value, b: &Value) -> R<bool> {
        Ok(match op {
            CmpOp::Eq => a.py_eq(b),
            CmpOp::NotEq => !a.py_eq(b),
            CmpOp::Is => a.is_same(b),
            CmpOp::IsNot => !a.is_same(b),
            CmpOp::In => contains(b, a)?,
            CmpOp::NotIn => !contains(b, a)?,
            CmpOp::Lt | CmpOp::LtE | CmpOp::Gt | CmpOp::GtE => {
                let Some(ord) = a.py_cmp(b) else {
                    return err(
                        "TypeError",
                        format!(
                            "'{}' not supported between instances of '{}' and '{}'",
                            op.symbol(),
                            a.type_name(),
                            b.type_name()
                        ),
                    );
                };
                use std::cmp::Ordering::*;
                match op {
                    CmpOp::Lt => ord == Less,
                    CmpOp::LtE => ord != Greater,
                    CmpOp::Gt => ord == Greater,
                    _ => ord != Less,
                }
            }
        })
    }

    fn binop(&self, op: BinOp, a: &Value, b: &Value) -> R<Value> {
        if let (Some(x), Some(y)) = (a.as_number(), b.as_number()) {
            return arith(op, x, y);
        }
        match (op, a, b) {
            (BinOp::Add, Value::Str(x), Value::Str(y)) => {
                self.check_len(x.len() + y.len())?;
                Ok(Value::str(format!("{x}{y}")))
            }
            (BinOp::Add, Value::List(x), Value::List(y)) => {
                let mut v = x.borrow().clone();
                v.extend(y.borrow().iter().cloned());
                self.check_len(v.len())?;
                Ok(Value::list(v))
            }
            (BinOp::Add, Value::Tuple(x), Value::Tuple(y)) => {
                let mut v = x.as_ref().clone();
                v.extend(y.iter().cloned());
                Ok(Value::Tuple(Rc::new(v)))
            }
            (BinOp::Mul, Value::Str(_) | Value::List(_), Value::Int(_) | Value::Bool(_))
            | (BinOp::Mul, Value::Int(_) | Value::Bool(_), Value::Str(_) | Value::List(_)) => {
                let (seq, n) = if a.as_number().is_some() { (b, a) } else { (a, b) };
                let n = as_int(n)?.max(0) as usize;
                match seq {
                    Value::Str(s) => {
                        self.check_len(s.len().saturating_mul(n))?;
                        Ok(Value::str(s.repeat(n)))
                    }
                    Value::List(l) => {
                        let l = l.borrow();
                        self.check_len(l.len().saturating_mul(n))?;
                        let mut v = Vec::with_capacity(l.len() * n);
                        for _ in 0..n {
                            v.extend(l.iter().cloned());
                        }
                        Ok(Value::list(v))
                    }
                    _ => unreachable!("matched above"),
                }
            }
            (BinOp::Mod, Value::Str(_), _) => err("TypeError", "printf-style formatting is not supported"),
            _ => err(
                "TypeError",
                format!(
                    "unsupported operand type(s) for {}: '{}' and '{}'",
                    op.symbol(),
                    a.type_name(),
                    b.type_name()
                ),
            ),
        }
    }

    // ---- calls ----

    fn call_value(&mut self, f: &Value, args: Vec<Value>, kwargs: Vec<(String, Value)>) -> R<Value> {
        match f {
            Value::Function(def) => self.call_user(def, args, kwargs),
            Value::Builtin(name) => self.call_builtin(name, args, kwargs),
            Value::Type(t) => {
                if !kwargs.is_empty() {
                    return err("TypeError", format!("{}() takes no keyword arguments", t.as_str()));
                }
                convert(*t, args, self.limits.max_len)
            }
            other => err("TypeError", format!("'{}' object is not callable", other.type_name())),
        }
    }

    fn call_user(&mut self, def: &Rc<FunctionDef>, args: Vec<Value>, kwargs: Vec<(String, Value)>) -> R<Value> {
        if self.frames.len() >= self.limits.max_depth {
            return err("RecursionError", "maximum recursion depth exceeded");
        }
        if args.len() > def.params.len() {
            return err(
                "TypeError",
                format!("{}() takes {} positional arguments but {} were given", def.name, def.params.len(), args.len()),
            );
        }
        let mut slots: Vec<Option<Value>> = vec![None; def.params.len()];
        for (i, a) in args.into_iter().enumerate() {
            slots[i] = Some(a);
        }
        for (k, v) in kwargs {
            let Some(i) = def.params.iter().position(|p| p.name == k) else {
                return err("TypeError", format!("{}() got an unexpected keyword argument '{k}'", def.name));
            };
            if slots[i].is_some() {
                return err("TypeError", format!("{}() got multiple values for argument '{k}'", def.name));
            }
            slots[i] = Some(v);
        }
        let mut frame = HashMap::new();
        for (p, slot) in def.params.iter().zip(slots) {
            let v = match slot {
                Some(v) => v,
                None => match &p.default {
                    Some(d) => self.eval(d)?,
                    None => {
                        return err(
                            "TypeError",
                            format!("{}() missing required argument: '{}'", def.name, p.name),
                        )
                    }
                },
            };
            frame.insert(p.name.clone(), v);
        }
        self.frames.push(frame);
        let r = self.exec_block(&def.body);
        self.frames.pop();
        match r? {
            Flow::Return(v) => Ok(v),
            _ => Ok(Value::None),
        }
    }

    fn call_builtin(&mut self, name: &str, args: Vec<Value>, kwargs: Vec<(String, Value)>) -> R<Value> {
        let kw = |k: &str| kwargs.iter().find(|(n, _)| n == k).map(|(_, v)| v.clone());
        let allowed_kw: &[&str] = match name {
            "sorted" | "max" | "min" => &["reverse", "key", "default"],
            "print" => &["sep", "end"],
            "sum" => &["start"],
            "enumerate" => &["start"],
            _ => &[],
        };
        if let Some((k, _)) = kwargs.iter().find(|(k, _)| !allowed_kw.contains(&k.as_str())) {
            return err("TypeError", format!("{name}() got an unexpected keyword argument '{k}'"));
        }
        if kw("key").is_some() {
            return err("TypeError", format!("{name}() key functions are not supported"));
        }
        let arity = |lo: usize, hi: usize| -> R<()> {
            if args.len() < lo || args.len() > hi {
                return err("TypeError", format!("{name}() got {} arguments", args.len()));
            }
            Ok(())
        };
        match name {
            "len" => {
                arity(1, 1)?;
                Ok(Value::Int(match &args[0] {
                    Value::Str(s) => s.chars().count() as i64,
                    Value::List(l) => l.borrow().len() as i64,
                    Value::Tuple(t) => t.len() as i64,
                    Value::Range { start, stop, step } => range_len(*start, *stop, *step),
                    other => return err("TypeError", format!("object of type '{}' has no len()", other.type_name())),
                }))
            }
            "range" => {
                arity(1, 3)?;
                let n: Vec<i64> = args.iter().map(as_int).collect::<R<_>>()?;
                let (start, stop, step) = match n.as_slice() {
                    [stop] => (0, *stop, 1),
                    [start, stop] => (*start, *stop, 1),
                    [start, stop, step] => (*start, *stop, *step),
                    _ => unreachable!("arity checked"),
                };
                if step == 0 {
                    return err("ValueError", "range() arg 3 must not be zero");
                }
                Ok(Value::Range { start, stop, step })
            }
            "abs" => {
                arity(1, 1)?;
                match args[0].as_number() {
                    Some(Number::Int(i)) => i.checked_abs().map(Value::Int).ok_or_else(overflow),
                    Some(Number::Float(f)) => Ok(Value::Float(f.abs())),
                    None => err("TypeError", format!("bad operand type for abs(): '{}'", args[0].type_name())),
                }
            }
            "min" | "max" => {
                let items = if args.len() == 1 { self.iterate(&args[0])? } else { args };
                if items.is_empty() {
                    return match kw("default") {
                        Some(d) => Ok(d),
                        None => err("ValueError", format!("{name}() arg is an empty sequence")),
                    };
                }
                let mut best = items[0].clone();
                for it in &items[1..] {
                    let Some(ord) = it.py_cmp(&best) else {
                        return err("TypeError", format!("cannot compare '{}' and '{}'", it.type_name(), best.type_name()));
                    };
                    let better = if name == "max" { ord.is_gt() } else { ord.is_lt() };
                    if better {
                        best = it.clone();
                    }
                }
                Ok(best)
            }
            "sum" => {
                arity(1, 2)?;
                let mut acc = args.get(1).cloned().or_else(|| kw("start")).unwrap_or(Value::Int(0));
                for it in self.iterate(&args[0])? {
                    acc = self.binop(BinOp::Add, &acc, &it)?;
                }
                Ok(acc)
            }
            "sorted" => {
                arity(1, 1)?;
                let mut items = self.iterate(&args[0])?;
                sort_values(&mut items)?;
                if kw("reverse").is_some_and(|r| r.truthy()) {
                    items.reverse();
                }
                Ok(Value::list(items))
            }
            "reversed" => {
                arity(1, 1)?;
                let mut items = self.iterate(&args[0])?;
                items.reverse();
                Ok(Value::list(items))
            }
            "any" | "all" => {
                arity(1, 1)?;
                let items = self.iterate(&args[0])?;
                Ok(Value::Bool(if name == "any" {
                    items.iter().any(Value::truthy)
                } else {
                    items.iter().all(Value::truthy)
                }))
            }
            "enumerate" => {
                arity(1, 2)?;
                let start = match args.get(1).cloned().or_else(|| kw("start")) {
                    Some(v) => as_int(&v)?,
                    None => 0,
                };
                let items = self.iterate(&args[0])?;
                Ok(Value::list(
                    items
                        .into_iter()
                        .enumerate()
                        .map(|(i, v)| Value::Tuple(Rc::new(vec![Value::Int(start + i as i64), v])))
                        .collect(),
                ))
            }
            "zip" => {
                let seqs = args.iter().map(|a| self.iterate(a)).collect::<R<Vec<_>>>()?;
                let n = seqs.iter().map(Vec::len).min().unwrap_or(0);
                Ok(Value::list(
                    (0..n)
                        .map(|i| Value::Tuple(Rc::new(seqs.iter().map(|s| s[i].clone()).collect())))
                        .collect(),
                ))
            }
            "round" => {
                arity(1, 2)?;
                let x = args[0]
                    .as_number()
                    .ok_or_else(|| RunError::Runtime(format!("TypeError: type {} doesn't define __round__", args[0].type_name())))?;
                match args.get(1) {
                    None | Some(Value::None) => match x {
                        Number::Int(i) => Ok(Value::Int(i)),
                        Number::Float(f) => float_to_int(round_half_even(f)),
                    },
                    Some(d) => {
                        let d = as_int(d)?;
                        match x {
                            Number::Int(i) => Ok(Value::Int(i)),
                            Number::Float(f) => {
                                let m = 10f64.powi(d as i32);
                                Ok(Value::Float(round_half_even(f * m) / m))
                            }
                        }
                    }
                }
            }
            "isinstance" => {
                arity(2, 2)?;
                let types: Vec<Value> = match &args[1] {
                    Value::Tuple(t) => t.as_ref().clone(),
                    other => vec![other.clone()],
                };
                let mut hit = false;
                for t in types {
                    let Value::Type(t) = t else {
                        return err("TypeError", "isinstance() arg 2 must be a type or tuple of types");
                    };
                    hit |= match (t, &args[0]) {
                        (TypeName::Int, Value::Int(_) | Value::Bool(_)) => true,
                        (t, v) => t.as_str() == v.type_name(),
                    };
                }
                Ok(Value::Bool(hit))
            }
            "print" => {
                let sep = kw("sep").map(|v| v.to_string()).unwrap_or_else(|| " ".into());
                let end = kw("end").map(|v| v.to_string()).unwrap_or_else(|| "\n".into());
                let line = args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(&sep);
                self.output.push_str(&line);
                self.output.push_str(&end);
                self.check_len(self.output.len())?;
                Ok(Value::None)
            }
            "__ask__" => {
                arity(2, 2)?;
                let query = args[0].to_string();
                let kind = match &args[1] {
                    Value::Type(TypeName::Bool) => ValueKind::Boolean,
                    Value::Type(TypeName::Int) => ValueKind::Integer,
                    Value::Type(TypeName::Float) => ValueKind::Real,
                    Value::Type(TypeName::Str) => ValueKind::Text,
                    Value::Type(TypeName::List) | Value::Type(TypeName::Tuple) => ValueKind::TextList,
                    Value::Str(s) => ValueKind::from_label(s).ok_or_else(|| {
                        RunError::Runtime(format!("ValueError: unknown answer type '{s}'"))
                    })?,
                    other => return err("TypeError", format!("unsupported answer type {}", other.repr())),
                };
                let answer = self.host.ask(&query, kind).map_err(|e| RunError::Host(e.0))?;
                if answer.kind() != kind {
                    return Err(RunError::Host(format!("retrieval returned {} for {}", answer.kind(), kind)));
                }
                Ok(from_typed(answer))
            }
            "__soft__" => {
                arity(3, 3)?;
                let tag = args[0].to_string();
                let Some(kind) = ComparisonKind::from_tag(&tag) else {
                    return err("ValueError", format!("unknown comparison '{tag}'"));
                };
                let host = &mut *self.host;
                let mut ask = |q: &str| -> Result<bool, RunError> {
                    match host.ask(q, ValueKind::Boolean) {
                        Ok(TypedValue::Boolean(b)) => Ok(b),
                        Ok(other) => Err(RunError::Host(format!("retrieval returned {} for bool", other.kind()))),
                        Err(e) => Err(RunError::Host(e.0)),
                    }
                };
                soft_compare(kind, &args[1], &args[2], &mut ask).map(Value::Bool)
            }
            _ => err("NameError", format!("name '{name}' is not defined")),
        }
    }

    fn method(&mut self, recv: &Value, name: &str, args: Vec<Value>, kwargs: Vec<(String, Value)>) -> R<Value> {
        match recv {
            Value::Str(s) => str_method(s, name, args, kwargs, self.limits.max_len),
            Value::List(l) => self.list_method(l, name, args, kwargs),
            other => err("AttributeError", format!("'{}' object has no attribute '{name}'", other.type_name())),
        }
    }

    fn list_method(
        &mut self,
        l: &Rc<RefCell<Vec<Value>>>,
        name: &str,
        args: Vec<Value>,
        kwargs: Vec<(String, Value)>,
    ) -> R<Value> {
        let argc = |n: usize| -> R<()> {
            if args.len() != n {
                return err("TypeError", format!("{name}() takes {n} arguments ({} given)", args.len()));
            }
            Ok(())
        };
        match name {
            "append" => {
                argc(1)?;
                self.check_len(l.borrow().len() + 1)?;
                l.borrow_mut().push(args[0].clone());
                Ok(Value::None)
            }
            "extend" => {
                argc(1)?;
                let extra = self.iterate(&args[0])?;
                self.check_len(l.borrow().len() + extra.len())?;
                l.borrow_mut().extend(extra);
                Ok(Value::None)
            }
            "insert" => {
                argc(2)?;
                let len = l.borrow().len() as i64;
                let mut i = as_int(&args[0])?;
                if i < 0 {
                    i += len;
                }
                let i = i.clamp(0, len) as usize;
                self.check_len(l.borrow().len() + 1)?;
                l.borrow_mut().insert(i, args[1].clone());
                Ok(Value::None)
            }
            "pop" => {
                let len = l.borrow().len();
                if len == 0 {
                    return err("IndexError", "pop from empty list");
                }
                let i = match args.first() {
                    Some(i) => norm_index(i, len)?,
                    None => len - 1,
                };
                Ok(l.borrow_mut().remove(i))
            }
            "remove" => {
                argc(1)?;
                let pos = l.borrow().iter().position(|x| x.py_eq(&args[0]));
                match pos {
                    Some(i) => {
                        l.borrow_mut().remove(i);
                        Ok(Value::None)
                    }
                    None => err("ValueError", "list.remove(x): x not in list"),
                }
            }
            "index" => {
                argc(1)?;
                match l.borrow().iter().position(|x| x.py_eq(&args[0])) {
                    Some(i) => Ok(Value::Int(i as i64)),
                    None => err("ValueError", format!("{} is not in list", args[0].repr())),
                }
            }
            "count" => {
                argc(1)?;
                Ok(Value::Int(l.borrow().iter().filter(|x| x.py_eq(&args[0])).count() as i64))
            }
            "reverse" => {
                argc(0)?;
                l.borrow_mut().reverse();
                Ok(Value::None)
            }
            "sort" => {
                argc(0)?;
                if kwargs.iter().any(|(k, _)| k != "reverse") {
                    return err("TypeError", "sort() only accepts 'reverse'");
                }
                let mut items = l.borrow().clone();
                sort_values(&mut items)?;
                if kwargs.iter().any(|(_, v)| v.truthy()) {
                    items.reverse();
                }
                *l.borrow_mut() = items;
                Ok(Value::None)
            }
            "copy" => {
                argc(0)?;
                Ok(Value::list(l.borrow().clone()))
            }
            _ => err("AttributeError", format!("'list' object has no attribute '{name}'")),
        }
    }
}

fn overflow() -> RunError {
    RunError::Runtime("OverflowError: integer result out of range".into())
}

fn from_typed(v: TypedValue) -> Value {
    match v {
        TypedValue::Boolean(b) => Value::Bool(b),
        TypedValue::Integer(i) => Value::Int(i),
        TypedValue::Real(f) => Value::Float(f),
        TypedValue::Text(s) => Value::str(s),
        TypedValue::TextList(items) => Value::list(items.into_iter().map(Value::str).collect()),
    }
}

fn as_int(v: &Value) -> R<i64> {
    match v {
        Value::Int(i) => Ok(*i),
        Value::Bool(b) => Ok(*b as i64),
        other => err("TypeError", format!("'{}' object cannot be interpreted as an integer", other.type_name())),
    }
}

fn norm_index(idx: &Value, len: usize) -> R<usize> {
    let i = as_int(idx)?;
    let j = if i < 0 { i + len as i64 } else { i };
    if j < 0 || j >= len as i64 {
        return err("IndexError", "index out of range");
    }
    Ok(j as usize)
}

fn subscript(v: &Value, idx: &Value) -> R<Value> {
    match v {
        Value::List(l) => {
            let l = l.borrow();
            Ok(l[norm_index(idx, l.len())?].clone())
        }
        Value::Tuple(t) => Ok(t[norm_index(idx, t.len())?].clone()),
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            Ok(Value::str(chars[norm_index(idx, chars.len())?].to_string()))
        }
        Value::Range { start, stop, step } => {
            let n = range_len(*start, *stop, *step) as usize;
            Ok(Value::Int(start + norm_index(idx, n)? as i64 * step))
        }
        other => err("TypeError", format!("'{}' object is not subscriptable", other.type_name())),
    }
}

fn slice_indices(len: usize, lo: Option<i64>, hi: Option<i64>, step: Option<i64>) -> R<Vec<usize>> {
    let len = len as i64;
    let step = step.unwrap_or(1);
    if step == 0 {
        return err("ValueError", "slice step cannot be zero");
    }
    let clamp = |x: i64, lo_b: i64, hi_b: i64| -> i64 {
        let x = if x < 0 { x + len } else { x };
        x.clamp(lo_b, hi_b)
    };
    let mut out = Vec::new();
    if step > 0 {
        let start = lo.map_or(0, |x| clamp(x, 0, len));
        let stop = hi.map_or(len, |x| clamp(x, 0, len));
        let mut i = start;
        while i < stop {
            out.push(i as usize);
            i += step;
        }
    } else {
        let start = lo.map_or(len - 1, |x| clamp(x, -1, len - 1));
        let stop = hi.map_or(-1, |x| clamp(x, -1, len - 1));
        let mut i = start;
        while i > stop {
            out.push(i as usize);
            i += step;
        }
    }
    Ok(out)
}

fn slice(v: &Value, lo: Option<i64>, hi: Option<i64>, step: Option<i64>) -> R<Value> {
    match v {
        Value::List(l) => {
            let l = l.borrow();
            let idx = slice_indices(l.len(), lo, hi, step)?;
            Ok(Value::list(idx.into_iter().map(|i| l[i].clone()).collect()))
        }
        Value::Tuple(t) => {
            let idx = slice_indices(t.len(), lo, hi, step)?;
            Ok(Value::Tuple(Rc::new(idx.into_iter().map(|i| t[i].clone()).collect())))
        }
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            let idx = slice_indices(chars.len(), lo, hi, step)?;
            Ok(Value::str(idx.into_iter().map(|i| chars[i]).collect::<String>()))
        }
        other => err("TypeError", format!("'{}' object is not subscriptable", other.type_name())),
    }
}

fn contains(container: &Value, item: &Value) -> R<bool> {
    Ok(match container {
        Value::List(l) => l.borrow().iter().any(|x| x.py_eq(item)),
        Value::Tuple(t) => t.iter().any(|x| x.py_eq(item)),
        Value::Str(s) => match item {
            Value::Str(sub) => s.contains(sub.as_ref()),
            other => {
                return err(
                    "TypeError",
                    format!("'in <string>' requires string as left operand, not {}", other.type_name()),
                )
            }
        },
        Value::Range { start, stop, step } => match item.as_number() {
            Some(Number::Int(i)) => {
                let n = range_len(*start, *stop, *step);
                n > 0 && (i - start) % step == 0 && {
                    let k = (i - start) / step;
                    (0..n).contains(&k)
                }
            }
            _ => false,
        },
        other => return err("TypeError", format!("argument of type '{}' is not iterable", other.type_name())),
    })
}

fn sort_values(items: &mut [Value]) -> R<()> {
    let mut failed = None;
    items.sort_by(|a, b| {
        a.py_cmp(b).unwrap_or_else(|| {
            failed = Some((a.type_name(), b.type_name()));
            std::cmp::Ordering::Equal
        })
    });
    match failed {
        Some((a, b)) => err("TypeError", format!("'<' not supported between instances of '{a}' and '{b}'")),
        None => Ok(()),
    }
}

fn arith(op: BinOp, x: Number, y: Number) -> R<Value> {
    use Number::*;
    let zero = || err("ZeroDivisionError", "division by zero");
    match (x, y) {
        (Int(a), Int(b)) => match op {
            BinOp::Add => a.checked_add(b).map(Value::Int).ok_or_else(overflow),
            BinOp::Sub => a.checked_sub(b).map(Value::Int).ok_or_else(overflow),
            BinOp::Mul => a.checked_mul(b).map(Value::Int).ok_or_else(overflow),
            BinOp::Div => {
                if b == 0 {
                    return zero();
                }
                Ok(Value::Float(a as f64 / b as f64))
            }
            BinOp::FloorDiv => {
                if b == 0 {
                    return zero();
                }
                let q = a.checked_div(b).ok_or_else(overflow)?;
                Ok(Value::Int(if a % b != 0 && ((a < 0) != (b < 0)) { q - 1 } else { q }))
            }
            BinOp::Mod => {
                if b == 0 {
                    return zero();
                }
                let r = a.checked_rem(b).ok_or_else(overflow)?;
                Ok(Value::Int(if r != 0 && ((r < 0) != (b < 0)) { r + b } else { r }))
            }
            BinOp::Pow => {
                if b < 0 {
                    return Ok(Value::Float((a as f64).powf(b as f64)));
                }
                let e = u32::try_from(b).map_err(|_| overflow())?;
                a.checked_pow(e).map(Value::Int).ok_or_else(overflow)
            }
        },
        (a, b) => {
            let (a, b) = (a.to_f64(), b.to_f64());
            let v = match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return zero();
                    }
                    a / b
                }
                BinOp::FloorDiv => {
                    if b == 0.0 {
                        return zero();
                    }
                    (a / b).floor()
                }
                BinOp::Mod => {
                    if b == 0.0 {
                        return zero();
                    }
                    let r = a % b;
                    if r != 0.0 && ((r < 0.0) != (b < 0.0)) {
                        r + b
                    } else {
                        r
                    }
                }
                BinOp::Pow => a.powf(b),
            };
            Ok(Value::Float(v))
        }
    }
}

fn round_half_even(f: f64) -> f64 {
    let r = f.round();
    if (f - f.trunc()).abs() == 0.5 && r % 2.0 != 0.0 {
        r - f.signum()
    } else {
        r
    }
}

fn float_to_int(f: f64) -> R<Value> {
    if !f.is_finite() {
        return err("OverflowError", "cannot convert float to integer");
    }
    if f.abs() >= 9.2e18 {
        return Err(overflow());
    }
    Ok(Value::Int(f.trunc() as i64))
}

fn convert(t: TypeName, args: Vec<Value>, max_len: usize) -> R<Value> {
    if args.len() > 1 {
        return err("TypeError", format!("{}() takes at most 1 argument", t.as_str()));
    }
    let Some(v) = args.into_iter().next() else {
        return Ok(match t {
            TypeName::Bool => Value::Bool(false),
            TypeName::Int => Value::Int(0),
            TypeName::Float => Value::Float(0.0),
            TypeName::Str => Value::str(""),
            TypeName::List => Value::list(Vec::new()),
            TypeName::Tuple => Value::Tuple(Rc::new(Vec::new())),
        });
    };
    match t {
        TypeName::Bool => Ok(Value::Bool(v.truthy())),
        TypeName::Str => Ok(Value::str(v.to_string())),
        TypeName::Int => match &v {
            Value::Int(i) => Ok(Value::Int(*i)),
            Value::Bool(b) => Ok(Value::Int(*b as i64)),
            Value::Float(f) => float_to_int(*f),
            Value::Str(s) => {
                let t = s.trim().replace('_', "");
                t.parse::<i64>()
                    .map(Value::Int)
                    .or_else(|_| err("ValueError", format!("invalid literal for int() with base 10: {}", v.repr())))
            }
            other => err("TypeError", format!("int() argument must be a string or a number, not '{}'", other.type_name())),
        },
        TypeName::Float => match &v {
            Value::Str(s) => {
                let t = s.trim().to_ascii_lowercase();
                let parsed = match t.as_str() {
                    "inf" | "+inf" | "infinity" => Some(f64::INFINITY),
                    "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
                    "nan" => Some(f64::NAN),
                    _ if t.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | '+' | '-')) => t.parse().ok(),
                    _ => None,
                };
                parsed
                    .map(Value::Float)
                    .ok_or_else(|| RunError::Runtime(format!("ValueError: could not convert string to float: {}", v.repr())))
            }
            other => match other.as_number() {
                Some(n) => Ok(Value::Float(n.to_f64())),
                None => err("TypeError", format!("float() argument must be a string or a number, not '{}'", other.type_name())),
            },
        },
        TypeName::List | TypeName::Tuple => {
            let items = match &v {
                Value::List(l) => l.borrow().clone(),
                Value::Tuple(t) => t.as_ref().clone(),
                Value::Str(s) => s.chars().map(|c| Value::str(c.to_string())).collect(),
                Value::Range { start, stop, step } => {
                    let n = range_len(*start, *stop, *step);
                    if n as usize > max_len {
                        return err("MemoryError", "sequence too long");
                    }
                    (0..n).map(|i| Value::Int(start + i * step)).collect()
                }
                other => return err("TypeError", format!("'{}' object is not iterable", other.type_name())),
            };
            Ok(if t == TypeName::List {
                Value::list(items)
            } else {
                Value::Tuple(Rc::new(items))
            })
        }
    }
}

/// Subset of the format-spec mini-language: `[,][.N](f|d|%)?`.
fn format_spec(v: &Value, spec: &str) -> R<String> {
    let bad = || RunError::Runtime(format!("ValueError: unsupported format specifier '{spec}'"));
    let mut rest = spec;
    let comma = rest.starts_with(',');
    if comma {
        rest = &rest[1..];
    }
    let mut precision = None;
    if let Some(p) = rest.strip_prefix('.') {
        let digits: String = p.chars().take_while(|c| c.is_ascii_digit()).collect();
        precision = Some(digits.parse::<usize>().map_err(|_| bad())?);
        rest = &p[digits.len()..];
    }
    let n = v.as_number().ok_or_else(bad)?;
    let body = match (rest, n) {
        ("d", Number::Int(i)) | ("", Number::Int(i)) if precision.is_none() => i.to_string(),
        ("f", n) | ("", n @ Number::Float(_)) => match precision {
            Some(p) => format!("{:.*}", p, n.to_f64()),
            None if rest == "f" => format!("{:.6}", n.to_f64()),
            None => float_repr(n.to_f64()),
        },
        ("%", n) => format!("{:.*}%", precision.unwrap_or(6), n.to_f64() * 100.0),
        _ => return Err(bad()),
    };
    if !comma {
        return Ok(body);
    }
    let (sign, digits) = body.strip_prefix('-').map_or(("", body.as_str()), |d| ("-", d));
    let (int_part, frac) = digits.split_at(digits.find(['.', '%']).unwrap_or(digits.len()));
    let mut grouped = String::new();
    for (i, c) in int_part.chars().enumerate() {
        if i > 0 && (int_part.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(c);
    }
    Ok(format!("{sign}{grouped}{frac}"))
}

fn str_method(s: &Rc<str>, name: &str, args: Vec<Value>, kwargs: Vec<(String, Value)>, max_len: usize) -> R<Value> {
    let text = |i: usize| -> R<Rc<str>> {
        match args.get(i) {
            Some(Value::Str(x)) => Ok(x.clone()),
            Some(other) => err("TypeError", format!("must be str, not {}", other.type_name())),
            None => err("TypeError", format!("{name}() missing argument")),
        }
    };
    let opt_chars = |i: usize| -> R<Option<Rc<str>>> {
        match args.get(i) {
            None | Some(Value::None) => Ok(None),
            Some(_) => text(i).map(Some),
        }
    };
    let v = match name {
        "lower" => Value::str(s.to_lowercase()),
        "upper" => Value::str(s.to_uppercase()),
        "strip" | "lstrip" | "rstrip" => {
            let chars = opt_chars(0)?;
            let pred = |c: char| match &chars {
                Some(set) => set.contains(c),
                None => c.is_whitespace(),
            };
            Value::str(match name {
                "strip" => s.trim_matches(pred),
                "lstrip" => s.trim_start_matches(pred),
                _ => s.trim_end_matches(pred),
            })
        }
        "split" => {
            let sep = match (args.first(), kwargs.iter().find(|(k, _)| k == "sep")) {
                (Some(Value::None), _) | (None, None) => None,
                (Some(Value::Str(x)), _) | (None, Some((_, Value::Str(x)))) => Some(x.clone()),
                _ => return err("TypeError", "split() separator must be str or None"),
            };
            let parts: Vec<Value> = match sep {
                None => s.split_whitespace().map(Value::str).collect(),
                Some(sep) if sep.is_empty() => return err("ValueError", "empty separator"),
                Some(sep) => s.split(sep.as_ref()).map(Value::str).collect(),
            };
            Value::list(parts)
        }
        "startswith" => Value::Bool(s.starts_with(text(0)?.as_ref())),
        "endswith" => Value::Bool(s.ends_with(text(0)?.as_ref())),
        "replace" => {
            let (a, b) = (text(0)?, text(1)?);
            if a.is_empty() {
                return err("ValueError", "empty pattern in replace() is not supported");
            }
            let out = s.replace(a.as_ref(), b.as_ref());
            if out.len() > max_len {
                return err("MemoryError", "string too long");
            }
            Value::str(out)
        }
        "join" => {
            let items: Vec<Value> = match args.first() {
                Some(Value::List(l)) => l.borrow().clone(),
                Some(Value::Tuple(t)) => t.as_ref().clone(),
                _ => return err("TypeError", "join() expects a list of str"),
            };
            let mut parts = Vec::with_capacity(items.len());
            for it in items {
                match it {
                    Value::Str(x) => parts.push(x.to_string()),
                    other => {
                        return err("TypeError", format!("sequence item: expected str instance, {} found", other.type_name()))
                    }
                }
            }
            let out = parts.join(s);
            if out.len() > max_len {
                return err("MemoryError", "string too long");
            }
            Value::str(out)
        }
        "title" => {
            let mut out = String::with_capacity(s.len());
            let mut prev_alpha = false;
            for c in s.chars() {
                if c.is_alphabetic() {
                    if prev_alpha {
                        out.extend(c.to_lowercase());
                    } else {
                        out.extend(c.to_uppercase());
                    }
                    prev_alpha = true;
                } else {
                    out.push(c);
                    prev_alpha = false;
                }
            }
            Value::str(out)
        }
        "capitalize" => {
            let mut cs = s.chars();
            Value::str(match cs.next() {
                Some(c) => c.to_uppercase().chain(cs.as_str().to_lowercase().chars()).collect::<String>(),
                None => String::new(),
            })
        }
        "find" => {
            let sub = text(0)?;
            Value::Int(match s.find(sub.as_ref()) {
                Some(b) => s[..b].chars().count() as i64,
                None => -1,
            })
        }
        "count" => {
            let sub = text(0)?;
            if sub.is_empty() {
                Value::Int(s.chars().count() as i64 + 1)
            } else {
                Value::Int(s.matches(sub.as_ref()).count() as i64)
            }
        }
        "isdigit" | "isnumeric" => Value::Bool(!s.is_empty() && s.chars().all(|c| c.is_numeric())),
        "isalpha" => Value::Bool(!s.is_empty() && s.chars().all(char::is_alphabetic)),
        _ => return err("AttributeError", format!("'str' object has no attribute '{name}'")),
    };
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_module;
    use super::*;

    struct NoHost;
    impl Host for NoHost {
        fn ask(&mut self, q: &str, _: ValueKind) -> Result<TypedValue, HostError> {
            Err(HostError(format!("unexpected query {q}")))
        }
    }

    fn run(src: &str) -> Result<String, RunError> {
        let m = parse_module(src).unwrap();
        let mut host = NoHost;
        let mut it = Interpreter::new(&mut host, Limits::default());
        it.run_module(&m)?;
        Ok(it.output().to_string())
    }

    #[test]
    fn arithmetic_follows_python() {
        assert_eq!(
            run("print(7 // -2, -7 % 3, 7 / 2, 2 ** 10, 2 ** -1, int(3.9), round(2.5), round(3.5))\n").unwrap(),
            "-4 2 3.5 1024 0.5 3 2 4\n"
        );
    }

    #[test]
    fn strings_and_lists() {
        let src = "xs = 'a, b,c'.split(',')\nys = [x.strip().upper() for x in xs if x]\nys.append('D')\nprint(ys, '-'.join(ys), len(ys), ys[-1], ys[1:3])\n";
        assert_eq!(run(src).unwrap(), "['A', 'B', 'C', 'D'] A-B-C-D 4 D ['B', 'C']\n");
    }

    #[test]
    fn fstrings_and_formatting() {
        let src = "n = 1234567\nx = 0.5\nprint(f\"{n:,} {x:.2f} {'q'!r} {str(n)}\")\n";
        assert_eq!(run(src).unwrap(), "1,234,567 0.50 'q' 1234567\n");
    }

    #[test]
    fn functions_defaults_and_keywords() {
        let src = "def f(a, b=2):\n    return a * b\nprint(f(3), f(a=3, b=4), f(b=1, a=5))\n";
        assert_eq!(run(src).unwrap(), "6 12 5\n");
    }

    #[test]
    fn loop_control() {
        let src = "t = 0\nfor i in range(10):\n    if i == 2:\n        continue\n    if i > 5:\n        break\n    t += i\nprint(t)\n";
        assert_eq!(run(src).unwrap(), "13\n");
    }

    #[test]
    fn runtime_errors() {
        assert!(matches!(run("print(1 / 0)\n"), Err(RunError::Runtime(m)) if m.starts_with("ZeroDivisionError")));
        assert!(matches!(run("print(undefined)\n"), Err(RunError::Runtime(m)) if m.starts_with("NameError")));
        assert!(matches!(run("def f():\n    return f()\nf()\n"), Err(RunError::Runtime(m)) if m.starts_with("RecursionError")));
        assert!(matches!(run("x = list(range(10 ** 9))\n"), Err(RunError::Runtime(m)) if m.starts_with("MemoryError")));
    }

    #[test]
    fn deadline_is_enforced() {
        let m = parse_module("def f():\n    for i in range(1000000000):\n        pass\nf()\n").unwrap();
        let mut host = NoHost;
        let limits = Limits {
            deadline: Some(Instant::now() + std::time::Duration::from_millis(50)),
            ..Limits::default()
        };
        let mut it = Interpreter::new(&mut host, limits);
        assert_eq!(it.run_module(&m), Err(RunError::Timeout));
    }

    #[test]
    fn ask_and_soft_builtins_reach_the_host() {
        struct Scripted(Vec<String>);
        impl Host for Scripted {
            fn ask(&mut self, q: &str, kind: ValueKind) -> Result<TypedValue, HostError> {
                self.0.push(q.to_string());
                Ok(match kind {
                    ValueKind::TextList => TypedValue::TextList(vec!["Portugal".into()]),
                    _ => TypedValue::Boolean(true),
                })
            }
        }
        let m = parse_module("xs = __ask__('Which?', list)\nprint(xs, __soft__('eq', 'a', 'b'), __soft__('gt', 3, 2))\n").unwrap();
        let mut host = Scripted(Vec::new());
        let mut it = Interpreter::new(&mut host, Limits::default());
        it.run_module(&m).unwrap();
        assert_eq!(it.output(), "['Portugal'] True True\n");
        drop(it);
        assert_eq!(host.0.len(), 2);
    }
}
