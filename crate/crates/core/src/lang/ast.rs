//! Syntax tree for the solution language, a small imperative subset of Python.

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    pub returns: Option<Expr>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub annotation: Option<Expr>,
    pub default: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    FunctionDef(std::rc::Rc<FunctionDef>),
    Return(Option<Expr>),
    Assign {
        target: Expr,
        value: Expr,
    },
    AnnAssign {
        target: Expr,
        annotation: Expr,
        value: Option<Expr>,
    },
    AugAssign {
        target: Expr,
        op: BinOp,
        value: Expr,
    },
    /// `elif` chains are nested `If` nodes inside `orelse`.
    If {
        test: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    For {
        target: Expr,
        iter: Expr,
        body: Vec<Stmt>,
    },
    Expr(Expr),
    Pass,
    Break,
    Continue,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constant {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FStringPart {
    Literal(String),
    Expr {
        expr: Box<Expr>,
        conversion: Option<char>,
        spec: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comprehension {
    pub target: Expr,
    pub iter: Expr,
    pub conditions: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Name(String),
    Constant(Constant),
    FString(Vec<FStringPart>),
    List(Vec<Expr>),
    Tuple(Vec<Expr>),
    BinOp {
        op: BinOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    UnaryOp {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    BoolOp {
        op: BoolOp,
        values: Vec<Expr>,
    },
    Compare {
        left: Box<Expr>,
        ops: Vec<CmpOp>,
        comparators: Vec<Expr>,
    },
    Call {
        func: Box<Expr>,
        args: Vec<Expr>,
        keywords: Vec<(String, Expr)>,
    },
    Attribute {
        value: Box<Expr>,
        attr: String,
    },
    Subscript {
        value: Box<Expr>,
        index: Box<Expr>,
    },
    Slice {
        lower: Option<Box<Expr>>,
        upper: Option<Box<Expr>>,
        step: Option<Box<Expr>>,
    },
    IfExp {
        test: Box<Expr>,
        body: Box<Expr>,
        orelse: Box<Expr>,
    },
    ListComp {
        elt: Box<Expr>,
        generators: Vec<Comprehension>,
    },
    GeneratorExp {
        elt: Box<Expr>,
        generators: Vec<Comprehension>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
    Pow,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::FloorDiv => "//",
            BinOp::Mod => "%",
            BinOp::Pow => "**",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Not,
    Neg,
    Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolOp {
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtE,
    Gt,
    GtE,
    In,
    NotIn,
    Is,
    IsNot,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::NotEq => "!=",
            CmpOp::Lt => "<",
            CmpOp::LtE => "<=",
            CmpOp::Gt => ">",
            CmpOp::GtE => ">=",
            CmpOp::In => "in",
            CmpOp::NotIn => "not in",
            CmpOp::Is => "is",
            CmpOp::IsNot => "is not",
        }
    }
}

impl Expr {
    pub fn name(s: impl Into<String>) -> Expr {
        Expr::Name(s.into())
    }

    pub fn str(s: impl Into<String>) -> Expr {
        Expr::Constant(Constant::Str(s.into()))
    }

    pub fn call(func: &str, args: Vec<Expr>) -> Expr {
        Expr::Call {
            func: Box::new(Expr::name(func)),
            args,
            keywords: Vec::new(),
        }
    }
}

/// Calls `f` on every expression node in the module, parents before children.
pub fn walk_module<'a>(module: &'a Module, f: &mut dyn FnMut(&'a Expr)) {
    for s in &module.body {
        walk_stmt(s, f);
    }
}

pub fn walk_stmt<'a>(stmt: &'a Stmt, f: &mut dyn FnMut(&'a Expr)) {
    match stmt {
        Stmt::FunctionDef(def) => {
            for p in &def.params {
                if let Some(a) = &p.annotation {
                    walk_expr(a, f);
                }
                if let Some(d) = &p.default {
                    walk_expr(d, f);
                }
            }
            if let Some(r) = &def.returns {
                walk_expr(r, f);
            }
            for s in &def.body {
                walk_stmt(s, f);
            }
        }
        Stmt::Return(Some(e)) | Stmt::Expr(e) => walk_expr(e, f),
        Stmt::Return(None) | Stmt::Pass | Stmt::Break | Stmt::Continue => {}
        Stmt::Assign { target, value } | Stmt::AugAssign { target, value, .. } => {
            walk_expr(target, f);
            walk_expr(value, f);
        }
        Stmt::AnnAssign {
            target,
            annotation,
            value,
        } => {
            walk_expr(target, f);
            walk_expr(annotation, f);
            if let Some(v) = value {
                walk_expr(v, f);
            }
        }
        Stmt::If { test, body, orelse } => {
            walk_expr(test, f);
            body.iter().chain(orelse).for_each(|s| walk_stmt(s, f));
        }
        Stmt::For { target, iter, body } => {
            walk_expr(target, f);
            walk_expr(iter, f);
            body.iter().for_each(|s| walk_stmt(s, f));
        }
    }
}

pub fn walk_expr<'a>(expr: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
    f(expr);
    match expr {
        Expr::Name(_) | Expr::Constant(_) => {}
        Expr::FString(parts) => {
            for p in parts {
                if let FStringPart::Expr { expr, .. } = p {
                    walk_expr(expr, f);
                }
            }
        }
        Expr::List(items) | Expr::Tuple(items) => items.iter().for_each(|e| walk_expr(e, f)),
        Expr::BinOp { left, right, .. } => {
            walk_expr(left, f);
            walk_expr(right, f);
        }
        Expr::UnaryOp { operand, .. } => walk_expr(operand, f),
        Expr::BoolOp { values, .. } => values.iter().for_each(|e| walk_expr(e, f)),
        Expr::Compare {
            left, comparators, ..
        } => {
            walk_expr(left, f);
            comparators.iter().for_each(|e| walk_expr(e, f));
        }
        Expr::Call {
            func,
            args,
            keywords,
        } => {
            walk_expr(func, f);
            args.iter().for_each(|e| walk_expr(e, f));
            keywords.iter().for_each(|(_, e)| walk_expr(e, f));
        }
        Expr::Attribute { value, .. } => walk_expr(value, f),
        Expr::Subscript { value, index } => {
            walk_expr(value, f);
            walk_expr(index, f);
        }
        Expr::Slice { lower, upper, step } => {
            for e in [lower, upper, step].into_iter().flatten() {
                walk_expr(e, f);
            }
        }
        Expr::IfExp { test, body, orelse } => {
            walk_expr(test, f);
            walk_expr(body, f);
            walk_expr(orelse, f);
        }
        Expr::ListComp { elt, generators } | Expr::GeneratorExp { elt, generators } => {
            walk_expr(elt, f);
            for g in generators {
                walk_expr(&g.target, f);
                walk_expr(&g.iter, f);
                g.conditions.iter().for_each(|e| walk_expr(e, f));
            }
        }
    }
}
