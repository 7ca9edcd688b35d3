//! Renders a syntax tree back to source text that the parser accepts.

use super::ast::*;
use super::value::float_repr;

const INDENT: &str = "    ";

pub fn unparse_module(module: &Module) -> String {
    let mut out = String::new();
    for (i, s) in module.body.iter().enumerate() {
        if i > 0 && matches!(s, Stmt::FunctionDef(_)) {
            out.push('\n');
        }
        write_stmt(&mut out, s, 0);
    }
    out
}

fn write_block(out: &mut String, body: &[Stmt], level: usize) {
    if body.is_empty() {
        push_indent(out, level);
        out.push_str("pass\n");
    }
    for s in body {
        write_stmt(out, s, level);
    }
}

fn push_indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str(INDENT);
    }
}

fn write_stmt(out: &mut String, stmt: &Stmt, level: usize) {
    push_indent(out, level);
    match stmt {
        Stmt::FunctionDef(def) => {
            out.push_str("def ");
            out.push_str(&def.name);
            out.push('(');
            let params: Vec<String> = def
                .params
                .iter()
                .map(|p| match (&p.annotation, &p.default) {
                    (None, None) => p.name.clone(),
                    (Some(a), None) => format!("{}: {}", p.name, unparse_expr(a)),
                    (None, Some(d)) => format!("{}={}", p.name, unparse_expr(d)),
                    (Some(a), Some(d)) => {
                        format!("{}: {} = {}", p.name, unparse_expr(a), unparse_expr(d))
                    }
                })
                .collect();
            out.push_str(&params.join(", "));
            out.push(')');
            if let Some(r) = &def.returns {
                out.push_str(" -> ");
                out.push_str(&unparse_expr(r));
            }
            out.push_str(":\n");
            write_block(out, &def.body, level + 1);
        }
        Stmt::Return(None) => out.push_str("return\n"),
        Stmt::Return(Some(e)) => {
            out.push_str("return ");
            out.push_str(&unparse_expr(e));
            out.push('\n');
        }
        Stmt::Assign { target, value } => {
            out.push_str(&format!("{} = {}\n", unparse_expr(target), unparse_expr(value)));
        }
        Stmt::AnnAssign {
            target,
            annotation,
            value,
        } => {
            out.push_str(&format!("{}: {}", unparse_expr(target), unparse_expr(annotation)));
            if let Some(v) = value {
                out.push_str(" = ");
                out.push_str(&unparse_expr(v));
            }
            out.push('\n');
        }
        Stmt::AugAssign { target, op, value } => {
            out.push_str(&format!(
                "{} {}= {}\n",
                unparse_expr(target),
                op.symbol(),
                unparse_expr(value)
            ));
        }
        Stmt::If { test, body, orelse } => {
            out.push_str(&format!("if {}:\n", unparse_expr(test)));
            write_block(out, body, level + 1);
            write_orelse(out, orelse, level);
        }
        Stmt::For { target, iter, body } => {
            out.push_str(&format!("for {} in {}:\n", unparse_expr(target), unparse_expr(iter)));
            write_block(out, body, level + 1);
        }
        Stmt::Expr(e) => {
            out.push_str(&unparse_expr(e));
            out.push('\n');
        }
        Stmt::Pass => out.push_str("pass\n"),
        Stmt::Break => out.push_str("break\n"),
        Stmt::Continue => out.push_str("continue\n"),
    }
}

fn write_orelse(out: &mut String, orelse: &[Stmt], level: usize) {
    if orelse.is_empty() {
        return;
    }
    if let [Stmt::If { test, body, orelse }] = orelse {
        push_indent(out, level);
        out.push_str(&format!("elif {}:\n", unparse_expr(test)));
        write_block(out, body, level + 1);
        write_orelse(out, orelse, level);
        return;
    }
    push_indent(out, level);
    out.push_str("else:\n");
    write_block(out, orelse, level + 1);
}

const P_TEST: u8 = 1;
const P_OR: u8 = 2;
const P_AND: u8 = 3;
const P_NOT: u8 = 4;
const P_CMP: u8 = 5;
const P_ADD: u8 = 10;
const P_MUL: u8 = 11;
const P_UNARY: u8 = 12;
const P_POW: u8 = 13;
const P_ATOM: u8 = 20;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::IfExp { .. } => P_TEST,
        Expr::BoolOp { op: BoolOp::Or, .. } => P_OR,
        Expr::BoolOp { op: BoolOp::And, .. } => P_AND,
        Expr::UnaryOp { op: UnaryOp::Not, .. } => P_NOT,
        Expr::Compare { .. } => P_CMP,
        Expr::BinOp { op, .. } => binop_prec(*op),
        Expr::UnaryOp { .. } => P_UNARY,
        Expr::Constant(Constant::Int(i)) if *i < 0 => P_UNARY,
        Expr::Constant(Constant::Float(f)) if f.is_sign_negative() => P_UNARY,
        _ => P_ATOM,
    }
}

fn binop_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Add | BinOp::Sub => P_ADD,
        BinOp::Mul | BinOp::Div | BinOp::FloorDiv | BinOp::Mod => P_MUL,
        BinOp::Pow => P_POW,
    }
}

pub fn unparse_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn write_expr(out: &mut String, e: &Expr, min: u8) {
    let paren = precedence(e) < min;
    if paren {
        out.push('(');
    }
    match e {
        Expr::Name(n) => out.push_str(n),
        Expr::Constant(c) => write_constant(out, c),
        Expr::FString(parts) => write_fstring(out, parts),
        Expr::List(items) => {
            out.push('[');
            write_list(out, items);
            out.push(']');
        }
        Expr::Tuple(items) => {
            out.push('(');
            write_list(out, items);
            if items.len() == 1 {
                out.push(',');
            }
            out.push(')');
        }
        Expr::BinOp { op, left, right } => {
            let p = binop_prec(*op);
            if *op == BinOp::Pow {
                write_expr(out, left, P_POW + 1);
                out.push_str(" ** ");
                write_expr(out, right, P_UNARY);
            } else {
                write_expr(out, left, p);
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
                write_expr(out, right, p + 1);
            }
        }
        Expr::UnaryOp { op, operand } => match op {
            UnaryOp::Not => {
                out.push_str("not ");
                write_expr(out, operand, P_NOT);
            }
            UnaryOp::Neg => {
                out.push('-');
                write_expr(out, operand, P_UNARY);
            }
            UnaryOp::Pos => {
                out.push('+');
                write_expr(out, operand, P_UNARY);
            }
        },
        Expr::BoolOp { op, values } => {
            let (word, p) = match op {
                BoolOp::And => (" and ", P_AND),
                BoolOp::Or => (" or ", P_OR),
            };
            for (i, v) in values.iter().enumerate() {
                if i > 0 {
                    out.push_str(word);
                }
                write_expr(out, v, p + 1);
            }
        }
        Expr::Compare {
            left,
            ops,
            comparators,
        } => {
            write_expr(out, left, P_CMP + 1);
            for (op, c) in ops.iter().zip(comparators) {
                out.push(' ');
                out.push_str(op.symbol());
                out.push(' ');
                write_expr(out, c, P_CMP + 1);
            }
        }
        Expr::Call {
            func,
            args,
            keywords,
        } => {
            write_expr(out, func, P_ATOM);
            out.push('(');
            let mut first = true;
            for a in args {
                if !first {
                    out.push_str(", ");
                }
                first = false;
                write_expr(out, a, P_TEST);
            }
            for (k, v) in keywords {
                if !first {
                    out.push_str(", ");
                }
                first = false;
                out.push_str(k);
                out.push('=');
                write_expr(out, v, P_TEST);
            }
            out.push(')');
        }
        Expr::Attribute { value, attr } => {
            write_expr(out, value, P_ATOM);
            if matches!(**value, Expr::Constant(Constant::Int(_))) {
                out.push(' ');
            }
            out.push('.');
            out.push_str(attr);
        }
        Expr::Subscript { value, index } => {
            write_expr(out, value, P_ATOM);
            out.push('[');
            write_expr(out, index, P_TEST);
            out.push(']');
        }
        Expr::Slice { lower, upper, step } => {
            if let Some(l) = lower {
                write_expr(out, l, P_TEST);
            }
            out.push(':');
            if let Some(u) = upper {
                write_expr(out, u, P_TEST);
            }
            if let Some(s) = step {
                out.push(':');
                write_expr(out, s, P_TEST);
            }
        }
        Expr::IfExp { test, body, orelse } => {
            write_expr(out, body, P_OR);
            out.push_str(" if ");
            write_expr(out, test, P_OR);
            out.push_str(" else ");
            write_expr(out, orelse, P_TEST);
        }
        Expr::ListComp { elt, generators } => {
            out.push('[');
            write_comprehension(out, elt, generators);
            out.push(']');
        }
        Expr::GeneratorExp { elt, generators } => {
            out.push('(');
            write_comprehension(out, elt, generators);
            out.push(')');
        }
    }
    if paren {
        out.push(')');
    }
}

fn write_list(out: &mut String, items: &[Expr]) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, item, P_TEST);
    }
}

fn write_comprehension(out: &mut String, elt: &Expr, generators: &[Comprehension]) {
    write_expr(out, elt, P_TEST);
    for g in generators {
        out.push_str(" for ");
        write_expr(out, &g.target, P_ADD);
        out.push_str(" in ");
        write_expr(out, &g.iter, P_OR);
        for c in &g.conditions {
            out.push_str(" if ");
            write_expr(out, c, P_OR);
        }
    }
}

fn write_constant(out: &mut String, c: &Constant) {
    match c {
        Constant::None => out.push_str("None"),
        Constant::Bool(true) => out.push_str("True"),
        Constant::Bool(false) => out.push_str("False"),
        Constant::Int(i) => out.push_str(&i.to_string()),
        Constant::Float(f) if f.is_nan() => out.push_str("float('nan')"),
        Constant::Float(f) if f.is_infinite() => {
            out.push_str(if *f > 0.0 { "1e999" } else { "-1e999" })
        }
        Constant::Float(f) => out.push_str(&float_repr(*f)),
        Constant::Str(s) => out.push_str(&str_repr(s)),
    }
}

/// Python-style `repr` of a string.
pub fn str_repr(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') {
        '"'
    } else {
        '\''
    };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                out.push_str(&format!("\\x{:02x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

fn write_fstring(out: &mut String, parts: &[FStringPart]) {
    out.push_str("f\"");
    for p in parts {
        match p {
            FStringPart::Literal(s) => {
                for c in s.chars() {
                    match c {
                        '{' => out.push_str("{{"),
                        '}' => out.push_str("}}"),
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        '\t' => out.push_str("\\t"),
                        '\r' => out.push_str("\\r"),
                        c => out.push(c),
                    }
                }
            }
            FStringPart::Expr {
                expr,
                conversion,
                spec,
            } => {
                out.push('{');
                let inner = unparse_expr(expr);
                // a leading brace would read as an escaped literal brace
                if inner.starts_with('{') {
                    out.push(' ');
                }
                out.push_str(&inner);
                if let Some(c) = conversion {
                    out.push('!');
                    out.push(*c);
                }
                if let Some(s) = spec {
                    out.push(':');
                    out.push_str(s);
                }
                out.push('}');
            }
        }
    }
    out.push('"');
}
