//! Construct whitelist for candidate programs.

use std::collections::HashSet;

use super::ast::*;
use super::ParseError;

/// Names a program may not reference at all.
const FORBIDDEN_NAMES: &[&str] = &[
    "open", "eval", "exec", "compile", "input", "print", "getattr", "setattr", "delattr",
    "hasattr", "globals", "locals", "vars", "dir", "breakpoint", "exit", "quit", "help", "type",
    "object", "super", "memoryview", "bytearray", "bytes", "classmethod", "staticmethod",
    "property", "id", "hash", "iter", "next", "callable", "os", "sys", "subprocess", "socket",
    "shutil", "pathlib", "io",
];

/// Helper names provided by the preamble; programs may call but not redefine them.
pub const RESERVED_HELPERS: &[&str] = &[
    "ask_llm",
    "ask_gpt",
    "eq_override",
    "neq_override",
    "gt_override",
    "gte_override",
    "lt_override",
    "lte_override",
    "in_override",
    "not_in_override",
];

/// Methods callable on text and list values.
pub const ALLOWED_METHODS: &[&str] = &[
    "lower", "upper", "strip", "lstrip", "rstrip", "split", "startswith", "endswith", "replace",
    "join", "title", "capitalize", "find", "count", "isdigit", "isalpha", "isnumeric", "append",
    "extend", "index", "insert", "pop", "remove", "reverse", "sort", "copy",
];

fn forbidden(construct: impl Into<String>) -> ParseError {
    ParseError::Forbidden {
        line: 0,
        construct: construct.into(),
    }
}

/// Checks a parsed candidate program against the whitelist.
pub fn check_whitelist(module: &Module) -> Result<(), ParseError> {
    for stmt in &module.body {
        match stmt {
            Stmt::FunctionDef(def) => {
                if RESERVED_HELPERS.contains(&def.name.as_str()) {
                    return Err(forbidden(format!("redefinition of helper `{}`", def.name)));
                }
                check_name(&def.name)?;
                for p in &def.params {
                    check_name(&p.name)?;
                }
                check_body(&def.body)?;
            }
            Stmt::Assign { target, .. } | Stmt::AnnAssign { target, .. } => {
                check_assign_target(target)?;
            }
            Stmt::Expr(Expr::Constant(Constant::Str(_))) | Stmt::Pass => {}
            _ => return Err(forbidden("top-level executable statement")),
        }
    }
    // attribute nodes that are the callee of a call
    let mut callees: HashSet<*const Expr> = HashSet::new();
    walk_module(module, &mut |e| {
        if let Expr::Call { func, .. } = e {
            if matches!(func.as_ref(), Expr::Attribute { .. }) {
                callees.insert(func.as_ref() as *const Expr);
            }
        }
    });
    let mut result = Ok(());
    walk_module(module, &mut |e| {
        if result.is_ok() {
            result = check_expr(e, &callees);
        }
    });
    result
}

fn check_body(body: &[Stmt]) -> Result<(), ParseError> {
    for s in body {
        match s {
            Stmt::FunctionDef(_) => return Err(forbidden("nested function definition")),
            Stmt::If { body, orelse, .. } => {
                check_body(body)?;
                check_body(orelse)?;
            }
            Stmt::For { target, body, .. } => {
                check_assign_target(target)?;
                check_body(body)?;
            }
            Stmt::Assign { target, .. }
            | Stmt::AnnAssign { target, .. }
            | Stmt::AugAssign { target, .. } => check_assign_target(target)?,
            _ => {}
        }
    }
    Ok(())
}

fn check_assign_target(target: &Expr) -> Result<(), ParseError> {
    match target {
        Expr::Name(n) => {
            if RESERVED_HELPERS.contains(&n.as_str()) {
                return Err(forbidden(format!("assignment to helper `{n}`")));
            }
            check_name(n)
        }
        Expr::Tuple(items) | Expr::List(items) => items.iter().try_for_each(check_assign_target),
        _ => Ok(()),
    }
}

fn check_name(name: &str) -> Result<(), ParseError> {
    if name.starts_with("__") {
        return Err(forbidden(format!("dunder name `{name}`")));
    }
    if FORBIDDEN_NAMES.contains(&name) {
        return Err(forbidden(format!("use of `{name}`")));
    }
    Ok(())
}

fn check_expr(e: &Expr, callees: &HashSet<*const Expr>) -> Result<(), ParseError> {
    match e {
        Expr::Name(n) => check_name(n),
        Expr::Attribute { attr, .. } => {
            if !callees.contains(&(e as *const Expr)) || !ALLOWED_METHODS.contains(&attr.as_str()) {
                return Err(forbidden(format!("attribute access `.{attr}`")));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_module;
    use super::*;

    fn check(src: &str) -> Result<(), ParseError> {
        check_whitelist(&parse_module(src).unwrap())
    }

    #[test]
    fn ordinary_program_passes() {
        let src = "def f(x: str) -> list:\n    return x.lower().split(',')\n\ndef answer(a: str):\n    xs = [s.strip() for s in f(a)]\n    xs.append('z')\n    return 'Must be yes' if len(xs) > 1 else 'Must be no'\n";
        check(src).unwrap();
    }

    #[test]
    fn io_and_reflection_are_forbidden() {
        for src in [
            "def answer():\n    return open('/etc/passwd')\n",
            "def answer():\n    print('x')\n",
            "def answer():\n    return __import__('os')\n",
            "def answer(x):\n    return x.__class__\n",
            "def answer(x):\n    return os.system('ls')\n",
            "def answer(x):\n    f = x.lower\n    return f()\n",
            "def answer():\n    def inner():\n        return 1\n    return inner()\n",
            "def eq_override(a, b):\n    return True\n",
            "answer()\n",
        ] {
            assert!(
                matches!(check(src), Err(ParseError::Forbidden { .. })),
                "{src} should be forbidden"
            );
        }
    }
}
