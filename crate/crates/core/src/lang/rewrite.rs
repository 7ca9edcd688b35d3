//! Replaces relational operators with calls to the soft-operator helpers.

use super::ast::*;
use super::soft::ComparisonKind;

/// Rewrites every comparison whose operator is a [`ComparisonKind`] into a
/// helper call and returns the new tree with the number of replaced operators.
///
/// Chained comparisons `a < b < c` become `lt_override(a, b) and
/// lt_override(b, c)`. Identity tests (`is`, `is not`) are left untouched.
pub fn rewrite_module(module: &Module) -> (Module, usize) {
    let mut count = 0;
    let body = module
        .body
        .iter()
        .map(|s| rewrite_stmt(s, &mut count))
        .collect();
    (Module { body }, count)
}

/// Number of operators of any [`ComparisonKind`] still present in the tree.
pub fn count_soft_comparisons(module: &Module) -> usize {
    let mut n = 0;
    walk_module(module, &mut |e| {
        if let Expr::Compare { ops, .. } = e {
            n += ops
                .iter()
                .filter(|op| ComparisonKind::from_cmp_op(**op).is_some())
                .count();
        }
    });
    n
}

fn rewrite_block(body: &[Stmt], count: &mut usize) -> Vec<Stmt> {
    body.iter().map(|s| rewrite_stmt(s, count)).collect()
}

fn rewrite_stmt(stmt: &Stmt, count: &mut usize) -> Stmt {
    match stmt {
        Stmt::FunctionDef(def) => {
            let params = def
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    annotation: p.annotation.clone(),
                    default: p.default.as_ref().map(|d| rewrite_expr(d, count)),
                })
                .collect();
            Stmt::FunctionDef(std::rc::Rc::new(FunctionDef {
                name: def.name.clone(),
                params,
                returns: def.returns.clone(),
                body: rewrite_block(&def.body, count),
            }))
        }
        Stmt::Return(e) => Stmt::Return(e.as_ref().map(|e| rewrite_expr(e, count))),
        Stmt::Assign { target, value } => Stmt::Assign {
            target: rewrite_expr(target, count),
            value: rewrite_expr(value, count),
        },
        Stmt::AnnAssign {
            target,
            annotation,
            value,
        } => Stmt::AnnAssign {
            target: target.clone(),
            annotation: annotation.clone(),
            value: value.as_ref().map(|v| rewrite_expr(v, count)),
        },
        Stmt::AugAssign { target, op, value } => Stmt::AugAssign {
            target: rewrite_expr(target, count),
            op: *op,
            value: rewrite_expr(value, count),
        },
        Stmt::If { test, body, orelse } => Stmt::If {
            test: rewrite_expr(test, count),
            body: rewrite_block(body, count),
            orelse: rewrite_block(orelse, count),
        },
        Stmt::For { target, iter, body } => Stmt::For {
            target: target.clone(),
            iter: rewrite_expr(iter, count),
            body: rewrite_block(body, count),
        },
        Stmt::Expr(e) => Stmt::Expr(rewrite_expr(e, count)),
        Stmt::Pass | Stmt::Break | Stmt::Continue => stmt.clone(),
    }
}

fn boxed(e: &Expr, count: &mut usize) -> Box<Expr> {
    Box::new(rewrite_expr(e, count))
}

fn rewrite_comprehensions(gens: &[Comprehension], count: &mut usize) -> Vec<Comprehension> {
    gens.iter()
        .map(|g| Comprehension {
            target: g.target.clone(),
            iter: rewrite_expr(&g.iter, count),
            conditions: g.conditions.iter().map(|c| rewrite_expr(c, count)).collect(),
        })
        .collect()
}

fn rewrite_expr(expr: &Expr, count: &mut usize) -> Expr {
    match expr {
        Expr::Name(_) | Expr::Constant(_) => expr.clone(),
        Expr::FString(parts) => Expr::FString(
            parts
                .iter()
                .map(|p| match p {
                    FStringPart::Literal(_) => p.clone(),
                    FStringPart::Expr {
                        expr,
                        conversion,
                        spec,
                    } => FStringPart::Expr {
                        expr: boxed(expr, count),
                        conversion: *conversion,
                        spec: spec.clone(),
                    },
                })
                .collect(),
        ),
        Expr::List(items) => Expr::List(items.iter().map(|e| rewrite_expr(e, count)).collect()),
        Expr::Tuple(items) => Expr::Tuple(items.iter().map(|e| rewrite_expr(e, count)).collect()),
        Expr::BinOp { op, left, right } => Expr::BinOp {
            op: *op,
            left: boxed(left, count),
            right: boxed(right, count),
        },
        Expr::UnaryOp { op, operand } => Expr::UnaryOp {
            op: *op,
            operand: boxed(operand, count),
        },
        Expr::BoolOp { op, values } => Expr::BoolOp {
            op: *op,
            values: values.iter().map(|e| rewrite_expr(e, count)).collect(),
        },
        Expr::Compare {
            left,
            ops,
            comparators,
        } => {
            let mut operands = Vec::with_capacity(ops.len() + 1);
            operands.push(rewrite_expr(left, count));
            operands.extend(comparators.iter().map(|c| rewrite_expr(c, count)));
            let mut pieces: Vec<Expr> = Vec::with_capacity(ops.len());
            for (i, op) in ops.iter().enumerate() {
                let (a, b) = (operands[i].clone(), operands[i + 1].clone());
                match ComparisonKind::from_cmp_op(*op) {
                    Some(kind) => {
                        *count += 1;
                        pieces.push(Expr::call(kind.helper_name(), vec![a, b]));
                    }
                    None => pieces.push(Expr::Compare {
                        left: Box::new(a),
                        ops: vec![*op],
                        comparators: vec![b],
                    }),
                }
            }
            if pieces.len() == 1 {
                pieces.pop().expect("one piece")
            } else {
                Expr::BoolOp {
                    op: BoolOp::And,
                    values: pieces,
                }
            }
        }
        Expr::Call {
            func,
            args,
            keywords,
        } => Expr::Call {
            func: boxed(func, count),
            args: args.iter().map(|e| rewrite_expr(e, count)).collect(),
            keywords: keywords
                .iter()
                .map(|(k, v)| (k.clone(), rewrite_expr(v, count)))
                .collect(),
        },
        Expr::Attribute { value, attr } => Expr::Attribute {
            value: boxed(value, count),
            attr: attr.clone(),
        },
        Expr::Subscript { value, index } => Expr::Subscript {
            value: boxed(value, count),
            index: boxed(index, count),
        },
        Expr::Slice { lower, upper, step } => Expr::Slice {
            lower: lower.as_ref().map(|e| boxed(e, count)),
            upper: upper.as_ref().map(|e| boxed(e, count)),
            step: step.as_ref().map(|e| boxed(e, count)),
        },
        Expr::IfExp { test, body, orelse } => Expr::IfExp {
            test: boxed(test, count),
            body: boxed(body, count),
            orelse: boxed(orelse, count),
        },
        Expr::ListComp { elt, generators } => Expr::ListComp {
            elt: boxed(elt, count),
            generators: rewrite_comprehensions(generators, count),
        },
        Expr::GeneratorExp { elt, generators } => Expr::GeneratorExp {
            elt: boxed(elt, count),
            generators: rewrite_comprehensions(generators, count),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::{parse_expression, parse_module};
    use super::super::unparse::unparse_expr;
    use super::*;

    fn rw(src: &str) -> (String, usize) {
        let m = parse_module(&format!("x = {src}\n")).unwrap();
        let (out, n) = rewrite_module(&m);
        let Stmt::Assign { value, .. } = &out.body[0] else { panic!() };
        (unparse_expr(value), n)
    }

    #[test]
    fn each_operator_maps_to_its_helper() {
        let cases = [
            ("a == b", "eq_override(a, b)"),
            ("a != b", "neq_override(a, b)"),
            ("a > b", "gt_override(a, b)"),
            ("a >= b", "gte_override(a, b)"),
            ("a < b", "lt_override(a, b)"),
            ("a <= b", "lte_override(a, b)"),
            ("a in b", "in_override(a, b)"),
            ("a not in b", "not_in_override(a, b)"),
        ];
        for (src, want) in cases {
            assert_eq!(rw(src), (want.to_string(), 1), "{src}");
        }
    }

    #[test]
    fn chains_split_into_conjunctions() {
        assert_eq!(
            rw("a < b <= c"),
            ("lt_override(a, b) and lte_override(b, c)".into(), 2)
        );
    }

    #[test]
    fn identity_tests_are_kept() {
        assert_eq!(rw("a is None"), ("a is None".into(), 0));
        assert_eq!(
            rw("a is not b == c"),
            ("a is not b and eq_override(b, c)".into(), 1)
        );
    }

    #[test]
    fn nested_positions_are_rewritten() {
        let (s, n) = rw("[v for v in xs if v > 1] if (a == b) or not (c in d) else f(e != g)");
        assert_eq!(n, 4);
        assert!(!s.contains("==") && !s.contains('>') && !s.contains(" in d"));
        let e = parse_expression(&s).unwrap();
        assert!(matches!(e, Expr::IfExp { .. }));
    }

    #[test]
    fn comparison_inside_fstring_and_call_args() {
        let (s, n) = rw("f\"{a > b}\" + str(len(xs) >= 2)");
        assert_eq!(n, 2);
        assert_eq!(s, "f\"{gt_override(a, b)}\" + str(gte_override(len(xs), 2))");
    }
}
