//! AST to SQL text.
//!
//! The printer emits a canonical form whose round-trip through
//! [`crate::parse::parse`] reproduces the AST exactly: connective and
//! arithmetic chains print left-associatively and right children at the same
//! precedence level are parenthesized.

use std::fmt::Write;

use crate::ast::{
    AggregateExpression, BinOp, Expression, Formula, Query, SelectItem,
};
use crate::value::Value;

fn expr_prec(e: &Expression) -> u8 {
    match e {
        Expression::Constant(_) | Expression::Column(_) => 3,
        Expression::BinaryOp { op, .. } => match op {
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Add | BinOp::Sub | BinOp::Concat => 1,
        },
    }
}

fn print_value(out: &mut String, v: &Value) {
    match v {
        Value::Null => out.push_str("NULL"),
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Float(x) => {
            let _ = write!(out, "{x:?}");
        }
        Value::Str(s) => {
            out.push('"');
            for c in s.chars() {
                if c == '"' {
                    out.push('"');
                }
                out.push(c);
            }
            out.push('"');
        }
        Value::Bool(b) => out.push_str(if *b { "TRUE" } else { "FALSE" }),
    }
}

fn print_expr(out: &mut String, e: &Expression) {
    print_expr_prec(out, e, 0, false)
}

fn print_expr_prec(out: &mut String, e: &Expression, parent: u8, is_right: bool) {
    let prec = expr_prec(e);
    let needs_parens = prec < parent || (prec == parent && is_right && prec < 3);
    if needs_parens {
        out.push('(');
    }
    match e {
        Expression::Constant(v) => print_value(out, v),
        Expression::Column(c) => {
            let _ = write!(out, "{c}");
        }
        Expression::BinaryOp { op, lhs, rhs } => {
            print_expr_prec(out, lhs, prec, false);
            let _ = write!(out, " {} ", op.symbol());
            print_expr_prec(out, rhs, prec, true);
        }
    }
    if needs_parens {
        out.push(')');
    }
}

fn print_agg(out: &mut String, agg: &AggregateExpression) {
    out.push_str(agg.func.name());
    out.push('(');
    match &agg.arg {
        None => out.push('*'),
        Some(e) => print_expr(out, e),
    }
    out.push(')');
}

fn formula_prec(f: &Formula) -> u8 {
    match f {
        Formula::Or(..) => 1,
        Formula::And(..) => 2,
        Formula::Not(..) => 3,
        _ => 4,
    }
}

fn print_formula(out: &mut String, f: &Formula) {
    print_formula_prec(out, f, 0, false)
}

fn print_formula_prec(out: &mut String, f: &Formula, parent: u8, is_right: bool) {
    let prec = formula_prec(f);
    let needs_parens = prec < parent || (prec == parent && is_right && prec < 3);
    if needs_parens {
        out.push('(');
    }
    match f {
        Formula::Compare { op, lhs, rhs } => {
            print_expr(out, lhs);
            let _ = write!(out, " {} ", op.symbol());
            print_expr(out, rhs);
        }
        Formula::IsNull(e) => {
            print_expr(out, e);
            out.push_str(" IS NULL");
        }
        Formula::Missing { table, attribute } => {
            let _ = write!(out, "{table} MISSING {attribute}");
        }
        Formula::NotIn { probe, subquery } => {
            print_expr(out, probe);
            let _ = write!(
                out,
                " NOT IN (SELECT {} FROM {})",
                subquery.column, subquery.table
            );
        }
        Formula::And(l, r) => {
            print_formula_prec(out, l, prec, false);
            out.push_str(" AND ");
            print_formula_prec(out, r, prec, true);
        }
        Formula::Or(l, r) => {
            print_formula_prec(out, l, prec, false);
            out.push_str(" OR ");
            print_formula_prec(out, r, prec, true);
        }
        Formula::Not(inner) => {
            out.push_str("NOT ");
            print_formula_prec(out, inner, prec, false);
        }
    }
    if needs_parens {
        out.push(')');
    }
}

fn print_select_item(out: &mut String, item: &SelectItem) {
    print_expr(out, &item.expr);
    if let Some(a) = &item.alias {
        let _ = write!(out, " AS {a}");
    }
}

/// Render a query as SQL text.
pub fn print(q: &Query) -> String {
    let mut out = String::from("SELECT ");
    if q.select_star {
        out.push('*');
    } else {
        let mut first = true;
        for item in &q.select_exprs {
            if !first {
                out.push_str(", ");
            }
            first = false;
            print_select_item(&mut out, item);
        }
        for item in &q.select_aggs {
            if !first {
                out.push_str(", ");
            }
            first = false;
            print_agg(&mut out, &item.agg);
            if let Some(a) = &item.alias {
                let _ = write!(out, " AS {a}");
            }
        }
    }
    if !q.from.is_empty() {
        out.push_str(" FROM ");
        for (i, t) in q.from.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(&t.name);
            if let Some(a) = &t.alias {
                let _ = write!(out, " AS {a}");
            }
        }
    }
    if let Some(f) = &q.where_clause {
        out.push_str(" WHERE ");
        print_formula(&mut out, f);
    }
    if !q.group_by.is_empty() {
        out.push_str(" GROUP BY ");
        for (i, c) in q.group_by.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{c}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{ColumnRef, CompareOp, Dialect, TableRef};
    use crate::parse::parse;

    fn roundtrip(text: &str, dialect: Dialect) {
        let q = parse(text, dialect).unwrap();
        let printed = print(&q);
        let reparsed = parse(&printed, dialect).unwrap();
        assert_eq!(q, reparsed, "printed form: {printed}");
    }

    #[test]
    fn constant_query_prints_bare() {
        let q = Query {
            select_star: false,
            select_exprs: vec![SelectItem::new(Expression::int(1))],
            select_aggs: vec![],
            from: vec![],
            where_clause: None,
            group_by: vec![],
        };
        assert_eq!(print(&q), "SELECT 1");
    }

    #[test]
    fn string_literals_print_double_quoted() {
        let q = parse("SELECT x FROM R WHERE R.a = 'Codd'", Dialect::ThreeValued).unwrap();
        assert_eq!(print(&q), "SELECT x FROM R WHERE R.a = \"Codd\"");
    }

    #[test]
    fn right_nested_connectives_keep_parens() {
        let f = Formula::and(
            Formula::compare(
                CompareOp::Eq,
                Expression::column("R", "a"),
                Expression::int(1),
            ),
            Formula::and(
                Formula::compare(
                    CompareOp::Eq,
                    Expression::column("R", "b"),
                    Expression::int(2),
                ),
                Formula::compare(
                    CompareOp::Eq,
                    Expression::column("R", "c"),
                    Expression::int(3),
                ),
            ),
        );
        let q = Query {
            select_star: true,
            select_exprs: vec![],
            select_aggs: vec![],
            from: vec![TableRef::new("R")],
            where_clause: Some(f),
            group_by: vec![],
        };
        let text = print(&q);
        assert!(text.contains("WHERE R.a = 1 AND (R.b = 2 AND R.c = 3)"));
        let reparsed = parse(&text, Dialect::ThreeValued).unwrap();
        assert_eq!(q, reparsed);
    }

    #[test]
    fn roundtrips_assorted_queries() {
        for text in [
            "SELECT Address FROM R WHERE R.Author = \"Codd\"",
            "SELECT * FROM R",
            "SELECT R.x + 1, R.y FROM R WHERE R.x < 3 AND NOT R.y = 2 OR R.z >= 0",
            "SELECT R.x, COUNT(*), SUM(R.y) AS total FROM R GROUP BY R.x",
            "SELECT x.a, y.a FROM R AS x, R AS y WHERE x.a = y.a",
            "SELECT 1 - (2 - 3) FROM R",
            "SELECT R.a || \"x\" FROM R",
        ] {
            roundtrip(text, Dialect::ThreeValued);
        }
        for text in [
            "SELECT Author FROM R WHERE R MISSING Address",
            "SELECT * FROM R WHERE NOT (R.x = R.x)",
            "SELECT R_id.id FROM R_id WHERE R_id.id NOT IN (SELECT id FROM R_Address)",
        ] {
            roundtrip(text, Dialect::Columnar);
        }
    }

    #[test]
    fn simulated_query_text_preserves_equality_orientation() {
        // the hand-written simulation query puts the key column on the
        // left of its correlation predicates; printing keeps it there
        let text = "SELECT R_Address.Address FROM R_Author, R_Address, R_id \
                    WHERE R_id.id = R_Author.id AND R_id.id = R_Address.id \
                    AND R_Author.Author = \"Codd\"";
        let q = parse(text, Dialect::Columnar).unwrap();
        let printed = print(&q);
        assert!(printed.contains("R_id.id = R_Author.id"));
        assert!(printed.contains("R_id.id = R_Address.id"));
        assert_eq!(printed, text);
    }

    #[test]
    fn qualification_is_preserved() {
        let q = Query {
            select_star: false,
            select_exprs: vec![SelectItem::new(Expression::Column(
                ColumnRef::unqualified("Address"),
            ))],
            select_aggs: vec![],
            from: vec![TableRef::new("R")],
            where_clause: None,
            group_by: vec![],
        };
        assert_eq!(print(&q), "SELECT Address FROM R");
    }
}
