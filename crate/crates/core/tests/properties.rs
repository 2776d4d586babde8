//! Property tests for the structural invariants.

use proptest::prelude::*;

use colsem::ast::{
    BinOp, ColumnRef, CompareOp, Dialect, Expression, Formula, Query, SelectItem, TableRef,
};
use colsem::csvio::{relation_from_csv_str, relation_to_csv_string, CsvOptions};
use colsem::expand::simulate_2vl_negation;
use colsem::normalize::{decompose, full_outer_join_group};
use colsem::parse::parse;
use colsem::print::print;
use colsem::relation::{Column, Relation};
use colsem::scalar::eval_expression;
use colsem::value::{ColumnType, Value};

fn arb_column_type() -> impl Strategy<Value = ColumnType> {
    prop_oneof![
        Just(ColumnType::Int),
        Just(ColumnType::Float),
        Just(ColumnType::Str),
        Just(ColumnType::Bool),
    ]
}

fn arb_value(ty: ColumnType) -> BoxedStrategy<Value> {
    match ty {
        ColumnType::Int => (-4i64..=4).prop_map(Value::Int).boxed(),
        ColumnType::Float => (-2i32..=2)
            .prop_map(|i| Value::Float(i as f64 / 2.0))
            .boxed(),
        ColumnType::Str => prop_oneof![
            Just(Value::Str(String::new())),
            Just(Value::Str("red".into())),
            Just(Value::Str("a,b".into())),
            Just(Value::Str("say \"hi\"".into())),
            Just(Value::Str("line\nbreak".into())),
        ]
        .boxed(),
        ColumnType::Bool => any::<bool>().prop_map(Value::Bool).boxed(),
    }
}

fn arb_cell(ty: ColumnType) -> BoxedStrategy<Value> {
    prop_oneof![
        2 => Just(Value::Null),
        5 => arb_value(ty),
    ]
    .boxed()
}

prop_compose! {
    fn arb_relation()(types in prop::collection::vec(arb_column_type(), 1..5))
        (rows in prop::collection::vec(
            types.iter().map(|&t| arb_cell(t)).collect::<Vec<_>>(),
            0..9),
         types in Just(types))
    -> Relation {
        let columns: Vec<Column> = types
            .iter()
            .enumerate()
            .map(|(i, &ty)| Column::new(format!("c{}", i + 1), ty))
            .collect();
        let mut rel = Relation::new("T", columns);
        for row in rows {
            rel.push_row(row).unwrap();
        }
        rel
    }
}

proptest! {
    /// Losslessness: recomposition inverts decomposition for any relation,
    /// including duplicates and all-null rows.
    #[test]
    fn decompose_then_recompose_is_identity(mut rel in arb_relation()) {
        rel.rows.push(vec![Value::Null; rel.columns.len()]);
        let restored = full_outer_join_group(&decompose(&rel)).unwrap();
        prop_assert_eq!(&restored.columns, &rel.columns);
        prop_assert!(restored.multiset_eq(&rel));
        // row order is also preserved, not just the multiset
        prop_assert_eq!(&restored.rows, &rel.rows);
    }

    /// Null-freedom: no relation in a decomposed group contains a null.
    #[test]
    fn decomposed_groups_are_null_free(rel in arb_relation()) {
        let group = decompose(&rel);
        for r in group.relations() {
            for row in &r.rows {
                prop_assert!(row.iter().all(|v| !v.is_null()));
            }
        }
    }

    /// Id stability: decomposition is deterministic given row order.
    #[test]
    fn decomposition_is_deterministic(rel in arb_relation()) {
        prop_assert_eq!(decompose(&rel), decompose(&rel));
    }

    /// CSV round trip, covering nulls, empty strings, quotes, separators
    /// and line breaks in the same relation.
    #[test]
    fn csv_emit_then_load_is_identity(rel in arb_relation()) {
        let opts = CsvOptions::default();
        let text = relation_to_csv_string(&rel, &opts);
        let back = relation_from_csv_str(&text, &rel.name, &rel.columns, &opts).unwrap();
        prop_assert_eq!(back.rows, rel.rows);
    }
}

// -- expression strictness ---------------------------------------------------

#[derive(Debug, Clone)]
enum ExprShape {
    Const(i64),
    Col(usize),
    Node(BinOp, Box<ExprShape>, Box<ExprShape>),
}

fn arb_expr_shape() -> impl Strategy<Value = ExprShape> {
    let leaf = prop_oneof![
        (0i64..5).prop_map(ExprShape::Const),
        (0usize..3).prop_map(ExprShape::Col),
    ];
    leaf.prop_recursive(3, 24, 2, |inner| {
        (
            prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul)],
            inner.clone(),
            inner,
        )
            .prop_map(|(op, l, r)| ExprShape::Node(op, Box::new(l), Box::new(r)))
    })
}

fn build_expr(shape: &ExprShape) -> (Expression, Vec<usize>) {
    match shape {
        ExprShape::Const(v) => (Expression::int(*v), vec![]),
        ExprShape::Col(i) => (
            Expression::column("R", format!("c{i}")),
            vec![*i],
        ),
        ExprShape::Node(op, l, r) => {
            let (le, mut lc) = build_expr(l);
            let (re, rc) = build_expr(r);
            lc.extend(rc);
            (Expression::binary(*op, le, re), lc)
        }
    }
}

proptest! {
    /// Strictness: the expression result is null whenever any referenced
    /// column binds null.
    #[test]
    fn expressions_are_strict_in_nulls(
        shape in arb_expr_shape(),
        null_col in 0usize..3,
        values in prop::collection::vec(0i64..5, 3),
    ) {
        let (expr, cols) = build_expr(&shape);
        let lookup = |c: &ColumnRef| -> colsem::Result<Value> {
            let i: usize = c.attribute[1..].parse().unwrap();
            if i == null_col {
                Ok(Value::Null)
            } else {
                Ok(Value::Int(values[i]))
            }
        };
        let out = eval_expression(&expr, &lookup).unwrap();
        if cols.contains(&null_col) {
            prop_assert_eq!(out, Value::Null);
        } else {
            prop_assert!(!out.is_null());
        }
    }
}

// -- formulas ----------------------------------------------------------------

fn arb_formula() -> impl Strategy<Value = Formula> {
    let cmp_op = prop_oneof![
        Just(CompareOp::Eq),
        Just(CompareOp::Ne),
        Just(CompareOp::Lt),
        Just(CompareOp::Le),
        Just(CompareOp::Gt),
        Just(CompareOp::Ge),
    ];
    let attr = prop_oneof![Just("a"), Just("b"), Just("c")];
    let leaf = prop_oneof![
        (cmp_op, attr.clone(), 0i64..5).prop_map(|(op, a, v)| Formula::compare(
            op,
            Expression::column("R", a),
            Expression::int(v)
        )),
        attr.prop_map(|a| Formula::Missing {
            table: "R".into(),
            attribute: a.into()
        }),
    ];
    leaf.prop_recursive(4, 48, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::and(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::or(l, r)),
            inner.prop_map(Formula::not),
        ]
    })
}

fn assert_nnf(f: &Formula) -> Result<(), TestCaseError> {
    match f {
        Formula::Not(inner) => {
            prop_assert!(inner.is_predicate_leaf(), "NOT over non-leaf: {inner:?}");
        }
        Formula::And(l, r) | Formula::Or(l, r) => {
            assert_nnf(l)?;
            assert_nnf(r)?;
        }
        _ => {}
    }
    Ok(())
}

proptest! {
    /// After the negation rewrite, NOT applies only to predicate leaves.
    #[test]
    fn rewrite_produces_negation_normal_form(f in arb_formula()) {
        assert_nnf(&simulate_2vl_negation(&f))?;
    }

    /// Printed formulas reparse to the identical AST.
    #[test]
    fn formulas_round_trip_through_text(f in arb_formula()) {
        let q = Query {
            select_star: false,
            select_exprs: vec![SelectItem::new(Expression::column("R", "a"))],
            select_aggs: vec![],
            from: vec![TableRef::new("R")],
            where_clause: Some(f),
            group_by: vec![],
        };
        let text = print(&q);
        let reparsed = parse(&text, Dialect::Columnar).unwrap();
        prop_assert_eq!(reparsed, q);
    }
}
