//! Null-propagating expression evaluation and aggregates.
//!
//! Expressions are strict in nulls: if any referenced input is null the
//! result is null, before any operator (including division) is applied.
//! Aggregates follow the same blanket rule — any null input makes the
//! output null — which deliberately differs from the ANSI ignore-nulls
//! behavior. `COUNT(*)` counts rows and never sees nulls; an empty group
//! yields COUNT = 0 and null for the other functions.

use crate::ast::{AggFunc, AggregateExpression, BinOp, ColumnRef, CompareOp, Expression};
use crate::error::{Error, Result};
use crate::relation::Catalog;
use crate::value::{ColumnType, Value};

/// Apply a binary operator to two non-null values.
pub fn apply_binop(op: BinOp, l: &Value, r: &Value) -> Result<Value> {
    use Value::*;
    match op {
        BinOp::Concat => match (l, r) {
            (Str(a), Str(b)) => Ok(Str(format!("{a}{b}"))),
            _ => Err(Error::TypeMismatch(format!(
                "cannot concatenate {l} and {r}"
            ))),
        },
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
            let mismatch = || Error::TypeMismatch(format!("cannot apply {} to {l} and {r}", op.symbol()));
            match (l, r) {
                (Int(a), Int(b)) => match op {
                    BinOp::Add => Ok(Int(a.wrapping_add(*b))),
                    BinOp::Sub => Ok(Int(a.wrapping_sub(*b))),
                    BinOp::Mul => Ok(Int(a.wrapping_mul(*b))),
                    BinOp::Div => {
                        if *b == 0 {
                            Err(Error::DivisionByZero)
                        } else {
                            Ok(Int(a.wrapping_div(*b)))
                        }
                    }
                    BinOp::Concat => unreachable!(),
                },
                (Int(_), Float(_)) | (Float(_), Int(_)) | (Float(_), Float(_)) => {
                    let a = numeric(l).ok_or_else(mismatch)?;
                    let b = numeric(r).ok_or_else(mismatch)?;
                    match op {
                        BinOp::Add => Ok(Float(a + b)),
                        BinOp::Sub => Ok(Float(a - b)),
                        BinOp::Mul => Ok(Float(a * b)),
                        BinOp::Div => {
                            if b == 0.0 {
                                Err(Error::DivisionByZero)
                            } else {
                                Ok(Float(a / b))
                            }
                        }
                        BinOp::Concat => unreachable!(),
                    }
                }
                _ => Err(mismatch()),
            }
        }
    }
}

fn numeric(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

/// Compare two non-null values. Ints and floats compare numerically (floats
/// with exact equality, no epsilon); strings lexicographically; booleans
/// with false < true. Cross-type comparisons otherwise are type errors.
pub fn compare_values(op: CompareOp, l: &Value, r: &Value) -> Result<bool> {
    use std::cmp::Ordering;
    let ord = match (l, r) {
        (Value::Int(a), Value::Int(b)) => a.cmp(b),
        (Value::Str(a), Value::Str(b)) => a.cmp(b),
        (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
        _ => match (numeric(l), numeric(r)) {
            (Some(a), Some(b)) => a.partial_cmp(&b).unwrap_or(Ordering::Equal),
            _ => {
                return Err(Error::TypeMismatch(format!(
                    "cannot compare {l} and {r}"
                )))
            }
        },
    };
    Ok(match op {
        CompareOp::Eq => ord == Ordering::Equal,
        CompareOp::Ne => ord != Ordering::Equal,
        CompareOp::Lt => ord == Ordering::Less,
        CompareOp::Le => ord != Ordering::Greater,
        CompareOp::Gt => ord == Ordering::Greater,
        CompareOp::Ge => ord != Ordering::Less,
    })
}

/// Evaluate an expression under a binding from column references to values.
///
/// Strict null propagation: if any referenced input binds null (or a
/// constant is null), the result is null and no operator is applied.
pub fn eval_expression<F>(e: &Expression, lookup: &F) -> Result<Value>
where
    F: Fn(&ColumnRef) -> Result<Value>,
{
    if has_null_input(e, lookup)? {
        return Ok(Value::Null);
    }
    eval_non_null(e, lookup)
}

fn has_null_input<F>(e: &Expression, lookup: &F) -> Result<bool>
where
    F: Fn(&ColumnRef) -> Result<Value>,
{
    match e {
        Expression::Constant(v) => Ok(v.is_null()),
        Expression::Column(c) => Ok(lookup(c)?.is_null()),
        Expression::BinaryOp { lhs, rhs, .. } => {
            Ok(has_null_input(lhs, lookup)? || has_null_input(rhs, lookup)?)
        }
    }
}

fn eval_non_null<F>(e: &Expression, lookup: &F) -> Result<Value>
where
    F: Fn(&ColumnRef) -> Result<Value>,
{
    match e {
        Expression::Constant(v) => Ok(v.clone()),
        Expression::Column(c) => lookup(c),
        Expression::BinaryOp { op, lhs, rhs } => {
            let l = eval_non_null(lhs, lookup)?;
            let r = eval_non_null(rhs, lookup)?;
            apply_binop(*op, &l, &r)
        }
    }
}

/// Apply an aggregate to the evaluated per-row inputs of one group. For
/// `COUNT(*)` the inputs are one placeholder per row.
pub fn eval_aggregate(agg: &AggregateExpression, inputs: &[Value]) -> Result<Value> {
    if agg.is_star() {
        return Ok(Value::Int(inputs.len() as i64));
    }
    if inputs.iter().any(Value::is_null) {
        return Ok(Value::Null);
    }
    match agg.func {
        AggFunc::Count => Ok(Value::Int(inputs.len() as i64)),
        AggFunc::Sum | AggFunc::Avg => {
            if inputs.is_empty() {
                return Ok(Value::Null);
            }
            let all_int = inputs.iter().all(|v| matches!(v, Value::Int(_)));
            let mut sum = 0.0;
            for v in inputs {
                sum += numeric(v).ok_or_else(|| {
                    Error::TypeMismatch(format!("{} requires numeric inputs, got {v}", agg.func.name()))
                })?;
            }
            if agg.func == AggFunc::Avg {
                Ok(Value::Float(sum / inputs.len() as f64))
            } else if all_int {
                let mut isum: i64 = 0;
                for v in inputs {
                    if let Value::Int(i) = v {
                        isum = isum.wrapping_add(*i);
                    }
                }
                Ok(Value::Int(isum))
            } else {
                Ok(Value::Float(sum))
            }
        }
        AggFunc::Min | AggFunc::Max => {
            if inputs.is_empty() {
                return Ok(Value::Null);
            }
            let mut best = inputs[0].clone();
            for v in &inputs[1..] {
                let replace = if agg.func == AggFunc::Min {
                    compare_values(CompareOp::Lt, v, &best)?
                } else {
                    compare_values(CompareOp::Gt, v, &best)?
                };
                if replace {
                    best = v.clone();
                }
            }
            Ok(best)
        }
    }
}

/// Static result type of an expression, given column types from the catalog
/// through `resolve`.
pub fn infer_expr_type<F>(e: &Expression, resolve: &F) -> Result<ColumnType>
where
    F: Fn(&ColumnRef) -> Result<ColumnType>,
{
    match e {
        Expression::Constant(v) => v.column_type().ok_or_else(|| {
            Error::TypeMismatch("cannot infer a type for a bare NULL constant".into())
        }),
        Expression::Column(c) => resolve(c),
        Expression::BinaryOp { op, lhs, rhs } => {
            let l = infer_expr_type(lhs, resolve)?;
            let r = infer_expr_type(rhs, resolve)?;
            match op {
                BinOp::Concat => {
                    if l == ColumnType::Str && r == ColumnType::Str {
                        Ok(ColumnType::Str)
                    } else {
                        Err(Error::TypeMismatch(format!(
                            "cannot concatenate {l} and {r}"
                        )))
                    }
                }
                _ => match (l, r) {
                    (ColumnType::Int, ColumnType::Int) => Ok(ColumnType::Int),
                    (ColumnType::Int, ColumnType::Float)
                    | (ColumnType::Float, ColumnType::Int)
                    | (ColumnType::Float, ColumnType::Float) => Ok(ColumnType::Float),
                    _ => Err(Error::TypeMismatch(format!(
                        "cannot apply {} to {l} and {r}",
                        op.symbol()
                    ))),
                },
            }
        }
    }
}

/// Static result type of an aggregate output.
pub fn infer_agg_type<F>(agg: &AggregateExpression, resolve: &F) -> Result<ColumnType>
where
    F: Fn(&ColumnRef) -> Result<ColumnType>,
{
    match (&agg.arg, agg.func) {
        (None, _) | (_, AggFunc::Count) => Ok(ColumnType::Int),
        (Some(_), AggFunc::Avg) => Ok(ColumnType::Float),
        (Some(e), _) => infer_expr_type(e, resolve),
    }
}

/// Column-type resolver backed by a catalog and a FROM list of
/// (binding name, table name) pairs.
pub fn catalog_resolver<'a>(
    catalog: &'a Catalog,
    entries: &'a [(String, String)],
) -> impl Fn(&ColumnRef) -> Result<ColumnType> + 'a {
    move |c: &ColumnRef| {
        let binding = c.table.as_deref().ok_or_else(|| Error::UnresolvedColumn {
            column: c.to_string(),
            candidates: 0,
        })?;
        let table = entries
            .iter()
            .find(|(b, _)| b == binding)
            .map(|(_, t)| t.as_str())
            .ok_or_else(|| Error::UnknownTable(binding.to_string()))?;
        let columns = catalog
            .get(table)
            .ok_or_else(|| Error::UnknownTable(table.to_string()))?;
        columns
            .iter()
            .find(|col| col.name == c.attribute)
            .map(|col| col.ty)
            .ok_or_else(|| Error::UnknownAttribute {
                table: binding.to_string(),
                attribute: c.attribute.clone(),
            })
    }
}
