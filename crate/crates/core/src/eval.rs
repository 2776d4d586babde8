//! Reference query evaluators.
//!
//! Three evaluation modes over classic relations — standard 3-valued logic,
//! the 2-valued variant where predicates over nulls return FALSE, and a
//! null-free textbook mode that rejects nulls in its input — plus the
//! columnar evaluator [`run_cs`] which interprets a query as its expanded
//! query set over a database in Column Normal Form.
//!
//! All evaluators are naive nested loops over immutable inputs; they exist
//! for correctness at desk scale, not speed, and are pure functions safe
//! for concurrent use.

use std::collections::BTreeMap;

use crate::ast::{ColumnRef, CompareOp, Formula, Query};
use crate::error::{Error, Result};
use crate::expand::forced_attrs;
use crate::normalize::{column_relation_name, key_relation_name, NormalizedDatabase, NormalizedGroup, OpaqueId};
use crate::relation::{Catalog, Column, Database, Relation};
use crate::scalar::{
    catalog_resolver, compare_values, eval_aggregate, eval_expression, infer_agg_type,
    infer_expr_type,
};
use crate::value::{kleene_and, kleene_not, kleene_or, ColumnType, TruthValue, Value};

/// How predicates treat null arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Predicates over nulls return UNKNOWN; Kleene connectives.
    ThreeValued,
    /// Predicates over nulls return FALSE; classical connectives.
    TwoValued,
    /// Nulls in input data are an error.
    NullFree,
}

/// Evaluate one comparison predicate under the given mode.
pub fn eval_predicate(op: CompareOp, l: &Value, r: &Value, mode: EvalMode) -> Result<TruthValue> {
    if l.is_null() || r.is_null() {
        return match mode {
            EvalMode::ThreeValued => Ok(TruthValue::Unknown),
            EvalMode::TwoValued => Ok(TruthValue::False),
            EvalMode::NullFree => Err(Error::NullInNullFreeMode),
        };
    }
    Ok(TruthValue::from(compare_values(op, l, r)?))
}

/// `IS NULL`: TRUE iff the argument is null, FALSE otherwise — never
/// UNKNOWN.
pub fn eval_is_null(v: &Value) -> TruthValue {
    TruthValue::from(v.is_null())
}

/// Call `f` once per element of the cartesian product of `0..sizes[i]`.
/// An empty `sizes` yields a single empty tuple.
fn for_each_product<F>(sizes: &[usize], mut f: F) -> Result<()>
where
    F: FnMut(&[usize]) -> Result<()>,
{
    let mut idx = vec![0usize; sizes.len()];
    if sizes.contains(&0) {
        return Ok(());
    }
    loop {
        f(&idx)?;
        let mut pos = sizes.len();
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < sizes[pos] {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Wrapper giving `Vec<Value>` a total order so group keys and rows can
/// live in ordered maps. Nulls compare equal, so they group together.
#[derive(Debug, Clone, PartialEq)]
struct RowKey(Vec<Value>);

impl PartialOrd for RowKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RowKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        crate::relation::cmp_rows(&self.0, &other.0)
    }
}

impl Eq for RowKey {}

struct Env<'a> {
    /// (binding name, relation) per FROM entry.
    sources: &'a [(String, &'a Relation)],
    rows: &'a [usize],
}

impl<'a> Env<'a> {
    fn lookup(&self, c: &ColumnRef) -> Result<Value> {
        let table = c.table.as_deref().ok_or_else(|| Error::UnresolvedColumn {
            column: c.to_string(),
            candidates: 0,
        })?;
        for (i, (binding, rel)) in self.sources.iter().enumerate() {
            if binding == table {
                let ci = rel.column_index(&c.attribute).ok_or_else(|| {
                    Error::UnknownAttribute {
                        table: binding.clone(),
                        attribute: c.attribute.clone(),
                    }
                })?;
                return Ok(rel.rows[self.rows[i]][ci].clone());
            }
        }
        Err(Error::UnknownTable(table.to_string()))
    }
}

fn eval_formula(f: &Formula, env: &Env<'_>, mode: EvalMode, db: &Database) -> Result<TruthValue> {
    let lookup = |c: &ColumnRef| env.lookup(c);
    match f {
        Formula::Compare { op, lhs, rhs } => {
            let l = eval_expression(lhs, &lookup)?;
            let r = eval_expression(rhs, &lookup)?;
            eval_predicate(*op, &l, &r, mode)
        }
        Formula::IsNull(e) => Ok(eval_is_null(&eval_expression(e, &lookup)?)),
        Formula::Missing { table, attribute } => Err(Error::Unsupported(format!(
            "{table} MISSING {attribute} has no meaning outside columnar evaluation"
        ))),
        Formula::NotIn { probe, subquery } => {
            if mode != EvalMode::NullFree {
                return Err(Error::Unsupported(
                    "NOT IN subqueries are evaluated only in null-free mode".into(),
                ));
            }
            let v = eval_expression(probe, &lookup)?;
            if v.is_null() {
                return Err(Error::NullInNullFreeMode);
            }
            let rel = db
                .get(&subquery.table)
                .ok_or_else(|| Error::UnknownTable(subquery.table.clone()))?;
            let ci = rel
                .column_index(&subquery.column)
                .ok_or_else(|| Error::UnknownAttribute {
                    table: subquery.table.clone(),
                    attribute: subquery.column.clone(),
                })?;
            let found = rel.rows.iter().any(|row| row[ci] == v);
            Ok(TruthValue::from(!found))
        }
        Formula::And(l, r) => Ok(kleene_and(
            eval_formula(l, env, mode, db)?,
            eval_formula(r, env, mode, db)?,
        )),
        Formula::Or(l, r) => Ok(kleene_or(
            eval_formula(l, env, mode, db)?,
            eval_formula(r, env, mode, db)?,
        )),
        Formula::Not(inner) => Ok(kleene_not(eval_formula(inner, env, mode, db)?)),
    }
}

/// Output column names and types for a query. Names come from the alias,
/// else the bare attribute for column references, else `col<i>`; collisions
/// are suffixed with the 1-based select position.
pub(crate) fn output_columns<F>(q: &Query, resolve: &F) -> Result<Vec<Column>>
where
    F: Fn(&ColumnRef) -> Result<ColumnType>,
{
    let mut columns: Vec<Column> = Vec::new();
    let mut seen: Vec<String> = Vec::new();
    let total = q.select_exprs.len() + q.select_aggs.len();
    let mut push = |base: String, ty: ColumnType, pos: usize, seen: &mut Vec<String>| {
        let mut name = base;
        while seen.contains(&name) {
            name = format!("{name}_{pos}");
        }
        seen.push(name.clone());
        columns.push(Column::new(name, ty));
    };
    for (i, item) in q.select_exprs.iter().enumerate() {
        let base = match &item.alias {
            Some(a) => a.clone(),
            None => match &item.expr {
                crate::ast::Expression::Column(c) => c.attribute.clone(),
                _ => format!("col{}", i + 1),
            },
        };
        let ty = infer_expr_type(&item.expr, resolve)?;
        push(base, ty, i + 1, &mut seen);
    }
    for (j, item) in q.select_aggs.iter().enumerate() {
        let pos = q.select_exprs.len() + j + 1;
        let base = match &item.alias {
            Some(a) => a.clone(),
            None => format!("col{pos}"),
        };
        let ty = infer_agg_type(&item.agg, resolve)?;
        push(base, ty, pos, &mut seen);
    }
    debug_assert_eq!(columns.len(), total);
    Ok(columns)
}

/// Identify the binding under evaluation for error reports: `t1[2], s[0]`.
fn row_label(sources: &[(String, &Relation)], rows: &[usize]) -> String {
    if sources.is_empty() {
        return "()".into();
    }
    sources
        .iter()
        .zip(rows)
        .map(|((binding, _), i)| format!("{binding}[{i}]"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn with_row_context(e: Error, sources: &[(String, &Relation)], rows: &[usize]) -> Error {
    Error::RowContext {
        row: row_label(sources, rows),
        source: Box::new(e),
    }
}

fn resolve_sources<'a>(q: &Query, db: &'a Database) -> Result<Vec<(String, &'a Relation)>> {
    let mut sources = Vec::new();
    for t in &q.from {
        let rel = db
            .get(&t.name)
            .ok_or_else(|| Error::UnknownTable(t.name.clone()))?;
        sources.push((t.binding_name().to_string(), rel));
    }
    Ok(sources)
}

/// Evaluate a bound query over a database under the given mode.
///
/// Surviving bindings are those where the WHERE formula evaluates to
/// exactly TRUE. With aggregates or GROUP BY present, surviving bindings
/// are grouped by the GROUP BY values (nulls group together); a query with
/// aggregates and no GROUP BY always produces exactly one group, even over
/// zero bindings. In null-free mode an output row containing a null (an
/// empty-input aggregate) is dropped rather than emitted.
pub fn run_query(q: &Query, db: &Database, mode: EvalMode) -> Result<Relation> {
    if q.select_star {
        return Err(Error::InvalidQuery(
            "query must be bound before evaluation".into(),
        ));
    }
    let sources = resolve_sources(q, db)?;
    if mode == EvalMode::NullFree {
        for (_, rel) in &sources {
            if rel.rows.iter().any(|row| row.iter().any(Value::is_null)) {
                return Err(Error::NullInNullFreeMode);
            }
        }
    }

    // catalog-backed resolver for output typing
    let catalog = db.catalog();
    let entries: Vec<(String, String)> = q
        .from
        .iter()
        .map(|t| (t.binding_name().to_string(), t.name.clone()))
        .collect();
    let resolve = catalog_resolver(&catalog, &entries);
    let columns = output_columns(q, &resolve)?;
    let mut out = Relation::new("output", columns);

    let sizes: Vec<usize> = sources.iter().map(|(_, r)| r.rows.len()).collect();
    let mut survivors: Vec<Vec<usize>> = Vec::new();
    for_each_product(&sizes, |idx| {
        let env = Env {
            sources: &sources,
            rows: idx,
        };
        let keep = match &q.where_clause {
            None => true,
            Some(f) => {
                eval_formula(f, &env, mode, db)
                    .map_err(|e| with_row_context(e, &sources, idx))?
                    == TruthValue::True
            }
        };
        if keep {
            survivors.push(idx.to_vec());
        }
        Ok(())
    })?;

    let grouped = !q.select_aggs.is_empty() || !q.group_by.is_empty();
    if !grouped {
        for idx in &survivors {
            let env = Env {
                sources: &sources,
                rows: idx,
            };
            let lookup = |c: &ColumnRef| env.lookup(c);
            let mut row = Vec::with_capacity(q.select_exprs.len());
            for item in &q.select_exprs {
                row.push(
                    eval_expression(&item.expr, &lookup)
                        .map_err(|e| with_row_context(e, &sources, idx))?,
                );
            }
            out.rows.push(row);
        }
        return Ok(out);
    }

    let mut groups: BTreeMap<RowKey, Vec<Vec<usize>>> = BTreeMap::new();
    if q.group_by.is_empty() {
        groups.insert(RowKey(Vec::new()), Vec::new());
    }
    for idx in survivors {
        let env = Env {
            sources: &sources,
            rows: &idx,
        };
        let mut key = Vec::with_capacity(q.group_by.len());
        for c in &q.group_by {
            key.push(env.lookup(c)?);
        }
        groups.entry(RowKey(key)).or_default().push(idx);
    }

    for (key, members) in groups {
        // plain select expressions see the group key values
        let key_lookup = |c: &ColumnRef| -> Result<Value> {
            let pos = q
                .group_by
                .iter()
                .position(|g| g == c)
                .ok_or_else(|| Error::InvalidQuery(format!("column {c} must appear in GROUP BY")))?;
            Ok(key.0[pos].clone())
        };
        let mut row = Vec::new();
        for item in &q.select_exprs {
            row.push(eval_expression(&item.expr, &key_lookup)?);
        }
        for item in &q.select_aggs {
            let inputs: Vec<Value> = if item.agg.is_star() {
                vec![Value::Int(1); members.len()]
            } else {
                let arg = item.agg.arg.as_ref().unwrap();
                let mut inputs = Vec::with_capacity(members.len());
                for idx in &members {
                    let env = Env {
                        sources: &sources,
                        rows: idx,
                    };
                    let lookup = |c: &ColumnRef| env.lookup(c);
                    inputs.push(
                        eval_expression(arg, &lookup)
                            .map_err(|e| with_row_context(e, &sources, idx))?,
                    );
                }
                inputs
            };
            row.push(eval_aggregate(&item.agg, &inputs)?);
        }
        if mode == EvalMode::NullFree && row.iter().any(Value::is_null) {
            continue;
        }
        out.rows.push(row);
    }
    Ok(out)
}

struct CsEnv<'a> {
    sources: &'a [(String, &'a NormalizedGroup)],
    ids: &'a [OpaqueId],
}

impl<'a> CsEnv<'a> {
    fn source_pos(&self, binding: &str) -> Option<usize> {
        self.sources.iter().position(|(b, _)| b == binding)
    }

    /// Attribute value of the bound tuple, or `None` when absent. Also
    /// resolves generated key references `<binding>_id.id`.
    fn lookup(&self, c: &ColumnRef) -> Result<Value> {
        let table = c.table.as_deref().ok_or_else(|| Error::UnresolvedColumn {
            column: c.to_string(),
            candidates: 0,
        })?;
        if let Some(i) = self.source_pos(table) {
            let group = self.sources[i].1;
            let entries =
                group
                    .entries
                    .get(&c.attribute)
                    .ok_or_else(|| Error::UnknownAttribute {
                        table: table.to_string(),
                        attribute: c.attribute.clone(),
                    })?;
            return Ok(entries.get(&self.ids[i]).cloned().unwrap_or(Value::Null));
        }
        for (i, (binding, _)) in self.sources.iter().enumerate() {
            if table == key_relation_name(binding) && c.attribute == "id" {
                return Ok(self.ids[i].as_value());
            }
        }
        Err(Error::UnknownTable(table.to_string()))
    }

    fn present(&self, binding: &str, attr: &str) -> Result<bool> {
        match self.lookup(&ColumnRef::new(binding, attr))? {
            Value::Null => Ok(false),
            _ => Ok(true),
        }
    }
}

/// Values of `column` in the (conceptual) normalized relation `table`.
fn subquery_values(ndb: &NormalizedDatabase, table: &str, column: &str) -> Result<Vec<Value>> {
    for (base, group) in &ndb.groups {
        if table == key_relation_name(base) {
            if column == "id" {
                return Ok(group.keys.iter().map(|id| id.as_value()).collect());
            }
            return Err(Error::UnknownAttribute {
                table: table.to_string(),
                attribute: column.to_string(),
            });
        }
        for col in &group.columns {
            if table == column_relation_name(base, &col.name) {
                let entries = &group.entries[&col.name];
                if column == "id" {
                    return Ok(entries.keys().map(|id| id.as_value()).collect());
                }
                if column == col.name {
                    return Ok(entries.values().cloned().collect());
                }
                return Err(Error::UnknownAttribute {
                    table: table.to_string(),
                    attribute: column.to_string(),
                });
            }
        }
    }
    Err(Error::UnknownTable(table.to_string()))
}

/// Two-valued formula evaluation over a partial tuple: a comparison whose
/// arguments touch an absent attribute is FALSE (it is never evaluated);
/// `MISSING` tests absence; connectives are classical.
fn eval_cs_formula(f: &Formula, env: &CsEnv<'_>, ndb: &NormalizedDatabase) -> Result<bool> {
    let lookup = |c: &ColumnRef| env.lookup(c);
    match f {
        Formula::Compare { op, lhs, rhs } => {
            let l = eval_expression(lhs, &lookup)?;
            let r = eval_expression(rhs, &lookup)?;
            Ok(eval_predicate(*op, &l, &r, EvalMode::TwoValued)? == TruthValue::True)
        }
        Formula::IsNull(_) => Err(Error::Unsupported(
            "IS NULL has no meaning under columnar evaluation".into(),
        )),
        Formula::Missing { table, attribute } => Ok(!env.present(table, attribute)?),
        Formula::NotIn { probe, subquery } => {
            let v = eval_expression(probe, &lookup)?;
            if v.is_null() {
                return Ok(false);
            }
            let values = subquery_values(ndb, &subquery.table, &subquery.column)?;
            Ok(!values.contains(&v))
        }
        Formula::And(l, r) => {
            Ok(eval_cs_formula(l, env, ndb)? & eval_cs_formula(r, env, ndb)?)
        }
        Formula::Or(l, r) => Ok(eval_cs_formula(l, env, ndb)? | eval_cs_formula(r, env, ndb)?),
        Formula::Not(inner) => Ok(!eval_cs_formula(inner, env, ndb)?),
    }
}

/// Group key wrapper: absent components sort before any value.
#[derive(Clone, PartialEq)]
struct PartialKey(Vec<Option<Value>>);

impl Eq for PartialKey {}

impl PartialOrd for PartialKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PartialKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        for (a, b) in self.0.iter().zip(other.0.iter()) {
            let ord = match (a, b) {
                (None, None) => std::cmp::Ordering::Equal,
                (None, Some(_)) => std::cmp::Ordering::Less,
                (Some(_), None) => std::cmp::Ordering::Greater,
                (Some(x), Some(y)) => x.total_cmp(y),
            };
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
        self.0.len().cmp(&other.0.len())
    }
}

/// Interpret a bound columnar-dialect query over a normalized database,
/// producing the output relation in Column Normal Form.
///
/// This realizes the expanded query set directly: each surviving key tuple
/// (or group) is an output key, and each output column holds a value
/// exactly when its member query would produce a row for that key. A
/// surviving tuple must have every attribute demanded by the formula's
/// presence analysis; see [`crate::expand::forced_attrs`].
pub fn run_cs(q: &Query, ndb: &NormalizedDatabase) -> Result<NormalizedGroup> {
    if q.select_star {
        return Err(Error::InvalidQuery(
            "query must be bound before evaluation".into(),
        ));
    }
    let mut sources: Vec<(String, &NormalizedGroup)> = Vec::new();
    for t in &q.from {
        let group = ndb
            .group(&t.name)
            .ok_or_else(|| Error::UnknownTable(t.name.clone()))?;
        sources.push((t.binding_name().to_string(), group));
    }

    // output schema, typed against the original catalogs of the groups
    let mut catalog = Catalog::new();
    for (base, group) in &ndb.groups {
        let _ = catalog.insert(base.clone(), group.columns.clone());
    }
    let entries: Vec<(String, String)> = q
        .from
        .iter()
        .map(|t| (t.binding_name().to_string(), t.name.clone()))
        .collect();
    let resolve = catalog_resolver(&catalog, &entries);
    let columns = output_columns(q, &resolve)?;
    let mut out = NormalizedGroup::new("output", columns);

    // presence analysis: attributes under unguarded negations must be
    // present for a tuple to survive
    let forced: Vec<(String, String)> = match &q.where_clause {
        None => Vec::new(),
        Some(f) => forced_attrs(f)
            .into_iter()
            .filter(|(t, _)| sources.iter().any(|(b, _)| b == t))
            .collect(),
    };

    let sizes: Vec<usize> = sources.iter().map(|(_, g)| g.keys.len()).collect();
    let mut survivors: Vec<Vec<OpaqueId>> = Vec::new();
    for_each_product(&sizes, |idx| {
        let ids: Vec<OpaqueId> = idx
            .iter()
            .enumerate()
            .map(|(i, &k)| sources[i].1.keys[k])
            .collect();
        let env = CsEnv {
            sources: &sources,
            ids: &ids,
        };
        for (t, a) in &forced {
            if !env.present(t, a)? {
                return Ok(());
            }
        }
        if let Some(f) = &q.where_clause {
            if !eval_cs_formula(f, &env, ndb)? {
                return Ok(());
            }
        }
        survivors.push(ids);
        Ok(())
    })?;

    let out_names: Vec<String> = out.columns.iter().map(|c| c.name.clone()).collect();
    let grouped = !q.select_aggs.is_empty() || !q.group_by.is_empty();

    if !grouped {
        for (i, ids) in survivors.iter().enumerate() {
            let id = OpaqueId(i as u64 + 1);
            out.keys.push(id);
            let env = CsEnv {
                sources: &sources,
                ids,
            };
            let lookup = |c: &ColumnRef| env.lookup(c);
            for (ci, item) in q.select_exprs.iter().enumerate() {
                let v = eval_expression(&item.expr, &lookup)?;
                if !v.is_null() {
                    out.entries
                        .get_mut(&out_names[ci])
                        .expect("output column exists")
                        .insert(id, v);
                }
            }
        }
        return Ok(out);
    }

    let mut groups: BTreeMap<PartialKey, Vec<Vec<OpaqueId>>> = BTreeMap::new();
    if q.group_by.is_empty() {
        groups.insert(PartialKey(Vec::new()), Vec::new());
    }
    for ids in survivors {
        let env = CsEnv {
            sources: &sources,
            ids: &ids,
        };
        let mut key = Vec::with_capacity(q.group_by.len());
        for c in &q.group_by {
            key.push(match env.lookup(c)? {
                Value::Null => None,
                v => Some(v),
            });
        }
        groups.entry(PartialKey(key)).or_default().push(ids);
    }

    for (gi, (key, members)) in groups.into_iter().enumerate() {
        let id = OpaqueId(gi as u64 + 1);
        out.keys.push(id);
        let key_lookup = |c: &ColumnRef| -> Result<Value> {
            let pos = q
                .group_by
                .iter()
                .position(|g| g == c)
                .ok_or_else(|| Error::InvalidQuery(format!("column {c} must appear in GROUP BY")))?;
            Ok(key.0[pos].clone().unwrap_or(Value::Null))
        };
        for (ci, item) in q.select_exprs.iter().enumerate() {
            let v = eval_expression(&item.expr, &key_lookup)?;
            if !v.is_null() {
                out.entries
                    .get_mut(&out_names[ci])
                    .expect("output column exists")
                    .insert(id, v);
            }
        }
        for (ai, item) in q.select_aggs.iter().enumerate() {
            let ci = q.select_exprs.len() + ai;
            let inputs: Vec<Value> = if item.agg.is_star() {
                vec![Value::Int(1); members.len()]
            } else {
                let arg = item.agg.arg.as_ref().unwrap();
                let mut inputs = Vec::with_capacity(members.len());
                for ids in &members {
                    let env = CsEnv {
                        sources: &sources,
                        ids,
                    };
                    let lookup = |c: &ColumnRef| env.lookup(c);
                    inputs.push(eval_expression(arg, &lookup)?);
                }
                inputs
            };
            // strict aggregation: an absent input anywhere (a null) makes
            // the whole output entry absent, as does an empty group for the
            // non-counting functions
            let v = eval_aggregate(&item.agg, &inputs)?;
            if !v.is_null() {
                out.entries
                    .get_mut(&out_names[ci])
                    .expect("output column exists")
                    .insert(id, v);
            }
        }
    }
    Ok(out)
}
