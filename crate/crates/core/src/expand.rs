//! Query expansion over Column Normal Form and compilation back to
//! standard null-aware SQL.
//!
//! A columnar-dialect query is interpreted as a set of expanded queries
//! over the normalized relations: all members share the formula part of
//! their WHERE clause (renamed attributes plus correlation predicates
//! `R_a.id = R_id.id`), and each member selects the key columns plus one
//! renamed output. `R MISSING a` desugars to
//! `R_id.id NOT IN (SELECT id FROM R_a)` before expansion.
//!
//! Negation is the one place the columnar reading and the null-aware
//! readings genuinely differ. [`forced_attrs`] computes which attributes a
//! tuple must have for a formula to apply to it: attributes of comparisons
//! under an odd number of NOTs, except where an explicit missing-guard
//! (`R MISSING x OR ... OR NOT P`, or dually `NOT (R MISSING x) AND ...
//! AND NOT P`) takes responsibility for the absent case. The same analysis
//! drives both the columnar evaluator and [`compile_to_3vl`], which is what
//! makes the two routes agree.

use std::collections::BTreeSet;

use crate::ast::{
    AggItem, AggregateExpression, ColumnRef, CompareOp, Expression, Formula, Query, SelectItem,
    SubquerySpec, TableRef,
};
use crate::bind::bind;
use crate::error::{Error, Result};
use crate::eval::output_columns;
use crate::normalize::{column_relation_name, key_relation_name};
use crate::relation::Catalog;
use crate::scalar::catalog_resolver;

/// One opaque key column per FROM entry, in FROM order: `R_id.id`. Aliased
/// tables use the alias as the base for generated names.
pub fn ids(tables: &[TableRef]) -> Vec<ColumnRef> {
    tables
        .iter()
        .map(|t| ColumnRef::new(key_relation_name(t.binding_name()), "id"))
        .collect()
}

fn is_binding(bindings: &[String], name: &str) -> bool {
    bindings.iter().any(|b| b == name)
}

/// Rewrite `R.a` to `R_a.a` for every reference whose table is one of the
/// FROM bindings; constants, operators, and foreign references (such as
/// generated `_id` columns) are untouched.
pub fn rename_column_ref(c: &ColumnRef, bindings: &[String]) -> ColumnRef {
    match &c.table {
        Some(t) if is_binding(bindings, t) => {
            ColumnRef::new(column_relation_name(t, &c.attribute), c.attribute.clone())
        }
        _ => c.clone(),
    }
}

pub fn rename_expression(e: &Expression, bindings: &[String]) -> Expression {
    match e {
        Expression::Constant(v) => Expression::Constant(v.clone()),
        Expression::Column(c) => Expression::Column(rename_column_ref(c, bindings)),
        Expression::BinaryOp { op, lhs, rhs } => Expression::BinaryOp {
            op: *op,
            lhs: Box::new(rename_expression(lhs, bindings)),
            rhs: Box::new(rename_expression(rhs, bindings)),
        },
    }
}

pub fn rename_aggregate(agg: &AggregateExpression, bindings: &[String]) -> AggregateExpression {
    AggregateExpression {
        func: agg.func,
        arg: agg.arg.as_ref().map(|e| rename_expression(e, bindings)),
    }
}

fn rename_formula(f: &Formula, bindings: &[String]) -> Formula {
    match f {
        Formula::Compare { op, lhs, rhs } => Formula::Compare {
            op: *op,
            lhs: rename_expression(lhs, bindings),
            rhs: rename_expression(rhs, bindings),
        },
        Formula::IsNull(e) => Formula::IsNull(rename_expression(e, bindings)),
        Formula::Missing { .. } => f.clone(),
        Formula::NotIn { probe, subquery } => Formula::NotIn {
            probe: rename_expression(probe, bindings),
            subquery: subquery.clone(),
        },
        Formula::And(l, r) => Formula::and(
            rename_formula(l, bindings),
            rename_formula(r, bindings),
        ),
        Formula::Or(l, r) => Formula::or(
            rename_formula(l, bindings),
            rename_formula(r, bindings),
        ),
        Formula::Not(inner) => Formula::not(rename_formula(inner, bindings)),
    }
}

/// Replace every `R MISSING a` with
/// `R_id.id NOT IN (SELECT id FROM R_a)`. Purely local; nothing else
/// changes. The probe uses the binding name (an alias keeps its generated
/// `_id` relation in scope through the FROM list), while the subquery must
/// name the real normalized relation, so aliases are resolved through
/// `from`.
pub fn desugar_missing(f: &Formula, from: &[TableRef]) -> Formula {
    match f {
        Formula::Missing { table, attribute } => {
            let real = from
                .iter()
                .find(|t| t.binding_name() == table)
                .map(|t| t.name.as_str())
                .unwrap_or(table.as_str());
            Formula::NotIn {
                probe: Expression::Column(ColumnRef::new(key_relation_name(table), "id")),
                subquery: SubquerySpec {
                    column: "id".into(),
                    table: column_relation_name(real, attribute),
                },
            }
        }
        Formula::And(l, r) => {
            Formula::and(desugar_missing(l, from), desugar_missing(r, from))
        }
        Formula::Or(l, r) => Formula::or(desugar_missing(l, from), desugar_missing(r, from)),
        Formula::Not(inner) => Formula::not(desugar_missing(inner, from)),
        other => other.clone(),
    }
}

fn compare_leaf_attrs(f: &Formula) -> Vec<(String, String)> {
    let mut refs = Vec::new();
    if let Formula::Compare { lhs, rhs, .. } = f {
        let mut cols = Vec::new();
        lhs.column_refs(&mut cols);
        rhs.column_refs(&mut cols);
        for c in cols {
            if let Some(t) = &c.table {
                let pair = (t.clone(), c.attribute.clone());
                if !refs.contains(&pair) {
                    refs.push(pair);
                }
            }
        }
    }
    refs
}

fn flatten<'a>(f: &'a Formula, or_chain: bool, out: &mut Vec<&'a Formula>) {
    match f {
        Formula::Or(l, r) if or_chain => {
            flatten(l, true, out);
            flatten(r, true, out);
        }
        Formula::And(l, r) if !or_chain => {
            flatten(l, false, out);
            flatten(r, false, out);
        }
        other => out.push(other),
    }
}

fn collect_attrs(f: &Formula, negated: bool, only_negative: bool, out: &mut BTreeSet<(String, String)>) {
    match f {
        Formula::Compare { .. } => {
            if negated || !only_negative {
                out.extend(compare_leaf_attrs(f));
            }
        }
        Formula::IsNull(_) | Formula::Missing { .. } | Formula::NotIn { .. } => {}
        Formula::Not(inner) => collect_attrs(inner, !negated, only_negative, out),
        Formula::Or(..) if !negated => {
            let mut arms = Vec::new();
            flatten(f, true, &mut arms);
            let guards: BTreeSet<(String, String)> = arms
                .iter()
                .filter_map(|a| match a {
                    Formula::Missing { table, attribute } => {
                        Some((table.clone(), attribute.clone()))
                    }
                    _ => None,
                })
                .collect();
            for arm in arms {
                if excused(arm, &guards) {
                    continue;
                }
                collect_attrs(arm, false, only_negative, out);
            }
        }
        Formula::And(..) if !negated => {
            let mut arms = Vec::new();
            flatten(f, false, &mut arms);
            let guards: BTreeSet<(String, String)> = arms
                .iter()
                .filter_map(|a| match a {
                    Formula::Not(inner) => match &**inner {
                        Formula::Missing { table, attribute } => {
                            Some((table.clone(), attribute.clone()))
                        }
                        _ => None,
                    },
                    _ => None,
                })
                .collect();
            for arm in arms {
                if excused(arm, &guards) {
                    continue;
                }
                collect_attrs(arm, false, only_negative, out);
            }
        }
        Formula::And(l, r) | Formula::Or(l, r) => {
            collect_attrs(l, negated, only_negative, out);
            collect_attrs(r, negated, only_negative, out);
        }
    }
}

/// True when `arm` is a negated comparison all of whose attributes are
/// covered by the missing-guards of the surrounding chain.
fn excused(arm: &Formula, guards: &BTreeSet<(String, String)>) -> bool {
    if guards.is_empty() {
        return false;
    }
    if let Formula::Not(inner) = arm {
        if matches!(**inner, Formula::Compare { .. }) {
            let attrs = compare_leaf_attrs(inner);
            return !attrs.is_empty() && attrs.iter().all(|p| guards.contains(p));
        }
    }
    false
}

/// Attributes a tuple must have for the formula to apply to it: attributes
/// of comparisons under an odd number of negations, except comparisons
/// whose absent case is handled by an explicit missing-guard.
pub fn forced_attrs(f: &Formula) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    collect_attrs(f, false, true, &mut out);
    out
}

/// Attributes that receive correlation predicates in the printed expansion:
/// every comparison attribute at any polarity, except guard-excused ones.
fn correlated_formula_attrs(f: &Formula) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    collect_attrs(f, false, false, &mut out);
    out
}

/// Push negations to the leaves by De Morgan's laws, cancelling double
/// negations, and replace each surviving negated comparison `NOT P` over
/// attributes `R.x, S.y, ...` with
/// `(R MISSING x) OR (S MISSING y) OR ... OR NOT P`, which simulates the
/// two-valued behavior where a predicate over an absent value is false and
/// its negation true.
pub fn simulate_2vl_negation(f: &Formula) -> Formula {
    rewrite_nnf(f, false)
}

fn rewrite_nnf(f: &Formula, negated: bool) -> Formula {
    match f {
        Formula::And(l, r) => {
            if negated {
                Formula::or(rewrite_nnf(l, true), rewrite_nnf(r, true))
            } else {
                Formula::and(rewrite_nnf(l, false), rewrite_nnf(r, false))
            }
        }
        Formula::Or(l, r) => {
            if negated {
                Formula::and(rewrite_nnf(l, true), rewrite_nnf(r, true))
            } else {
                Formula::or(rewrite_nnf(l, false), rewrite_nnf(r, false))
            }
        }
        Formula::Not(inner) => rewrite_nnf(inner, !negated),
        Formula::Compare { .. } => {
            if !negated {
                return f.clone();
            }
            let mut parts: Vec<Formula> = compare_leaf_attrs(f)
                .into_iter()
                .map(|(table, attribute)| Formula::Missing { table, attribute })
                .collect();
            parts.push(Formula::not(f.clone()));
            Formula::disjoin(parts).expect("at least the negated comparison")
        }
        leaf => {
            if negated {
                Formula::not(leaf.clone())
            } else {
                leaf.clone()
            }
        }
    }
}

/// One member of an expanded query set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedOutput {
    /// Output column name this member computes.
    pub name: String,
    /// The full member query over the normalized relations.
    pub query: Query,
}

/// The expanded queries of a columnar-dialect query: the shared FROM core,
/// formula, and GROUP BY, plus one member query per output column. Each
/// member extends the shared parts with the correlation predicates for its
/// own output attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedQuerySet {
    pub shared_from: Vec<TableRef>,
    pub shared_where: Option<Formula>,
    pub shared_group_by: Vec<ColumnRef>,
    pub outputs: Vec<ExpandedOutput>,
}

fn correlation_predicate(binding: &str, attr: &str) -> Formula {
    Formula::Compare {
        op: CompareOp::Eq,
        lhs: Expression::Column(ColumnRef::new(column_relation_name(binding, attr), "id")),
        rhs: Expression::Column(ColumnRef::new(key_relation_name(binding), "id")),
    }
}

fn expr_attrs(e: &Expression, out: &mut BTreeSet<(String, String)>) {
    let mut cols = Vec::new();
    e.column_refs(&mut cols);
    for c in cols {
        if let Some(t) = &c.table {
            out.insert((t.clone(), c.attribute.clone()));
        }
    }
}

/// Order attribute pairs by FROM position, then by catalog column order.
fn ordered_attrs(
    attrs: &BTreeSet<(String, String)>,
    q: &Query,
    catalog: &Catalog,
) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for t in &q.from {
        let binding = t.binding_name();
        let columns = catalog
            .get(&t.name)
            .ok_or_else(|| Error::UnknownTable(t.name.clone()))?;
        for col in columns {
            let pair = (binding.to_string(), col.name.clone());
            if attrs.contains(&pair) && !out.contains(&pair) {
                out.push(pair);
            }
        }
    }
    // anything left over references an unknown attribute
    for pair in attrs {
        if !out.contains(pair) {
            return Err(Error::UnknownAttribute {
                table: pair.0.clone(),
                attribute: pair.1.clone(),
            });
        }
    }
    Ok(out)
}

/// Generated FROM list for one member: per original table in FROM order,
/// the referenced column relations in catalog order, then the key relation.
fn member_from(
    q: &Query,
    catalog: &Catalog,
    attrs: &BTreeSet<(String, String)>,
) -> Result<Vec<TableRef>> {
    let mut out = Vec::new();
    for t in &q.from {
        let binding = t.binding_name();
        let columns = catalog
            .get(&t.name)
            .ok_or_else(|| Error::UnknownTable(t.name.clone()))?;
        for col in columns {
            if attrs.contains(&(binding.to_string(), col.name.clone())) {
                let generated = column_relation_name(binding, &col.name);
                if t.alias.is_some() {
                    out.push(TableRef::aliased(
                        column_relation_name(&t.name, &col.name),
                        generated,
                    ));
                } else {
                    out.push(TableRef::new(generated));
                }
            }
        }
        if t.alias.is_some() {
            out.push(TableRef::aliased(
                key_relation_name(&t.name),
                key_relation_name(binding),
            ));
        } else {
            out.push(TableRef::new(key_relation_name(binding)));
        }
    }
    Ok(out)
}

struct ExpansionCtx<'a> {
    q: &'a Query,
    catalog: &'a Catalog,
    bindings: Vec<String>,
    /// Renamed, desugared formula.
    formula: Option<Formula>,
    /// Attributes correlated in the shared WHERE: formula attributes plus
    /// GROUP BY attributes.
    shared_attrs: BTreeSet<(String, String)>,
    group_by: Vec<ColumnRef>,
    grouped: bool,
}

impl<'a> ExpansionCtx<'a> {
    fn build(q: &'a Query, catalog: &'a Catalog) -> Result<Self> {
        if q.select_star {
            return Err(Error::InvalidQuery(
                "query must be bound before expansion".into(),
            ));
        }
        for t in &q.from {
            if !catalog.contains(&t.name) {
                return Err(Error::UnknownTable(t.name.clone()));
            }
        }
        let bindings: Vec<String> = q.from.iter().map(|t| t.binding_name().to_string()).collect();

        let mut shared_attrs = BTreeSet::new();
        let formula = match &q.where_clause {
            None => None,
            Some(f) => {
                if formula_contains_is_null(f) {
                    return Err(Error::Dialect {
                        construct: "IS NULL".into(),
                        dialect: crate::ast::Dialect::Columnar.to_string(),
                    });
                }
                shared_attrs.extend(correlated_formula_attrs(f));
                Some(rename_formula(&desugar_missing(f, &q.from), &bindings))
            }
        };
        for c in &q.group_by {
            if let Some(t) = &c.table {
                shared_attrs.insert((t.clone(), c.attribute.clone()));
            }
        }
        let group_by: Vec<ColumnRef> = q
            .group_by
            .iter()
            .map(|c| rename_column_ref(c, &bindings))
            .collect();
        let grouped = !q.select_aggs.is_empty() || !q.group_by.is_empty();
        Ok(ExpansionCtx {
            q,
            catalog,
            bindings,
            formula,
            shared_attrs,
            group_by,
            grouped,
        })
    }

    /// WHERE clause for a member with the given extra output attributes.
    fn member_where(&self, output_attrs: &BTreeSet<(String, String)>) -> Result<Option<Formula>> {
        let mut all = self.shared_attrs.clone();
        all.extend(output_attrs.iter().cloned());
        let mut parts: Vec<Formula> = ordered_attrs(&all, self.q, self.catalog)?
            .into_iter()
            .map(|(t, a)| correlation_predicate(&t, &a))
            .collect();
        if let Some(f) = &self.formula {
            parts.push(f.clone());
        }
        Ok(Formula::conjoin(parts))
    }

    fn member_query(
        &self,
        output_attrs: &BTreeSet<(String, String)>,
        select_exprs: Vec<SelectItem>,
        select_aggs: Vec<AggItem>,
    ) -> Result<Query> {
        let mut all = self.shared_attrs.clone();
        all.extend(output_attrs.iter().cloned());
        Ok(Query {
            select_star: false,
            select_exprs,
            select_aggs,
            from: member_from(self.q, self.catalog, &all)?,
            where_clause: self.member_where(output_attrs)?,
            group_by: self.group_by.clone(),
        })
    }

    /// Select prefix shared by all members: the key columns for plain
    /// queries, the renamed grouping columns for grouped ones.
    fn select_prefix(&self) -> Vec<SelectItem> {
        if self.grouped {
            self.group_by
                .iter()
                .map(|c| SelectItem::new(Expression::Column(c.clone())))
                .collect()
        } else {
            ids(&self.q.from)
                .into_iter()
                .map(|c| SelectItem::new(Expression::Column(c)))
                .collect()
        }
    }
}

fn formula_contains_is_null(f: &Formula) -> bool {
    match f {
        Formula::IsNull(_) => true,
        Formula::And(l, r) | Formula::Or(l, r) => {
            formula_contains_is_null(l) || formula_contains_is_null(r)
        }
        Formula::Not(inner) => formula_contains_is_null(inner),
        _ => false,
    }
}

/// Expand a bound columnar-dialect query into its expanded query set over
/// the normalized relations named by the catalog.
pub fn expand(q: &Query, catalog: &Catalog) -> Result<ExpandedQuerySet> {
    let ctx = ExpansionCtx::build(q, catalog)?;

    // output names follow the same scheme as the evaluators
    let entries: Vec<(String, String)> = q
        .from
        .iter()
        .map(|t| (t.binding_name().to_string(), t.name.clone()))
        .collect();
    let resolve = catalog_resolver(catalog, &entries);
    let columns = output_columns(q, &resolve)?;

    let mut outputs = Vec::new();
    for (i, item) in q.select_exprs.iter().enumerate() {
        let mut output_attrs = BTreeSet::new();
        expr_attrs(&item.expr, &mut output_attrs);
        let mut select = ctx.select_prefix();
        select.push(SelectItem {
            expr: rename_expression(&item.expr, &ctx.bindings),
            alias: item.alias.clone(),
        });
        outputs.push(ExpandedOutput {
            name: columns[i].name.clone(),
            query: ctx.member_query(&output_attrs, select, Vec::new())?,
        });
    }
    for (j, item) in q.select_aggs.iter().enumerate() {
        let mut output_attrs = BTreeSet::new();
        if let Some(arg) = &item.agg.arg {
            expr_attrs(arg, &mut output_attrs);
        }
        let select = ctx.select_prefix();
        let aggs = vec![AggItem {
            agg: rename_aggregate(&item.agg, &ctx.bindings),
            alias: item.alias.clone(),
        }];
        outputs.push(ExpandedOutput {
            name: columns[q.select_exprs.len() + j].name.clone(),
            query: ctx.member_query(&output_attrs, select, aggs)?,
        });
    }

    Ok(ExpandedQuerySet {
        shared_from: member_from(q, catalog, &ctx.shared_attrs)?,
        shared_where: ctx.member_where(&BTreeSet::new())?,
        shared_group_by: ctx.group_by.clone(),
        outputs,
    })
}

pub fn missing_to_is_null(f: &Formula) -> Formula {
    match f {
        Formula::Missing { table, attribute } => Formula::IsNull(Expression::Column(
            ColumnRef::new(table.clone(), attribute.clone()),
        )),
        Formula::And(l, r) => {
            Formula::and(missing_to_is_null(l), missing_to_is_null(r))
        }
        Formula::Or(l, r) => Formula::or(missing_to_is_null(l), missing_to_is_null(r)),
        Formula::Not(inner) => Formula::not(missing_to_is_null(inner)),
        other => other.clone(),
    }
}

fn formula_contains_not_in(f: &Formula) -> bool {
    match f {
        Formula::NotIn { .. } => true,
        Formula::And(l, r) | Formula::Or(l, r) => {
            formula_contains_not_in(l) || formula_contains_not_in(r)
        }
        Formula::Not(inner) => formula_contains_not_in(inner),
        _ => false,
    }
}

/// Compile a columnar-dialect query to a single standard query over the
/// original (un-normalized) tables whose 3-valued-logic result, once
/// normalized, equals the columnar result of `q`.
///
/// Attribute references stay as written and `R MISSING a` becomes
/// `R.a IS NULL`. Positive comparisons need no guard (a null argument
/// already yields non-TRUE under 3-valued logic); the attributes reported
/// by [`forced_attrs`] — unguarded negated comparisons — get an explicit
/// `NOT R.a IS NULL` conjunct so the compiled query drops absent rows
/// exactly where the columnar semantics does. Output size is linear in the
/// size of `q`.
pub fn compile_to_3vl(q: &Query, catalog: &Catalog) -> Result<Query> {
    // bind a copy for analysis; emitted syntax keeps the original shape
    let bound = bind(q, catalog)?;
    let mut guards = Vec::new();
    if let Some(f) = &bound.where_clause {
        if formula_contains_is_null(f) {
            return Err(Error::Dialect {
                construct: "IS NULL".into(),
                dialect: crate::ast::Dialect::Columnar.to_string(),
            });
        }
        if formula_contains_not_in(f) {
            return Err(Error::Unsupported(
                "NOT IN subqueries cannot be compiled; they arise only in expanded output".into(),
            ));
        }
        let forced = forced_attrs(f);
        for (t, a) in ordered_attrs(&forced, &bound, catalog)? {
            guards.push(Formula::not(Formula::IsNull(Expression::Column(
                ColumnRef::new(t, a),
            ))));
        }
    }
    let mut parts = guards;
    if let Some(f) = &q.where_clause {
        parts.push(missing_to_is_null(f));
    }
    Ok(Query {
        select_star: q.select_star,
        select_exprs: q.select_exprs.clone(),
        select_aggs: q.select_aggs.clone(),
        from: q.from.clone(),
        where_clause: Formula::conjoin(parts),
        group_by: q.group_by.clone(),
    })
}
