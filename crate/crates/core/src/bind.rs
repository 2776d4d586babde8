//! Name resolution against a catalog.
//!
//! Binding expands `SELECT *` in catalog column order, resolves every
//! column reference to exactly one FROM entry, and enforces the grouping
//! invariant: when aggregates (or a GROUP BY) are present, every column
//! reference in a plain select expression must appear in the GROUP BY list.

use crate::ast::{ColumnRef, Expression, Formula, Query, SelectItem};
use crate::error::{Error, Result};
use crate::relation::Catalog;

struct Binder<'a> {
    catalog: &'a Catalog,
    /// (binding name, table name) per FROM entry, in order.
    entries: Vec<(String, String)>,
}

impl<'a> Binder<'a> {
    fn resolve(&self, c: &ColumnRef) -> Result<ColumnRef> {
        match &c.table {
            Some(t) => {
                let matches: Vec<_> = self
                    .entries
                    .iter()
                    .filter(|(binding, _)| binding == t)
                    .collect();
                if matches.len() != 1 {
                    return Err(Error::UnresolvedColumn {
                        column: c.to_string(),
                        candidates: matches.len(),
                    });
                }
                let (binding, table) = matches[0];
                let columns = self
                    .catalog
                    .get(table)
                    .ok_or_else(|| Error::UnknownTable(table.clone()))?;
                if !columns.iter().any(|col| col.name == c.attribute) {
                    return Err(Error::UnknownAttribute {
                        table: binding.clone(),
                        attribute: c.attribute.clone(),
                    });
                }
                Ok(ColumnRef::new(binding.clone(), c.attribute.clone()))
            }
            None => {
                let mut matches = Vec::new();
                for (binding, table) in &self.entries {
                    let columns = self
                        .catalog
                        .get(table)
                        .ok_or_else(|| Error::UnknownTable(table.clone()))?;
                    if columns.iter().any(|col| col.name == c.attribute) {
                        matches.push(binding.clone());
                    }
                }
                if matches.len() != 1 {
                    return Err(Error::UnresolvedColumn {
                        column: c.attribute.clone(),
                        candidates: matches.len(),
                    });
                }
                Ok(ColumnRef::new(matches.remove(0), c.attribute.clone()))
            }
        }
    }

    fn bind_expr(&self, e: &Expression) -> Result<Expression> {
        Ok(match e {
            Expression::Constant(v) => Expression::Constant(v.clone()),
            Expression::Column(c) => Expression::Column(self.resolve(c)?),
            Expression::BinaryOp { op, lhs, rhs } => Expression::BinaryOp {
                op: *op,
                lhs: Box::new(self.bind_expr(lhs)?),
                rhs: Box::new(self.bind_expr(rhs)?),
            },
        })
    }

    fn bind_formula(&self, f: &Formula) -> Result<Formula> {
        Ok(match f {
            Formula::Compare { op, lhs, rhs } => Formula::Compare {
                op: *op,
                lhs: self.bind_expr(lhs)?,
                rhs: self.bind_expr(rhs)?,
            },
            Formula::IsNull(e) => Formula::IsNull(self.bind_expr(e)?),
            Formula::Missing { table, attribute } => {
                // the table side of MISSING must name a FROM binding
                let matches: Vec<_> = self
                    .entries
                    .iter()
                    .filter(|(binding, _)| binding == table)
                    .collect();
                if matches.len() != 1 {
                    return Err(Error::UnresolvedColumn {
                        column: format!("{table} MISSING {attribute}"),
                        candidates: matches.len(),
                    });
                }
                let (_, real) = matches[0];
                let columns = self
                    .catalog
                    .get(real)
                    .ok_or_else(|| Error::UnknownTable(real.clone()))?;
                if !columns.iter().any(|col| col.name == *attribute) {
                    return Err(Error::UnknownAttribute {
                        table: table.clone(),
                        attribute: attribute.clone(),
                    });
                }
                Formula::Missing {
                    table: table.clone(),
                    attribute: attribute.clone(),
                }
            }
            Formula::NotIn { probe, subquery } => {
                let columns = self
                    .catalog
                    .get(&subquery.table)
                    .ok_or_else(|| Error::UnknownTable(subquery.table.clone()))?;
                if !columns.iter().any(|col| col.name == subquery.column) {
                    return Err(Error::UnknownAttribute {
                        table: subquery.table.clone(),
                        attribute: subquery.column.clone(),
                    });
                }
                Formula::NotIn {
                    probe: self.bind_expr(probe)?,
                    subquery: subquery.clone(),
                }
            }
            Formula::And(l, r) => Formula::and(self.bind_formula(l)?, self.bind_formula(r)?),
            Formula::Or(l, r) => Formula::or(self.bind_formula(l)?, self.bind_formula(r)?),
            Formula::Not(inner) => Formula::not(self.bind_formula(inner)?),
        })
    }
}

/// Bind `q` against `catalog`, returning a query with no `*` marker and
/// every column reference carrying a resolved table binding.
pub fn bind(q: &Query, catalog: &Catalog) -> Result<Query> {
    let mut entries = Vec::new();
    for t in &q.from {
        if !catalog.contains(&t.name) {
            return Err(Error::UnknownTable(t.name.clone()));
        }
        entries.push((t.binding_name().to_string(), t.name.clone()));
    }
    let binder = Binder { catalog, entries };

    let mut select_exprs = Vec::new();
    if q.select_star {
        if !q.select_exprs.is_empty() || !q.select_aggs.is_empty() {
            return Err(Error::InvalidQuery(
                "`*` cannot be combined with other select items".into(),
            ));
        }
        for t in &q.from {
            let columns = catalog
                .get(&t.name)
                .ok_or_else(|| Error::UnknownTable(t.name.clone()))?;
            for col in columns {
                select_exprs.push(SelectItem::new(Expression::column(
                    t.binding_name(),
                    col.name.clone(),
                )));
            }
        }
    } else {
        for item in &q.select_exprs {
            select_exprs.push(SelectItem {
                expr: binder.bind_expr(&item.expr)?,
                alias: item.alias.clone(),
            });
        }
    }

    let mut select_aggs = Vec::new();
    for item in &q.select_aggs {
        let arg = match &item.agg.arg {
            None => None,
            Some(e) => Some(binder.bind_expr(e)?),
        };
        select_aggs.push(crate::ast::AggItem {
            agg: crate::ast::AggregateExpression {
                func: item.agg.func,
                arg,
            },
            alias: item.alias.clone(),
        });
    }

    let where_clause = match &q.where_clause {
        None => None,
        Some(f) => Some(binder.bind_formula(f)?),
    };

    let mut group_by = Vec::new();
    for c in &q.group_by {
        group_by.push(binder.resolve(c)?);
    }

    // grouping invariant: with aggregates or GROUP BY present, plain select
    // expressions may only reference grouped columns
    if !select_aggs.is_empty() || !group_by.is_empty() {
        for item in &select_exprs {
            let mut refs = Vec::new();
            item.expr.column_refs(&mut refs);
            for r in refs {
                if !group_by.contains(r) {
                    return Err(Error::InvalidQuery(format!(
                        "column {r} must appear in GROUP BY"
                    )));
                }
            }
        }
    }

    Ok(Query {
        select_star: false,
        select_exprs,
        select_aggs,
        from: q.from.clone(),
        where_clause,
        group_by,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::Dialect;
    use crate::parse::parse;
    use crate::relation::Column;
    use crate::value::ColumnType;

    fn catalog() -> Catalog {
        let mut c = Catalog::new();
        c.insert(
            "R",
            vec![
                Column::new("Author", ColumnType::Str),
                Column::new("Institute", ColumnType::Str),
                Column::new("Address", ColumnType::Str),
            ],
        )
        .unwrap();
        c.insert(
            "S",
            vec![
                Column::new("Author", ColumnType::Str),
                Column::new("k", ColumnType::Int),
            ],
        )
        .unwrap();
        c
    }

    #[test]
    fn star_expands_in_catalog_order() {
        let q = parse("SELECT * FROM R", Dialect::ThreeValued).unwrap();
        let b = bind(&q, &catalog()).unwrap();
        assert!(!b.select_star);
        let names: Vec<_> = b
            .select_exprs
            .iter()
            .map(|i| match &i.expr {
                Expression::Column(c) => c.attribute.clone(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(names, vec!["Author", "Institute", "Address"]);
    }

    #[test]
    fn unqualified_column_resolves_to_single_table() {
        let q = parse("SELECT Address FROM R", Dialect::ThreeValued).unwrap();
        let b = bind(&q, &catalog()).unwrap();
        match &b.select_exprs[0].expr {
            Expression::Column(c) => assert_eq!(c.table.as_deref(), Some("R")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ambiguous_column_is_rejected() {
        let q = parse("SELECT Author FROM R, S", Dialect::ThreeValued).unwrap();
        let err = bind(&q, &catalog()).unwrap_err();
        assert!(matches!(err, Error::UnresolvedColumn { candidates: 2, .. }));
    }

    #[test]
    fn unknown_column_is_rejected() {
        let q = parse("SELECT nope FROM R", Dialect::ThreeValued).unwrap();
        let err = bind(&q, &catalog()).unwrap_err();
        assert!(matches!(err, Error::UnresolvedColumn { candidates: 0, .. }));
    }

    #[test]
    fn aliases_shadow_table_names() {
        let q = parse("SELECT x.Author, y.Author FROM R AS x, R AS y", Dialect::ThreeValued)
            .unwrap();
        let b = bind(&q, &catalog()).unwrap();
        match &b.select_exprs[1].expr {
            Expression::Column(c) => assert_eq!(c.table.as_deref(), Some("y")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_table_is_rejected() {
        let q = parse("SELECT x FROM Nope", Dialect::ThreeValued).unwrap();
        let err = bind(&q, &catalog()).unwrap_err();
        assert!(matches!(err, Error::UnknownTable(t) if t == "Nope"));
    }

    #[test]
    fn grouping_invariant_enforced() {
        let q = parse(
            "SELECT S.Author, COUNT(*) FROM S GROUP BY S.k",
            Dialect::ThreeValued,
        )
        .unwrap();
        let err = bind(&q, &catalog()).unwrap_err();
        assert!(matches!(err, Error::InvalidQuery(_)));

        let ok = parse(
            "SELECT S.k, COUNT(*) FROM S GROUP BY S.k",
            Dialect::ThreeValued,
        )
        .unwrap();
        assert!(bind(&ok, &catalog()).is_ok());
    }

    #[test]
    fn missing_resolves_against_from_bindings() {
        let q = parse(
            "SELECT x.Author FROM R AS x WHERE x MISSING Address",
            Dialect::Columnar,
        )
        .unwrap();
        assert!(bind(&q, &catalog()).is_ok());

        let bad = parse(
            "SELECT x.Author FROM R AS x WHERE R MISSING Address",
            Dialect::Columnar,
        )
        .unwrap();
        assert!(bind(&bad, &catalog()).is_err());
    }
}
