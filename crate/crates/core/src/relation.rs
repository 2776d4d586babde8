//! In-memory relations and databases.
//!
//! Rows are multisets: duplicates are preserved and row order carries no
//! meaning. Relations are immutable after construction in all evaluation
//! paths, so they are safe to share read-only across threads.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::value::{ColumnType, Value};

/// A named, typed attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Column {
            name: name.into(),
            ty,
        }
    }
}

/// A named schema plus a multiset of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
}

impl Relation {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Self {
        Relation {
            name: name.into(),
            columns,
            rows: Vec::new(),
        }
    }

    /// Append a row, checking arity and that each non-null cell matches its
    /// column's declared type.
    pub fn push_row(&mut self, row: Vec<Value>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::ArityMismatch {
                line: self.rows.len() + 1,
                expected: self.columns.len(),
                found: row.len(),
            });
        }
        for (cell, col) in row.iter().zip(&self.columns) {
            if !cell.matches_type(col.ty) {
                return Err(Error::TypeMismatch(format!(
                    "value {cell} does not match declared type {} of column {}.{}",
                    col.ty, self.name, col.name
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Rows sorted by the total value order; used for multiset comparison
    /// and deterministic output.
    pub fn sorted_rows(&self) -> Vec<Vec<Value>> {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| cmp_rows(a, b));
        rows
    }

    /// Multiset equality of rows, ignoring relation and column names.
    pub fn multiset_eq(&self, other: &Relation) -> bool {
        self.columns.len() == other.columns.len() && self.sorted_rows() == other.sorted_rows()
    }
}

pub fn cmp_rows(a: &[Value], b: &[Value]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let ord = x.total_cmp(y);
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    a.len().cmp(&b.len())
}

/// First row (in sorted order) whose multiplicity differs between the two
/// relations, for counterexample reports.
pub fn first_multiset_diff(a: &Relation, b: &Relation) -> Option<Vec<Value>> {
    let left = a.sorted_rows();
    let right = b.sorted_rows();
    let mut i = 0;
    let mut j = 0;
    while i < left.len() && j < right.len() {
        match cmp_rows(&left[i], &right[j]) {
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => return Some(left[i].clone()),
            std::cmp::Ordering::Greater => return Some(right[j].clone()),
        }
    }
    if i < left.len() {
        return Some(left[i].clone());
    }
    if j < right.len() {
        return Some(right[j].clone());
    }
    None
}

/// Schema-only view of a database: table name to column list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    tables: BTreeMap<String, Vec<Column>>,
}

impl Catalog {
    pub fn new() -> Self {
        Catalog::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, columns: Vec<Column>) -> Result<()> {
        let name = name.into();
        if self.tables.contains_key(&name) {
            return Err(Error::NameCollision(name));
        }
        self.tables.insert(name, columns);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[Column]> {
        self.tables.get(name).map(|c| c.as_slice())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tables.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<Column>)> {
        self.tables.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tables.keys()
    }
}

/// A set of uniquely named relations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Database {
    relations: BTreeMap<String, Relation>,
}

impl Database {
    pub fn new() -> Self {
        Database::default()
    }

    pub fn insert(&mut self, rel: Relation) -> Result<()> {
        if self.relations.contains_key(&rel.name) {
            return Err(Error::NameCollision(rel.name));
        }
        self.relations.insert(rel.name.clone(), rel);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn catalog(&self) -> Catalog {
        let mut c = Catalog::new();
        for rel in self.relations.values() {
            // names are unique by construction
            let _ = c.insert(rel.name.clone(), rel.columns.clone());
        }
        c
    }

    /// True if no cell anywhere in the database is null.
    pub fn is_null_free(&self) -> bool {
        self.relations
            .values()
            .all(|r| r.rows.iter().all(|row| row.iter().all(|v| !v.is_null())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel() -> Relation {
        Relation::new(
            "R",
            vec![
                Column::new("x", ColumnType::Int),
                Column::new("s", ColumnType::Str),
            ],
        )
    }

    #[test]
    fn push_row_checks_arity() {
        let mut r = rel();
        let err = r.push_row(vec![Value::Int(1)]).unwrap_err();
        assert!(matches!(err, Error::ArityMismatch { expected: 2, found: 1, .. }));
    }

    #[test]
    fn push_row_checks_types_but_null_matches_all() {
        let mut r = rel();
        r.push_row(vec![Value::Null, Value::Null]).unwrap();
        let err = r
            .push_row(vec![Value::Str("no".into()), Value::Null])
            .unwrap_err();
        assert!(matches!(err, Error::TypeMismatch(_)));
    }

    #[test]
    fn multiset_eq_ignores_order_and_respects_duplicates() {
        let mut a = rel();
        a.push_row(vec![Value::Int(1), Value::Str("a".into())]).unwrap();
        a.push_row(vec![Value::Int(1), Value::Str("a".into())]).unwrap();
        a.push_row(vec![Value::Null, Value::Str("b".into())]).unwrap();
        let mut b = rel();
        b.push_row(vec![Value::Null, Value::Str("b".into())]).unwrap();
        b.push_row(vec![Value::Int(1), Value::Str("a".into())]).unwrap();
        b.push_row(vec![Value::Int(1), Value::Str("a".into())]).unwrap();
        assert!(a.multiset_eq(&b));
        b.rows.pop();
        assert!(!a.multiset_eq(&b));
        assert!(first_multiset_diff(&a, &b).is_some());
    }

    #[test]
    fn database_rejects_duplicate_names() {
        let mut db = Database::new();
        db.insert(rel()).unwrap();
        let err = db.insert(rel()).unwrap_err();
        assert!(matches!(err, Error::NameCollision(n) if n == "R"));
    }
}
