//! Column Normal Form.
//!
//! A relation with k columns decomposes into k+1 relations: a single-column
//! key relation holding one opaque id per row, and one (id, value) relation
//! per attribute holding entries only for rows where that attribute is
//! present. No relation in the decomposed form contains a null. An all-null
//! row keeps its entry in the key relation and appears nowhere else.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::relation::{Column, Database, Relation};
use crate::value::{ColumnType, Value};

/// Surrogate key for a decomposed row. Never appears in surface-syntax
/// queries; the expander references it through generated `_id` relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct OpaqueId(pub u64);

impl OpaqueId {
    pub fn as_value(&self) -> Value {
        Value::Int(self.0 as i64)
    }
}

/// Generated name of the key relation for `base`.
pub fn key_relation_name(base: &str) -> String {
    format!("{base}_id")
}

/// Generated name of the column relation for `base` and attribute `attr`.
pub fn column_relation_name(base: &str, attr: &str) -> String {
    format!("{base}_{attr}")
}

/// A relation in Column Normal Form: the key relation plus one two-column
/// relation per original attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGroup {
    pub base_name: String,
    /// Original schema, in catalog order.
    pub columns: Vec<Column>,
    /// Key relation contents; a set, in insertion order.
    pub keys: Vec<OpaqueId>,
    /// Per-attribute entries; at most one value per id, never null.
    pub entries: BTreeMap<String, BTreeMap<OpaqueId, Value>>,
}

impl NormalizedGroup {
    pub fn new(base_name: impl Into<String>, columns: Vec<Column>) -> Self {
        let columns_map = columns
            .iter()
            .map(|c| (c.name.clone(), BTreeMap::new()))
            .collect();
        NormalizedGroup {
            base_name: base_name.into(),
            columns,
            keys: Vec::new(),
            entries: columns_map,
        }
    }

    pub fn value(&self, id: OpaqueId, attr: &str) -> Option<&Value> {
        self.entries.get(attr).and_then(|m| m.get(&id))
    }

    pub fn key_relation(&self) -> Relation {
        let mut rel = Relation::new(
            key_relation_name(&self.base_name),
            vec![Column::new("id", ColumnType::Int)],
        );
        for id in &self.keys {
            rel.rows.push(vec![id.as_value()]);
        }
        rel
    }

    pub fn column_relation(&self, attr: &str) -> Option<Relation> {
        let col = self.columns.iter().find(|c| c.name == attr)?;
        let entries = self.entries.get(attr)?;
        let mut rel = Relation::new(
            column_relation_name(&self.base_name, attr),
            vec![Column::new("id", ColumnType::Int), col.clone()],
        );
        for (id, v) in entries {
            rel.rows.push(vec![id.as_value(), v.clone()]);
        }
        Some(rel)
    }

    /// All k+1 relations: the key relation first, then column relations in
    /// catalog order.
    pub fn relations(&self) -> Vec<Relation> {
        let mut out = vec![self.key_relation()];
        for col in &self.columns {
            if let Some(rel) = self.column_relation(&col.name) {
                out.push(rel);
            }
        }
        out
    }

    /// One partial row per key, in key order: `None` marks an absent entry.
    pub fn partial_rows(&self) -> Vec<Vec<Option<Value>>> {
        self.keys
            .iter()
            .map(|id| {
                self.columns
                    .iter()
                    .map(|c| self.value(*id, &c.name).cloned())
                    .collect()
            })
            .collect()
    }

    /// Equality up to a bijection on opaque ids: the groups are equal iff
    /// their multisets of partial rows coincide. Ids are opaque, so any
    /// consistent renaming is allowed.
    pub fn eq_up_to_ids(&self, other: &NormalizedGroup) -> bool {
        if self.columns.len() != other.columns.len() {
            return false;
        }
        let mut a = self.partial_rows();
        let mut b = other.partial_rows();
        a.sort_by(|x, y| cmp_partial_rows(x, y));
        b.sort_by(|x, y| cmp_partial_rows(x, y));
        a == b
    }
}

fn cmp_partial_rows(a: &[Option<Value>], b: &[Option<Value>]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let ord = match (x, y) {
            (None, None) => std::cmp::Ordering::Equal,
            (None, Some(_)) => std::cmp::Ordering::Less,
            (Some(_), None) => std::cmp::Ordering::Greater,
            (Some(u), Some(v)) => u.total_cmp(v),
        };
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    a.len().cmp(&b.len())
}

/// Decompose a relation into Column Normal Form. Each row receives a fresh
/// id in load order starting at 1; attribute entries are created only for
/// non-null cells.
pub fn decompose(rel: &Relation) -> NormalizedGroup {
    let mut group = NormalizedGroup::new(rel.name.clone(), rel.columns.clone());
    for (i, row) in rel.rows.iter().enumerate() {
        let id = OpaqueId(i as u64 + 1);
        group.keys.push(id);
        for (cell, col) in row.iter().zip(&rel.columns) {
            if !cell.is_null() {
                group
                    .entries
                    .get_mut(&col.name)
                    .expect("entry map has every column")
                    .insert(id, cell.clone());
            }
        }
    }
    group
}

/// Decompose a query output. Same contract as [`decompose`]; a separate
/// entry point because the differential harness applies it to results.
pub fn normalize_output(rel: &Relation) -> NormalizedGroup {
    decompose(rel)
}

/// Reassemble a classic relation from a group: one row per key, restoring
/// nulls for absent entries. Output column order is the original catalog
/// order; the id column is dropped.
pub fn full_outer_join_group(group: &NormalizedGroup) -> Result<Relation> {
    let key_set: BTreeSet<OpaqueId> = group.keys.iter().copied().collect();
    for col in &group.columns {
        if let Some(entries) = group.entries.get(&col.name) {
            for id in entries.keys() {
                if !key_set.contains(id) {
                    return Err(Error::DanglingId {
                        relation: column_relation_name(&group.base_name, &col.name),
                        id: id.0,
                    });
                }
            }
        }
    }
    let mut rel = Relation::new(group.base_name.clone(), group.columns.clone());
    for id in &group.keys {
        let row = group
            .columns
            .iter()
            .map(|c| group.value(*id, &c.name).cloned().unwrap_or(Value::Null))
            .collect();
        rel.rows.push(row);
    }
    Ok(rel)
}

/// A database in Column Normal Form: one group per original relation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormalizedDatabase {
    pub groups: BTreeMap<String, NormalizedGroup>,
}

impl NormalizedDatabase {
    pub fn group(&self, base_name: &str) -> Option<&NormalizedGroup> {
        self.groups.get(base_name)
    }

    /// All normalized relations as a flat database (the printable catalog).
    pub fn materialize(&self) -> Database {
        let mut db = Database::new();
        for group in self.groups.values() {
            for rel in group.relations() {
                // uniqueness was checked at decomposition time
                let _ = db.insert(rel);
            }
        }
        db
    }

    /// Full outer join of every group: the inverse edge of decomposition.
    pub fn join_all(&self) -> Result<Database> {
        let mut db = Database::new();
        for group in self.groups.values() {
            db.insert(full_outer_join_group(group)?)?;
        }
        Ok(db)
    }
}

/// Decompose every relation of `db`, checking that the generated relation
/// names collide neither with existing catalog names nor with each other.
pub fn decompose_db(db: &Database) -> Result<NormalizedDatabase> {
    let mut taken: BTreeSet<String> = db.iter().map(|r| r.name.clone()).collect();
    let mut out = NormalizedDatabase::default();
    for rel in db.iter() {
        let mut generated = vec![key_relation_name(&rel.name)];
        for col in &rel.columns {
            generated.push(column_relation_name(&rel.name, &col.name));
        }
        for name in generated {
            if !taken.insert(name.clone()) {
                return Err(Error::NameCollision(name));
            }
        }
        out.groups.insert(rel.name.clone(), decompose(rel));
    }
    Ok(out)
}
