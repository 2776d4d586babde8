//! Columnar Semantics for SQL.
//!
//! This crate implements a null-free interpretation of a small SQL
//! fragment. Relations decompose into Column Normal Form (a key relation
//! plus one (id, value) relation per attribute); queries are interpreted as
//! sets of expanded queries over the decomposed relations and can be
//! compiled back to a single standard null-aware query over the original
//! tables. Reference evaluators for the standard 3-valued-logic semantics,
//! the 2-valued variant, and the columnar semantics itself serve as ground
//! truth for a randomized differential-testing harness.

pub mod ast;
pub mod bind;
pub mod csvio;
pub mod error;
pub mod eval;
pub mod expand;
pub mod harness;
pub mod normalize;
pub mod parse;
pub mod print;
pub mod relation;
pub mod scalar;
pub mod value;

pub use ast::{Dialect, Query};
pub use bind::bind;
pub use error::{Error, Result};
pub use eval::{run_cs, run_query, EvalMode};
pub use expand::{compile_to_3vl, expand, simulate_2vl_negation, ExpandedQuerySet};
pub use normalize::{
    decompose, decompose_db, full_outer_join_group, normalize_output, NormalizedDatabase,
    NormalizedGroup, OpaqueId,
};
pub use parse::parse;
pub use print::print;
pub use relation::{Catalog, Column, Database, Relation};
pub use value::{ColumnType, TruthValue, Value};
