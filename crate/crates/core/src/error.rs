use thiserror::Error;

use crate::value::ColumnType;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: u32,
        column: u32,
        message: String,
    },

    #[error("construct `{construct}` is not allowed under the {dialect} dialect")]
    Dialect { construct: String, dialect: String },

    #[error("column `{column}` matches {candidates} FROM entries")]
    UnresolvedColumn { column: String, candidates: usize },

    #[error("unknown table `{0}`")]
    UnknownTable(String),

    #[error("unknown attribute `{table}.{attribute}`")]
    UnknownAttribute { table: String, attribute: String },

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("type mismatch: {0}")]
    TypeMismatch(String),

    #[error("division by zero")]
    DivisionByZero,

    #[error("null value encountered in null-free evaluation")]
    NullInNullFreeMode,

    #[error("line {line}: expected {expected} fields, found {found}")]
    ArityMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}: cannot parse {text:?} as {ty}")]
    TypeParse {
        line: usize,
        text: String,
        ty: ColumnType,
    },

    #[error("name collision: `{0}`")]
    NameCollision(String),

    #[error("dangling id {id} in relation `{relation}`")]
    DanglingId { relation: String, id: u64 },

    #[error("unsupported construct: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("evaluating row {row}: {source}")]
    RowContext {
        row: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
