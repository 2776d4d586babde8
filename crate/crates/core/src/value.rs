//! Scalar values, truth values, and the Kleene connectives.

use std::cmp::Ordering;
use std::fmt;

/// A cell value: a typed scalar or the distinguished `Null` marker.
///
/// `Null` is not a member of any scalar domain; it stands for missing
/// information.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    /// The declared type this value belongs to, or `None` for `Null`.
    pub fn column_type(&self) -> Option<ColumnType> {
        match self {
            Value::Null => None,
            Value::Int(_) => Some(ColumnType::Int),
            Value::Float(_) => Some(ColumnType::Float),
            Value::Str(_) => Some(ColumnType::Str),
            Value::Bool(_) => Some(ColumnType::Bool),
        }
    }

    /// `Null` matches every declared type.
    pub fn matches_type(&self, ty: ColumnType) -> bool {
        match self.column_type() {
            None => true,
            Some(t) => t == ty,
        }
    }

    /// A total order over values used for deterministic sorting, grouping and
    /// multiset comparison. Nulls sort first, then values by type tag, then by
    /// value. Cross-type values never compare equal.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        fn rank(v: &Value) -> u8 {
            match v {
                Value::Null => 0,
                Value::Bool(_) => 1,
                Value::Int(_) => 2,
                Value::Float(_) => 3,
                Value::Str(_) => 4,
            }
        }
        match (self, other) {
            (Value::Null, Value::Null) => Ordering::Equal,
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            _ => rank(self).cmp(&rank(other)),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => write!(f, "NULL"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Str(s) => write!(f, "{s}"),
            Value::Bool(b) => write!(f, "{}", if *b { "true" } else { "false" }),
        }
    }
}

/// The codomain of formula evaluation under 3-valued logic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthValue {
    True,
    False,
    Unknown,
}

impl From<bool> for TruthValue {
    fn from(b: bool) -> Self {
        if b {
            TruthValue::True
        } else {
            TruthValue::False
        }
    }
}

impl fmt::Display for TruthValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruthValue::True => write!(f, "TRUE"),
            TruthValue::False => write!(f, "FALSE"),
            TruthValue::Unknown => write!(f, "UNKNOWN"),
        }
    }
}

pub fn kleene_and(a: TruthValue, b: TruthValue) -> TruthValue {
    use TruthValue::*;
    if a == False || b == False {
        False
    } else if a == Unknown || b == Unknown {
        Unknown
    } else {
        True
    }
}

pub fn kleene_or(a: TruthValue, b: TruthValue) -> TruthValue {
    use TruthValue::*;
    if a == True || b == True {
        True
    } else if a == Unknown || b == Unknown {
        Unknown
    } else {
        False
    }
}

pub fn kleene_not(a: TruthValue) -> TruthValue {
    match a {
        TruthValue::True => TruthValue::False,
        TruthValue::False => TruthValue::True,
        TruthValue::Unknown => TruthValue::Unknown,
    }
}

/// Declared column types for relation schemas and the catalog file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ColumnType {
    Int,
    Float,
    Str,
    Bool,
}

impl ColumnType {
    pub fn parse(s: &str) -> Option<ColumnType> {
        match s {
            "int" => Some(ColumnType::Int),
            "float" => Some(ColumnType::Float),
            "str" => Some(ColumnType::Str),
            "bool" => Some(ColumnType::Bool),
            _ => None,
        }
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ColumnType::Int => "int",
            ColumnType::Float => "float",
            ColumnType::Str => "str",
            ColumnType::Bool => "bool",
        };
        write!(f, "{s}")
    }
}
