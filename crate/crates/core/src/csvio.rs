//! CSV and catalog-file input/output.
//!
//! CSV follows RFC 4180 quoting with a mandatory header row. Nulls are
//! encoded as the null token (empty by default): an unquoted empty field is
//! null, a quoted empty field `""` is the empty string, so emit∘load is the
//! identity even for relations mixing nulls and empty strings. The catalog
//! sidecar has one relation per line: `name(attr:type,...)`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::relation::{Column, Database, Relation};
use crate::value::{ColumnType, Value};

/// CSV encoding options. `null_token` is the unquoted field text standing
/// for null; empty by default.
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub null_token: String,
}

#[derive(Debug, Clone, PartialEq)]
struct Field {
    text: String,
    quoted: bool,
}

/// Parse CSV text into records of fields, tracking per-field quoting.
fn parse_records(text: &str) -> Result<Vec<Vec<Field>>> {
    let mut records = Vec::new();
    let mut record = Vec::new();
    let mut field = String::new();
    let mut quoted = false;
    let mut in_quotes = false;
    let mut line = 1usize;
    let mut chars = text.chars().peekable();
    let mut any = false;

    while let Some(c) = chars.next() {
        any = true;
        if in_quotes {
            match c {
                '"' => {
                    if chars.peek() == Some(&'"') {
                        chars.next();
                        field.push('"');
                    } else {
                        in_quotes = false;
                    }
                }
                '\n' => {
                    line += 1;
                    field.push(c);
                }
                _ => field.push(c),
            }
            continue;
        }
        match c {
            '"' if field.is_empty() && !quoted => {
                in_quotes = true;
                quoted = true;
            }
            ',' => {
                record.push(Field {
                    text: std::mem::take(&mut field),
                    quoted,
                });
                quoted = false;
            }
            '\r' => {
                if chars.peek() == Some(&'\n') {
                    chars.next();
                }
                record.push(Field {
                    text: std::mem::take(&mut field),
                    quoted,
                });
                quoted = false;
                records.push(std::mem::take(&mut record));
                line += 1;
            }
            '\n' => {
                record.push(Field {
                    text: std::mem::take(&mut field),
                    quoted,
                });
                quoted = false;
                records.push(std::mem::take(&mut record));
                line += 1;
            }
            _ => field.push(c),
        }
    }
    if in_quotes {
        return Err(Error::InvalidInput(format!(
            "line {line}: unterminated quoted field"
        )));
    }
    if !field.is_empty() || quoted || !record.is_empty() {
        record.push(Field { text: field, quoted });
        records.push(record);
    }
    if !any {
        return Err(Error::InvalidInput("empty CSV input: header row is mandatory".into()));
    }
    Ok(records)
}

fn field_needs_quotes(text: &str, opts: &CsvOptions) -> bool {
    text == opts.null_token
        || text.is_empty()
        || text.contains(',')
        || text.contains('"')
        || text.contains('\n')
        || text.contains('\r')
}

fn write_field(out: &mut String, text: &str, force_quote: bool, opts: &CsvOptions) {
    if force_quote || field_needs_quotes(text, opts) {
        out.push('"');
        for c in text.chars() {
            if c == '"' {
                out.push('"');
            }
            out.push(c);
        }
        out.push('"');
    } else {
        out.push_str(text);
    }
}

fn parse_value(field: &Field, ty: ColumnType, line: usize, opts: &CsvOptions) -> Result<Value> {
    if !field.quoted && field.text == opts.null_token {
        return Ok(Value::Null);
    }
    let text = &field.text;
    match ty {
        ColumnType::Int => text.parse::<i64>().map(Value::Int).map_err(|_| Error::TypeParse {
            line,
            text: text.clone(),
            ty,
        }),
        ColumnType::Float => text
            .parse::<f64>()
            .map(Value::Float)
            .map_err(|_| Error::TypeParse {
                line,
                text: text.clone(),
                ty,
            }),
        ColumnType::Bool => match text.to_ascii_lowercase().as_str() {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(Error::TypeParse {
                line,
                text: text.clone(),
                ty,
            }),
        },
        ColumnType::Str => Ok(Value::Str(text.clone())),
    }
}

/// Parse CSV text into a relation with the given name and schema. The header
/// must match the schema attribute names exactly.
pub fn relation_from_csv_str(
    text: &str,
    name: &str,
    columns: &[Column],
    opts: &CsvOptions,
) -> Result<Relation> {
    let records = parse_records(text)?;
    let header = &records[0];
    let expected: Vec<&str> = columns.iter().map(|c| c.name.as_str()).collect();
    let found: Vec<&str> = header.iter().map(|f| f.text.as_str()).collect();
    if expected != found {
        return Err(Error::InvalidInput(format!(
            "header mismatch for {name}: expected {expected:?}, found {found:?}"
        )));
    }
    let mut rel = Relation::new(name, columns.to_vec());
    for (i, record) in records.iter().enumerate().skip(1) {
        let line = i + 1;
        if record.len() != columns.len() {
            return Err(Error::ArityMismatch {
                line,
                expected: columns.len(),
                found: record.len(),
            });
        }
        let mut row = Vec::with_capacity(columns.len());
        for (field, col) in record.iter().zip(columns) {
            row.push(parse_value(field, col.ty, line, opts)?);
        }
        rel.push_row(row)?;
    }
    Ok(rel)
}

/// Render a relation as CSV text with header row.
pub fn relation_to_csv_string(rel: &Relation, opts: &CsvOptions) -> String {
    let mut out = String::new();
    for (i, col) in rel.columns.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_field(&mut out, &col.name, false, opts);
    }
    out.push('\n');
    for row in &rel.rows {
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            match cell {
                Value::Null => out.push_str(&opts.null_token),
                Value::Str(s) => {
                    // quote empty strings and null-token lookalikes so they
                    // stay distinct from null on re-load
                    write_field(&mut out, s, s.is_empty() || *s == opts.null_token, opts);
                }
                other => {
                    let _ = {
                        use std::fmt::Write;
                        write!(out, "{other}")
                    };
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Load a relation from a CSV file.
pub fn load_csv(path: &Path, name: &str, columns: &[Column], opts: &CsvOptions) -> Result<Relation> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    relation_from_csv_str(&text, name, columns, opts)
}

/// Write a relation to a CSV file.
pub fn emit_csv(rel: &Relation, path: &Path, opts: &CsvOptions) -> Result<()> {
    std::fs::write(path, relation_to_csv_string(rel, opts))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Parse a catalog file: one `name(attr:type,...)` per line. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_catalog(text: &str) -> Result<Vec<(String, Vec<Column>)>> {
    let mut out: Vec<(String, Vec<Column>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = i + 1;
        let open = line.find('(').ok_or_else(|| {
            Error::InvalidInput(format!("catalog line {lineno}: expected `name(attr:type,...)`"))
        })?;
        if !line.ends_with(')') {
            return Err(Error::InvalidInput(format!(
                "catalog line {lineno}: missing closing `)`"
            )));
        }
        let name = line[..open].trim().to_string();
        if name.is_empty() {
            return Err(Error::InvalidInput(format!(
                "catalog line {lineno}: empty relation name"
            )));
        }
        if out.iter().any(|(n, _)| *n == name) {
            return Err(Error::NameCollision(name));
        }
        let body = &line[open + 1..line.len() - 1];
        let mut columns = Vec::new();
        for part in body.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (attr, ty) = part.split_once(':').ok_or_else(|| {
                Error::InvalidInput(format!("catalog line {lineno}: expected `attr:type`, got `{part}`"))
            })?;
            let ty = ColumnType::parse(ty.trim()).ok_or_else(|| {
                Error::InvalidInput(format!("catalog line {lineno}: unknown type `{ty}`"))
            })?;
            columns.push(Column::new(attr.trim(), ty));
        }
        if columns.is_empty() {
            return Err(Error::InvalidInput(format!(
                "catalog line {lineno}: relation `{name}` has no attributes"
            )));
        }
        out.push((name, columns));
    }
    Ok(out)
}

/// Render a catalog as text, one relation per line.
pub fn catalog_to_string(entries: &[(String, Vec<Column>)]) -> String {
    let mut out = String::new();
    for (name, columns) in entries {
        out.push_str(name);
        out.push('(');
        for (i, col) in columns.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}:{}", col.name, col.ty));
        }
        out.push_str(")\n");
    }
    out
}

/// Load a database: the catalog file names the relations, and each relation
/// `name` is read from `<data_dir>/<name>.csv`.
pub fn load_database(catalog_path: &Path, data_dir: &Path, opts: &CsvOptions) -> Result<Database> {
    let text = std::fs::read_to_string(catalog_path)
        .map_err(|e| Error::io(format!("reading {}", catalog_path.display()), e))?;
    let entries = parse_catalog(&text)?;
    let mut db = Database::new();
    for (name, columns) in entries {
        let path = data_dir.join(format!("{name}.csv"));
        db.insert(load_csv(&path, &name, &columns, opts)?)?;
    }
    Ok(db)
}

/// Write every relation of `db` to `<dir>/<name>.csv` plus a `catalog.txt`.
pub fn emit_database(db: &Database, dir: &Path, opts: &CsvOptions) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let mut entries = Vec::new();
    for rel in db.iter() {
        emit_csv(rel, &dir.join(format!("{}.csv", rel.name)), opts)?;
        entries.push((rel.name.clone(), rel.columns.clone()));
    }
    std::fs::write(dir.join("catalog.txt"), catalog_to_string(&entries))
        .map_err(|e| Error::io(format!("writing {}", dir.join("catalog.txt").display()), e))
}
