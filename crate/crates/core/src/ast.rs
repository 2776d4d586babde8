//! Query AST for the supported SQL fragment.
//!
//! A query has the shape `SELECT exprs, aggs FROM tables WHERE formula
//! GROUP BY columns`. The columnar dialect adds the `R MISSING a` predicate;
//! the three-valued dialect has `e IS NULL` instead. `NOT IN` subqueries of
//! the fixed shape `e NOT IN (SELECT c FROM t)` appear in desugared output
//! and are accepted by the parser in both dialects.

use std::fmt;

use crate::value::Value;

/// Which surface dialect a query text is parsed under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    /// Standard SQL with nulls and `IS NULL`.
    ThreeValued,
    /// Columnar semantics with `MISSING`; no `IS NULL`.
    Columnar,
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dialect::ThreeValued => write!(f, "3vl"),
            Dialect::Columnar => write!(f, "cs"),
        }
    }
}

/// A (possibly unqualified) column reference. Binding fills in `table`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ColumnRef {
    pub table: Option<String>,
    pub attribute: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, attribute: impl Into<String>) -> Self {
        ColumnRef {
            table: Some(table.into()),
            attribute: attribute.into(),
        }
    }

    pub fn unqualified(attribute: impl Into<String>) -> Self {
        ColumnRef {
            table: None,
            attribute: attribute.into(),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.table {
            Some(t) => write!(f, "{t}.{}", self.attribute),
            None => write!(f, "{}", self.attribute),
        }
    }
}

/// A FROM-list entry. The alias, when present, is the binding name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRef {
    pub name: String,
    pub alias: Option<String>,
}

impl TableRef {
    pub fn new(name: impl Into<String>) -> Self {
        TableRef {
            name: name.into(),
            alias: None,
        }
    }

    pub fn aliased(name: impl Into<String>, alias: impl Into<String>) -> Self {
        TableRef {
            name: name.into(),
            alias: Some(alias.into()),
        }
    }

    /// The name column references resolve against.
    pub fn binding_name(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Concat,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Concat => "||",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Constant(Value),
    Column(ColumnRef),
    BinaryOp {
        op: BinOp,
        lhs: Box<Expression>,
        rhs: Box<Expression>,
    },
}

impl Expression {
    pub fn column(table: impl Into<String>, attr: impl Into<String>) -> Self {
        Expression::Column(ColumnRef::new(table, attr))
    }

    pub fn int(v: i64) -> Self {
        Expression::Constant(Value::Int(v))
    }

    pub fn str(v: impl Into<String>) -> Self {
        Expression::Constant(Value::Str(v.into()))
    }

    pub fn binary(op: BinOp, lhs: Expression, rhs: Expression) -> Self {
        Expression::BinaryOp {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// Collect every column reference in the expression, in order of
    /// appearance.
    pub fn column_refs<'a>(&'a self, out: &mut Vec<&'a ColumnRef>) {
        match self {
            Expression::Constant(_) => {}
            Expression::Column(c) => out.push(c),
            Expression::BinaryOp { lhs, rhs, .. } => {
                lhs.column_refs(out);
                rhs.column_refs(out);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expression::Constant(_) | Expression::Column(_) => 1,
            Expression::BinaryOp { lhs, rhs, .. } => 1 + lhs.node_count() + rhs.node_count(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFunc {
    Count,
    Sum,
    Min,
    Max,
    Avg,
}

impl AggFunc {
    pub fn name(&self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
            AggFunc::Avg => "AVG",
        }
    }
}

/// An aggregate call. `arg = None` encodes `COUNT(*)` and is only valid for
/// [`AggFunc::Count`].
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateExpression {
    pub func: AggFunc,
    pub arg: Option<Expression>,
}

impl AggregateExpression {
    pub fn count_star() -> Self {
        AggregateExpression {
            func: AggFunc::Count,
            arg: None,
        }
    }

    pub fn is_star(&self) -> bool {
        self.arg.is_none()
    }

    pub fn node_count(&self) -> usize {
        1 + self.arg.as_ref().map_or(0, Expression::node_count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "<>",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }

    pub const ALL: [CompareOp; 6] = [
        CompareOp::Eq,
        CompareOp::Ne,
        CompareOp::Lt,
        CompareOp::Le,
        CompareOp::Gt,
        CompareOp::Ge,
    ];
}

/// The single subquery shape in the fragment: `SELECT column FROM table`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubquerySpec {
    pub column: String,
    pub table: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Compare {
        op: CompareOp,
        lhs: Expression,
        rhs: Expression,
    },
    IsNull(Expression),
    Missing {
        table: String,
        attribute: String,
    },
    NotIn {
        probe: Expression,
        subquery: SubquerySpec,
    },
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
}

impl Formula {
    pub fn compare(op: CompareOp, lhs: Expression, rhs: Expression) -> Self {
        Formula::Compare { op, lhs, rhs }
    }

    pub fn and(lhs: Formula, rhs: Formula) -> Self {
        Formula::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Formula, rhs: Formula) -> Self {
        Formula::Or(Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Formula) -> Self {
        Formula::Not(Box::new(inner))
    }

    /// Left-associative conjunction of a non-empty list.
    pub fn conjoin(mut parts: Vec<Formula>) -> Option<Formula> {
        if parts.is_empty() {
            return None;
        }
        let mut acc = parts.remove(0);
        for p in parts {
            acc = Formula::and(acc, p);
        }
        Some(acc)
    }

    /// Left-associative disjunction of a non-empty list.
    pub fn disjoin(mut parts: Vec<Formula>) -> Option<Formula> {
        if parts.is_empty() {
            return None;
        }
        let mut acc = parts.remove(0);
        for p in parts {
            acc = Formula::or(acc, p);
        }
        Some(acc)
    }

    /// A leaf in the sense of negation normal form: anything that is not a
    /// connective.
    pub fn is_predicate_leaf(&self) -> bool {
        !matches!(self, Formula::And(..) | Formula::Or(..) | Formula::Not(..))
    }

    /// All column references in the formula, including inside `NOT IN`
    /// probes, in order of appearance. `MISSING` contributes its pair.
    pub fn column_refs<'a>(&'a self, out: &mut Vec<ColumnRefOrPair<'a>>) {
        match self {
            Formula::Compare { lhs, rhs, .. } => {
                let mut refs = Vec::new();
                lhs.column_refs(&mut refs);
                rhs.column_refs(&mut refs);
                out.extend(refs.into_iter().map(ColumnRefOrPair::Ref));
            }
            Formula::IsNull(e) => {
                let mut refs = Vec::new();
                e.column_refs(&mut refs);
                out.extend(refs.into_iter().map(ColumnRefOrPair::Ref));
            }
            Formula::Missing { table, attribute } => {
                out.push(ColumnRefOrPair::Pair(table, attribute));
            }
            Formula::NotIn { probe, .. } => {
                let mut refs = Vec::new();
                probe.column_refs(&mut refs);
                out.extend(refs.into_iter().map(ColumnRefOrPair::Ref));
            }
            Formula::And(l, r) | Formula::Or(l, r) => {
                l.column_refs(out);
                r.column_refs(out);
            }
            Formula::Not(inner) => inner.column_refs(out),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Formula::Compare { lhs, rhs, .. } => 1 + lhs.node_count() + rhs.node_count(),
            Formula::IsNull(e) => 1 + e.node_count(),
            Formula::Missing { .. } => 1,
            Formula::NotIn { probe, .. } => 2 + probe.node_count(),
            Formula::And(l, r) | Formula::Or(l, r) => 1 + l.node_count() + r.node_count(),
            Formula::Not(inner) => 1 + inner.node_count(),
        }
    }
}

/// Item yielded by [`Formula::column_refs`].
#[derive(Debug, Clone, Copy)]
pub enum ColumnRefOrPair<'a> {
    Ref(&'a ColumnRef),
    Pair(&'a str, &'a str),
}

/// A select-list expression with an optional output alias.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectItem {
    pub expr: Expression,
    pub alias: Option<String>,
}

impl SelectItem {
    pub fn new(expr: Expression) -> Self {
        SelectItem { expr, alias: None }
    }
}

/// A select-list aggregate with an optional output alias.
#[derive(Debug, Clone, PartialEq)]
pub struct AggItem {
    pub agg: AggregateExpression,
    pub alias: Option<String>,
}

impl AggItem {
    pub fn new(agg: AggregateExpression) -> Self {
        AggItem { agg, alias: None }
    }
}

/// A parsed query. `select_star` marks `SELECT *`; binding expands it into
/// `select_exprs` using the catalog, in catalog column order.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub select_star: bool,
    pub select_exprs: Vec<SelectItem>,
    pub select_aggs: Vec<AggItem>,
    pub from: Vec<TableRef>,
    pub where_clause: Option<Formula>,
    pub group_by: Vec<ColumnRef>,
}

impl Query {
    pub fn node_count(&self) -> usize {
        let mut n = 1;
        if self.select_star {
            n += 1;
        }
        for item in &self.select_exprs {
            n += item.expr.node_count();
        }
        for item in &self.select_aggs {
            n += item.agg.node_count();
        }
        n += self.from.len();
        if let Some(f) = &self.where_clause {
            n += f.node_count();
        }
        n += self.group_by.len();
        n
    }

    /// Line-oriented s-expression dump of the AST, one node per line with
    /// two-space indentation.
    pub fn to_sexpr(&self) -> String {
        let mut out = String::new();
        let mut w = SexprWriter::new(&mut out);
        w.open("query");
        w.open("select");
        if self.select_star {
            w.leaf("star");
        }
        for item in &self.select_exprs {
            match &item.alias {
                Some(a) => {
                    w.open(&format!("as {a}"));
                    sexpr_expr(&mut w, &item.expr);
                    w.close();
                }
                None => sexpr_expr(&mut w, &item.expr),
            }
        }
        for item in &self.select_aggs {
            match &item.alias {
                Some(a) => {
                    w.open(&format!("as {a}"));
                    sexpr_agg(&mut w, &item.agg);
                    w.close();
                }
                None => sexpr_agg(&mut w, &item.agg),
            }
        }
        w.close();
        w.open("from");
        for t in &self.from {
            match &t.alias {
                Some(a) => w.leaf(&format!("table {} {a}", t.name)),
                None => w.leaf(&format!("table {}", t.name)),
            }
        }
        w.close();
        if let Some(f) = &self.where_clause {
            w.open("where");
            sexpr_formula(&mut w, f);
            w.close();
        }
        if !self.group_by.is_empty() {
            w.open("group-by");
            for c in &self.group_by {
                w.leaf(&format!("col {c}"));
            }
            w.close();
        }
        w.close();
        out
    }
}

struct SexprWriter<'a> {
    out: &'a mut String,
    depth: usize,
}

impl<'a> SexprWriter<'a> {
    fn new(out: &'a mut String) -> Self {
        SexprWriter { out, depth: 0 }
    }

    fn line(&mut self, text: &str) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn open(&mut self, head: &str) {
        self.line(&format!("({head}"));
        self.depth += 1;
    }

    fn close(&mut self) {
        self.depth -= 1;
        self.line(")");
    }

    fn leaf(&mut self, text: &str) {
        self.line(&format!("({text})"));
    }
}

fn sexpr_expr(w: &mut SexprWriter<'_>, e: &Expression) {
    match e {
        Expression::Constant(v) => match v {
            Value::Str(s) => w.leaf(&format!("const {s:?}")),
            other => w.leaf(&format!("const {other}")),
        },
        Expression::Column(c) => w.leaf(&format!("col {c}")),
        Expression::BinaryOp { op, lhs, rhs } => {
            w.open(op.symbol());
            sexpr_expr(w, lhs);
            sexpr_expr(w, rhs);
            w.close();
        }
    }
}

fn sexpr_agg(w: &mut SexprWriter<'_>, agg: &AggregateExpression) {
    match &agg.arg {
        None => w.leaf("count-star"),
        Some(e) => {
            w.open(&agg.func.name().to_ascii_lowercase());
            sexpr_expr(w, e);
            w.close();
        }
    }
}

fn sexpr_formula(w: &mut SexprWriter<'_>, f: &Formula) {
    match f {
        Formula::Compare { op, lhs, rhs } => {
            w.open(op.symbol());
            sexpr_expr(w, lhs);
            sexpr_expr(w, rhs);
            w.close();
        }
        Formula::IsNull(e) => {
            w.open("is-null");
            sexpr_expr(w, e);
            w.close();
        }
        Formula::Missing { table, attribute } => {
            w.leaf(&format!("missing {table}.{attribute}"));
        }
        Formula::NotIn { probe, subquery } => {
            w.open(&format!(
                "not-in (select {} from {})",
                subquery.column, subquery.table
            ));
            sexpr_expr(w, probe);
            w.close();
        }
        Formula::And(l, r) => {
            w.open("and");
            sexpr_formula(w, l);
            sexpr_formula(w, r);
            w.close();
        }
        Formula::Or(l, r) => {
            w.open("or");
            sexpr_formula(w, l);
            sexpr_formula(w, r);
            w.close();
        }
        Formula::Not(inner) => {
            w.open("not");
            sexpr_formula(w, inner);
            w.close();
        }
    }
}
