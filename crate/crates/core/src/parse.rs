//! SQL text to AST.
//!
//! Keywords are case-insensitive, identifiers case-sensitive. String
//! literals accept double or single quotes on input (doubled quotes escape).
//! The `dialect` argument gates `IS NULL` (three-valued only) and `MISSING`
//! (columnar only); `NOT IN (SELECT c FROM t)` parses in both so that
//! compiled output round-trips.

use crate::ast::{
    AggFunc, AggItem, AggregateExpression, BinOp, ColumnRef, CompareOp, Dialect, Expression,
    Formula, Query, SelectItem, SubquerySpec, TableRef,
};
use crate::error::{Error, Result};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Kw(Kw),
    Sym(Sym),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kw {
    Select,
    From,
    Where,
    Group,
    By,
    As,
    And,
    Or,
    Not,
    Is,
    Null,
    Missing,
    In,
    True,
    False,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sym {
    Comma,
    Dot,
    LParen,
    RParen,
    Star,
    Plus,
    Minus,
    Slash,
    Concat,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Semicolon,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

fn keyword(word: &str) -> Option<Kw> {
    let w = word.to_ascii_uppercase();
    Some(match w.as_str() {
        "SELECT" => Kw::Select,
        "FROM" => Kw::From,
        "WHERE" => Kw::Where,
        "GROUP" => Kw::Group,
        "BY" => Kw::By,
        "AS" => Kw::As,
        "AND" => Kw::And,
        "OR" => Kw::Or,
        "NOT" => Kw::Not,
        "IS" => Kw::Is,
        "NULL" => Kw::Null,
        "MISSING" => Kw::Missing,
        "IN" => Kw::In,
        "TRUE" => Kw::True,
        "FALSE" => Kw::False,
        _ => return None,
    })
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            column: self.col,
            message: message.into(),
        }
    }

    fn tokenize(mut self) -> Result<Vec<Token>> {
        let mut out = Vec::new();
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
                continue;
            }
            let line = self.line;
            let col = self.col;
            let tok = match c {
                ',' => {
                    self.bump();
                    Tok::Sym(Sym::Comma)
                }
                '.' => {
                    self.bump();
                    Tok::Sym(Sym::Dot)
                }
                '(' => {
                    self.bump();
                    Tok::Sym(Sym::LParen)
                }
                ')' => {
                    self.bump();
                    Tok::Sym(Sym::RParen)
                }
                '*' => {
                    self.bump();
                    Tok::Sym(Sym::Star)
                }
                '+' => {
                    self.bump();
                    Tok::Sym(Sym::Plus)
                }
                '-' => {
                    self.bump();
                    Tok::Sym(Sym::Minus)
                }
                '/' => {
                    self.bump();
                    Tok::Sym(Sym::Slash)
                }
                ';' => {
                    self.bump();
                    Tok::Sym(Sym::Semicolon)
                }
                '|' => {
                    self.bump();
                    if self.chars.peek() == Some(&'|') {
                        self.bump();
                        Tok::Sym(Sym::Concat)
                    } else {
                        return Err(self.err("expected `||`"));
                    }
                }
                '=' => {
                    self.bump();
                    Tok::Sym(Sym::Eq)
                }
                '<' => {
                    self.bump();
                    match self.chars.peek() {
                        Some('>') => {
                            self.bump();
                            Tok::Sym(Sym::Ne)
                        }
                        Some('=') => {
                            self.bump();
                            Tok::Sym(Sym::Le)
                        }
                        _ => Tok::Sym(Sym::Lt),
                    }
                }
                '>' => {
                    self.bump();
                    if self.chars.peek() == Some(&'=') {
                        self.bump();
                        Tok::Sym(Sym::Ge)
                    } else {
                        Tok::Sym(Sym::Gt)
                    }
                }
                '!' => {
                    self.bump();
                    if self.chars.peek() == Some(&'=') {
                        self.bump();
                        Tok::Sym(Sym::Ne)
                    } else {
                        return Err(self.err("expected `!=`"));
                    }
                }
                '"' | '\'' => self.string_literal(c)?,
                c if c.is_ascii_digit() => self.number()?,
                c if c.is_alphabetic() || c == '_' => self.word(),
                other => return Err(self.err(format!("unexpected character `{other}`"))),
            };
            out.push(Token { tok, line, col });
        }
        Ok(out)
    }

    fn string_literal(&mut self, quote: char) -> Result<Tok> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated string literal")),
                Some(c) if c == quote => {
                    // doubled quote escapes the quote character
                    if self.chars.peek() == Some(&quote) {
                        self.bump();
                        s.push(quote);
                    } else {
                        return Ok(Tok::Str(s));
                    }
                }
                Some(c) => s.push(c),
            }
        }
    }

    fn number(&mut self) -> Result<Tok> {
        let mut text = String::new();
        let mut is_float = false;
        while let Some(&c) = self.chars.peek() {
            if c.is_ascii_digit() {
                text.push(c);
                self.bump();
            } else if c == '.' && !is_float {
                is_float = true;
                text.push(c);
                self.bump();
            } else if (c == 'e' || c == 'E') && !text.is_empty() {
                is_float = true;
                text.push(c);
                self.bump();
                if let Some(&sign) = self.chars.peek() {
                    if sign == '+' || sign == '-' {
                        text.push(sign);
                        self.bump();
                    }
                }
            } else {
                break;
            }
        }
        if is_float {
            text.parse::<f64>()
                .map(Tok::Float)
                .map_err(|_| self.err(format!("invalid number `{text}`")))
        } else {
            text.parse::<i64>()
                .map(Tok::Int)
                .map_err(|_| self.err(format!("invalid number `{text}`")))
        }
    }

    fn word(&mut self) -> Tok {
        let mut text = String::new();
        while let Some(&c) = self.chars.peek() {
            if c.is_alphanumeric() || c == '_' {
                text.push(c);
                self.bump();
            } else {
                break;
            }
        }
        match keyword(&text) {
            Some(kw) => Tok::Kw(kw),
            None => Tok::Ident(text),
        }
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dialect: Dialect,
    end_line: u32,
    end_col: u32,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + offset).map(|t| &t.tok)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, message: impl Into<String>) -> Error {
        let (line, column) = match self.tokens.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => (self.end_line, self.end_col),
        };
        Error::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn expect_kw(&mut self, kw: Kw, what: &str) -> Result<()> {
        match self.peek() {
            Some(Tok::Kw(k)) if *k == kw => {
                self.next();
                Ok(())
            }
            _ => Err(self.err_here(format!("expected {what}"))),
        }
    }

    fn expect_sym(&mut self, sym: Sym, what: &str) -> Result<()> {
        match self.peek() {
            Some(Tok::Sym(s)) if *s == sym => {
                self.next();
                Ok(())
            }
            _ => Err(self.err_here(format!("expected {what}"))),
        }
    }

    fn eat_sym(&mut self, sym: Sym) -> bool {
        if let Some(Tok::Sym(s)) = self.peek() {
            if *s == sym {
                self.next();
                return true;
            }
        }
        false
    }

    fn eat_kw(&mut self, kw: Kw) -> bool {
        if let Some(Tok::Kw(k)) = self.peek() {
            if *k == kw {
                self.next();
                return true;
            }
        }
        false
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(_)) => match self.next().unwrap().tok {
                Tok::Ident(s) => Ok(s),
                _ => unreachable!(),
            },
            _ => Err(self.err_here(format!("expected {what}"))),
        }
    }

    fn query(&mut self) -> Result<Query> {
        self.expect_kw(Kw::Select, "SELECT")?;
        let mut select_star = false;
        let mut select_exprs = Vec::new();
        let mut select_aggs = Vec::new();
        if self.eat_sym(Sym::Star) {
            select_star = true;
        } else {
            loop {
                if let Some(func) = self.peek_aggregate() {
                    let agg = self.aggregate(func)?;
                    let alias = self.output_alias()?;
                    select_aggs.push(AggItem { agg, alias });
                } else {
                    let expr = self.expression()?;
                    let alias = self.output_alias()?;
                    select_exprs.push(SelectItem { expr, alias });
                }
                if !self.eat_sym(Sym::Comma) {
                    break;
                }
            }
        }

        let mut from = Vec::new();
        if self.eat_kw(Kw::From) {
            loop {
                let name = self.ident("table name")?;
                let alias = if self.eat_kw(Kw::As) {
                    Some(self.ident("table alias")?)
                } else if let Some(Tok::Ident(_)) = self.peek() {
                    Some(self.ident("table alias")?)
                } else {
                    None
                };
                from.push(TableRef { name, alias });
                if !self.eat_sym(Sym::Comma) {
                    break;
                }
            }
        }

        let where_clause = if self.eat_kw(Kw::Where) {
            Some(self.formula()?)
        } else {
            None
        };

        let mut group_by = Vec::new();
        if self.eat_kw(Kw::Group) {
            self.expect_kw(Kw::By, "BY")?;
            loop {
                group_by.push(self.column_ref()?);
                if !self.eat_sym(Sym::Comma) {
                    break;
                }
            }
        }

        Ok(Query {
            select_star,
            select_exprs,
            select_aggs,
            from,
            where_clause,
            group_by,
        })
    }

    fn output_alias(&mut self) -> Result<Option<String>> {
        if self.eat_kw(Kw::As) {
            Ok(Some(self.ident("output alias")?))
        } else {
            Ok(None)
        }
    }

    /// An aggregate head is an identifier naming an aggregate function
    /// immediately followed by `(`. Aggregate names are contextual, not
    /// reserved.
    fn peek_aggregate(&self) -> Option<AggFunc> {
        let name = match self.peek() {
            Some(Tok::Ident(s)) => s,
            _ => return None,
        };
        if self.peek_at(1) != Some(&Tok::Sym(Sym::LParen)) {
            return None;
        }
        let func = match name.to_ascii_uppercase().as_str() {
            "COUNT" => AggFunc::Count,
            "SUM" => AggFunc::Sum,
            "MIN" => AggFunc::Min,
            "MAX" => AggFunc::Max,
            "AVG" => AggFunc::Avg,
            _ => return None,
        };
        Some(func)
    }

    fn aggregate(&mut self, func: AggFunc) -> Result<AggregateExpression> {
        self.next(); // function name
        self.expect_sym(Sym::LParen, "`(`")?;
        if self.eat_sym(Sym::Star) {
            if func != AggFunc::Count {
                return Err(self.err_here("`*` argument is only valid for COUNT"));
            }
            self.expect_sym(Sym::RParen, "`)`")?;
            return Ok(AggregateExpression::count_star());
        }
        let arg = self.expression()?;
        self.expect_sym(Sym::RParen, "`)`")?;
        Ok(AggregateExpression {
            func,
            arg: Some(arg),
        })
    }

    fn formula(&mut self) -> Result<Formula> {
        let mut acc = self.and_formula()?;
        while self.eat_kw(Kw::Or) {
            let rhs = self.and_formula()?;
            acc = Formula::or(acc, rhs);
        }
        Ok(acc)
    }

    fn and_formula(&mut self) -> Result<Formula> {
        let mut acc = self.not_formula()?;
        while self.eat_kw(Kw::And) {
            let rhs = self.not_formula()?;
            acc = Formula::and(acc, rhs);
        }
        Ok(acc)
    }

    fn not_formula(&mut self) -> Result<Formula> {
        if self.eat_kw(Kw::Not) {
            let inner = self.not_formula()?;
            return Ok(Formula::not(inner));
        }
        self.primary_formula()
    }

    fn primary_formula(&mut self) -> Result<Formula> {
        // `table MISSING attribute`
        if let (Some(Tok::Ident(_)), Some(Tok::Kw(Kw::Missing))) = (self.peek(), self.peek_at(1)) {
            if self.dialect != Dialect::Columnar {
                return Err(Error::Dialect {
                    construct: "MISSING".into(),
                    dialect: self.dialect.to_string(),
                });
            }
            let table = self.ident("table name")?;
            self.next(); // MISSING
            let attribute = self.ident("attribute name")?;
            return Ok(Formula::Missing { table, attribute });
        }

        // Parenthesized formula vs parenthesized expression: try formula
        // first; an expression head like `(R.x + 1) = 2` fails the formula
        // parse at `)` or the comparison, so backtrack.
        if self.peek() == Some(&Tok::Sym(Sym::LParen)) {
            let save = self.pos;
            self.next();
            if let Ok(inner) = self.formula() {
                if self.eat_sym(Sym::RParen) {
                    return Ok(inner);
                }
            }
            self.pos = save;
        }

        let lhs = self.expression()?;

        if self.eat_kw(Kw::Is) {
            self.expect_kw(Kw::Null, "NULL")?;
            if self.dialect != Dialect::ThreeValued {
                return Err(Error::Dialect {
                    construct: "IS NULL".into(),
                    dialect: self.dialect.to_string(),
                });
            }
            return Ok(Formula::IsNull(lhs));
        }

        if let Some(Tok::Kw(Kw::Not)) = self.peek() {
            if self.peek_at(1) == Some(&Tok::Kw(Kw::In)) {
                self.next();
                self.next();
                self.expect_sym(Sym::LParen, "`(`")?;
                self.expect_kw(Kw::Select, "SELECT")?;
                let column = self.ident("subquery column")?;
                self.expect_kw(Kw::From, "FROM")?;
                let table = self.ident("subquery table")?;
                self.expect_sym(Sym::RParen, "`)`")?;
                return Ok(Formula::NotIn {
                    probe: lhs,
                    subquery: SubquerySpec { column, table },
                });
            }
        }

        let op = match self.peek() {
            Some(Tok::Sym(Sym::Eq)) => CompareOp::Eq,
            Some(Tok::Sym(Sym::Ne)) => CompareOp::Ne,
            Some(Tok::Sym(Sym::Lt)) => CompareOp::Lt,
            Some(Tok::Sym(Sym::Le)) => CompareOp::Le,
            Some(Tok::Sym(Sym::Gt)) => CompareOp::Gt,
            Some(Tok::Sym(Sym::Ge)) => CompareOp::Ge,
            _ => return Err(self.err_here("expected a comparison operator")),
        };
        self.next();
        let rhs = self.expression()?;
        Ok(Formula::Compare { op, lhs, rhs })
    }

    fn expression(&mut self) -> Result<Expression> {
        let mut acc = self.mul_expression()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym(Sym::Plus)) => BinOp::Add,
                Some(Tok::Sym(Sym::Minus)) => BinOp::Sub,
                Some(Tok::Sym(Sym::Concat)) => BinOp::Concat,
                _ => break,
            };
            self.next();
            let rhs = self.mul_expression()?;
            acc = Expression::binary(op, acc, rhs);
        }
        Ok(acc)
    }

    fn mul_expression(&mut self) -> Result<Expression> {
        let mut acc = self.primary_expression()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym(Sym::Star)) => BinOp::Mul,
                Some(Tok::Sym(Sym::Slash)) => BinOp::Div,
                _ => break,
            };
            self.next();
            let rhs = self.primary_expression()?;
            acc = Expression::binary(op, acc, rhs);
        }
        Ok(acc)
    }

    fn primary_expression(&mut self) -> Result<Expression> {
        match self.peek() {
            Some(Tok::Int(_)) => match self.next().unwrap().tok {
                Tok::Int(v) => Ok(Expression::Constant(Value::Int(v))),
                _ => unreachable!(),
            },
            Some(Tok::Float(_)) => match self.next().unwrap().tok {
                Tok::Float(v) => Ok(Expression::Constant(Value::Float(v))),
                _ => unreachable!(),
            },
            Some(Tok::Str(_)) => match self.next().unwrap().tok {
                Tok::Str(s) => Ok(Expression::Constant(Value::Str(s))),
                _ => unreachable!(),
            },
            Some(Tok::Kw(Kw::True)) => {
                self.next();
                Ok(Expression::Constant(Value::Bool(true)))
            }
            Some(Tok::Kw(Kw::False)) => {
                self.next();
                Ok(Expression::Constant(Value::Bool(false)))
            }
            Some(Tok::Sym(Sym::Minus)) => {
                self.next();
                match self.peek() {
                    Some(Tok::Int(_)) => match self.next().unwrap().tok {
                        Tok::Int(v) => Ok(Expression::Constant(Value::Int(-v))),
                        _ => unreachable!(),
                    },
                    Some(Tok::Float(_)) => match self.next().unwrap().tok {
                        Tok::Float(v) => Ok(Expression::Constant(Value::Float(-v))),
                        _ => unreachable!(),
                    },
                    _ => Err(self.err_here("expected a numeric literal after `-`")),
                }
            }
            Some(Tok::Sym(Sym::LParen)) => {
                self.next();
                let inner = self.expression()?;
                self.expect_sym(Sym::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Ident(_)) => Ok(Expression::Column(self.column_ref()?)),
            _ => Err(self.err_here("expected an expression")),
        }
    }

    fn column_ref(&mut self) -> Result<ColumnRef> {
        let first = self.ident("column reference")?;
        if self.eat_sym(Sym::Dot) {
            let attribute = self.ident("attribute name")?;
            Ok(ColumnRef {
                table: Some(first),
                attribute,
            })
        } else {
            Ok(ColumnRef {
                table: None,
                attribute: first,
            })
        }
    }
}

/// Parse one query from `text` under `dialect`.
pub fn parse(text: &str, dialect: Dialect) -> Result<Query> {
    let tokens = Lexer::new(text).tokenize()?;
    let (end_line, end_col) = tokens
        .last()
        .map(|t| (t.line, t.col + 1))
        .unwrap_or((1, 1));
    let mut parser = Parser {
        tokens,
        pos: 0,
        dialect,
        end_line,
        end_col,
    };
    let q = parser.query()?;
    // allow one trailing semicolon
    parser.eat_sym(Sym::Semicolon);
    if parser.pos != parser.tokens.len() {
        return Err(parser.err_here("unexpected trailing input"));
    }
    Ok(q)
}
