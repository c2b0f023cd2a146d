//! Conjunctive queries, their binding to per-column id regions, and the
//! exact scan oracle.
//!
//! Text grammar: `col OP literal (AND col OP literal)*` with
//! `OP ∈ {=, !=, <>, <, <=, >, >=}` or `col IN (v1, v2, ...)`. Literals
//! containing whitespace or punctuation are quoted with `"` or `'`.

use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{Encoded, Table, TableMeta, ValueId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "IN")]
    In,
}

impl Op {
    pub fn as_str(self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::In => "IN",
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    pub column: String,
    pub op: Op,
    pub literals: Vec<String>,
}

impl Predicate {
    pub fn new(column: impl Into<String>, op: Op, literal: impl Into<String>) -> Predicate {
        Predicate {
            column: column.into(),
            op,
            literals: vec![literal.into()],
        }
    }

    pub fn in_list(column: impl Into<String>, literals: Vec<String>) -> Predicate {
        Predicate {
            column: column.into(),
            op: Op::In,
            literals,
        }
    }

    fn validate(&self) -> Result<()> {
        match (self.op, self.literals.len()) {
            (Op::In, 0) => Err(Error::QuerySyntax(format!("IN on `{}` needs at least one literal", self.column))),
            (Op::In, _) | (_, 1) => Ok(()),
            (op, k) => Err(Error::QuerySyntax(format!("operator {op} takes one literal, got {k}"))),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", quote(&self.column), self.op)?;
        if self.op == Op::In {
            let lits: Vec<String> = self.literals.iter().map(|l| quote(l)).collect();
            write!(f, "({})", lits.join(", "))
        } else {
            f.write_str(&quote(&self.literals[0]))
        }
    }
}

/// A conjunction of single-column predicates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Query {
    pub predicates: Vec<Predicate>,
}

impl Query {
    pub fn new(predicates: Vec<Predicate>) -> Query {
        Query { predicates }
    }

    pub fn parse(text: &str) -> Result<Query> {
        Parser::new(text)?.query()
    }

    /// Maps every predicate onto id intervals and intersects per column.
    pub fn bind(&self, table: &TableMeta) -> Result<Region> {
        let mut region = Region::full(&table.domain_sizes());
        for p in &self.predicates {
            p.validate()?;
            let col = table
                .column_index(&p.column)
                .ok_or_else(|| Error::UnknownColumn(p.column.clone()))?;
            let column = &table.columns[col];
            let d = column.domain_size() as ValueId;
            let mut encoded = Vec::with_capacity(p.literals.len());
            for lit in &p.literals {
                encoded.push(column.encode_literal(lit)?);
            }
            let cr = match p.op {
                Op::In => {
                    let ids = encoded.iter().filter_map(|e| match e {
                        Encoded::Id(id) => Some(*id),
                        Encoded::OutOfDomain { .. } => None,
                    });
                    ColumnRegion::from_ids(d, ids)
                }
                op => predicate_interval(op, encoded[0], d),
            };
            region.columns[col] = region.columns[col].intersect(&cr);
        }
        Ok(region)
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.predicates.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Query {
    type Err = Error;

    fn from_str(s: &str) -> Result<Query> {
        Query::parse(s)
    }
}

// Out-of-domain literals are rewritten through their insertion position:
// with no domain value equal to the literal, `< v` and `<= v` both select
// the ids below the insertion point, and `> v`, `>= v` the ids at or above it.
fn predicate_interval(op: Op, lit: Encoded, d: ValueId) -> ColumnRegion {
    let range = |lo: ValueId, hi: ValueId| ColumnRegion::range(d, lo, hi);
    match lit {
        Encoded::Id(k) => match op {
            Op::Eq => range(k, k + 1),
            Op::Ne => range(0, k).union(&range(k + 1, d)),
            Op::Lt => range(0, k),
            Op::Le => range(0, k + 1),
            Op::Gt => range(k + 1, d),
            Op::Ge => range(k, d),
            Op::In => unreachable!(),
        },
        Encoded::OutOfDomain { insert_at } => {
            let p = insert_at as ValueId;
            match op {
                Op::Eq => ColumnRegion::empty(d),
                Op::Ne => ColumnRegion::full(d),
                Op::Lt | Op::Le => range(0, p),
                Op::Gt | Op::Ge => range(p, d),
                Op::In => unreachable!(),
            }
        }
    }
}

/// Valid ids of one column: sorted, disjoint, non-adjacent half-open
/// intervals inside `[0, domain_size)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnRegion {
    domain_size: ValueId,
    intervals: Vec<(ValueId, ValueId)>,
}

impl ColumnRegion {
    pub fn full(domain_size: ValueId) -> Self {
        ColumnRegion::range(domain_size, 0, domain_size)
    }

    pub fn empty(domain_size: ValueId) -> Self {
        ColumnRegion {
            domain_size,
            intervals: Vec::new(),
        }
    }

    /// `[lo, hi)` clipped to the domain.
    pub fn range(domain_size: ValueId, lo: ValueId, hi: ValueId) -> Self {
        let hi = hi.min(domain_size);
        let intervals = if lo < hi { vec![(lo, hi)] } else { Vec::new() };
        ColumnRegion {
            domain_size,
            intervals,
        }
    }

    pub fn from_ids(domain_size: ValueId, ids: impl IntoIterator<Item = ValueId>) -> Self {
        let mut ids: Vec<ValueId> = ids.into_iter().filter(|&i| i < domain_size).collect();
        ids.sort_unstable();
        ids.dedup();
        let mut intervals: Vec<(ValueId, ValueId)> = Vec::new();
        for id in ids {
            match intervals.last_mut() {
                Some(last) if last.1 == id => last.1 = id + 1,
                _ => intervals.push((id, id + 1)),
            }
        }
        ColumnRegion {
            domain_size,
            intervals,
        }
    }

    pub fn domain_size(&self) -> ValueId {
        self.domain_size
    }

    pub fn intervals(&self) -> &[(ValueId, ValueId)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// True when every id of the domain is valid, i.e. the column is unconstrained.
    pub fn is_wildcard(&self) -> bool {
        self.intervals.len() == 1 && self.intervals[0] == (0, self.domain_size)
    }

    pub fn len(&self) -> u64 {
        self.intervals.iter().map(|&(a, b)| (b - a) as u64).sum()
    }

    pub fn contains(&self, id: ValueId) -> bool {
        let i = self.intervals.partition_point(|&(_, hi)| hi <= id);
        i < self.intervals.len() && self.intervals[i].0 <= id
    }

    pub fn ids(&self) -> impl Iterator<Item = ValueId> + '_ {
        self.intervals.iter().flat_map(|&(a, b)| a..b)
    }

    /// Dense membership vector over the domain.
    pub fn membership(&self) -> Vec<bool> {
        let mut m = vec![false; self.domain_size as usize];
        for &(a, b) in &self.intervals {
            m[a as usize..b as usize].fill(true);
        }
        m
    }

    pub fn intersect(&self, other: &ColumnRegion) -> ColumnRegion {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.intervals.len() && j < other.intervals.len() {
            let (a0, a1) = self.intervals[i];
            let (b0, b1) = other.intervals[j];
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if lo < hi {
                out.push((lo, hi));
            }
            if a1 < b1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        ColumnRegion {
            domain_size: self.domain_size,
            intervals: out,
        }
    }

    pub fn union(&self, other: &ColumnRegion) -> ColumnRegion {
        let mut all: Vec<(ValueId, ValueId)> = self.intervals.iter().chain(&other.intervals).copied().collect();
        all.sort_unstable();
        let mut out: Vec<(ValueId, ValueId)> = Vec::new();
        for (a, b) in all {
            match out.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => out.push((a, b)),
            }
        }
        ColumnRegion {
            domain_size: self.domain_size,
            intervals: out,
        }
    }

    pub fn is_subset_of(&self, other: &ColumnRegion) -> bool {
        self.intersect(other) == *self
    }
}

/// The composite valid region `R_1 × ... × R_n` of a bound query.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Region {
    pub columns: Vec<ColumnRegion>,
}

impl Region {
    pub fn full(domain_sizes: &[usize]) -> Region {
        Region {
            columns: domain_sizes.iter().map(|&d| ColumnRegion::full(d as ValueId)).collect(),
        }
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.iter().any(ColumnRegion::is_empty)
    }

    /// Number of points in the cross product, exactly.
    pub fn size(&self) -> BigUint {
        self.columns
            .iter()
            .fold(BigUint::from(1u32), |acc, c| acc * BigUint::from(c.len()))
    }

    /// Number of points, or `None` if it does not fit in a `u64`.
    pub fn size_u64(&self) -> Option<u64> {
        self.columns.iter().try_fold(1u64, |acc, c| acc.checked_mul(c.len()))
    }

    /// Number of points as a float (may round for very large regions).
    pub fn size_f64(&self) -> f64 {
        self.columns.iter().map(|c| c.len() as f64).product()
    }

    pub fn contains(&self, tuple: &[ValueId]) -> bool {
        self.columns.iter().zip(tuple).all(|(c, &v)| c.contains(v))
    }

    pub fn filtered_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_wildcard())
            .map(|(i, _)| i)
    }

    /// The single point of the region, if every column is a singleton.
    pub fn as_point(&self) -> Option<Vec<ValueId>> {
        self.columns
            .iter()
            .map(|c| match c.intervals() {
                [(a, b)] if b - a == 1 => Some(*a),
                _ => None,
            })
            .collect()
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.columns.iter().zip(&other.columns).all(|(a, b)| a.is_subset_of(b))
    }

    /// Renders the region as an equivalent in-domain query; binding the
    /// result yields this region again.
    pub fn to_query(&self, table: &TableMeta) -> Query {
        let mut preds = Vec::new();
        for (c, cr) in self.columns.iter().enumerate() {
            if cr.is_wildcard() {
                continue;
            }
            let col = &table.columns[c];
            let name = col.name();
            let lit = |id: ValueId| col.domain()[id as usize].to_string();
            let d = cr.domain_size();
            match cr.intervals() {
                [] => preds.push(Predicate::new(name, Op::Lt, lit(0))),
                [(a, b)] if b - a == 1 => preds.push(Predicate::new(name, Op::Eq, lit(*a))),
                [(0, b)] => preds.push(Predicate::new(name, Op::Le, lit(b - 1))),
                [(a, b)] if *b == d => preds.push(Predicate::new(name, Op::Ge, lit(*a))),
                [(a, b)] => {
                    preds.push(Predicate::new(name, Op::Ge, lit(*a)));
                    preds.push(Predicate::new(name, Op::Le, lit(b - 1)));
                }
                _ => preds.push(Predicate::in_list(name, cr.ids().map(lit).collect())),
            }
        }
        Query::new(preds)
    }
}

/// Fraction of rows inside `region`, by full scan.
pub fn exact_selectivity(table: &Table, region: &Region) -> f64 {
    exact_count(table, region) as f64 / table.row_count() as f64
}

pub fn exact_count(table: &Table, region: &Region) -> u64 {
    if region.is_empty() {
        return 0;
    }
    let filtered: Vec<(usize, Vec<bool>)> = region
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_wildcard())
        .map(|(i, c)| (i, c.membership()))
        .collect();
    table
        .rows()
        .filter(|row| filtered.iter().all(|(i, m)| m[row[*i] as usize]))
        .count() as u64
}

fn quote(s: &str) -> String {
    let plain = !s.is_empty()
        && s.chars()
            .all(|c| !c.is_whitespace() && !matches!(c, '"' | '\'' | '(' | ')' | ',' | '=' | '<' | '>' | '!'));
    let keyword = s.eq_ignore_ascii_case("and") || s.eq_ignore_ascii_case("in");
    if plain && !keyword {
        s.to_string()
    } else {
        format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Quoted(String),
    Op(Op),
    LParen,
    RParen,
    Comma,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Parser> {
        Ok(Parser {
            tokens: tokenize(text)?,
            pos: 0,
        })
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn query(&mut self) -> Result<Query> {
        let mut preds = vec![self.predicate()?];
        while let Some(tok) = self.next() {
            match tok {
                Token::Word(w) if w.eq_ignore_ascii_case("and") => preds.push(self.predicate()?),
                other => return Err(Error::QuerySyntax(format!("expected AND, found {other:?}"))),
            }
        }
        Ok(Query::new(preds))
    }

    fn predicate(&mut self) -> Result<Predicate> {
        let column = match self.next() {
            Some(Token::Word(w)) | Some(Token::Quoted(w)) => w,
            other => return Err(Error::QuerySyntax(format!("expected column name, found {other:?}"))),
        };
        match self.next() {
            Some(Token::Op(op)) => Ok(Predicate::new(column, op, self.literal()?)),
            Some(Token::Word(w)) if w.eq_ignore_ascii_case("in") => {
                if self.next() != Some(Token::LParen) {
                    return Err(Error::QuerySyntax("expected `(` after IN".into()));
                }
                let mut lits = vec![self.literal()?];
                loop {
                    match self.next() {
                        Some(Token::Comma) => lits.push(self.literal()?),
                        Some(Token::RParen) => break,
                        other => return Err(Error::QuerySyntax(format!("expected `,` or `)`, found {other:?}"))),
                    }
                }
                Ok(Predicate::in_list(column, lits))
            }
            other => Err(Error::QuerySyntax(format!("expected operator after `{column}`, found {other:?}"))),
        }
    }

    fn literal(&mut self) -> Result<String> {
        match self.peek() {
            Some(Token::Word(_)) | Some(Token::Quoted(_)) => match self.next() {
                Some(Token::Word(w)) | Some(Token::Quoted(w)) => Ok(w),
                _ => unreachable!(),
            },
            other => Err(Error::QuerySyntax(format!("expected literal, found {other:?}"))),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            ',' => {
                tokens.push(Token::Comma);
                i += 1;
            }
            '"' | '\'' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(Error::QuerySyntax("unterminated quoted literal".into())),
                        Some('\\') if chars.get(i + 1).is_some() => {
                            s.push(chars[i + 1]);
                            i += 2;
                        }
                        Some(&q) if q == c => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                tokens.push(Token::Quoted(s));
            }
            '=' | '<' | '>' | '!' => {
                let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
                let (op, len) = match two.as_str() {
                    "<=" => (Op::Le, 2),
                    ">=" => (Op::Ge, 2),
                    "!=" | "<>" => (Op::Ne, 2),
                    "==" => (Op::Eq, 2),
                    _ => match c {
                        '=' => (Op::Eq, 1),
                        '<' => (Op::Lt, 1),
                        '>' => (Op::Gt, 1),
                        _ => return Err(Error::QuerySyntax("stray `!`".into())),
                    },
                };
                tokens.push(Token::Op(op));
                i += len;
            }
            _ => {
                let start = i;
                while i < chars.len()
                    && !chars[i].is_whitespace()
                    && !matches!(chars[i], '(' | ')' | ',' | '=' | '<' | '>' | '!' | '"' | '\'')
                {
                    i += 1;
                }
                tokens.push(Token::Word(chars[start..i].iter().collect()));
            }
        }
    }
    if tokens.is_empty() {
        return Err(Error::QuerySyntax("empty query".into()));
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Dtype, Value};

    fn years() -> Table {
        let rows = vec![vec![Value::Int(2017)], vec![Value::Int(2019)]];
        Table::from_values(&["year"], &[Dtype::Integer], &rows).unwrap()
    }

    fn grid() -> Table {
        let rows: Vec<Vec<Value>> = [(0, 0), (0, 1), (1, 0), (1, 1)]
            .iter()
            .map(|&(a, b)| vec![Value::Int(a), Value::Int(b)])
            .collect();
        Table::from_values(&["x1", "x2"], &[Dtype::Integer, Dtype::Integer], &rows).unwrap()
    }

    #[test]
    fn parse_and_display() {
        let q = Query::parse("fuel_type = GAS AND valid_date >= 2018-03-23 and color IN (BK, \"DARK BLUE\")").unwrap();
        assert_eq!(q.predicates.len(), 3);
        assert_eq!(q.predicates[1].op, Op::Ge);
        assert_eq!(q.predicates[2].literals, vec!["BK".to_string(), "DARK BLUE".to_string()]);
        assert_eq!(Query::parse(&q.to_string()).unwrap(), q);
        assert_eq!(Query::parse("a<>3").unwrap().predicates[0].op, Op::Ne);
        assert!(Query::parse("").is_err());
        assert!(Query::parse("a = ").is_err());
        assert!(Query::parse("a = 1 OR b = 2").is_err());
        assert!(Query::parse("a IN ()").is_err());
    }

    #[test]
    fn out_of_domain_rewrites() {
        let t = years().meta();
        let r = Query::parse("year < 2018").unwrap().bind(&t).unwrap();
        assert_eq!(r.columns[0].intervals(), &[(0, 1)]);
        let r = Query::parse("year <= 2018").unwrap().bind(&t).unwrap();
        assert_eq!(r.columns[0].intervals(), &[(0, 1)]);
        let r = Query::parse("year > 2018").unwrap().bind(&t).unwrap();
        assert_eq!(r.columns[0].intervals(), &[(1, 2)]);
        let r = Query::parse("year = 2018").unwrap().bind(&t).unwrap();
        assert!(r.is_empty());
        let r = Query::parse("year != 2018").unwrap().bind(&t).unwrap();
        assert!(r.columns[0].is_wildcard());
        let r = Query::parse("year >= 2030").unwrap().bind(&t).unwrap();
        assert!(r.is_empty());
        let r = Query::parse("year IN (2016, 2019, 2020)").unwrap().bind(&t).unwrap();
        assert_eq!(r.columns[0].intervals(), &[(1, 2)]);
    }

    #[test]
    fn bind_errors() {
        let t = years().meta();
        assert!(matches!(Query::parse("month = 3").unwrap().bind(&t), Err(Error::UnknownColumn(_))));
        assert!(matches!(Query::parse("year = abc").unwrap().bind(&t), Err(Error::Dtype { .. })));
    }

    #[test]
    fn conjunction_on_one_column_intersects() {
        let t = grid().meta();
        let r = Query::parse("x1 >= 0 AND x1 < 1").unwrap().bind(&t).unwrap();
        assert_eq!(r.columns[0].intervals(), &[(0, 1)]);
        assert!(r.columns[1].is_wildcard());
    }

    #[test]
    fn exact_selectivity_examples() {
        let t = grid();
        let m = t.meta();
        assert_eq!(exact_selectivity(&t, &Region::full(&t.domain_sizes())), 1.0);
        let r = Query::parse("x1 = 0 AND x2 = 0").unwrap().bind(&m).unwrap();
        assert_eq!(exact_selectivity(&t, &r), 0.25);
        let r = Query::parse("x1 = 0 AND x2 = 7").unwrap().bind(&m).unwrap();
        assert_eq!(exact_selectivity(&t, &r), 0.0);
    }

    #[test]
    fn region_sizes() {
        let r = Region::full(&[4, 75]);
        assert_eq!(r.size(), BigUint::from(300u32));
        let mut r = Region::full(&[4, 75]);
        r.columns[1] = ColumnRegion::empty(75);
        assert_eq!(r.size(), BigUint::from(0u32));
        let dmv = Region::full(&[4, 75, 89, 63, 59, 9, 2101, 225, 2, 2, 2]);
        let size: f64 = dmv.size().to_string().parse().unwrap();
        assert!((size / 3.36e15 - 1.0).abs() < 0.01, "{size}");
        assert_eq!(dmv.size_u64().map(|s| s as f64), Some(size));
    }

    #[test]
    fn column_region_ops() {
        let a = ColumnRegion::from_ids(10, [1, 2, 3, 7, 9]);
        assert_eq!(a.intervals(), &[(1, 4), (7, 8), (9, 10)]);
        assert_eq!(a.len(), 5);
        assert!(a.contains(9) && a.contains(1) && !a.contains(4) && !a.contains(0));
        let b = ColumnRegion::range(10, 3, 8);
        assert_eq!(a.intersect(&b).intervals(), &[(3, 4), (7, 8)]);
        assert_eq!(a.union(&b).intervals(), &[(1, 8), (9, 10)]);
        assert!(ColumnRegion::full(5).is_wildcard());
        assert!(!ColumnRegion::range(5, 0, 4).is_wildcard());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn table_strategy() -> impl Strategy<Value = Table> {
            prop::collection::vec((0i64..20, 0i64..6), 1..40).prop_map(|rows| {
                let raw: Vec<Vec<Value>> = rows
                    .iter()
                    .map(|&(a, b)| vec![Value::Int(a * 2), Value::Int(b * 3)])
                    .collect();
                Table::from_values(&["a", "b"], &[Dtype::Integer, Dtype::Integer], &raw).unwrap()
            })
        }

        fn op_strategy() -> impl Strategy<Value = Op> {
            prop::sample::select(vec![Op::Eq, Op::Ne, Op::Lt, Op::Le, Op::Gt, Op::Ge])
        }

        fn raw_matches(op: Op, v: i64, lit: i64) -> bool {
            match op {
                Op::Eq => v == lit,
                Op::Ne => v != lit,
                Op::Lt => v < lit,
                Op::Le => v <= lit,
                Op::Gt => v > lit,
                Op::Ge => v >= lit,
                Op::In => unreachable!(),
            }
        }

        proptest! {
            // Literals range over odd values too, most of which are outside the
            // (even) domain of `a`; the bound region must select exactly the rows
            // the raw comparison selects.
            #[test]
            fn rewrite_matches_raw_comparison(
                t in table_strategy(),
                op_a in op_strategy(), lit_a in -3i64..45,
                op_b in op_strategy(), lit_b in -2i64..20,
            ) {
                let q = Query::new(vec![
                    Predicate::new("a", op_a, lit_a.to_string()),
                    Predicate::new("b", op_b, lit_b.to_string()),
                ]);
                let region = q.bind(&t.meta()).unwrap();
                for row in t.rows() {
                    let a = match t.column(0).decode(row[0]) { Some(Value::Int(v)) => *v, _ => unreachable!() };
                    let b = match t.column(1).decode(row[1]) { Some(Value::Int(v)) => *v, _ => unreachable!() };
                    let expected = raw_matches(op_a, a, lit_a) && raw_matches(op_b, b, lit_b);
                    prop_assert_eq!(region.contains(row), expected);
                }
                // Re-binding the rendered region is idempotent.
                let again = region.to_query(&t.meta()).bind(&t.meta()).unwrap();
                prop_assert_eq!(&again, &region);
                // Scan equals the joint-oracle sum over the region.
                let joint = t.joint();
                let oracle: u64 = joint.counts().iter().filter(|(k, _)| region.contains(k)).map(|(_, c)| c).sum();
                prop_assert_eq!(exact_count(&t, &region), oracle);
                // Text round trip.
                prop_assert_eq!(Query::parse(&q.to_string()).unwrap(), q);
            }

            #[test]
            fn in_lists_round_trip(t in table_strategy(), ids in prop::collection::vec(0u32..20, 1..6)) {
                let d = t.column(0).domain_size() as ValueId;
                let cr = ColumnRegion::from_ids(d, ids.iter().map(|i| i % d));
                prop_assume!(!cr.is_wildcard());
                let mut region = Region::full(&t.domain_sizes());
                region.columns[0] = cr;
                let q = region.to_query(&t.meta());
                let parsed = Query::parse(&q.to_string()).unwrap();
                prop_assert_eq!(parsed.bind(&t.meta()).unwrap(), region);
            }
        }
    }
}
