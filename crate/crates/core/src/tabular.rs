//! Dictionary-encoded relations.
//!
//! A [`Table`] holds one [`Column`] per attribute. Each column owns an
//! order-preserving dictionary mapping its distinct raw values onto dense
//! ids `0..domain_size`; rows are stored as id tuples. Domains are
//! empirical: only values present in the data receive an id.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Value id inside a column's dictionary.
pub type ValueId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Integer,
    Float,
    String,
    Date,
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dtype::Integer => "integer",
            Dtype::Float => "float",
            Dtype::String => "string",
            Dtype::Date => "date",
        })
    }
}

impl std::str::FromStr for Dtype {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "integer" | "int" => Ok(Dtype::Integer),
            "float" | "double" => Ok(Dtype::Float),
            "string" | "str" | "text" => Ok(Dtype::String),
            "date" => Ok(Dtype::Date),
            other => Err(Error::Schema(format!("unknown dtype `{other}`"))),
        }
    }
}

/// A parsed raw value. Values of one column always share a variant.
#[derive(Debug, Clone)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
    Date(NaiveDate),
}

impl Value {
    pub fn parse(raw: &str, dtype: Dtype) -> Result<Value> {
        let err = || Error::Dtype {
            raw: raw.to_string(),
            dtype,
        };
        match dtype {
            Dtype::Integer => raw.trim().parse().map(Value::Int).map_err(|_| err()),
            Dtype::Float => raw.trim().parse().map(Value::Float).map_err(|_| err()),
            Dtype::Date => NaiveDate::parse_from_str(raw.trim(), "%Y-%m-%d")
                .map(Value::Date)
                .map_err(|_| err()),
            Dtype::String => Ok(Value::Str(raw.to_string())),
        }
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            Value::Int(_) => Dtype::Integer,
            Value::Float(_) => Dtype::Float,
            Value::Str(_) => Dtype::String,
            Value::Date(_) => Dtype::Date,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Int(_) => 0,
            Value::Float(_) => 1,
            Value::Str(_) => 2,
            Value::Date(_) => 3,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            // `{}` on f64 prints the shortest text that parses back to the same bits.
            Value::Float(v) => write!(f, "{v}"),
            Value::Str(v) => f.write_str(v),
            Value::Date(v) => write!(f, "{}", v.format("%Y-%m-%d")),
        }
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::Date(a), Value::Date(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

/// Result of looking a literal up in a column dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoded {
    Id(ValueId),
    /// Not in the domain; `insert_at` is the index of the first domain
    /// value greater than the literal (`domain_size` if none is).
    OutOfDomain { insert_at: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    name: String,
    dtype: Dtype,
    domain: Vec<Value>,
}

impl Column {
    /// Builds a column from its distinct values. The values are sorted and
    /// deduplicated; an empty domain is rejected.
    pub fn new(name: impl Into<String>, dtype: Dtype, mut domain: Vec<Value>) -> Result<Column> {
        let name = name.into();
        if domain.is_empty() {
            return Err(Error::InvalidTable(format!("column `{name}` has an empty domain")));
        }
        if let Some(v) = domain.iter().find(|v| v.dtype() != dtype) {
            return Err(Error::InvalidTable(format!(
                "column `{name}` of type {dtype} holds a {} value",
                v.dtype()
            )));
        }
        domain.sort();
        domain.dedup();
        Ok(Column { name, dtype, domain })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn domain(&self) -> &[Value] {
        &self.domain
    }

    pub fn domain_size(&self) -> usize {
        self.domain.len()
    }

    pub fn decode(&self, id: ValueId) -> Option<&Value> {
        self.domain.get(id as usize)
    }

    pub fn encode(&self, value: &Value) -> Encoded {
        match self.domain.binary_search(value) {
            Ok(i) => Encoded::Id(i as ValueId),
            Err(insert_at) => Encoded::OutOfDomain { insert_at },
        }
    }

    /// Parses `raw` with the column dtype and looks it up.
    pub fn encode_literal(&self, raw: &str) -> Result<Encoded> {
        Ok(self.encode(&Value::parse(raw, self.dtype)?))
    }
}

/// Maps each distinct encoded tuple to its number of occurrences.
#[derive(Debug, Clone)]
pub struct JointOracle {
    counts: HashMap<Vec<ValueId>, u64>,
    row_count: u64,
}

impl JointOracle {
    pub fn counts(&self) -> &HashMap<Vec<ValueId>, u64> {
        &self.counts
    }

    pub fn row_count(&self) -> u64 {
        self.row_count
    }

    pub fn probability(&self, tuple: &[ValueId]) -> f64 {
        self.counts.get(tuple).copied().unwrap_or(0) as f64 / self.row_count as f64
    }

    /// Distinct tuples with their counts, in lexicographic order.
    pub fn sorted(&self) -> Vec<(&[ValueId], u64)> {
        let mut out: Vec<_> = self.counts.iter().map(|(k, &c)| (k.as_slice(), c)).collect();
        out.sort_unstable();
        out
    }
}

/// An immutable dictionary-encoded relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    columns: Vec<Column>,
    // Row-major, `columns.len()` ids per row.
    data: Vec<ValueId>,
}

impl Table {
    /// Assembles a table from columns and encoded rows, checking that every
    /// id is in range and every domain value occurs.
    pub fn from_encoded(columns: Vec<Column>, rows: Vec<Vec<ValueId>>) -> Result<Table> {
        let n = columns.len();
        if n == 0 {
            return Err(Error::InvalidTable("no columns".into()));
        }
        if rows.is_empty() {
            return Err(Error::InvalidTable("no rows".into()));
        }
        let mut seen: Vec<Vec<bool>> = columns.iter().map(|c| vec![false; c.domain_size()]).collect();
        let mut data = Vec::with_capacity(rows.len() * n);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidTable(format!("row {r} has {} values, expected {n}", row.len())));
            }
            for (c, &id) in row.iter().enumerate() {
                let d = columns[c].domain_size();
                if id as usize >= d {
                    return Err(Error::IdOutOfRange { column: c, id, domain: d });
                }
                seen[c][id as usize] = true;
            }
            data.extend_from_slice(row);
        }
        for (c, s) in seen.iter().enumerate() {
            if let Some(id) = s.iter().position(|&b| !b) {
                return Err(Error::InvalidTable(format!(
                    "value `{}` of column `{}` never occurs",
                    columns[c].domain[id],
                    columns[c].name
                )));
            }
        }
        check_unique_names(columns.iter().map(|c| c.name.as_str()))?;
        Ok(Table { columns, data })
    }

    /// Builds dictionaries from raw rows in one scan and encodes them.
    pub fn from_values(names: &[&str], dtypes: &[Dtype], rows: &[Vec<Value>]) -> Result<Table> {
        if names.len() != dtypes.len() {
            return Err(Error::InvalidTable("names and dtypes differ in length".into()));
        }
        let n = names.len();
        let mut domains: Vec<Vec<Value>> = vec![Vec::new(); n];
        for row in rows {
            if row.len() != n {
                return Err(Error::InvalidTable(format!("row has {} values, expected {n}", row.len())));
            }
            for (c, v) in row.iter().enumerate() {
                domains[c].push(v.clone());
            }
        }
        let columns = names
            .iter()
            .zip(dtypes)
            .zip(domains)
            .map(|((name, &dtype), dom)| Column::new(*name, dtype, dom))
            .collect::<Result<Vec<_>>>()?;
        let encoded = rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&columns)
                    .map(|(v, col)| match col.encode(v) {
                        Encoded::Id(id) => id,
                        Encoded::OutOfDomain { .. } => unreachable!("domain built from these rows"),
                    })
                    .collect()
            })
            .collect();
        Table::from_encoded(columns, encoded)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> &Column {
        &self.columns[i]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn row_count(&self) -> usize {
        self.data.len() / self.columns.len()
    }

    pub fn domain_sizes(&self) -> Vec<usize> {
        self.columns.iter().map(Column::domain_size).collect()
    }

    pub fn row(&self, i: usize) -> &[ValueId] {
        let n = self.columns.len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[ValueId]> + '_ {
        self.data.chunks_exact(self.columns.len())
    }

    /// Flat row-major id buffer.
    pub fn data(&self) -> &[ValueId] {
        &self.data
    }

    pub fn joint(&self) -> JointOracle {
        let mut counts: HashMap<Vec<ValueId>, u64> = HashMap::new();
        for row in self.rows() {
            *counts.entry(row.to_vec()).or_default() += 1;
        }
        JointOracle {
            counts,
            row_count: self.row_count() as u64,
        }
    }

    /// Empirical distribution of column `col` over its domain.
    pub fn marginal(&self, col: usize) -> Vec<f64> {
        let mut counts = vec![0u64; self.columns[col].domain_size()];
        for row in self.rows() {
            counts[row[col] as usize] += 1;
        }
        let total = self.row_count() as f64;
        counts.into_iter().map(|c| c as f64 / total).collect()
    }

    /// Entropy of the empirical joint distribution, bits per tuple.
    pub fn data_entropy(&self) -> f64 {
        entropy_bits(self.joint().sorted().into_iter().map(|(_, c)| c), self.row_count() as u64)
    }

    /// Dictionaries (names, dtypes, domains) without rows.
    pub fn meta(&self) -> TableMeta {
        TableMeta {
            columns: self.columns.clone(),
            row_count: self.row_count() as u64,
        }
    }

    pub fn dictionary_hash(&self) -> String {
        dictionary_hash(&self.columns)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        let mut record = Vec::with_capacity(self.columns.len());
        for row in self.rows() {
            record.clear();
            record.extend(row.iter().zip(&self.columns).map(|(&id, c)| c.domain[id as usize].to_string()));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Column dictionaries plus the row count: everything an estimator needs
/// to bind queries without holding the rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableMeta {
    pub columns: Vec<Column>,
    pub row_count: u64,
}

impl TableMeta {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn domain_sizes(&self) -> Vec<usize> {
        self.columns.iter().map(Column::domain_size).collect()
    }

    pub fn dictionary_hash(&self) -> String {
        dictionary_hash(&self.columns)
    }
}

pub(crate) fn dictionary_hash(columns: &[Column]) -> String {
    let mut h = Sha256::new();
    for c in columns {
        h.update((c.name.len() as u64).to_le_bytes());
        h.update(c.name.as_bytes());
        h.update(c.dtype.to_string().as_bytes());
        h.update((c.domain.len() as u64).to_le_bytes());
        for v in &c.domain {
            let s = v.to_string();
            h.update((s.len() as u64).to_le_bytes());
            h.update(s.as_bytes());
        }
    }
    hex::encode(h.finalize())
}

pub(crate) fn entropy_bits(counts: impl IntoIterator<Item = u64>, total: u64) -> f64 {
    let total = total as f64;
    let h: f64 = counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

fn check_unique_names<'a>(names: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for name in names {
        if !seen.insert(name) {
            return Err(Error::DuplicateColumn(name.to_string()));
        }
    }
    Ok(())
}

/// Column dtypes keyed by name, as read from a `name:dtype` sidecar file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schema {
    pub columns: Vec<(String, Dtype)>,
}

impl Schema {
    pub fn parse(text: &str) -> Result<Schema> {
        let mut columns = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, dtype) = line
                .rsplit_once(':')
                .ok_or_else(|| Error::Schema(format!("line {}: expected `name:dtype`", i + 1)))?;
            columns.push((name.trim().to_string(), dtype.parse()?));
        }
        check_unique_names(columns.iter().map(|(n, _)| n.as_str()))?;
        Ok(Schema { columns })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Schema> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Schema::parse(&text)
    }

    pub fn get(&self, name: &str) -> Option<Dtype> {
        self.columns.iter().find(|(n, _)| n == name).map(|&(_, d)| d)
    }
}

/// Reads a comma-separated file with a header row.
pub fn ingest_csv(path: impl AsRef<Path>, schema: Option<&Schema>) -> Result<Table> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(std::io::BufReader::new(file), schema)
}

pub fn read_csv<R: Read>(reader: R, schema: Option<&Schema>) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(Error::EmptyInput("no header row".into())),
    };
    let names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    check_unique_names(names.iter().map(String::as_str))?;
    if let Some(i) = names.iter().position(String::is_empty) {
        return Err(Error::MalformedRow {
            line: 1,
            message: format!("header field {} is empty", i + 1),
        });
    }
    let n = names.len();

    let mut raw: Vec<Vec<String>> = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != n {
            return Err(Error::MalformedRow {
                line,
                message: format!("expected {n} fields, found {}", rec.len()),
            });
        }
        if let Some(i) = rec.iter().position(str::is_empty) {
            return Err(Error::MalformedRow {
                line,
                message: format!("missing value for column `{}`", names[i]),
            });
        }
        raw.push(rec.iter().map(str::to_string).collect());
    }
    if raw.is_empty() {
        return Err(Error::EmptyInput("header but no data rows".into()));
    }

    let dtypes: Vec<Dtype> = (0..n)
        .map(|c| match schema.and_then(|s| s.get(&names[c])) {
            Some(d) => d,
            None => infer_dtype(raw.iter().map(|r| r[c].as_str())),
        })
        .collect();
    if let Some(s) = schema {
        if let Some((missing, _)) = s.columns.iter().find(|(name, _)| !names.contains(name)) {
            return Err(Error::Schema(format!("schema names column `{missing}` absent from the header")));
        }
    }

    let mut rows = Vec::with_capacity(raw.len());
    for (r, rec) in raw.iter().enumerate() {
        let row = rec
            .iter()
            .zip(&dtypes)
            .map(|(s, &d)| Value::parse(s, d))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::MalformedRow {
                line: r as u64 + 2,
                message: e.to_string(),
            })?;
        rows.push(row);
    }
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Table::from_values(&name_refs, &dtypes, &rows)
}

fn infer_dtype<'a>(mut values: impl Iterator<Item = &'a str> + Clone) -> Dtype {
    if values.clone().all(|v| v.trim().parse::<i64>().is_ok()) {
        Dtype::Integer
    } else if values.clone().all(|v| v.trim().parse::<f64>().is_ok()) {
        Dtype::Float
    } else if values.all(|v| NaiveDate::parse_from_str(v.trim(), "%Y-%m-%d").is_ok()) {
        Dtype::Date
    } else {
        Dtype::String
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(col: &[i64]) -> Vec<Vec<Value>> {
        col.iter().map(|&v| vec![Value::Int(v)]).collect()
    }

    #[test]
    fn city_dictionary_follows_lexicographic_order() {
        let t = read_csv("city\nSF\nPortland\n".as_bytes(), None).unwrap();
        let c = t.column(0);
        assert_eq!(c.dtype(), Dtype::String);
        assert_eq!(c.encode(&Value::Str("Portland".into())), Encoded::Id(0));
        assert_eq!(c.encode(&Value::Str("SF".into())), Encoded::Id(1));
        assert_eq!(t.row(0), &[1]);
        assert_eq!(t.row(1), &[0]);
    }

    #[test]
    fn single_cell_table() {
        let t = read_csv("a\n7\n".as_bytes(), None).unwrap();
        assert_eq!(t.domain_sizes(), vec![1]);
        assert_eq!(t.row(0), &[0]);
        assert_eq!(t.data_entropy(), 0.0);
    }

    #[test]
    fn encode_literal_reports_insertion_position() {
        let t = Table::from_values(&["year"], &[Dtype::Integer], &ints(&[2017, 2019])).unwrap();
        let c = t.column(0);
        assert_eq!(c.encode_literal("2017").unwrap(), Encoded::Id(0));
        assert_eq!(c.encode_literal("2018").unwrap(), Encoded::OutOfDomain { insert_at: 1 });
        assert_eq!(c.encode_literal("2030").unwrap(), Encoded::OutOfDomain { insert_at: 2 });
        assert_eq!(c.encode_literal("1990").unwrap(), Encoded::OutOfDomain { insert_at: 0 });
        assert!(matches!(c.encode_literal("twenty"), Err(Error::Dtype { .. })));
    }

    #[test]
    fn marginals() {
        let t = Table::from_values(&["a"], &[Dtype::Integer], &ints(&[0, 0, 1, 1])).unwrap();
        assert_eq!(t.marginal(0), vec![0.5, 0.5]);
        let t = Table::from_values(&["a"], &[Dtype::Integer], &ints(&[0, 0, 0, 1])).unwrap();
        assert_eq!(t.marginal(0), vec![0.75, 0.25]);
    }

    #[test]
    fn entropy_examples() {
        let t = Table::from_values(&["a"], &[Dtype::Integer], &ints(&[0, 1, 2, 3])).unwrap();
        assert!((t.data_entropy() - 2.0).abs() < 1e-12);
        let t = Table::from_values(&["a"], &[Dtype::Integer], &ints(&[5, 5, 5])).unwrap();
        assert_eq!(t.data_entropy(), 0.0);
        // counts {4,2,1,1}: 0.5*1 + 0.25*2 + 2*0.125*3 = 1.75
        let t = Table::from_values(&["a"], &[Dtype::Integer], &ints(&[0, 0, 0, 0, 1, 1, 2, 3])).unwrap();
        assert!((t.data_entropy() - 1.75).abs() < 1e-12);
    }

    #[test]
    fn dates_and_floats_order_naturally() {
        let csv = "d,x\n2018-03-23,10.5\n2017-12-01,-2\n2018-01-15,3e1\n";
        let t = read_csv(csv.as_bytes(), None).unwrap();
        assert_eq!(t.column(0).dtype(), Dtype::Date);
        assert_eq!(t.column(1).dtype(), Dtype::Float);
        let d: Vec<String> = t.column(0).domain().iter().map(|v| v.to_string()).collect();
        assert_eq!(d, ["2017-12-01", "2018-01-15", "2018-03-23"]);
        let x: Vec<String> = t.column(1).domain().iter().map(|v| v.to_string()).collect();
        assert_eq!(x, ["-2", "10.5", "30"]);
    }

    #[test]
    fn schema_overrides_inference() {
        let schema = Schema::parse("zip:string\n").unwrap();
        let t = read_csv("zip\n02139\n10001\n".as_bytes(), Some(&schema)).unwrap();
        assert_eq!(t.column(0).dtype(), Dtype::String);
        assert_eq!(t.column(0).domain()[0].to_string(), "02139");
    }

    #[test]
    fn ingest_errors() {
        assert!(matches!(read_csv("".as_bytes(), None), Err(Error::EmptyInput(_))));
        assert!(matches!(read_csv("a,b\n".as_bytes(), None), Err(Error::EmptyInput(_))));
        match read_csv("a,b\n1,2\n3\n".as_bytes(), None) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match read_csv("a,b\n1,2\n3,\n".as_bytes(), None) {
            Err(Error::MalformedRow { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_csv("a,a\n1,2\n".as_bytes(), None), Err(Error::DuplicateColumn(_))));
        let schema = Schema::parse("a:integer").unwrap();
        assert!(matches!(
            read_csv("a\n1\nx\n".as_bytes(), Some(&schema)),
            Err(Error::MalformedRow { line: 3, .. })
        ));
    }

    #[test]
    fn quoted_fields() {
        let t = read_csv("name,n\n\"Doe, Jane\",1\n\"x\"\"y\",2\n".as_bytes(), None).unwrap();
        let d: Vec<String> = t.column(0).domain().iter().map(|v| v.to_string()).collect();
        assert_eq!(d, ["Doe, Jane", "x\"y"]);
    }

    #[test]
    fn from_encoded_rejects_absent_domain_values() {
        let col = Column::new("a", Dtype::Integer, vec![Value::Int(1), Value::Int(2)]).unwrap();
        assert!(Table::from_encoded(vec![col.clone()], vec![vec![0]]).is_err());
        assert!(Table::from_encoded(vec![col], vec![vec![0], vec![2]]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn dictionary_round_trip_and_order(vals in prop::collection::vec(-50i64..50, 1..60)) {
                let t = Table::from_values(&["v"], &[Dtype::Integer], &ints(&vals)).unwrap();
                let c = t.column(0);
                for (i, v) in c.domain().iter().enumerate() {
                    prop_assert_eq!(c.encode(v), Encoded::Id(i as ValueId));
                    prop_assert_eq!(c.decode(i as ValueId), Some(v));
                }
                prop_assert!(c.domain().windows(2).all(|w| w[0] < w[1]));
                for (row, v) in t.rows().zip(&vals) {
                    prop_assert_eq!(c.decode(row[0]), Some(&Value::Int(*v)));
                }
            }

            #[test]
            fn joint_and_marginals_are_consistent(
                rows in prop::collection::vec((0i64..4, 0i64..3), 1..80)
            ) {
                let raw: Vec<Vec<Value>> = rows.iter().map(|&(a, b)| vec![Value::Int(a), Value::Int(b)]).collect();
                let t = Table::from_values(&["a", "b"], &[Dtype::Integer, Dtype::Integer], &raw).unwrap();
                let joint = t.joint();
                let total: f64 = joint.counts().keys().map(|k| joint.probability(k)).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                for col in 0..2 {
                    let m = t.marginal(col);
                    prop_assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    let mut counts = vec![0u64; m.len()];
                    for (k, &c) in joint.counts() {
                        counts[k[col] as usize] += c;
                    }
                    for (i, &c) in counts.iter().enumerate() {
                        prop_assert_eq!(m[i], c as f64 / t.row_count() as f64);
                    }
                }
            }
        }
    }
}
