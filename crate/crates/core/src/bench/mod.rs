//! Workloads, ground truth, Q-error and per-bucket reports.

pub mod synth;

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::armodel::AutoregressiveModel;
use crate::baselines::{uniform_region_estimate, IndepEstimator, SampleEstimator};
use crate::error::{Error, Result};
use crate::inference::{estimate_region, SamplerConfig};
use crate::query::{exact_count, Op, Predicate, Query, Region};
use crate::tabular::Table;

/// Columns with fewer distinct values only get equality filters.
pub const RANGE_MIN_DOMAIN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiteralSource {
    /// All literals of a query come from one sampled row.
    Data,
    /// Each literal is drawn uniformly from its column's domain.
    Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub count: usize,
    pub min_filters: usize,
    pub max_filters: usize,
    pub source: LiteralSource,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            count: 2000,
            min_filters: 5,
            max_filters: 11,
            source: LiteralSource::Data,
            seed: 42,
        }
    }
}

/// Generates conjunctive queries over `f` distinct columns each. Filter
/// counts are clipped to the table width; ranges use `<=` or `>=`.
pub fn generate_workload(table: &Table, spec: &WorkloadSpec) -> Result<Vec<Query>> {
    let n = table.n_columns();
    let hi = spec.max_filters.min(n);
    let lo = spec.min_filters.min(hi);
    if lo == 0 || spec.min_filters > spec.max_filters {
        return Err(Error::Config(format!(
            "filter range {}:{} is invalid",
            spec.min_filters, spec.max_filters
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ops = [Op::Eq, Op::Le, Op::Ge];
    let mut out = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let f = rng.gen_range(lo..=hi);
        let mut cols = index::sample(&mut rng, n, f).into_vec();
        cols.sort_unstable();
        let row = table.row(rng.gen_range(0..table.row_count())).to_vec();
        let predicates = cols
            .into_iter()
            .map(|c| {
                let column = table.column(c);
                let op = if column.domain_size() >= RANGE_MIN_DOMAIN {
                    ops[rng.gen_range(0..3)]
                } else {
                    Op::Eq
                };
                let id = match spec.source {
                    LiteralSource::Data => row[c],
                    LiteralSource::Domain => rng.gen_range(0..column.domain_size() as u32),
                };
                Predicate::new(column.name(), op, column.decode(id).unwrap().to_string())
            })
            .collect();
        out.push(Query::new(predicates));
    }
    Ok(out)
}

/// `max(e, a) / min(e, a)` with both clamped to at least 1.
pub fn q_error(estimate: f64, actual: f64) -> f64 {
    let (e, a) = (estimate.max(1.0), actual.max(1.0));
    e.max(a) / e.min(a)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bucket {
    High,
    Medium,
    Low,
}

impl Bucket {
    pub const ALL: [Bucket; 3] = [Bucket::High, Bucket::Medium, Bucket::Low];

    /// By true selectivity: High (2%, 100%], Medium (0.5%, 2%], Low otherwise.
    pub fn of(true_card: u64, rows: u64) -> Bucket {
        let s = true_card as f64 / rows as f64;
        if s > 0.02 {
            Bucket::High
        } else if s > 0.005 {
            Bucket::Medium
        } else {
            Bucket::Low
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::High => "high",
            Bucket::Medium => "medium",
            Bucket::Low => "low",
        }
    }
}

/// Nearest-rank percentile of ascending `sorted`; `None` when empty.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

// ---------------------------------------------------------------------------
// workload.jsonl

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateRecord {
    pub col: String,
    pub op: Op,
    pub lit: Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadEntry {
    pub predicates: Vec<PredicateRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_card: Option<u64>,
}

impl WorkloadEntry {
    pub fn from_query(query: &Query, true_card: Option<u64>) -> Self {
        let predicates = query
            .predicates
            .iter()
            .map(|p| PredicateRecord {
                col: p.column.clone(),
                op: p.op,
                lit: if p.op == Op::In {
                    Literal::Many(p.literals.clone())
                } else {
                    Literal::One(p.literals[0].clone())
                },
            })
            .collect();
        WorkloadEntry { predicates, true_card }
    }

    pub fn query(&self) -> Result<Query> {
        let predicates = self
            .predicates
            .iter()
            .map(|p| {
                let pred = match (&p.lit, p.op) {
                    (Literal::Many(v), Op::In) => Predicate::in_list(&p.col, v.clone()),
                    (Literal::One(v), Op::In) => Predicate::in_list(&p.col, vec![v.clone()]),
                    (Literal::One(v), op) => Predicate::new(&p.col, op, v.clone()),
                    (Literal::Many(_), op) => {
                        return Err(Error::QuerySyntax(format!(
                            "operator {} on `{}` takes a single literal",
                            op.as_str(),
                            p.col
                        )))
                    }
                };
                Ok(pred)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Query::new(predicates))
    }
}

pub fn write_workload<W: Write>(mut w: W, entries: &[WorkloadEntry]) -> Result<()> {
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n").map_err(|e| Error::io("<workload>", e))?;
    }
    Ok(())
}

pub fn read_workload<R: BufRead>(r: R) -> Result<Vec<WorkloadEntry>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<workload>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        out.push(entry);
    }
    Ok(out)
}

pub fn save_workload(path: impl AsRef<Path>, entries: &[WorkloadEntry]) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_workload(&mut w, entries)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_workload(path: impl AsRef<Path>) -> Result<Vec<WorkloadEntry>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_workload(std::io::BufReader::new(f))
}

/// Fills in true cardinalities by scanning the table.
pub fn label(table: &Table, entries: &mut [WorkloadEntry]) -> Result<()> {
    let meta = table.meta();
    for e in entries {
        let region = e.query()?.bind(&meta)?;
        e.true_card = Some(exact_count(table, &region));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// estimators

/// Anything that turns a bound region into a cardinality estimate.
pub trait CardinalityEstimator: Sync {
    fn name(&self) -> String;
    /// `nonce` identifies the query; randomized estimators mix it into their seed.
    fn cardinality(&self, region: &Region, nonce: u64) -> Result<f64>;
}

pub struct NaruEstimator<'a> {
    pub model: &'a AutoregressiveModel,
    pub sampler: SamplerConfig,
}

impl CardinalityEstimator for NaruEstimator<'_> {
    fn name(&self) -> String {
        "naru".into()
    }
    fn cardinality(&self, region: &Region, nonce: u64) -> Result<f64> {
        let cfg = SamplerConfig {
            seed: self.sampler.seed.wrapping_add(nonce),
            ..self.sampler.clone()
        };
        let e = estimate_region(self.model, region, &cfg)?;
        Ok(e.selectivity * self.model.meta().row_count as f64)
    }
}

/// [`IndepEstimator`] scaled to the table size.
pub struct IndepCardinality {
    pub inner: IndepEstimator,
    pub rows: u64,
}

impl IndepCardinality {
    pub fn new(table: &Table) -> Self {
        IndepCardinality {
            inner: IndepEstimator::new(table),
            rows: table.row_count() as u64,
        }
    }
}

impl CardinalityEstimator for IndepCardinality {
    fn name(&self) -> String {
        "indep".into()
    }
    fn cardinality(&self, region: &Region, _: u64) -> Result<f64> {
        Ok(self.inner.cardinality(region))
    }
}

/// [`SampleEstimator`] scaled to the table size.
pub struct SampleCardinality {
    pub inner: SampleEstimator,
    pub rows: u64,
}

impl SampleCardinality {
    pub fn new(table: &Table, percent: f64, seed: u64) -> Result<Self> {
        Ok(SampleCardinality {
            inner: SampleEstimator::new(table, percent, seed)?,
            rows: table.row_count() as u64,
        })
    }
}

impl CardinalityEstimator for SampleCardinality {
    fn name(&self) -> String {
        format!("sample:{}", self.inner.percent())
    }
    fn cardinality(&self, region: &Region, _: u64) -> Result<f64> {
        Ok(self.inner.estimate(region) * self.rows as f64)
    }
}

pub struct UniformRegionEstimator<'a> {
    pub model: &'a AutoregressiveModel,
    pub samples: usize,
    pub seed: u64,
}

impl CardinalityEstimator for UniformRegionEstimator<'_> {
    fn name(&self) -> String {
        format!("uniform-region:{}", self.samples)
    }
    fn cardinality(&self, region: &Region, nonce: u64) -> Result<f64> {
        let sel = uniform_region_estimate(self.model, region, self.samples, self.seed.wrapping_add(nonce))?;
        Ok(sel * self.model.meta().row_count as f64)
    }
}

/// Exact counts by scan.
pub struct OracleEstimator<'a> {
    pub table: &'a Table,
}

impl CardinalityEstimator for OracleEstimator<'_> {
    fn name(&self) -> String {
        "oracle".into()
    }
    fn cardinality(&self, region: &Region, _: u64) -> Result<f64> {
        Ok(exact_count(self.table, region) as f64)
    }
}

// ---------------------------------------------------------------------------
// reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub index: usize,
    pub true_card: u64,
    pub estimate: f64,
    pub q_error: f64,
    pub bucket: Bucket,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub median: Option<f64>,
    pub p95: Option<f64>,
    pub p99: Option<f64>,
    pub max: Option<f64>,
    pub mean_latency_ms: Option<f64>,
}

impl Summary {
    fn of<'a>(results: impl Iterator<Item = &'a QueryResult>) -> Summary {
        let results: Vec<&QueryResult> = results.collect();
        let mut errs: Vec<f64> = results.iter().map(|r| r.q_error).collect();
        errs.sort_by(f64::total_cmp);
        let n = results.len();
        Summary {
            count: n,
            median: percentile(&errs, 50.0),
            p95: percentile(&errs, 95.0),
            p99: percentile(&errs, 99.0),
            max: errs.last().copied(),
            mean_latency_ms: (n > 0).then(|| results.iter().map(|r| r.latency_ms).sum::<f64>() / n as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub name: String,
    pub overall: Summary,
    pub high: Summary,
    pub medium: Summary,
    pub low: Summary,
    pub queries: Vec<QueryResult>,
}

impl EstimatorReport {
    pub fn bucket(&self, b: Bucket) -> &Summary {
        match b {
            Bucket::High => &self.high,
            Bucket::Medium => &self.medium,
            Bucket::Low => &self.low,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadReport {
    pub row_count: u64,
    pub query_count: usize,
    pub estimators: Vec<EstimatorReport>,
}

impl WorkloadReport {
    pub fn estimator(&self, name: &str) -> Option<&EstimatorReport> {
        self.estimators.iter().find(|e| e.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per estimator and bucket.
    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let width = self.estimators.iter().map(|e| e.name.len()).max().unwrap_or(0).max(9);
        let mut s = String::new();
        writeln!(
            s,
            "{:<width$}  {:<7} {:>6} {:>10} {:>10} {:>10} {:>12} {:>10}",
            "estimator", "bucket", "count", "median", "95th", "99th", "max", "ms/query"
        )
        .unwrap();
        for e in &self.estimators {
            let rows = [("high", &e.high), ("medium", &e.medium), ("low", &e.low), ("all", &e.overall)];
            for (label, sm) in rows {
                writeln!(
                    s,
                    "{:<width$}  {:<7} {:>6} {:>10} {:>10} {:>10} {:>12} {:>10}",
                    e.name,
                    label,
                    sm.count,
                    fmt(sm.median),
                    fmt(sm.p95),
                    fmt(sm.p99),
                    fmt(sm.max),
                    fmt(sm.mean_latency_ms),
                )
                .unwrap();
            }
        }
        s
    }
}

/// Scores every estimator on every query. Missing true cardinalities are
/// computed by scan. Queries are split across `threads` workers; results
/// come back in query order either way.
pub fn run_eval(
    estimators: &[&dyn CardinalityEstimator],
    workload: &[WorkloadEntry],
    table: &Table,
    threads: usize,
) -> Result<WorkloadReport> {
    let meta = table.meta();
    let rows = table.row_count() as u64;
    let mut bound = Vec::with_capacity(workload.len());
    for e in workload {
        let region = e.query()?.bind(&meta)?;
        let truth = match e.true_card {
            Some(c) => c,
            None => exact_count(table, &region),
        };
        bound.push((region, truth));
    }
    let threads = threads.max(1).min(bound.len().max(1));
    let chunk = bound.len().div_ceil(threads).max(1);

    let mut reports = Vec::with_capacity(estimators.len());
    for &est in estimators {
        let parts: Vec<Result<Vec<QueryResult>>> = std::thread::scope(|s| {
            let handles: Vec<_> = bound
                .chunks(chunk)
                .enumerate()
                .map(|(k, part)| {
                    s.spawn(move || {
                        part.iter()
                            .enumerate()
                            .map(|(j, (region, truth))| {
                                let index = k * chunk + j;
                                let start = Instant::now();
                                let estimate = est.cardinality(region, index as u64)?;
                                let latency_ms = start.elapsed().as_secs_f64() * 1e3;
                                Ok(QueryResult {
                                    index,
                                    true_card: *truth,
                                    estimate,
                                    q_error: q_error(estimate, *truth as f64),
                                    bucket: Bucket::of(*truth, rows),
                                    latency_ms,
                                })
                            })
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("eval worker panicked")).collect()
        });
        let mut queries = Vec::with_capacity(bound.len());
        for p in parts {
            queries.extend(p?);
        }
        queries.sort_by_key(|q| q.index);
        reports.push(EstimatorReport {
            name: est.name(),
            overall: Summary::of(queries.iter()),
            high: Summary::of(queries.iter().filter(|q| q.bucket == Bucket::High)),
            medium: Summary::of(queries.iter().filter(|q| q.bucket == Bucket::Medium)),
            low: Summary::of(queries.iter().filter(|q| q.bucket == Bucket::Low)),
            queries,
        });
    }
    Ok(WorkloadReport {
        row_count: rows,
        query_count: bound.len(),
        estimators: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::exact_selectivity;

    #[test]
    fn q_error_examples() {
        assert_eq!(q_error(5.0, 10.0), 2.0);
        assert_eq!(q_error(0.0, 0.0), 1.0);
        assert_eq!(q_error(1e6, 1.0), 1e6);
        assert_eq!(q_error(0.3, 7.0), 7.0);
    }

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile(&v, 50.0), Some(5.0));
        assert_eq!(percentile(&v, 95.0), Some(10.0));
        assert_eq!(percentile(&v, 0.0), Some(1.0));
        assert_eq!(percentile(&[], 50.0), None);
    }

    #[test]
    fn buckets() {
        assert_eq!(Bucket::of(0, 1000), Bucket::Low);
        assert_eq!(Bucket::of(5, 1000), Bucket::Low);
        assert_eq!(Bucket::of(6, 1000), Bucket::Medium);
        assert_eq!(Bucket::of(20, 1000), Bucket::Medium);
        assert_eq!(Bucket::of(21, 1000), Bucket::High);
        assert_eq!(Bucket::of(1000, 1000), Bucket::High);
    }

    #[test]
    fn workload_shape() {
        let t = synth::correlated(3000, 1);
        let spec = WorkloadSpec {
            count: 300,
            ..Default::default()
        };
        let w = generate_workload(&t, &spec).unwrap();
        assert_eq!(w, generate_workload(&t, &spec).unwrap());
        let fuel = "fuel";
        for q in &w {
            assert!((5..=8).contains(&q.predicates.len()));
            let mut cols: Vec<&str> = q.predicates.iter().map(|p| p.column.as_str()).collect();
            cols.sort();
            cols.dedup();
            assert_eq!(cols.len(), q.predicates.len());
            for p in &q.predicates {
                if p.column == fuel {
                    assert_eq!(p.op, Op::Eq);
                }
            }
            let again = Query::parse(&q.to_string()).unwrap();
            assert_eq!(again.bind(&t.meta()).unwrap(), q.bind(&t.meta()).unwrap());
        }
    }

    #[test]
    fn equality_only_data_queries_hit_rows() {
        let t = synth::small(500, 2);
        let spec = WorkloadSpec {
            count: 100,
            min_filters: 4,
            max_filters: 4,
            ..Default::default()
        };
        for q in generate_workload(&t, &spec).unwrap() {
            assert!(q.predicates.iter().all(|p| p.op == Op::Eq));
            assert!(exact_count(&t, &q.bind(&t.meta()).unwrap()) >= 1);
        }
    }

    #[test]
    fn filters_clip_to_width() {
        let t = synth::small(100, 2);
        let spec = WorkloadSpec {
            count: 20,
            ..Default::default()
        };
        assert!(generate_workload(&t, &spec).unwrap().iter().all(|q| q.predicates.len() == 4));
        let bad = WorkloadSpec {
            min_filters: 0,
            ..spec
        };
        assert!(generate_workload(&t, &bad).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let q = Query::parse("a = 'x y' AND b IN (1, 2) AND c >= 3").unwrap();
        let e = WorkloadEntry::from_query(&q, Some(4));
        let mut buf = Vec::new();
        write_workload(&mut buf, &[e.clone(), WorkloadEntry::from_query(&q, None)]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().contains(r#""lit":["1","2"]"#));
        assert!(!text.lines().nth(1).unwrap().contains("true_card"));
        let back = read_workload(&buf[..]).unwrap();
        assert_eq!(back[0], e);
        assert_eq!(back[0].query().unwrap(), q);
        assert!(read_workload(&b"{not json}\n"[..]).is_err());
    }

    #[test]
    fn oracle_scores_one_and_indep_exact_on_products() {
        let t = synth::product(&[3, 4, 12], 5);
        let spec = WorkloadSpec {
            count: 60,
            min_filters: 1,
            max_filters: 3,
            ..Default::default()
        };
        let mut w: Vec<WorkloadEntry> = generate_workload(&t, &spec)
            .unwrap()
            .iter()
            .map(|q| WorkloadEntry::from_query(q, None))
            .collect();
        label(&t, &mut w).unwrap();
        let oracle = OracleEstimator { table: &t };
        let indep = IndepCardinality::new(&t);
        let r = run_eval(&[&oracle, &indep], &w, &t, 3).unwrap();
        for e in &r.estimators {
            assert_eq!(e.queries.len(), 60);
            for q in &e.queries {
                assert!((q.q_error - 1.0).abs() < 1e-9, "{} {:?}", e.name, q);
            }
        }
        assert_eq!(r.estimator("oracle").unwrap().overall.max, Some(1.0));
        let single = run_eval(&[&oracle], &w, &t, 1).unwrap();
        let multi = run_eval(&[&oracle], &w, &t, 4).unwrap();
        let strip = |r: &WorkloadReport| r.estimators[0].queries.iter().map(|q| (q.index, q.true_card, q.estimate)).collect::<Vec<_>>();
        assert_eq!(strip(&single), strip(&multi));
        assert!(r.to_text().contains("indep"));
        let parsed: WorkloadReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(parsed.query_count, 60);
        let region = w[0].query().unwrap().bind(&t.meta()).unwrap();
        assert_eq!(w[0].true_card.unwrap() as f64 / t.row_count() as f64, exact_selectivity(&t, &region));
    }
}
