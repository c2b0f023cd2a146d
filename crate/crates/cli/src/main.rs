mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use naru::armodel;
use naru::bench::{
    self, synth, CardinalityEstimator, IndepCardinality, LiteralSource, NaruEstimator, OracleEstimator,
    SampleCardinality, UniformRegionEstimator, WorkloadEntry, WorkloadSpec,
};
use naru::inference;
use naru::ordering::{self, OrderKind};
use naru::tabular::{ingest_csv, Schema, Table};
use naru::training::{self, TrainConfig};
use naru::{AutoregressiveModel, ModelConfig, Query, SamplerConfig};

use config::{fill, ConfigFile};

const DEFAULT_SEED: u64 = 42;
const ESTIMATOR_NAMES: &str = "naru, indep, sample:<percent>, uniform-region:<samples>, oracle";

#[derive(Parser, Debug)]
#[command(name = "naru", version, about = "Learned selectivity estimation with deep autoregressive models")]
struct Cli {
    /// TOML file with defaults; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read a CSV table and print its dictionary summary as JSON.
    Ingest(IngestArgs),
    /// Write one of the built-in synthetic tables as CSV.
    Synth(SynthArgs),
    /// Fit an autoregressive model to a table.
    Train(TrainArgs),
    /// Estimate the selectivity of one query.
    Estimate(EstimateArgs),
    /// Generate a random conjunctive workload as JSON lines.
    Workload(WorkloadArgs),
    /// Label a workload with exact cardinalities.
    Oracle(OracleArgs),
    /// Score estimators on a workload and report Q-errors.
    Eval(EvalArgs),
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
struct TableArgs {
    /// Input CSV with a header row.
    #[arg(long, value_name = "CSV")]
    data: Option<PathBuf>,
    /// `name:dtype` sidecar overriding inferred column types.
    #[arg(long, value_name = "FILE")]
    schema: Option<PathBuf>,
}

impl TableArgs {
    fn fill_from(&mut self, mut file: TableArgs) {
        fill!(self, file; data, schema);
    }

    fn load(&self) -> Result<Table> {
        let data = self.data.as_ref().context("--data is required")?;
        let schema = self.schema.as_ref().map(Schema::load).transpose()?;
        let table = ingest_csv(data, schema.as_ref()).with_context(|| format!("ingesting {}", data.display()))?;
        eprintln!(
            "loaded {}: {} rows, {} columns",
            data.display(),
            table.row_count(),
            table.n_columns()
        );
        Ok(table)
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
struct IngestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    table: TableArgs,
    /// Also write the resolved `name:dtype` schema here.
    #[arg(long, value_name = "FILE")]
    schema_out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
struct SynthArgs {
    /// correlated, small, skewed or product.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    rows: Option<usize>,
    /// Domain sizes for `product`, comma-separated.
    #[arg(long, value_name = "D1,D2,...")]
    domains: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "CSV")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    table: TableArgs,
    /// Column ordering: natural, mutinfo, pmutinfo or random.
    #[arg(long)]
    order: Option<String>,
    /// Hidden layer widths, comma-separated.
    #[arg(long, value_name = "W1,W2,...")]
    hidden: Option<String>,
    #[arg(long)]
    embedding_dim: Option<usize>,
    /// Columns with more distinct values than this are embedded.
    #[arg(long)]
    onehot_threshold: Option<usize>,
    /// Residual connections between equal-width hidden layers.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    residual: Option<bool>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Train with randomly masked input columns (needed for wildcard skipping).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    wildcard_augment: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model output path.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Training log as JSON lines; defaults to `<out>.train.jsonl`.
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
struct SamplerArgs {
    /// Progressive-sampling paths per query.
    #[arg(long)]
    samples: Option<usize>,
    /// Sample every column instead of skipping wildcards.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    no_skip: Option<bool>,
    /// Regions with at most this many points are enumerated exactly.
    #[arg(long)]
    enumeration_threshold: Option<u64>,
}

impl SamplerArgs {
    fn fill_from(&mut self, mut file: SamplerArgs) {
        fill!(self, file; samples, no_skip, enumeration_threshold);
    }

    fn config(&self, seed: u64) -> SamplerConfig {
        let d = SamplerConfig::default();
        SamplerConfig {
            samples: self.samples.unwrap_or(d.samples),
            enumeration_threshold: self.enumeration_threshold.unwrap_or(d.enumeration_threshold),
            wildcard_skip: !self.no_skip.unwrap_or(false),
            seed,
        }
    }
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
struct EstimateArgs {
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Conjunction such as "year >= 2015 AND state = 'NY'".
    #[arg(long)]
    query: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
struct WorkloadArgs {
    #[command(flatten)]
    #[serde(flatten)]
    table: TableArgs,
    #[arg(long)]
    count: Option<usize>,
    /// Filters per query as MIN:MAX, clipped to the column count.
    #[arg(long, value_name = "MIN:MAX")]
    filters: Option<String>,
    /// Literal source: data (from sampled rows) or domain (uniform over each column).
    #[arg(long)]
    source: Option<String>,
    /// Shorthand for `--source domain`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    ood: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
struct OracleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    table: TableArgs,
    #[arg(long, value_name = "FILE")]
    workload: Option<PathBuf>,
    /// Output path; the input workload is rewritten when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
struct EvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    table: TableArgs,
    #[arg(long, value_name = "FILE")]
    workload: Option<PathBuf>,
    /// Required by `naru` and `uniform-region:S`.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Comma-separated: naru, indep, sample:<percent>, uniform-region:<samples>, oracle.
    #[arg(long)]
    estimators: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report format on stdout: json or text.
    #[arg(long)]
    format: Option<String>,
    /// Also write the JSON report here.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let seed = |flag: Option<u64>| -> Result<u64> { Ok(flag.or(file.seed()?).unwrap_or(DEFAULT_SEED)) };
    match cli.command {
        Command::Ingest(mut a) => {
            let mut f: IngestArgs = file.section("ingest")?;
            a.table.fill_from(std::mem::take(&mut f.table));
            fill!(a, f; schema_out);
            cmd_ingest(&a)
        }
        Command::Synth(mut a) => {
            let mut f: SynthArgs = file.section("synth")?;
            fill!(a, f; kind, rows, domains, seed, out);
            let s = seed(a.seed)?;
            cmd_synth(&a, s)
        }
        Command::Train(mut a) => {
            let mut f: TrainArgs = file.section("train")?;
            a.table.fill_from(std::mem::take(&mut f.table));
            fill!(a, f; order, hidden, embedding_dim, onehot_threshold, residual, epochs, batch, lr,
                wildcard_augment, seed, out, log);
            let s = seed(a.seed)?;
            cmd_train(&a, s)
        }
        Command::Estimate(mut a) => {
            let mut f: EstimateArgs = file.section("estimate")?;
            a.sampler.fill_from(std::mem::take(&mut f.sampler));
            fill!(a, f; model, query, seed);
            let s = seed(a.seed)?;
            cmd_estimate(&a, s)
        }
        Command::Workload(mut a) => {
            let mut f: WorkloadArgs = file.section("workload")?;
            a.table.fill_from(std::mem::take(&mut f.table));
            fill!(a, f; count, filters, source, ood, seed, out);
            let s = seed(a.seed)?;
            cmd_workload(&a, s)
        }
        Command::Oracle(mut a) => {
            let mut f: OracleArgs = file.section("oracle")?;
            a.table.fill_from(std::mem::take(&mut f.table));
            fill!(a, f; workload, out);
            cmd_oracle(&a)
        }
        Command::Eval(mut a) => {
            let mut f: EvalArgs = file.section("eval")?;
            a.table.fill_from(std::mem::take(&mut f.table));
            a.sampler.fill_from(std::mem::take(&mut f.sampler));
            fill!(a, f; workload, model, estimators, threads, seed, format, out);
            let s = seed(a.seed)?;
            cmd_eval(&a, s)
        }
    }
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().with_context(|| format!("--{flag} is required"))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn parse_list(text: &str, what: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .with_context(|| format!("invalid {what} `{}` in `{text}`", s.trim()))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// ingest / synth

#[derive(Serialize)]
struct ColumnSummary<'a> {
    name: &'a str,
    dtype: String,
    distinct: usize,
    entropy_bits: f64,
}

#[derive(Serialize)]
struct TableSummary<'a> {
    rows: usize,
    columns: Vec<ColumnSummary<'a>>,
    data_entropy_bits: f64,
    dictionary_hash: String,
}

fn cmd_ingest(a: &IngestArgs) -> Result<()> {
    let table = a.table.load()?;
    let columns = (0..table.n_columns())
        .map(|c| ColumnSummary {
            name: table.column(c).name(),
            dtype: table.column(c).dtype().to_string(),
            distinct: table.column(c).domain_size(),
            entropy_bits: ordering::joint_entropy(&table, &[c]),
        })
        .collect();
    if let Some(path) = &a.schema_out {
        let text: String = table
            .columns()
            .iter()
            .map(|c| format!("{}:{}\n", c.name(), c.dtype()))
            .collect();
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    print_json(&TableSummary {
        rows: table.row_count(),
        columns,
        data_entropy_bits: table.data_entropy(),
        dictionary_hash: table.dictionary_hash(),
    })
}

fn cmd_synth(a: &SynthArgs, seed: u64) -> Result<()> {
    let kind = a.kind.as_deref().unwrap_or("correlated");
    let rows = a.rows.unwrap_or(10_000);
    let table = match kind {
        "correlated" => synth::correlated(rows, seed),
        "small" => synth::small(rows, seed),
        "skewed" => synth::skewed_hot(rows, 6, 10, 0.99, seed),
        "product" => {
            let domains = parse_list(a.domains.as_deref().unwrap_or("4,5,6"), "domain size")?;
            if domains.contains(&0) {
                bail!("domain sizes must be positive");
            }
            let domains: Vec<i64> = domains.into_iter().map(|d| d as i64).collect();
            let cells: usize = domains.iter().map(|&d| d as usize).product();
            synth::product(&domains, rows.div_ceil(cells).max(1))
        }
        other => bail!("unknown synthetic table `{other}` (expected correlated, small, skewed or product)"),
    };
    let out = required(&a.out, "out")?;
    table.save_csv(out)?;
    eprintln!("wrote {} rows to {}", table.row_count(), out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// train

fn cmd_train(a: &TrainArgs, seed: u64) -> Result<()> {
    let out = required(&a.out, "out")?;
    let table = a.table.load()?;
    let order: OrderKind = a.order.as_deref().unwrap_or("natural").parse()?;
    let defaults = ModelConfig::default();
    let config = ModelConfig {
        hidden_sizes: match &a.hidden {
            Some(h) => parse_list(h, "hidden width")?,
            None => defaults.hidden_sizes.clone(),
        },
        residual: a.residual.unwrap_or(defaults.residual),
        onehot_threshold: a.onehot_threshold.unwrap_or(defaults.onehot_threshold),
        embedding_dim: a.embedding_dim.unwrap_or(defaults.embedding_dim),
        ordering: ordering::order_for(&table, order, seed),
        seed,
        ..defaults
    };
    let td = TrainConfig::default();
    let train_cfg = TrainConfig {
        epochs: a.epochs.unwrap_or(td.epochs),
        batch_size: a.batch.unwrap_or(td.batch_size),
        learning_rate: a.lr.unwrap_or(td.learning_rate),
        wildcard_augment: a.wildcard_augment.unwrap_or(td.wildcard_augment),
        seed,
        ..td
    };
    eprintln!("ordering ({order}): {:?}", config.ordering);
    let mut model = AutoregressiveModel::build(config, &table)?;
    eprintln!("model has {} parameters", model.params().len());
    let report = training::train_with(&mut model, &table, &train_cfg, |e| {
        eprintln!(
            "epoch {:>3}  cross-entropy {:.4} bits  gap {:.4} bits  {:.1}s",
            e.epoch, e.xent_bits, e.gap_bits, e.seconds
        );
    })?;
    model.save(out)?;
    let log = a.log.clone().unwrap_or_else(|| sibling(out, ".train.jsonl"));
    std::fs::write(&log, report.to_json_lines()).with_context(|| format!("writing {}", log.display()))?;
    eprintln!("wrote model to {} and training log to {}", out.display(), log.display());
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

// ---------------------------------------------------------------------------
// estimate

#[derive(Serialize)]
struct EstimateOutput {
    selectivity: f64,
    cardinality: u64,
    method: &'static str,
    standard_error: Option<f64>,
}

fn cmd_estimate(a: &EstimateArgs, seed: u64) -> Result<()> {
    let model = armodel::load(required(&a.model, "model")?)?;
    let query = Query::parse(required(&a.query, "query")?)?;
    let meta = model.meta().clone();
    let e = inference::estimate(&model, &query, &meta, &a.sampler.config(seed))?;
    print_json(&EstimateOutput {
        selectivity: e.selectivity,
        cardinality: e.cardinality,
        method: e.method.as_str(),
        standard_error: e.standard_error,
    })
}

// ---------------------------------------------------------------------------
// workload / oracle / eval

fn parse_filters(text: &str) -> Result<(usize, usize)> {
    let (lo, hi) = match text.split_once(':') {
        Some((lo, hi)) => (lo, hi),
        None => (text, text),
    };
    let lo = lo.trim().parse().with_context(|| format!("invalid --filters `{text}`"))?;
    let hi = hi.trim().parse().with_context(|| format!("invalid --filters `{text}`"))?;
    Ok((lo, hi))
}

fn cmd_workload(a: &WorkloadArgs, seed: u64) -> Result<()> {
    let table = a.table.load()?;
    let d = WorkloadSpec::default();
    let (min_filters, max_filters) = match &a.filters {
        Some(f) => parse_filters(f)?,
        None => (d.min_filters, d.max_filters),
    };
    let source = match (a.source.as_deref(), a.ood.unwrap_or(false)) {
        (Some("domain"), _) | (None, true) => LiteralSource::Domain,
        (Some("data"), false) | (None, false) => LiteralSource::Data,
        (Some("data"), true) => bail!("--ood conflicts with --source data"),
        (Some(other), _) => bail!("unknown literal source `{other}` (expected data or domain)"),
    };
    let spec = WorkloadSpec {
        count: a.count.unwrap_or(d.count),
        min_filters,
        max_filters,
        source,
        seed,
    };
    let entries: Vec<WorkloadEntry> = bench::generate_workload(&table, &spec)?
        .iter()
        .map(|q| WorkloadEntry::from_query(q, None))
        .collect();
    match &a.out {
        Some(path) => {
            bench::save_workload(path, &entries)?;
            eprintln!("wrote {} queries to {}", entries.len(), path.display());
        }
        None => bench::write_workload(std::io::stdout().lock(), &entries)?,
    }
    Ok(())
}

fn cmd_oracle(a: &OracleArgs) -> Result<()> {
    let input = required(&a.workload, "workload")?;
    let table = a.table.load()?;
    let mut entries = bench::load_workload(input)?;
    bench::label(&table, &mut entries)?;
    let out = a.out.as_ref().unwrap_or(input);
    bench::save_workload(out, &entries)?;
    eprintln!("labelled {} queries into {}", entries.len(), out.display());
    Ok(())
}

enum EstimatorSpec {
    Naru,
    Indep,
    Sample(f64),
    UniformRegion(usize),
    Oracle,
}

fn parse_estimators(text: &str) -> Result<Vec<EstimatorSpec>> {
    let mut specs = Vec::new();
    for name in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (name, None),
        };
        let spec = match (head, arg) {
            ("naru", None) => EstimatorSpec::Naru,
            ("indep", None) => EstimatorSpec::Indep,
            ("oracle", None) => EstimatorSpec::Oracle,
            ("sample", Some(p)) => EstimatorSpec::Sample(
                p.parse()
                    .with_context(|| format!("invalid sample percentage in `{name}`"))?,
            ),
            ("uniform-region", Some(s)) => EstimatorSpec::UniformRegion(
                s.parse()
                    .with_context(|| format!("invalid sample count in `{name}`"))?,
            ),
            _ => bail!("unknown estimator `{name}`; valid estimators are: {ESTIMATOR_NAMES}"),
        };
        specs.push(spec);
    }
    if specs.is_empty() {
        bail!("no estimators given; valid estimators are: {ESTIMATOR_NAMES}");
    }
    Ok(specs)
}

fn cmd_eval(a: &EvalArgs, seed: u64) -> Result<()> {
    let specs = parse_estimators(a.estimators.as_deref().unwrap_or("naru,indep"))?;
    let format = a.format.as_deref().unwrap_or("json");
    if format != "json" && format != "text" {
        bail!("unknown format `{format}` (expected json or text)");
    }
    let threads = a.threads.unwrap_or(1);
    if threads == 0 {
        bail!("--threads must be at least 1");
    }
    let workload = bench::load_workload(required(&a.workload, "workload")?)?;
    let table = a.table.load()?;

    let needs_model = specs
        .iter()
        .any(|s| matches!(s, EstimatorSpec::Naru | EstimatorSpec::UniformRegion(_)));
    let model = if needs_model {
        let path = a
            .model
            .as_ref()
            .context("--model is required for the naru and uniform-region estimators")?;
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Some(armodel::deserialize_for(&bytes, &table)?)
    } else {
        None
    };

    let mut owned: Vec<Box<dyn CardinalityEstimator + '_>> = Vec::new();
    for spec in &specs {
        owned.push(match *spec {
            EstimatorSpec::Naru => Box::new(NaruEstimator {
                model: model.as_ref().expect("model loaded"),
                sampler: a.sampler.config(seed),
            }),
            EstimatorSpec::Indep => Box::new(IndepCardinality::new(&table)),
            EstimatorSpec::Sample(p) => Box::new(SampleCardinality::new(&table, p, seed)?),
            EstimatorSpec::UniformRegion(s) => Box::new(UniformRegionEstimator {
                model: model.as_ref().expect("model loaded"),
                samples: s,
                seed,
            }),
            EstimatorSpec::Oracle => Box::new(OracleEstimator { table: &table }),
        });
    }
    let estimators: Vec<&dyn CardinalityEstimator> = owned.iter().map(|b| b.as_ref()).collect();
    eprintln!(
        "evaluating {} estimators on {} queries with {threads} threads",
        estimators.len(),
        workload.len()
    );
    let report = bench::run_eval(&estimators, &workload, &table, threads)?;
    let json = report.to_json();
    if let Some(path) = &a.out {
        let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(w, "{json}")?;
        w.flush()?;
    }
    let mut stdout = std::io::stdout().lock();
    if format == "json" {
        writeln!(stdout, "{json}")?;
    } else {
        write!(stdout, "{}", report.to_text())?;
    }
    Ok(())
}
