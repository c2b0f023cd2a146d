//! Browser demo: train a small model on a synthetic table, then compare
//! estimators on queries typed into the page. Every method returns JSON
//! text so the page needs no bindings beyond strings.

use serde::Serialize;
use wasm_bindgen::prelude::*;
use web_time::Instant;

use naru::baselines::{uniform_region_estimate, IndepEstimator};
use naru::bench::{self, synth, LiteralSource, WorkloadSpec};
use naru::inference::{self, Method};
use naru::query::exact_count;
use naru::training::{self, TrainConfig};
use naru::{AutoregressiveModel, ModelConfig, Query, Region, SamplerConfig, Table};

/// Sample counts plotted by [`Demo::convergence`].
const CURVE_SAMPLES: [usize; 11] = [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000];

#[wasm_bindgen]
pub struct Demo {
    table: Table,
    model: AutoregressiveModel,
    indep: IndepEstimator,
    epochs: Vec<training::EpochStats>,
    seed: u64,
}

#[derive(Serialize)]
struct ColumnInfo {
    name: String,
    distinct: usize,
    values: Vec<String>,
}

#[derive(Serialize)]
struct TableInfo {
    rows: usize,
    entropy_bits: f64,
    parameters: usize,
    columns: Vec<ColumnInfo>,
}

#[derive(Serialize)]
struct EstimatorResult {
    name: &'static str,
    cardinality: f64,
    q_error: f64,
    millis: f64,
    detail: Option<String>,
}

#[derive(Serialize)]
struct Comparison {
    query: String,
    true_card: u64,
    region_points: f64,
    estimators: Vec<EstimatorResult>,
}

#[derive(Serialize)]
struct CurvePoint {
    samples: usize,
    progressive: f64,
    uniform_region: f64,
}

#[derive(Serialize)]
struct Curve {
    query: String,
    true_card: u64,
    points: Vec<CurvePoint>,
}

#[wasm_bindgen]
impl Demo {
    /// `kind` is `correlated` (8 columns with a functional dependency and
    /// strong correlations) or `skewed` (6 columns with one hot tuple).
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, rows: usize, seed: u64) -> Result<Demo, String> {
        if rows == 0 {
            return Err("the table needs at least one row".into());
        }
        let table = match kind {
            "correlated" => synth::correlated(rows, seed),
            "skewed" => synth::skewed_hot(rows, 6, 10, 0.99, seed),
            other => return Err(format!("unknown table `{other}` (expected correlated or skewed)")),
        };
        let config = ModelConfig {
            seed,
            ..ModelConfig::with_hidden(&[64, 64])
        };
        let model = AutoregressiveModel::build(config, &table).map_err(err)?;
        Ok(Demo {
            indep: IndepEstimator::new(&table),
            table,
            model,
            epochs: Vec::new(),
            seed,
        })
    }

    /// Column names, domain sizes and decoded values, for building the form.
    pub fn info(&self) -> String {
        let columns = self
            .table
            .columns()
            .iter()
            .map(|c| ColumnInfo {
                name: c.name().to_string(),
                distinct: c.domain_size(),
                values: c.domain().iter().map(|v| v.to_string()).collect(),
            })
            .collect();
        json(&TableInfo {
            rows: self.table.row_count(),
            entropy_bits: self.table.data_entropy(),
            parameters: self.model.params().len(),
            columns,
        })
    }

    /// Runs one more epoch and returns every epoch so far. Each call starts
    /// a fresh optimizer state, which keeps the page responsive between
    /// epochs at a small cost in convergence speed.
    pub fn train_epoch(&mut self) -> Result<String, String> {
        let epoch = self.epochs.len() + 1;
        let config = TrainConfig {
            epochs: 1,
            seed: self.seed.wrapping_add(epoch as u64),
            ..Default::default()
        };
        let report = training::train(&mut self.model, &self.table, &config).map_err(err)?;
        let mut stats = report.epochs[0].clone();
        stats.epoch = epoch;
        self.epochs.push(stats);
        Ok(json(&self.epochs))
    }

    /// A random query in the text grammar, drawn like benchmark workloads.
    pub fn random_query(&self, seed: u64) -> Result<String, String> {
        let spec = WorkloadSpec {
            count: 1,
            min_filters: 2,
            max_filters: 4.min(self.table.n_columns()),
            source: LiteralSource::Data,
            seed,
        };
        let q = bench::generate_workload(&self.table, &spec).map_err(err)?;
        Ok(q[0].to_string())
    }

    /// Estimates `query` with the learned model, uniform-region sampling
    /// over the model, independence, and a full scan.
    pub fn compare(&self, query: &str, samples: usize) -> Result<String, String> {
        let (query, region) = self.bind(query)?;
        let truth = exact_count(&self.table, &region);
        let rows = self.table.row_count() as f64;
        let mut results = Vec::new();

        let t = Instant::now();
        let e = inference::estimate_region(&self.model, &region, &self.sampler(samples)).map_err(err)?;
        let detail = match (e.method, e.standard_error) {
            (Method::Progressive, Some(se)) => format!("progressive, ±{:.1} rows", se * rows),
            (m, _) => m.as_str().to_string(),
        };
        results.push(result("naru", e.selectivity * rows, truth, t, Some(detail)));

        let t = Instant::now();
        let u = uniform_region_estimate(&self.model, &region, samples, self.seed).map_err(err)?;
        results.push(result("uniform-region", u * rows, truth, t, None));

        let t = Instant::now();
        results.push(result("indep", self.indep.cardinality(&region), truth, t, None));

        let t = Instant::now();
        let exact = exact_count(&self.table, &region) as f64;
        results.push(result("exact scan", exact, truth, t, None));

        Ok(json(&Comparison {
            query: query.to_string(),
            true_card: truth,
            region_points: region.size_f64(),
            estimators: results,
        }))
    }

    /// Estimates at growing sample counts for both samplers.
    pub fn convergence(&self, query: &str) -> Result<String, String> {
        let (query, region) = self.bind(query)?;
        let rows = self.table.row_count() as f64;
        let mut points = Vec::with_capacity(CURVE_SAMPLES.len());
        for &s in &CURVE_SAMPLES {
            let cfg = self.sampler(s);
            let progressive = if region.is_empty() {
                0.0
            } else {
                inference::progressive_sample(&self.model, &region, &cfg)
                    .map_err(err)?
                    .selectivity
            };
            let uniform = uniform_region_estimate(&self.model, &region, s, self.seed).map_err(err)?;
            points.push(CurvePoint {
                samples: s,
                progressive: progressive * rows,
                uniform_region: uniform * rows,
            });
        }
        Ok(json(&Curve {
            query: query.to_string(),
            true_card: exact_count(&self.table, &region),
            points,
        }))
    }
}

impl Demo {
    fn bind(&self, text: &str) -> Result<(Query, Region), String> {
        let query = Query::parse(text).map_err(err)?;
        let region = query.bind(&self.table.meta()).map_err(err)?;
        Ok((query, region))
    }

    /// Wildcard skipping needs a model trained with masked inputs, so a
    /// freshly built model samples every column.
    fn sampler(&self, samples: usize) -> SamplerConfig {
        SamplerConfig {
            samples,
            wildcard_skip: self.model.wildcard_trained(),
            seed: self.seed,
            ..Default::default()
        }
    }
}

fn result(name: &'static str, cardinality: f64, truth: u64, start: Instant, detail: Option<String>) -> EstimatorResult {
    EstimatorResult {
        name,
        cardinality,
        q_error: bench::q_error(cardinality, truth as f64),
        millis: start.elapsed().as_secs_f64() * 1e3,
        detail,
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo types serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn info_lists_columns() {
        let d = Demo::new("correlated", 2000, 1).unwrap();
        let info = parse(&d.info());
        assert_eq!(info["rows"], 2000);
        assert_eq!(info["columns"].as_array().unwrap().len(), 8);
        assert_eq!(info["columns"][0]["name"], "region");
        let c = &info["columns"][1];
        assert_eq!(c["values"].as_array().unwrap().len() as u64, c["distinct"].as_u64().unwrap());
        assert!(Demo::new("nope", 10, 1).is_err());
        assert!(Demo::new("skewed", 0, 1).is_err());
    }

    #[test]
    fn training_reduces_the_gap() {
        let mut d = Demo::new("correlated", 3000, 2).unwrap();
        parse(&d.train_epoch().unwrap());
        let mut last = Value::Null;
        for _ in 0..3 {
            last = parse(&d.train_epoch().unwrap());
        }
        let epochs = last.as_array().unwrap();
        assert_eq!(epochs.len(), 4);
        assert_eq!(epochs[3]["epoch"], 4);
        assert!(epochs[3]["gap_bits"].as_f64().unwrap() < epochs[0]["gap_bits"].as_f64().unwrap());
    }

    #[test]
    fn compare_reports_every_estimator() {
        let mut d = Demo::new("correlated", 3000, 3).unwrap();
        d.train_epoch().unwrap();
        let q = d.random_query(7).unwrap();
        let r = parse(&d.compare(&q, 200).unwrap());
        let names: Vec<&str> = r["estimators"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["name"].as_str().unwrap())
            .collect();
        assert_eq!(names, ["naru", "uniform-region", "indep", "exact scan"]);
        assert!(r["true_card"].as_u64().unwrap() >= 1);
        assert_eq!(r["estimators"][3]["q_error"], 1.0);
        assert!(r["estimators"]
            .as_array()
            .unwrap()
            .iter()
            .all(|e| e["q_error"].as_f64().unwrap() >= 1.0));
        assert!(d.compare("colour = 3", 10).unwrap_err().contains("colour"));
        assert!(d.compare("region >", 10).is_err());
    }

    #[test]
    fn convergence_covers_every_sample_count() {
        let mut d = Demo::new("skewed", 2000, 4).unwrap();
        d.train_epoch().unwrap();
        let c = parse(&d.convergence("s0 >= 5 AND s1 >= 5 AND s2 >= 5").unwrap());
        let points = c["points"].as_array().unwrap();
        assert_eq!(points.len(), CURVE_SAMPLES.len());
        for (p, &s) in points.iter().zip(&CURVE_SAMPLES) {
            assert_eq!(p["samples"].as_u64().unwrap() as usize, s);
            assert!(p["progressive"].as_f64().unwrap() >= 0.0);
        }
        assert_eq!(c, parse(&d.convergence("s0 >= 5 AND s1 >= 5 AND s2 >= 5").unwrap()));
    }

    #[test]
    fn untrained_model_still_estimates() {
        let d = Demo::new("skewed", 500, 6).unwrap();
        let c = parse(&d.convergence("s0 >= 5 AND s1 >= 5").unwrap());
        assert!(c["points"].as_array().unwrap().iter().all(|p| p["progressive"].as_f64().unwrap() > 0.0));
        parse(&d.compare("s0 >= 5 AND s1 >= 5", 100).unwrap());
    }

    #[test]
    fn empty_regions_estimate_zero() {
        let d = Demo::new("correlated", 500, 5).unwrap();
        let r = parse(&d.compare("region = 999", 50).unwrap());
        assert_eq!(r["true_card"], 0);
        for e in r["estimators"].as_array().unwrap() {
            assert_eq!(e["cardinality"], 0.0, "{e}");
        }
        let c = parse(&d.convergence("region = 999").unwrap());
        assert!(c["points"].as_array().unwrap().iter().all(|p| p["progressive"] == 0.0));
    }
}
