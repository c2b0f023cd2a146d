//! Selectivity estimation from a trained model.
//!
//! Three paths, picked by [`estimate`]:
//! - equality on every column: one forward pass on the point;
//! - small regions: exact enumeration of the model density over the region;
//! - everything else: progressive sampling, which draws each coordinate
//!   from the model's conditional restricted to the column's valid ids and
//!   multiplies the in-region masses along the path. The mean path weight
//!   is an unbiased estimate of the region's mass.
//!
//! With wildcard-skipping, unconstrained columns are fed the MASK token
//! instead of being sampled; their forward passes are skipped and they
//! contribute a factor of one. This relies on the model having been trained
//! with wildcard augmentation, so the MASK inputs are the ones it learned.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::armodel::{AutoregressiveModel, MASK};
use crate::error::{Error, Result};
use crate::query::{ColumnRegion, Query, Region};
use crate::tabular::{TableMeta, ValueId};

const PATH_BATCH: usize = 2048;
const ENUM_BATCH: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub samples: usize,
    /// Regions with at most this many points are enumerated exactly.
    pub enumeration_threshold: u64,
    pub wildcard_skip: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            samples: 1000,
            enumeration_threshold: 10_000,
            wildcard_skip: true,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Equality,
    Enumeration,
    Progressive,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Equality => "equality",
            Method::Enumeration => "enumeration",
            Method::Progressive => "progressive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub selectivity: f64,
    pub cardinality: u64,
    /// Standard error of the sample mean; progressive path only.
    pub standard_error: Option<f64>,
    pub method: Method,
}

impl Estimate {
    fn new(selectivity: f64, row_count: u64, standard_error: Option<f64>, method: Method) -> Self {
        let selectivity = selectivity.clamp(0.0, 1.0);
        Estimate {
            selectivity,
            cardinality: (selectivity * row_count as f64).round() as u64,
            standard_error,
            method,
        }
    }
}

/// What the sampler does at one order position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    /// Feed MASK into later prefixes; no forward pass, factor 1.
    Skip,
    /// Forward pass, restrict to the column's valid ids, sample.
    Constrain,
}

/// Per order position: skip wildcard columns, constrain the rest.
pub fn wildcard_skip_plan(region: &Region, ordering: &[usize]) -> Vec<StepAction> {
    ordering
        .iter()
        .map(|&c| {
            if region.columns[c].is_wildcard() {
                StepAction::Skip
            } else {
                StepAction::Constrain
            }
        })
        .collect()
}

/// Outcome of a progressive sampling run, with the raw path weights.
#[derive(Debug, Clone)]
pub struct ProgressiveRun {
    pub weights: Vec<f64>,
    /// Forward passes executed per sample path.
    pub forward_passes: usize,
    pub estimate: Estimate,
}

/// Single forward pass on a fully specified point. An empty region (an
/// out-of-domain equality literal) returns 0 without touching the model.
pub fn estimate_equality(model: &AutoregressiveModel, region: &Region) -> Result<Estimate> {
    let rows = model.meta().row_count;
    if region.is_empty() {
        return Ok(Estimate::new(0.0, rows, None, Method::Equality));
    }
    let point = region
        .as_point()
        .ok_or_else(|| Error::Config("equality path needs one value on every column".into()))?;
    Ok(Estimate::new(model.point_density(&point)?, rows, None, Method::Equality))
}

/// Exact sum of the model density over every point of the region.
pub fn estimate_enumerate(model: &AutoregressiveModel, region: &Region, threshold: u64) -> Result<Estimate> {
    let rows = model.meta().row_count;
    if region.is_empty() {
        return Ok(Estimate::new(0.0, rows, None, Method::Enumeration));
    }
    match region.size_u64() {
        Some(s) if s <= threshold => {}
        _ => {
            return Err(Error::RegionTooLarge {
                size: region.size().to_string(),
                threshold,
            })
        }
    }
    let n = model.n_columns();
    let ids: Vec<Vec<ValueId>> = region.columns.iter().map(|c| c.ids().collect()).collect();
    let mut cursor = vec![0usize; n];
    let mut buf = Vec::with_capacity(ENUM_BATCH * n);
    let mut total = 0.0;
    let mut done = false;
    while !done {
        buf.clear();
        while buf.len() < ENUM_BATCH * n && !done {
            buf.extend(cursor.iter().enumerate().map(|(c, &i)| ids[c][i]));
            // odometer, last column fastest
            done = true;
            for c in (0..n).rev() {
                cursor[c] += 1;
                if cursor[c] < ids[c].len() {
                    done = false;
                    break;
                }
                cursor[c] = 0;
            }
        }
        for d in model.point_densities(&buf, buf.len() / n) {
            total += d;
        }
    }
    Ok(Estimate::new(total, rows, None, Method::Enumeration))
}

/// Progressive sampling estimate of the region's mass.
pub fn progressive_sample(model: &AutoregressiveModel, region: &Region, config: &SamplerConfig) -> Result<Estimate> {
    Ok(progressive_run(model, region, config)?.estimate)
}

pub fn progressive_run(model: &AutoregressiveModel, region: &Region, config: &SamplerConfig) -> Result<ProgressiveRun> {
    let rows = model.meta().row_count;
    if config.samples == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    if config.wildcard_skip && !model.wildcard_trained() {
        return Err(Error::SkipWithoutAugmentation);
    }
    if region.is_empty() {
        return Ok(ProgressiveRun {
            weights: vec![0.0; config.samples],
            forward_passes: 0,
            estimate: Estimate::new(0.0, rows, Some(0.0), Method::Progressive),
        });
    }
    let ordering = model.ordering();
    let mut plan = if config.wildcard_skip {
        wildcard_skip_plan(region, ordering)
    } else {
        vec![StepAction::Constrain; ordering.len()]
    };
    // Trailing wildcards contribute a factor of one and feed nothing.
    let last = ordering.iter().rposition(|&c| !region.columns[c].is_wildcard());
    for (pos, action) in plan.iter_mut().enumerate() {
        if last.is_none_or(|l| pos > l) {
            *action = StepAction::Skip;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights = Vec::with_capacity(config.samples);
    let mut forward_passes = 0;
    let mut remaining = config.samples;
    while remaining > 0 {
        let b = remaining.min(PATH_BATCH);
        let (w, passes) = draw_batch(model, region, &plan, b, &mut rng);
        weights.extend(w);
        forward_passes = passes;
        remaining -= b;
    }

    let s = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / s;
    // shifted by the first weight, so identical weights give exactly zero
    let se = if weights.len() > 1 {
        let (mut sum, mut sq) = (0.0, 0.0);
        for w in &weights {
            let d = w - weights[0];
            sum += d;
            sq += d * d;
        }
        let var = ((sq - sum * sum / s) / (s - 1.0)).max(0.0);
        (var / s).sqrt()
    } else {
        0.0
    };
    Ok(ProgressiveRun {
        estimate: Estimate::new(mean, rows, Some(se), Method::Progressive),
        weights,
        forward_passes,
    })
}

/// Advances `batch` paths together; returns their weights and the forward
/// passes each path went through.
fn draw_batch(model: &AutoregressiveModel, region: &Region, plan: &[StepAction], batch: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, usize) {
    let n = model.n_columns();
    let mut inputs = vec![MASK; batch * n];
    let mut weights = vec![1.0; batch];
    // While every earlier position is masked, all paths share one input.
    let mut shared_prefix = true;
    let mut passes = 0;
    for (pos, &action) in plan.iter().enumerate() {
        if action == StepAction::Skip {
            continue;
        }
        let col = model.ordering()[pos];
        let d = model.domain_sizes()[col];
        let cr = &region.columns[col];
        let probs = if shared_prefix {
            model.conditionals(&inputs[..n], 1, col)
        } else {
            model.conditionals(&inputs, batch, col)
        };
        passes += 1;
        for r in 0..batch {
            let p = if shared_prefix { &probs[..d] } else { &probs[r * d..(r + 1) * d] };
            let (mass, id) = draw_in_region(p, cr, rng);
            weights[r] = if mass > 0.0 && mass.is_finite() { weights[r] * mass } else { 0.0 };
            debug_assert!(cr.contains(id));
            inputs[r * n + col] = id;
        }
        shared_prefix = false;
    }
    (weights, passes)
}

/// In-region mass of `p`, and a draw from `p` renormalized over the region
/// by inverse CDF. A zero-mass region yields mass 0 and its first id.
fn draw_in_region(p: &[f64], region: &ColumnRegion, rng: &mut ChaCha8Rng) -> (f64, ValueId) {
    let mass: f64 = region.ids().map(|i| p[i as usize]).sum();
    let u = rng.gen::<f64>() * mass;
    let first = region.intervals()[0].0;
    // Negated so a NaN mass also counts as zero.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(mass > 0.0) {
        return (0.0, first);
    }
    let mut cum = 0.0;
    let mut last_positive = first;
    for i in region.ids() {
        let pi = p[i as usize];
        if pi > 0.0 {
            cum += pi;
            last_positive = i;
            if cum > u {
                return (mass, i);
            }
        }
    }
    (mass, last_positive)
}

/// Dispatches a bound region to the cheapest exact path, or to progressive sampling.
pub fn estimate_region(model: &AutoregressiveModel, region: &Region, config: &SamplerConfig) -> Result<Estimate> {
    let all_equality = region
        .columns
        .iter()
        .all(|c| c.is_empty() || (c.len() == 1));
    if all_equality {
        return estimate_equality(model, region);
    }
    if region.is_empty() {
        return estimate_enumerate(model, region, config.enumeration_threshold);
    }
    match region.size_u64() {
        Some(s) if s <= config.enumeration_threshold => estimate_enumerate(model, region, config.enumeration_threshold),
        _ => progressive_sample(model, region, config),
    }
}

/// Binds `query` against `meta`, which must carry the model's dictionaries, and estimates it.
pub fn estimate(model: &AutoregressiveModel, query: &Query, meta: &TableMeta, config: &SamplerConfig) -> Result<Estimate> {
    let (m, t) = (model.meta().dictionary_hash(), meta.dictionary_hash());
    if m != t {
        return Err(Error::HashMismatch { model: m, table: t });
    }
    let region = query.bind(meta)?;
    estimate_region(model, &region, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::armodel::ModelConfig;
    use crate::tabular::{Dtype, Table, Value};

    fn table(domains: &[usize], rows: usize, seed: u64) -> Table {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names: Vec<String> = (0..domains.len()).map(|i| format!("c{i}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut raw: Vec<Vec<Value>> = (0..rows)
            .map(|_| {
                let a = rng.gen_range(0..domains[0] as i64);
                domains
                    .iter()
                    .enumerate()
                    .map(|(c, &d)| {
                        let v = if c == 0 { a } else { (a + rng.gen_range(0..2)) % d as i64 };
                        Value::Int(v)
                    })
                    .collect()
            })
            .collect();
        for (c, &d) in domains.iter().enumerate() {
            for v in 0..d {
                raw[v % rows][c] = Value::Int(v as i64);
            }
        }
        Table::from_values(&names, &vec![Dtype::Integer; domains.len()], &raw).unwrap()
    }

    fn model(t: &Table) -> AutoregressiveModel {
        let mut m = AutoregressiveModel::build(ModelConfig::with_hidden(&[16, 16]), t).unwrap();
        m.set_wildcard_trained(true);
        m
    }

    fn region(t: &Table, q: &str) -> Region {
        Query::parse(q).unwrap().bind(&t.meta()).unwrap()
    }

    #[test]
    fn uniform_model_estimates_are_exact() {
        let t = table(&[2, 5], 20, 1);
        let mut m = model(&t);
        m.zero_params();
        let r = region(&t, "c0 = 1 AND c1 = 3");
        assert_eq!(estimate_equality(&m, &r).unwrap().selectivity, 0.1);
        let r = region(&t, "c1 <= 2");
        let e = estimate_enumerate(&m, &r, 10_000).unwrap();
        assert!((e.selectivity - 0.6).abs() < 1e-15);
        for skip in [true, false] {
            let cfg = SamplerConfig {
                samples: 50,
                wildcard_skip: skip,
                ..Default::default()
            };
            let run = progressive_run(&m, &region(&t, "c0 = 1 AND c1 >= 2"), &cfg).unwrap();
            assert!(run.weights.iter().all(|&w| w == run.weights[0]));
            assert!((run.estimate.selectivity - 0.5 * 0.6).abs() < 1e-15);
            assert_eq!(run.estimate.standard_error, Some(0.0));
        }
    }

    #[test]
    fn empty_regions_are_zero() {
        let t = table(&[3, 4], 20, 2);
        let m = model(&t);
        let r = region(&t, "c0 = 1 AND c1 = 17");
        let e = estimate_equality(&m, &r).unwrap();
        assert_eq!((e.selectivity, e.cardinality), (0.0, 0));
        assert_eq!(estimate_enumerate(&m, &r, 10).unwrap().selectivity, 0.0);
        assert_eq!(progressive_sample(&m, &r, &SamplerConfig::default()).unwrap().selectivity, 0.0);
        assert_eq!(estimate_region(&m, &r, &SamplerConfig::default()).unwrap().method, Method::Equality);
        let r = region(&t, "c1 < 0");
        assert_eq!(estimate_region(&m, &r, &SamplerConfig::default()).unwrap().selectivity, 0.0);
    }

    #[test]
    fn equality_matches_singleton_enumeration_bit_exactly() {
        let t = table(&[3, 4, 5], 40, 3);
        let m = model(&t);
        for q in ["c0 = 0 AND c1 = 1 AND c2 = 2", "c0 = 2 AND c1 = 3 AND c2 = 4"] {
            let r = region(&t, q);
            let a = estimate_equality(&m, &r).unwrap();
            let b = estimate_enumerate(&m, &r, 1).unwrap();
            assert_eq!(a.selectivity.to_bits(), b.selectivity.to_bits());
        }
    }

    #[test]
    fn full_region_enumerates_to_one() {
        let t = table(&[3, 4, 5], 40, 4);
        let m = model(&t);
        let e = estimate_enumerate(&m, &Region::full(&t.domain_sizes()), 10_000).unwrap();
        assert!((e.selectivity - 1.0).abs() < 1e-9);
        assert!(matches!(
            estimate_enumerate(&m, &Region::full(&t.domain_sizes()), 59),
            Err(Error::RegionTooLarge { .. })
        ));
    }

    #[test]
    fn all_wildcard_with_skip_is_exactly_one() {
        let t = table(&[3, 4, 5], 40, 5);
        let m = model(&t);
        let run = progressive_run(&m, &Region::full(&t.domain_sizes()), &SamplerConfig::default()).unwrap();
        assert_eq!(run.forward_passes, 0);
        assert_eq!(run.estimate.selectivity, 1.0);
    }

    #[test]
    fn skip_requires_augmented_training() {
        let t = table(&[3, 4], 20, 6);
        let mut m = model(&t);
        m.set_wildcard_trained(false);
        let r = region(&t, "c0 = 1");
        assert!(matches!(
            progressive_sample(&m, &r, &SamplerConfig::default()),
            Err(Error::SkipWithoutAugmentation)
        ));
        let cfg = SamplerConfig {
            wildcard_skip: false,
            ..Default::default()
        };
        assert!(progressive_sample(&m, &r, &cfg).is_ok());
    }

    #[test]
    fn skip_plan_counts_forward_passes() {
        let domains = [3, 4, 5, 3, 4, 5, 3, 4, 5, 3, 4];
        let t = table(&domains, 60, 7);
        let m = model(&t);
        let r = region(&t, "c0 = 1 AND c3 <= 1 AND c5 >= 2 AND c7 = 0 AND c9 IN (0, 2)");
        let plan = wildcard_skip_plan(&r, m.ordering());
        assert_eq!(plan.iter().filter(|&&a| a == StepAction::Constrain).count(), 5);
        let run = progressive_run(&m, &r, &SamplerConfig::default()).unwrap();
        assert_eq!(run.forward_passes, 5);

        let r = region(&t, "c0 = 1 AND c1 = 1 AND c2 = 1 AND c3 = 1 AND c4 = 1 AND c5 = 1 AND c6 = 1 AND c7 = 1 AND c8 = 1 AND c9 = 1 AND c10 <= 2");
        assert!(wildcard_skip_plan(&r, m.ordering()).iter().all(|&a| a == StepAction::Constrain));
    }

    #[test]
    fn dispatch() {
        let t = table(&[3, 4, 5], 40, 8);
        let m = model(&t);
        let cfg = SamplerConfig::default();
        let meta = t.meta();
        let e = estimate(&m, &Query::parse("c0 = 1 AND c1 = 2 AND c2 = 3").unwrap(), &meta, &cfg).unwrap();
        assert_eq!(e.method, Method::Equality);
        let e = estimate(&m, &Query::parse("c0 <= 1 AND c1 <= 2").unwrap(), &meta, &cfg).unwrap();
        assert_eq!(e.method, Method::Enumeration);
        let small = SamplerConfig {
            enumeration_threshold: 10,
            ..cfg.clone()
        };
        let e = estimate(&m, &Query::parse("c0 <= 1 AND c1 <= 2").unwrap(), &meta, &small).unwrap();
        assert_eq!(e.method, Method::Progressive);
        let other = table(&[3, 4, 6], 40, 8);
        assert!(matches!(
            estimate(&m, &Query::parse("c0 = 1").unwrap(), &other.meta(), &cfg),
            Err(Error::HashMismatch { .. })
        ));
    }

    #[test]
    fn progressive_is_deterministic_per_seed() {
        let t = table(&[5, 6, 7], 80, 9);
        let m = model(&t);
        let r = region(&t, "c0 >= 1 AND c2 <= 4");
        let cfg = SamplerConfig {
            samples: 300,
            ..Default::default()
        };
        let a = progressive_sample(&m, &r, &cfg).unwrap();
        let b = progressive_sample(&m, &r, &cfg).unwrap();
        assert_eq!(a, b);
        let c = progressive_sample(&m, &r, &SamplerConfig { seed: 7, ..cfg }).unwrap();
        assert_ne!(a.selectivity, c.selectivity);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(40))]
            #[test]
            fn enumeration_is_monotone_under_region_growth(
                seed in 0u64..100,
                lo in prop::collection::vec(0u32..4, 3),
                grow in prop::collection::vec(0u32..3, 3),
            ) {
                let t = table(&[5, 6, 7], 80, 10);
                let mut cfg = ModelConfig::with_hidden(&[16, 16]);
                cfg.seed = seed;
                let m = AutoregressiveModel::build(cfg, &t).unwrap();
                let d = t.domain_sizes();
                let small = Region { columns: (0..3).map(|c| ColumnRegion::range(d[c] as u32, lo[c], lo[c] + 2)).collect() };
                let big = Region { columns: (0..3).map(|c| ColumnRegion::range(d[c] as u32, lo[c].saturating_sub(grow[c]), lo[c] + 2 + grow[c])).collect() };
                prop_assert!(small.is_subset_of(&big));
                let a = estimate_enumerate(&m, &small, 10_000).unwrap().selectivity;
                let b = estimate_enumerate(&m, &big, 10_000).unwrap().selectivity;
                prop_assert!(a <= b, "{} > {}", a, b);
                prop_assert!((0.0..=1.0).contains(&a));
            }
        }
    }
}
