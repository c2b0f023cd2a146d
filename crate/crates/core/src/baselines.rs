//! Reference estimators: independence over exact marginals, a uniform row
//! sample, and uniform sampling of the query region under a model.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::armodel::AutoregressiveModel;
use crate::error::{Error, Result};
use crate::query::Region;
use crate::tabular::{Table, ValueId};

/// Exact per-column marginals, multiplied as if columns were independent.
#[derive(Debug, Clone)]
pub struct IndepEstimator {
    counts: Vec<Vec<u64>>,
    rows: u64,
}

impl IndepEstimator {
    pub fn new(table: &Table) -> Self {
        let mut counts: Vec<Vec<u64>> = table.domain_sizes().into_iter().map(|d| vec![0; d]).collect();
        for row in table.rows() {
            for (c, &v) in row.iter().enumerate() {
                counts[c][v as usize] += 1;
            }
        }
        IndepEstimator {
            counts,
            rows: table.row_count() as u64,
        }
    }

    pub fn estimate(&self, region: &Region) -> f64 {
        if self.rows == 0 {
            return 0.0;
        }
        self.cardinality(region) / self.rows as f64
    }

    /// `N · Π_i (c_i / N)` where `c_i` counts the rows matching column `i`.
    /// Evaluated as one integer-valued product over a power of `N`, so an
    /// integral answer comes out exact while both stay below 2^53.
    pub fn cardinality(&self, region: &Region) -> f64 {
        let matched: Vec<f64> = region
            .columns
            .iter()
            .zip(&self.counts)
            .filter(|(r, _)| !r.is_wildcard())
            .map(|(r, counts)| r.ids().map(|i| counts[i as usize]).sum::<u64>() as f64)
            .collect();
        let n = self.rows as f64;
        if matched.is_empty() {
            return n;
        }
        let num: f64 = matched.iter().product();
        let den = n.powi(matched.len() as i32 - 1);
        if num.is_finite() && den.is_finite() && den > 0.0 {
            num / den
        } else {
            matched.iter().fold(n, |acc, &c| acc * (c / n))
        }
    }
}

pub fn indep_estimate(table: &Table, region: &Region) -> f64 {
    IndepEstimator::new(table).estimate(region)
}

/// A uniform sample of `p`% of the rows, drawn without replacement.
#[derive(Debug, Clone)]
pub struct SampleEstimator {
    percent: f64,
    n_columns: usize,
    rows: Vec<ValueId>,
}

impl SampleEstimator {
    pub fn new(table: &Table, percent: f64, seed: u64) -> Result<Self> {
        if !(percent > 0.0 && percent <= 100.0) {
            return Err(Error::Config(format!("sample percentage must be in (0, 100], got {percent}")));
        }
        let total = table.row_count();
        let keep = ((percent * total as f64 / 100.0).round() as usize).clamp(1, total);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = index::sample(&mut rng, total, keep).into_vec();
        picked.sort_unstable();
        let mut rows = Vec::with_capacity(keep * table.n_columns());
        for i in picked {
            rows.extend_from_slice(table.row(i));
        }
        Ok(SampleEstimator {
            percent,
            n_columns: table.n_columns(),
            rows,
        })
    }

    pub fn percent(&self) -> f64 {
        self.percent
    }

    pub fn retained(&self) -> usize {
        self.rows.len() / self.n_columns
    }

    pub fn estimate(&self, region: &Region) -> f64 {
        let hits = self
            .rows
            .chunks_exact(self.n_columns)
            .filter(|r| region.contains(r))
            .count();
        hits as f64 / self.retained() as f64
    }
}

/// `|R|` times the mean model density at `samples` points drawn uniformly
/// from the region. Unbiased for the model's mass over `R`, so a single
/// draw may exceed 1.
pub fn uniform_region_estimate(model: &AutoregressiveModel, region: &Region, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    if region.is_empty() {
        return Ok(0.0);
    }
    if let Some(point) = region.as_point() {
        return model.point_density(&point);
    }
    let ids: Vec<Vec<ValueId>> = region.columns.iter().map(|c| c.ids().collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut remaining = samples;
    let mut buf = Vec::new();
    while remaining > 0 {
        let b = remaining.min(1024);
        buf.clear();
        for _ in 0..b {
            for col in &ids {
                buf.push(col[rng.gen_range(0..col.len())]);
            }
        }
        total += model.point_densities(&buf, b).iter().sum::<f64>();
        remaining -= b;
    }
    Ok(region.size_f64() * total / samples as f64)
}
