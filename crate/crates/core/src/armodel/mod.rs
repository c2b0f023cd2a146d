//! Masked autoregressive density model over dictionary-encoded tuples.
//!
//! One forward pass maps a tuple to `n` conditional distributions, one per
//! column; the distribution of the column at order position `i` only sees
//! inputs at positions `< i`. Connectivity masks (MADE-style unit labels)
//! enforce that structurally: masked weights are held at exactly zero and
//! never receive gradient.

mod codec;
mod layout;
pub(crate) mod net;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use codec::{deserialize, deserialize_for, load, serialize, MAGIC};
pub use layout::{Encoding, TensorSpec};

use crate::error::{Error, Result};
use crate::tabular::{Table, TableMeta, ValueId};
use layout::Layout;

/// Input token marking a column as absent (wildcard).
pub const MASK: ValueId = ValueId::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_sizes: Vec<usize>,
    /// ResMADE: identity skips between consecutive hidden layers of equal width.
    pub residual: bool,
    /// Columns with more distinct values than this use an embedding encoder.
    pub onehot_threshold: usize,
    pub embedding_dim: usize,
    pub embedding_reuse: bool,
    /// Column indices in autoregressive order; empty means schema order.
    pub ordering: Vec<usize>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_sizes: vec![64, 64],
            residual: false,
            onehot_threshold: 64,
            embedding_dim: 64,
            embedding_reuse: true,
            ordering: Vec::new(),
            seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn with_hidden(hidden_sizes: &[usize]) -> Self {
        ModelConfig {
            hidden_sizes: hidden_sizes.to_vec(),
            ..Default::default()
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.hidden_sizes.is_empty() {
            return Err(Error::Config("at least one hidden layer is required".into()));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        if self.embedding_dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if self.onehot_threshold == 0 {
            return Err(Error::Config("one-hot threshold must be positive".into()));
        }
        if !self.ordering.is_empty() {
            let mut seen = vec![false; n];
            if self.ordering.len() != n || self.ordering.iter().any(|&c| c >= n || std::mem::replace(&mut seen[c], true)) {
                return Err(Error::Config(format!("ordering {:?} is not a permutation of 0..{n}", self.ordering)));
            }
        }
        Ok(())
    }
}

/// One conditional distribution `P̂(X_i | x_<i)` over a column's domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDistribution {
    pub probs: Vec<f64>,
}

impl ConditionalDistribution {
    pub fn mass(&self, ids: impl IntoIterator<Item = ValueId>) -> f64 {
        ids.into_iter().map(|i| self.probs[i as usize]).sum()
    }
}

#[derive(Debug, Clone)]
pub struct AutoregressiveModel {
    config: ModelConfig,
    meta: TableMeta,
    layout: Layout,
    params: Vec<f64>,
    free: Vec<bool>,
    wildcard_trained: bool,
}

impl AutoregressiveModel {
    pub fn build(config: ModelConfig, table: &Table) -> Result<Self> {
        Self::build_for(config, table.meta())
    }

    /// Builds a freshly initialized model for the given dictionaries.
    pub fn build_for(mut config: ModelConfig, meta: TableMeta) -> Result<Self> {
        let n = meta.columns.len();
        if n == 0 {
            return Err(Error::InvalidTable("no columns".into()));
        }
        config.validate(n)?;
        if config.ordering.is_empty() {
            config.ordering = (0..n).collect();
        }
        let layout = Layout::new(&config, &meta.domain_sizes(), &config.ordering);
        let free = layout.free_mask();
        let params = init_params(&layout, &free, config.seed);
        Ok(AutoregressiveModel {
            config,
            meta,
            layout,
            params,
            free,
            wildcard_trained: false,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }

    pub fn n_columns(&self) -> usize {
        self.layout.n
    }

    pub fn domain_sizes(&self) -> &[usize] {
        &self.layout.domains
    }

    pub fn ordering(&self) -> &[usize] {
        &self.config.ordering
    }

    pub fn encodings(&self) -> &[Encoding] {
        &self.layout.encodings
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.layout.tensors
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameters. Callers must keep masked entries (see
    /// [`free_mask`](Self::free_mask)) at zero.
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn free_mask(&self) -> &[bool] {
        &self.free
    }

    pub fn wildcard_trained(&self) -> bool {
        self.wildcard_trained
    }

    pub fn set_wildcard_trained(&mut self, v: bool) {
        self.wildcard_trained = v;
    }

    /// Sets every parameter to zero; the model then predicts uniform conditionals.
    pub fn zero_params(&mut self) {
        self.params.fill(0.0);
    }

    fn check_tuple(&self, tuple: &[ValueId], allow_mask: bool) -> Result<()> {
        if tuple.len() != self.layout.n {
            return Err(Error::Config(format!(
                "tuple has {} values, model has {} columns",
                tuple.len(),
                self.layout.n
            )));
        }
        for (c, &id) in tuple.iter().enumerate() {
            if (id == MASK && !allow_mask) || (id != MASK && id as usize >= self.layout.domains[c]) {
                return Err(Error::IdOutOfRange {
                    column: c,
                    id,
                    domain: self.layout.domains[c],
                });
            }
        }
        Ok(())
    }

    /// All `n` conditionals for one input (MASK allowed), indexed by column.
    pub fn forward(&self, input: &[ValueId]) -> Result<Vec<ConditionalDistribution>> {
        self.check_tuple(input, true)?;
        let trace = self.layout.hidden_forward(&self.params, input, 1);
        Ok((0..self.layout.n)
            .map(|c| ConditionalDistribution {
                probs: self.layout.column_probs(&self.params, &trace, c),
            })
            .collect())
    }

    /// `P̂(x)` for a full tuple: the product of its conditionals.
    pub fn point_density(&self, tuple: &[ValueId]) -> Result<f64> {
        self.check_tuple(tuple, false)?;
        Ok(self.point_densities(tuple, 1)[0])
    }

    /// Densities of `batch` full tuples (row-major). Ids are not checked.
    pub fn point_densities(&self, tuples: &[ValueId], batch: usize) -> Vec<f64> {
        let n = self.layout.n;
        let trace = self.layout.hidden_forward(&self.params, tuples, batch);
        let mut dens = vec![1.0; batch];
        for c in 0..n {
            let d = self.layout.domains[c];
            let p = self.layout.column_probs(&self.params, &trace, c);
            for (r, v) in dens.iter_mut().enumerate() {
                *v *= p[r * d + tuples[r * n + c] as usize];
            }
        }
        dens
    }

    /// Natural-log densities of `batch` full tuples, summed per column in log space.
    pub fn log_point_densities(&self, tuples: &[ValueId], batch: usize) -> Vec<f64> {
        let n = self.layout.n;
        let trace = self.layout.hidden_forward(&self.params, tuples, batch);
        let mut out = vec![0.0; batch];
        for c in 0..n {
            let d = self.layout.domains[c];
            let logits = self.layout.column_logits(&self.params, &trace, c);
            for (r, v) in out.iter_mut().enumerate() {
                let row = &logits[r * d..(r + 1) * d];
                *v += row[tuples[r * n + c] as usize] - net::log_sum_exp(row);
            }
        }
        out
    }

    /// Conditionals of column `col` for `batch` partial tuples (row-major,
    /// `batch × D_col`). Only inputs earlier in the order influence the result.
    pub fn conditionals(&self, inputs: &[ValueId], batch: usize, col: usize) -> Vec<f64> {
        let trace = self.layout.hidden_forward(&self.params, inputs, batch);
        self.layout.column_probs(&self.params, &trace, col)
    }

    /// Mean negative log-likelihood in nats of `targets` given `inputs`.
    pub fn nll(&self, inputs: &[ValueId], targets: &[ValueId], batch: usize) -> f64 {
        self.layout.nll(&self.params, inputs, targets, batch, None)
    }

    /// Like [`nll`](Self::nll), also returning the gradient with respect to every parameter.
    pub fn nll_with_grad(&self, inputs: &[ValueId], targets: &[ValueId], batch: usize) -> (f64, Vec<f64>) {
        let mut grads = vec![0.0; self.params.len()];
        let loss = self.layout.nll(&self.params, inputs, targets, batch, Some(&mut grads));
        for (g, &f) in grads.iter_mut().zip(&self.free) {
            if !f {
                *g = 0.0;
            }
        }
        (loss, grads)
    }

    pub(crate) fn from_parts(config: ModelConfig, meta: TableMeta, params: Vec<f64>, wildcard_trained: bool) -> Result<Self> {
        let layout = Layout::new(&config, &meta.domain_sizes(), &config.ordering);
        let free = layout.free_mask();
        if params.len() != layout.n_params {
            return Err(Error::SizeMismatch {
                expected: layout.n_params * 8,
                found: params.len() * 8,
            });
        }
        if params.iter().zip(&free).any(|(&p, &f)| !f && p != 0.0) {
            return Err(Error::Metadata("weights violate the autoregressive mask".into()));
        }
        Ok(AutoregressiveModel {
            config,
            meta,
            layout,
            params,
            free,
            wildcard_trained,
        })
    }
}

// He-style uniform init: weights ~ U(-√(6/fan_in), √(6/fan_in)); biases zero;
// embeddings and MASK tokens ~ U(-√(3/h), √(3/h)).
fn init_params(layout: &Layout, free: &[bool], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![0.0; layout.n_params];
    for t in &layout.tensors {
        let bound = if t.name.starts_with("embedding") || t.name.starts_with("mask_token") {
            (3.0 / layout.h as f64).sqrt()
        } else if t.name.ends_with("weight") {
            (6.0 / t.shape[0] as f64).sqrt()
        } else {
            continue;
        };
        for i in t.offset..t.offset + t.numel() {
            let v = rng.gen_range(-bound..bound);
            params[i] = if free[i] { v } else { 0.0 };
        }
    }
    params
}
