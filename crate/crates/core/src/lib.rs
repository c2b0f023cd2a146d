//! Selectivity estimation with deep autoregressive density models.
//!
//! A table is dictionary-encoded ([`tabular`]), a masked autoregressive
//! network learns its joint distribution ([`armodel`], [`training`]), and
//! conjunctive range queries ([`query`]) are answered by summing the
//! model's density over the query region, exactly for small regions or by
//! progressive sampling for large ones ([`inference`]). [`baselines`],
//! [`ordering`] and [`bench`] provide reference estimators, column-order
//! heuristics and a Q-error workload harness.
//!
//! ```
//! use naru::bench::synth;
//! use naru::training::{self, TrainConfig};
//! use naru::{inference, AutoregressiveModel, ModelConfig, Query, SamplerConfig};
//!
//! let table = synth::correlated(5_000, 1);
//! let mut model = AutoregressiveModel::build(ModelConfig::with_hidden(&[64, 64]), &table)?;
//! training::train(&mut model, &table, &TrainConfig { epochs: 5, ..Default::default() })?;
//! let q = Query::parse("region <= 3 AND make >= 10")?;
//! let e = inference::estimate(&model, &q, &table.meta(), &SamplerConfig::default())?;
//! assert!(e.selectivity > 0.0 && e.selectivity < 1.0);
//! # Ok::<(), naru::Error>(())
//! ```

pub mod armodel;
pub mod baselines;
pub mod bench;
pub mod error;
pub mod inference;
mod linalg;
pub mod ordering;
pub mod query;
pub mod tabular;
pub mod training;

pub use armodel::{AutoregressiveModel, ModelConfig, MASK};
pub use error::{Error, Result};
pub use inference::{Estimate, Method, SamplerConfig};
pub use query::{Query, Region};
pub use tabular::{Table, TableMeta};
pub use training::{TrainConfig, TrainReport};
