//! Maximum-likelihood training: cross-entropy loss with manual
//! backpropagation, Adam, and wildcard-masking augmentation.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use web_time::Instant;

use crate::armodel::{AutoregressiveModel, MASK};
use crate::error::{Error, Result};
use crate::tabular::{Table, ValueId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Replace random subsets of input columns by MASK so the model learns
    /// to marginalize absent columns.
    pub wildcard_augment: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 256,
            learning_rate: 2e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            wildcard_augment: true,
            seed: 42,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        // Negated so NaN is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Cross-entropy of the model on the (unmasked) table, bits per tuple.
    pub xent_bits: f64,
    /// `xent_bits` minus the table's empirical entropy.
    pub gap_bits: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub data_entropy_bits: f64,
    pub wall_seconds: f64,
}

impl TrainReport {
    pub fn final_gap(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.gap_bits)
    }

    /// One JSON object per epoch.
    pub fn to_json_lines(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("stats serialize") + "\n")
            .collect()
    }
}

/// Adam moments and step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, config: &TrainConfig) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.t += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
}

/// Mean negative log-likelihood (nats) of `batch` (row-major tuples) and its gradient.
pub fn nll_loss(model: &AutoregressiveModel, batch: &[ValueId]) -> (f64, Vec<f64>) {
    let b = batch.len() / model.n_columns();
    model.nll_with_grad(batch, batch, b)
}

/// Masks each tuple's columns independently with probability `w/n`,
/// `w` drawn uniformly from `{0, …, n-1}` per tuple. Targets stay the
/// original tuples.
pub fn wildcard_augment<R: Rng + ?Sized>(batch: &[ValueId], n: usize, rng: &mut R) -> Vec<ValueId> {
    let mut out = batch.to_vec();
    for tuple in out.chunks_exact_mut(n) {
        let w = rng.gen_range(0..n);
        if w == 0 {
            continue;
        }
        let p = w as f64 / n as f64;
        for v in tuple.iter_mut() {
            if rng.gen::<f64>() < p {
                *v = MASK;
            }
        }
    }
    out
}

/// Cross-entropy of the model on the table's empirical distribution, bits per tuple.
pub fn cross_entropy_bits(model: &AutoregressiveModel, table: &Table) -> f64 {
    let n = model.n_columns();
    let joint = table.joint();
    let distinct = joint.sorted();
    let total = table.row_count() as f64;
    let mut nats = 0.0;
    for chunk in distinct.chunks(2048) {
        let mut tuples = Vec::with_capacity(chunk.len() * n);
        for (t, _) in chunk {
            tuples.extend_from_slice(t);
        }
        let logp = model.log_point_densities(&tuples, chunk.len());
        for ((_, count), lp) in chunk.iter().zip(logp) {
            nats -= *count as f64 / total * lp;
        }
    }
    nats / std::f64::consts::LN_2
}

pub fn train(model: &mut AutoregressiveModel, table: &Table, config: &TrainConfig) -> Result<TrainReport> {
    train_with(model, table, config, |_| {})
}

/// Trains for `config.epochs` shuffled passes, calling `on_epoch` after each.
pub fn train_with(
    model: &mut AutoregressiveModel,
    table: &Table,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainReport> {
    config.validate()?;
    if model.meta().dictionary_hash() != table.dictionary_hash() {
        return Err(Error::HashMismatch {
            model: model.meta().dictionary_hash(),
            table: table.dictionary_hash(),
        });
    }
    let start = Instant::now();
    let n = model.n_columns();
    let data_entropy = table.data_entropy();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(model.params().len());
    let mut order: Vec<usize> = (0..table.row_count()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut targets = Vec::with_capacity(config.batch_size * n);

    for epoch in 1..=config.epochs {
        let epoch_start = Instant::now();
        order.shuffle(&mut rng);
        for idx in order.chunks(config.batch_size) {
            targets.clear();
            for &i in idx {
                targets.extend_from_slice(table.row(i));
            }
            let inputs = if config.wildcard_augment {
                wildcard_augment(&targets, n, &mut rng)
            } else {
                targets.clone()
            };
            let (_, grads) = model.nll_with_grad(&inputs, &targets, idx.len());
            adam_step(model.params_mut(), &grads, &mut adam, config);
        }
        let xent_bits = cross_entropy_bits(model, table);
        let stats = EpochStats {
            epoch,
            xent_bits,
            gap_bits: xent_bits - data_entropy,
            seconds: epoch_start.elapsed().as_secs_f64(),
        };
        on_epoch(&stats);
        epochs.push(stats);
    }
    if config.wildcard_augment {
        model.set_wildcard_trained(true);
    }
    Ok(TrainReport {
        epochs,
        data_entropy_bits: data_entropy,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::armodel::ModelConfig;
    use crate::tabular::{Dtype, Value};

    fn table(rows: &[[i64; 3]]) -> Table {
        let raw: Vec<Vec<Value>> = rows.iter().map(|r| r.iter().map(|&v| Value::Int(v)).collect()).collect();
        Table::from_values(&["a", "b", "c"], &[Dtype::Integer; 3], &raw).unwrap()
    }

    fn random_table(rows: usize, seed: u64) -> Table {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut raw: Vec<[i64; 3]> = (0..rows)
            .map(|_| {
                let a = rng.gen_range(0..4);
                [a, (a + rng.gen_range(0..2)) % 5, rng.gen_range(0..3)]
            })
            .collect();
        raw[0] = [0, 4, 0];
        table(&raw)
    }

    #[test]
    fn zero_model_loss_is_log_of_domain_product() {
        let raw: Vec<Vec<Value>> = (0..10).map(|i| vec![Value::Int(i % 2), Value::Int(i % 5)]).collect();
        let t = Table::from_values(&["a", "b"], &[Dtype::Integer; 2], &raw).unwrap();
        let mut m = AutoregressiveModel::build(ModelConfig::with_hidden(&[8]), &t).unwrap();
        m.zero_params();
        let (loss, _) = nll_loss(&m, t.data());
        assert!((loss - 10f64.ln()).abs() < 1e-12);
        let bits = cross_entropy_bits(&m, &t);
        assert!((bits - (2f64.log2() + 5f64.log2())).abs() < 1e-12);
        assert!((bits - loss / std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn duplicating_the_batch_keeps_the_loss() {
        let t = random_table(20, 1);
        let m = AutoregressiveModel::build(ModelConfig::with_hidden(&[16]), &t).unwrap();
        let batch = t.data().to_vec();
        let doubled: Vec<u32> = batch.iter().chain(&batch).copied().collect();
        let (a, ga) = nll_loss(&m, &batch);
        let (b, gb) = nll_loss(&m, &doubled);
        assert!((a - b).abs() < 1e-12);
        for (x, y) in ga.iter().zip(&gb) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn augmentation_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch: Vec<u32> = vec![1; 1000];
        assert_eq!(wildcard_augment(&batch, 1, &mut rng), batch);
        let out = wildcard_augment(&batch, 4, &mut rng);
        assert!(out.contains(&MASK));
        assert!(out.iter().all(|&v| v == MASK || v == 1));
    }

    #[test]
    fn mask_rate_matches_binomial_expectation() {
        let n = 5;
        let tuples = 200_000; // 10^6 column draws
        let batch = vec![0u32; n * tuples];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = wildcard_augment(&batch, n, &mut rng);
        let masked = out.iter().filter(|&&v| v == MASK).count() as f64;
        let draws = (n * tuples) as f64;
        let p = (n - 1) as f64 / (2 * n) as f64;
        // Per-tuple mask counts are not independent across columns; bound
        // the variance by the per-tuple variance of the masked count.
        // Var[count | w] = n q(1-q), q = w/n; Var[E[count|w]] = Var[w].
        let var_tuple: f64 = (0..n)
            .map(|w| {
                let q = w as f64 / n as f64;
                n as f64 * q * (1.0 - q) + (w as f64 - p * n as f64).powi(2)
            })
            .sum::<f64>()
            / n as f64;
        let sigma = (var_tuple * tuples as f64).sqrt();
        assert!((masked - p * draws).abs() <= 3.0 * sigma, "masked {masked}, expected {}", p * draws);
    }

    #[test]
    fn adam_first_step_and_zero_gradient() {
        let cfg = TrainConfig::default();
        let mut params = vec![1.0, -2.0, 0.5, 3.0];
        let grads = vec![0.3, -4.0, 0.0, 1e-3];
        let mut st = AdamState::new(4);
        adam_step(&mut params, &grads, &mut st, &cfg);
        let lr = cfg.learning_rate;
        assert!((params[0] - (1.0 - lr)).abs() < 1e-9);
        assert!((params[1] - (-2.0 + lr)).abs() < 1e-9);
        assert_eq!(params[2], 0.5);
        assert!((params[3] - (3.0 - lr)).abs() < 1e-7);
    }

    #[test]
    fn memorizes_a_single_row() {
        let t = table(&[[3, 1, 2]]);
        let mut m = AutoregressiveModel::build(ModelConfig::with_hidden(&[16, 16]), &t).unwrap();
        let cfg = TrainConfig {
            epochs: 300,
            batch_size: 1,
            learning_rate: 1e-2,
            wildcard_augment: false,
            ..Default::default()
        };
        let report = train(&mut m, &t, &cfg).unwrap();
        assert!(report.epochs.last().unwrap().xent_bits < 0.02, "{:?}", report.epochs.last());
        assert!(m.point_density(&[0, 0, 0]).unwrap() > 0.99);
    }

    #[test]
    fn loss_decreases_and_training_is_deterministic() {
        let t = random_table(100, 5);
        let cfg = TrainConfig {
            epochs: 10,
            ..Default::default()
        };
        let mut a = AutoregressiveModel::build(ModelConfig::with_hidden(&[32, 32]), &t).unwrap();
        let mut b = a.clone();
        let ra = train(&mut a, &t, &cfg).unwrap();
        let rb = train(&mut b, &t, &cfg).unwrap();
        assert!(ra.epochs[9].xent_bits < ra.epochs[0].xent_bits);
        assert_eq!(a.params(), b.params());
        assert!(a.wildcard_trained());
        let xs: Vec<f64> = ra.epochs.iter().map(|e| e.xent_bits).collect();
        let ys: Vec<f64> = rb.epochs.iter().map(|e| e.xent_bits).collect();
        assert_eq!(xs, ys);
        assert_eq!(ra.to_json_lines().lines().count(), 10);
    }

    #[test]
    fn rejects_bad_configs() {
        let t = random_table(10, 6);
        let mut m = AutoregressiveModel::build(ModelConfig::with_hidden(&[8]), &t).unwrap();
        for cfg in [
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
        ] {
            assert!(train(&mut m, &t, &cfg).is_err());
        }
    }
}
