//! Column orderings for the autoregressive factorization.
//!
//! The greedy orderings start from the column with the largest marginal
//! entropy, then repeatedly append the candidate sharing the most
//! information with what was already chosen: the joint of all chosen
//! columns (`Full`), or just the last one (`Pairwise`).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::tabular::{entropy_bits, Table, ValueId};

const TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderKind {
    Natural,
    MutInfo,
    PMutInfo,
    Random,
}

impl FromStr for OrderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "natural" => Ok(OrderKind::Natural),
            "mutinfo" => Ok(OrderKind::MutInfo),
            "pmutinfo" => Ok(OrderKind::PMutInfo),
            "random" => Ok(OrderKind::Random),
            _ => Err(Error::Config(format!(
                "unknown ordering `{s}` (expected natural, mutinfo, pmutinfo or random)"
            ))),
        }
    }
}

impl fmt::Display for OrderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrderKind::Natural => "natural",
            OrderKind::MutInfo => "mutinfo",
            OrderKind::PMutInfo => "pmutinfo",
            OrderKind::Random => "random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutInfoVariant {
    Full,
    Pairwise,
}

/// Marginal entropies and pairwise mutual information, in bits.
#[derive(Debug, Clone, Serialize)]
pub struct OrderingStats {
    pub entropies: Vec<f64>,
    /// `mutual_info[i][j] = I(X_i; X_j)`; the diagonal holds `H(X_i)`.
    pub mutual_info: Vec<Vec<f64>>,
}

impl OrderingStats {
    pub fn compute(table: &Table) -> OrderingStats {
        let n = table.n_columns();
        let entropies: Vec<f64> = (0..n).map(|c| joint_entropy(table, &[c])).collect();
        let mut mutual_info = vec![vec![0.0; n]; n];
        for i in 0..n {
            mutual_info[i][i] = entropies[i];
            for j in i + 1..n {
                let v = entropies[i] + entropies[j] - joint_entropy(table, &[i, j]);
                mutual_info[i][j] = v;
                mutual_info[j][i] = v;
            }
        }
        OrderingStats { entropies, mutual_info }
    }
}

/// Empirical entropy, in bits, of the tuple formed by `columns`.
pub fn joint_entropy(table: &Table, columns: &[usize]) -> f64 {
    let mut counts: HashMap<Vec<ValueId>, u64> = HashMap::new();
    for row in table.rows() {
        let key: Vec<ValueId> = columns.iter().map(|&c| row[c]).collect();
        *counts.entry(key).or_insert(0) += 1;
    }
    entropy_bits(counts.into_values(), table.row_count() as u64)
}

pub fn order_natural(table: &Table) -> Vec<usize> {
    (0..table.n_columns()).collect()
}

pub fn order_random(table: &Table, seed: u64) -> Vec<usize> {
    let mut order = order_natural(table);
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Greedy mutual-information ordering. Ties on information go to the
/// candidate with more entropy, then to the lower column index.
pub fn order_mutinfo(table: &Table, variant: MutInfoVariant) -> Vec<usize> {
    let n = table.n_columns();
    if n == 0 {
        return Vec::new();
    }
    let entropies: Vec<f64> = (0..n).map(|c| joint_entropy(table, &[c])).collect();
    let mut order = vec![argmax((0..n).map(|c| (c, entropies[c], 0.0)))];
    let mut chosen_entropy = entropies[order[0]];
    while order.len() < n {
        let candidates: Vec<usize> = (0..n).filter(|c| !order.contains(c)).collect();
        let scored: Vec<(usize, f64, f64)> = candidates
            .iter()
            .map(|&c| {
                let (base, h_base) = match variant {
                    MutInfoVariant::Full => (order.clone(), chosen_entropy),
                    MutInfoVariant::Pairwise => {
                        let last = *order.last().unwrap();
                        (vec![last], entropies[last])
                    }
                };
                let mut with = base;
                with.push(c);
                let h_joint = joint_entropy(table, &with);
                (c, h_base + entropies[c] - h_joint, h_joint)
            })
            .collect();
        let pick = argmax(scored.iter().map(|&(c, i, _)| (c, i, entropies[c])));
        if variant == MutInfoVariant::Full {
            chosen_entropy = scored.iter().find(|s| s.0 == pick).unwrap().2;
        }
        order.push(pick);
    }
    order
}

pub fn order_for(table: &Table, kind: OrderKind, seed: u64) -> Vec<usize> {
    match kind {
        OrderKind::Natural => order_natural(table),
        OrderKind::MutInfo => order_mutinfo(table, MutInfoVariant::Full),
        OrderKind::PMutInfo => order_mutinfo(table, MutInfoVariant::Pairwise),
        OrderKind::Random => order_random(table, seed),
    }
}

/// Highest score; near-ties go to the higher entropy, then the lower index.
fn argmax(scores: impl Iterator<Item = (usize, f64, f64)>) -> usize {
    let mut best: Option<(usize, f64, f64)> = None;
    for (c, s, h) in scores {
        let better = match best {
            None => true,
            Some((_, bs, bh)) => s > bs + TIE || (s >= bs - TIE && h > bh + TIE),
        };
        if better {
            best = Some((c, s, h));
        }
    }
    best.expect("at least one candidate").0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Dtype, Value};

    fn table(rows: &[Vec<i64>]) -> Table {
        let n = rows[0].len();
        let names: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let raw: Vec<Vec<Value>> = rows.iter().map(|r| r.iter().map(|&v| Value::Int(v)).collect()).collect();
        Table::from_values(&names, &vec![Dtype::Integer; n], &raw).unwrap()
    }

    #[test]
    fn natural_is_identity() {
        assert_eq!(order_natural(&table(&[vec![1, 2, 3]])), vec![0, 1, 2]);
        assert_eq!(order_natural(&table(&[vec![1]])), vec![0]);
    }

    #[test]
    fn identical_pair_is_adjacent_and_first() {
        // c1 == c2 over 4 values (2 bits), c0 an independent coin.
        let mut rows = Vec::new();
        for a in 0..4 {
            for coin in 0..2 {
                rows.push(vec![coin, a, a]);
            }
        }
        let t = table(&rows);
        for v in [MutInfoVariant::Full, MutInfoVariant::Pairwise] {
            assert_eq!(order_mutinfo(&t, v), vec![1, 2, 0]);
        }
    }

    #[test]
    fn independent_columns_order_by_entropy() {
        // Product of domains 2, 4, 2, 3: entropies 1, 2, 1, log2 3.
        let mut rows = Vec::new();
        for a in 0..2 {
            for b in 0..4 {
                for c in 0..2 {
                    for d in 0..3 {
                        rows.push(vec![a, b, c, d]);
                    }
                }
            }
        }
        let t = table(&rows);
        for v in [MutInfoVariant::Full, MutInfoVariant::Pairwise] {
            assert_eq!(order_mutinfo(&t, v), vec![1, 3, 0, 2]);
        }
    }

    #[test]
    fn stats_are_symmetric_with_entropy_diagonal() {
        let rows: Vec<Vec<i64>> = (0..50).map(|i| vec![i % 5, (i * 7) % 3, i % 5 / 2]).collect();
        let s = OrderingStats::compute(&table(&rows));
        for i in 0..3 {
            assert!((s.mutual_info[i][i] - s.entropies[i]).abs() < 1e-9);
            for j in 0..3 {
                assert_eq!(s.mutual_info[i][j], s.mutual_info[j][i]);
                assert!(s.mutual_info[i][j] >= -1e-12);
            }
        }
        assert!((s.mutual_info[0][2] - s.entropies[2]).abs() < 1e-9);
    }

    #[test]
    fn random_is_a_seeded_permutation() {
        let t = table(&[vec![1, 2, 3, 4, 5, 6]]);
        let a = order_random(&t, 3);
        assert_eq!(a, order_random(&t, 3));
        let mut s = a.clone();
        s.sort();
        assert_eq!(s, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn kind_parses() {
        assert_eq!("PMutInfo".parse::<OrderKind>().unwrap(), OrderKind::PMutInfo);
        assert!("zigzag".parse::<OrderKind>().is_err());
    }
}
