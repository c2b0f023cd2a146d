//! Seeded synthetic tables.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tabular::{Dtype, Table, Value};

fn build(names: &[&str], rows: Vec<Vec<i64>>) -> Table {
    let raw: Vec<Vec<Value>> = rows
        .into_iter()
        .map(|r| r.into_iter().map(Value::Int).collect())
        .collect();
    Table::from_values(names, &vec![Dtype::Integer; names.len()], &raw).expect("synthetic rows are well formed")
}

/// Geometric-looking weights over `d` values: `ratio^k`.
fn skewed(d: usize, ratio: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((0..d).map(|k| ratio.powi(k as i32))).unwrap()
}

/// Eight correlated columns.
///
/// - `region` (20 values) is skewed;
/// - `city` (50 values) clusters around `5 * region`;
/// - `district` is `city / 5`, a functional dependency;
/// - `make` (30 values) is skewed, and `model_year` equals it 85% of the time,
///   otherwise it sits within 3 of it;
/// - `fuel` (4 values) is skewed and independent;
/// - `color` (12 values) follows `region`;
/// - `insured` is a flag whose rate depends on `fuel`.
pub fn correlated(rows: usize, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let region = skewed(20, 0.8);
    let offset = WeightedIndex::new([8.0, 4.0, 2.0, 1.0, 1.0]).unwrap();
    let make = skewed(30, 0.88);
    let fuel = WeightedIndex::new([6.0, 2.0, 1.0, 1.0]).unwrap();
    let color = WeightedIndex::new([5.0, 3.0, 1.0]).unwrap();
    let data = (0..rows)
        .map(|_| {
            let r = region.sample(&mut rng) as i64;
            let city = (5 * r + offset.sample(&mut rng) as i64) % 50;
            let district = city / 5;
            let m = make.sample(&mut rng) as i64;
            let year = if rng.gen_bool(0.85) {
                m
            } else {
                (m + rng.gen_range(-3..=3)).clamp(0, 29)
            };
            let f = fuel.sample(&mut rng) as i64;
            let c = (r + color.sample(&mut rng) as i64) % 12;
            let insured = rng.gen_bool(if f == 0 { 0.9 } else { 0.3 }) as i64;
            vec![r, city, district, m, year, f, c, insured]
        })
        .collect();
    build(
        &["region", "city", "district", "make", "model_year", "fuel", "color", "insured"],
        data,
    )
}

/// `columns` columns over `0..domain`. With probability `hot`, a row is
/// the all-maximum tuple; otherwise every column is a noisy copy of a
/// shared uniform draw. The hot tuple is the top of every domain.
pub fn skewed_hot(rows: usize, columns: usize, domain: i64, hot: f64, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data: Vec<Vec<i64>> = (0..rows)
        .map(|_| {
            if rng.gen_bool(hot) {
                vec![domain - 1; columns]
            } else {
                let base = rng.gen_range(0..domain);
                (0..columns)
                    .map(|_| (base + rng.gen_range(0..3)).min(domain - 1))
                    .collect()
            }
        })
        .collect();
    // every value shows up at least once so all domains are complete
    for v in 0..domain {
        data.push(vec![v; columns]);
    }
    let names: Vec<String> = (0..columns).map(|c| format!("s{c}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    build(&names, data)
}

/// Every tuple of the cross product `domains`, `copies` times over. Column
/// marginals are uniform and exactly independent.
pub fn product(domains: &[i64], copies: usize) -> Table {
    let mut data = vec![Vec::new()];
    for &d in domains {
        data = data
            .into_iter()
            .flat_map(|prefix: Vec<i64>| {
                (0..d).map(move |v| {
                    let mut t = prefix.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
    }
    let data = data.into_iter().flat_map(|t| std::iter::repeat_n(t, copies)).collect();
    let names: Vec<String> = (0..domains.len()).map(|c| format!("p{c}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    build(&names, data)
}

/// Four small correlated columns with domains of at most 8.
pub fn small(rows: usize, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a_dist = skewed(8, 0.75);
    let data = (0..rows)
        .map(|_| {
            let a = a_dist.sample(&mut rng) as i64;
            let b = (a / 2 + rng.gen_range(0..2)).min(5);
            let c = if rng.gen_bool(0.7) { (a + b) % 7 } else { rng.gen_range(0..7) };
            let d = rng.gen_range(0..4) + (c % 2) * 4;
            vec![a, b, c, d]
        })
        .collect();
    build(&["a", "b", "c", "d"], data)
}
