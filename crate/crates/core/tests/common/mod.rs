//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

pub mod fixtures;
pub mod mock;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tabprompt_core::mle::{Criterion, ModelParams};
use tabprompt_core::{ColumnKind, ColumnSpec, Table, TableSchema, Task};

/// Alphabet for categorical lexemes, including characters that stress the parser.
const CHARS: &[char] = &['a', 'b', 'z', 'Q', '7', '-', '_', '.', ',', ' ', 'é', '/', 'i', 's'];

pub fn random_lexeme(rng: &mut impl Rng) -> String {
    loop {
        let len = rng.gen_range(1..8);
        let s: String = (0..len).map(|_| *CHARS.choose(rng).unwrap()).collect();
        if tabprompt_core::table::cell_violation(&s).is_none() {
            return s;
        }
    }
}

pub fn random_number(rng: &mut impl Rng) -> String {
    match rng.gen_range(0..4) {
        0 => rng.gen_range(-1000..1000).to_string(),
        1 => format!("{:.3}", rng.gen_range(-50.0..50.0)),
        2 => format!("{}e{}", rng.gen_range(1..9), rng.gen_range(-3..4)),
        _ => rng.gen_range(0.0f64..1.0).to_string(),
    }
}

/// A random schema with 1..=max_cols columns of mixed kinds plus a matching table.
/// Column names are random words, some of them containing `" is"` or digits.
pub fn random_table(rng: &mut impl Rng, max_cols: usize, n_rows: usize) -> (Table, TableSchema) {
    let n_cols = rng.gen_range(1..=max_cols);
    let mut names = BTreeSet::new();
    let stems = ["age", "age is", "x", "x y", "this", "col", "is", "value", "v2", "ratio of a"];
    while names.len() < n_cols {
        let stem = stems.choose(rng).unwrap();
        names.insert(if rng.gen_bool(0.5) { stem.to_string() } else { format!("{stem}{}", rng.gen_range(0..40)) });
    }
    let mut names: Vec<String> = names.into_iter().collect();
    names.shuffle(rng);
    let numeric: Vec<bool> = (0..n_cols).map(|_| rng.gen_bool(0.5)).collect();
    let rows: Vec<Vec<String>> = (0..n_rows)
        .map(|_| numeric.iter().map(|&num| if num { random_number(rng) } else { random_lexeme(rng) }).collect())
        .collect();
    let table = Table::new(names.clone(), rows).unwrap();
    let specs = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let kind = if numeric[j] {
                let vals: Vec<f64> = table.column(j).map(|v| v.parse().unwrap()).collect();
                ColumnKind::Numeric {
                    min: vals.iter().copied().fold(f64::INFINITY, f64::min),
                    max: vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                }
            } else {
                ColumnKind::Categorical { levels: table.column(j).map(str::to_owned).collect() }
            };
            ColumnSpec { name: name.clone(), kind, is_target: j == n_cols - 1 }
        })
        .collect();
    let task = if numeric[n_cols - 1] { Task::Regression } else { Task::Classification };
    (table, TableSchema { specs, task })
}

/// Exhaustive root split search in exact integer arithmetic.
///
/// Minimizing the weighted child impurity is equivalent to maximizing
/// `A_l / n_l + A_r / n_r`, where `A` is the sum of squared class counts
/// (gini) or the squared target sum (variance). Fractions are compared by
/// cross-multiplication. Ties keep the lowest feature, then lowest threshold.
/// Returns `None` when the node is pure or no feature has two distinct values.
pub fn oracle_root_split(x: &[Vec<i64>], y: &[i64], criterion: Criterion) -> Option<(usize, f64)> {
    let n = y.len();
    if y.iter().all(|&v| v == y[0]) {
        return None;
    }
    let score = |rows: &[usize]| -> i128 {
        match criterion {
            Criterion::Gini => {
                let mut counts: BTreeMap<i64, i128> = BTreeMap::new();
                for &i in rows {
                    *counts.entry(y[i]).or_default() += 1;
                }
                counts.values().map(|c| c * c).sum()
            }
            Criterion::Variance => {
                let s: i128 = rows.iter().map(|&i| y[i] as i128).sum();
                s * s
            }
        }
    };
    // best as (numerator, denominator) of A_l/n_l + A_r/n_r
    let mut best: Option<(i128, i128, usize, f64)> = None;
    for f in 0..x[0].len() {
        let values: BTreeSet<i64> = x.iter().map(|r| r[f]).collect();
        let values: Vec<i64> = values.into_iter().collect();
        for w in values.windows(2) {
            let threshold = (w[0] + w[1]) as f64 / 2.0;
            let left: Vec<usize> = (0..n).filter(|&i| (x[i][f] as f64) <= threshold).collect();
            let right: Vec<usize> = (0..n).filter(|&i| (x[i][f] as f64) > threshold).collect();
            let (nl, nr) = (left.len() as i128, right.len() as i128);
            let num = score(&left) * nr + score(&right) * nl;
            let den = nl * nr;
            let better = match best {
                None => true,
                Some((bn, bd, _, _)) => num * bd > bn * den,
            };
            if better {
                best = Some((num, den, f, threshold));
            }
        }
    }
    best.map(|(_, _, f, t)| (f, t))
}

/// Folds by the documented rule: ChaCha8 seeded shuffle, contiguous cut,
/// the first `n % k` folds one row longer.
pub fn oracle_folds(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = Vec::new();
    let mut cursor = 0;
    for f in 0..k {
        let len = n / k + if f < n % k { 1 } else { 0 };
        folds.push(order[cursor..cursor + len].to_vec());
        cursor += len;
    }
    folds
}

/// Brute-force cross-validation: every cell on every fold with explicit loops.
/// Returns (winner index, per-cell mean scores).
pub fn oracle_grid_search(
    x: &[Vec<f64>],
    y: &[f64],
    grid: &[ModelParams],
    k: usize,
    seed: u64,
    task: Task,
) -> (usize, Vec<f64>) {
    let folds = oracle_folds(x.len(), k, seed);
    let mut means = Vec::new();
    for cell in grid {
        let mut total = 0.0;
        for held in 0..k {
            let mut xt = Vec::new();
            let mut yt = Vec::new();
            for (g, fold) in folds.iter().enumerate() {
                if g != held {
                    for &i in fold {
                        xt.push(x[i].clone());
                        yt.push(y[i]);
                    }
                }
            }
            let xv: Vec<Vec<f64>> = folds[held].iter().map(|&i| x[i].clone()).collect();
            let pred = cell.fit_predict(&xt, &yt, &xv, task).unwrap();
            let mut s = 0.0;
            for (p, &i) in pred.iter().zip(&folds[held]) {
                s += match task {
                    Task::Classification => f64::from(u8::from(*p == y[i])),
                    Task::Regression => (p - y[i]) * (p - y[i]),
                };
            }
            total += s / folds[held].len() as f64;
        }
        means.push(total / k as f64);
    }
    let mut winner = 0;
    for i in 1..means.len() {
        let improves = match task {
            Task::Classification => means[i] > means[winner],
            Task::Regression => means[i] < means[winner],
        };
        if improves {
            winner = i;
        }
    }
    (winner, means)
}

/// Total-variation distance between two empirical distributions.
pub fn tv_distance<K: Ord + Clone>(a: &BTreeMap<K, usize>, b: &BTreeMap<K, usize>) -> f64 {
    let (na, nb) = (a.values().sum::<usize>() as f64, b.values().sum::<usize>() as f64);
    let keys: BTreeSet<&K> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .map(|k| {
            let pa = a.get(k).copied().unwrap_or(0) as f64 / na;
            let pb = b.get(k).copied().unwrap_or(0) as f64 / nb;
            (pa - pb).abs()
        })
        .sum::<f64>()
        / 2.0
}

pub fn histogram<I: IntoIterator<Item = K>, K: Ord>(items: I) -> BTreeMap<K, usize> {
    let mut h = BTreeMap::new();
    for k in items {
        *h.entry(k).or_insert(0) += 1;
    }
    h
}
