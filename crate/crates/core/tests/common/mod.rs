//! Independent plaintext oracles shared by the integration tests. None of
//! these call into the library's own logistic code.

#![allow(dead_code)]

use pplr::dataset::{Label, LabeledDataset};
use pplr::features::SparseBinaryVector;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// `(dense x, y)` rows.
pub fn rows(data: &LabeledDataset) -> Vec<(Vec<f64>, f64)> {
    data.iter()
        .map(|(x, y)| (x.to_dense(), if *y == Label::Positive { 1.0 } else { -1.0 }))
        .collect()
}

/// `sum_i y_i x_i / (1 + exp(y_i w.x_i))`, straight from the definition.
pub fn oracle_gradient(w: &[f64], rows: &[(Vec<f64>, f64)]) -> Vec<f64> {
    let mut g = vec![0.0; w.len()];
    for (x, y) in rows {
        let m: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
        let coef = y / (1.0 + (y * m).exp());
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj += coef * xj;
        }
    }
    g
}

/// `sum_i log sigma(y_i w.x_i)`.
pub fn oracle_log_likelihood(w: &[f64], rows: &[(Vec<f64>, f64)]) -> f64 {
    rows.iter()
        .map(|(x, y)| {
            let m: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
            -(1.0 + (-y * m).exp()).ln()
        })
        .sum()
}

/// Online ascent `w <- (1 + 2 lambda) w + eta g` over consecutive blocks.
pub fn oracle_train(d: usize, rows: &[(Vec<f64>, f64)], k: usize, rounds: usize, eta: f64, lambda: f64) -> Vec<f64> {
    let mut w = vec![0.0; d];
    let blocks: Vec<&[(Vec<f64>, f64)]> = rows.chunks(k).collect();
    for t in 0..rounds {
        let g = oracle_gradient(&w, blocks[t % blocks.len()]);
        for (wj, gj) in w.iter_mut().zip(g) {
            *wj = (1.0 + 2.0 * lambda) * *wj + eta * gj;
        }
    }
    w
}

/// Each feature present with probability `density`; fair-coin labels.
pub fn random_data(n: usize, d: u32, density: f64, seed: u64) -> LabeledDataset {
    let mut r = rng(seed);
    let mut ds = LabeledDataset::new(d);
    for _ in 0..n {
        let idx: Vec<u32> = (0..d).filter(|_| r.random_bool(density)).collect();
        let y = if r.random_bool(0.5) { Label::Positive } else { Label::Negative };
        ds.push(SparseBinaryVector::new(idx, d).unwrap(), y).unwrap();
    }
    ds
}

/// Kolmogorov-Smirnov statistic of `samples` against a continuous CDF.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at level 0.01.
pub fn ks_critical_01(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Largest relative coordinate error `|a - b| / |b|`; `b == 0` requires `a == 0`.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            if *y == 0.0 {
                if *x == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                ((x - y) / y).abs()
            }
        })
        .fold(0.0, f64::max)
}
