//! Plaintext logistic regression by gradient ascent on the log-likelihood.
//!
//! This is the reference the private protocol is measured against, so the
//! update rule here is exactly the one the protocol evaluates under
//! encryption: `w <- w + eta * grad + 2 * lambda * w`, with
//! `grad = sum_i y_i x_i / (1 + exp(y_i w.x_i))`.

use std::io::{Read, Write};

use rand::seq::SliceRandom;

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::features::SparseBinaryVector;
use crate::rng::derive_rng;

/// Default step size.
pub const DEFAULT_ETA: f64 = 0.001;
/// Default convergence tolerance on the max-norm of the weight change.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub w: Vec<f64>,
    pub eta: f64,
    pub reg_lambda: f64,
}

impl Model {
    /// All-zero weights.
    pub fn zeros(dim: usize, eta: f64, reg_lambda: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be > 0, got {eta}")));
        }
        if !(reg_lambda >= 0.0 && reg_lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "reg_lambda must be >= 0, got {reg_lambda}"
            )));
        }
        Ok(Model {
            w: vec![0.0; dim],
            eta,
            reg_lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn margin(&self, x: &SparseBinaryVector) -> f64 {
        x.dot(&self.w)
    }

    /// Applies one ascent step with the given gradient and returns the
    /// max-norm of the change.
    pub fn step(&mut self, grad: &[f64]) -> Result<f64> {
        if grad.len() != self.w.len() {
            return Err(Error::Dimension(format!(
                "gradient has {} entries, model has {}",
                grad.len(),
                self.w.len()
            )));
        }
        let mut change = 0.0f64;
        for (w, g) in self.w.iter_mut().zip(grad) {
            let next = if self.reg_lambda == 0.0 {
                *w + self.eta * g
            } else {
                *w + self.eta * g + 2.0 * self.reg_lambda * *w
            };
            if !next.is_finite() {
                return Err(Error::Divergence("non-finite weight".into()));
            }
            change = change.max((next - *w).abs());
            *w = next;
        }
        Ok(change)
    }

    /// Binary layout: `d`, `eta`, `reg_lambda` as decimal lines, then the
    /// weights as big-endian IEEE-754 doubles.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "{}\n{}\n{}\n", self.w.len(), self.eta, self.reg_lambda)?;
        for w in &self.w {
            out.write_all(&w.to_be_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rest = bytes;
        let mut header = |name: &str| -> Result<String> {
            let pos = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| Error::Frame(format!("model header missing {name}")))?;
            let field = std::str::from_utf8(&rest[..pos])
                .map_err(|_| Error::Frame(format!("model {name} is not UTF-8")))?
                .to_string();
            rest = &rest[pos + 1..];
            Ok(field)
        };
        let bad = |name: &str| Error::Frame(format!("bad model {name}"));
        let d: usize = header("d")?.parse().map_err(|_| bad("d"))?;
        let eta: f64 = header("eta")?.parse().map_err(|_| bad("eta"))?;
        let reg_lambda: f64 = header("reg_lambda")?.parse().map_err(|_| bad("reg_lambda"))?;
        if rest.len() != d * 8 {
            return Err(Error::Frame(format!(
                "expected {} weight bytes, found {}",
                d * 8,
                rest.len()
            )));
        }
        let w = rest
            .chunks_exact(8)
            .map(|c| f64::from_be_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Model { w, eta, reg_lambda })
    }
}

/// `P(y | x, w) = 1 / (1 + exp(-y w.x))`.
pub fn sigmoid_prob(w: &[f64], x: &SparseBinaryVector, y: Label) -> f64 {
    let m = y.as_f64() * x.dot(w);
    1.0 / (1.0 + (-m).exp())
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `L(w) = -sum_i log(1 + exp(-y_i w.x_i))`.
pub fn log_likelihood(w: &[f64], data: &LabeledDataset) -> f64 {
    -data
        .iter()
        .map(|(x, y)| softplus(-y.as_f64() * x.dot(w)))
        .sum::<f64>()
}

const ACC_FRACTION_BITS: i32 = 90;

/// Per-coordinate gradient sums in 2^-90 fixed point.
///
/// Integer accumulation makes the sum independent of instance order and of
/// how the data is partitioned, so merging the accumulators of disjoint
/// splits is bit-identical to accumulating the union.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradientAccumulator {
    sums: Vec<i128>,
}

impl GradientAccumulator {
    pub fn new(dim: usize) -> Self {
        GradientAccumulator {
            sums: vec![0; dim],
        }
    }

    fn quantize(v: f64) -> i128 {
        (v * 2f64.powi(ACC_FRACTION_BITS)).round() as i128
    }

    /// Adds the contribution `y x / (1 + exp(y w.x))` of one instance.
    pub fn add_instance(&mut self, w: &[f64], x: &SparseBinaryVector, y: Label) {
        let m = y.as_f64() * x.dot(w);
        let coef = y.as_f64() / (1.0 + m.exp());
        let q = Self::quantize(coef);
        for &j in x.indices() {
            self.sums[j as usize] += q;
        }
    }

    pub fn add_dataset(&mut self, w: &[f64], data: &LabeledDataset) {
        for (x, y) in data.iter() {
            self.add_instance(w, x, *y);
        }
    }

    pub fn merge(&mut self, other: &GradientAccumulator) -> Result<()> {
        if self.sums.len() != other.sums.len() {
            return Err(Error::Dimension("accumulator sizes differ".into()));
        }
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            *a += b;
        }
        Ok(())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let unit = 2f64.powi(-ACC_FRACTION_BITS);
        self.sums.iter().map(|&s| s as f64 * unit).collect()
    }
}

pub fn gradient_accumulator(w: &[f64], data: &LabeledDataset) -> GradientAccumulator {
    let mut acc = GradientAccumulator::new(w.len());
    acc.add_dataset(w, data);
    acc
}

/// `sum_i y_i x_i / (1 + exp(y_i w.x_i))`; no step size applied.
pub fn gradient(w: &[f64], data: &LabeledDataset) -> Result<Vec<f64>> {
    if data.dim() as usize != w.len() {
        return Err(Error::Dimension(format!(
            "weights have {} entries, data dim is {}",
            w.len(),
            data.dim()
        )));
    }
    Ok(gradient_accumulator(w, data).to_vec())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchReport {
    pub model: Model,
    pub iterations: usize,
    pub converged: bool,
}

/// Full-batch gradient ascent from zero weights.
pub fn train_batch(
    data: &LabeledDataset,
    eta: f64,
    reg_lambda: f64,
    tol: f64,
    max_iters: usize,
) -> Result<BatchReport> {
    let model = Model::zeros(data.dim() as usize, eta, reg_lambda)?;
    continue_batch(model, data, tol, max_iters)
}

pub fn continue_batch(
    mut model: Model,
    data: &LabeledDataset,
    tol: f64,
    max_iters: usize,
) -> Result<BatchReport> {
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        let grad = gradient(&model.w, data)?;
        let change = model.step(&grad)?;
        iterations += 1;
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(BatchReport {
        model,
        iterations,
        converged,
    })
}

/// One update per block.
pub fn train_online<I>(dim: usize, blocks: I, eta: f64, reg_lambda: f64) -> Result<Model>
where
    I: IntoIterator<Item = LabeledDataset>,
{
    let mut model = Model::zeros(dim, eta, reg_lambda)?;
    for block in blocks {
        let grad = gradient(&model.w, &block)?;
        model.step(&grad)?;
    }
    Ok(model)
}

/// Online training over `data` in blocks of `block_size`, `epochs` passes.
pub fn train_online_blocks(
    data: &LabeledDataset,
    block_size: usize,
    epochs: usize,
    eta: f64,
    reg_lambda: f64,
) -> Result<Model> {
    if block_size == 0 {
        return Err(Error::InvalidArgument("block size must be >= 1".into()));
    }
    let blocks = (0..epochs).flat_map(|_| data.blocks(block_size));
    train_online(data.dim() as usize, blocks, eta, reg_lambda)
}

pub fn scores(model: &Model, data: &LabeledDataset) -> Vec<f64> {
    data.iter().map(|(x, _)| model.margin(x)).collect()
}

/// Area under the ROC curve; tied scores earn half credit.
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Doubled counts keep tie credit integral.
    let mut doubled: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            match labels[order[j]] {
                Label::Positive => pos += 1,
                Label::Negative => neg += 1,
            }
            j += 1;
        }
        doubled += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        i = j;
    }
    let positives = labels.iter().filter(|&&l| l == Label::Positive).count() as u128;
    let negatives = labels.len() as u128 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    Ok(doubled as f64 / (2 * positives * negatives) as f64)
}

#[derive(Clone, Debug)]
pub struct CvConfig {
    pub eta: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            eta: DEFAULT_ETA,
            tol: DEFAULT_TOL,
            max_iters: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    pub best_lambda: f64,
    /// `fold_auc[l][f]`: AUC of lambda `l` on held-out fold `f`.
    pub fold_auc: Vec<Vec<f64>>,
    pub mean_auc: Vec<f64>,
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn assign_folds(data: &LabeledDataset, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = derive_rng(seed, "cv-folds");
    let mut assignment = vec![0; data.len()];
    for class in [Label::Positive, Label::Negative] {
        let mut members: Vec<usize> = data
            .iter()
            .enumerate()
            .filter(|(_, (_, y))| *y == class)
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut rng);
        for (k, i) in members.into_iter().enumerate() {
            assignment[i] = k % folds;
        }
    }
    assignment
}

/// m-fold cross-validation over a grid of regularization constants.
pub fn cross_validate(
    data: &LabeledDataset,
    folds: usize,
    lambdas: &[f64],
    config: &CvConfig,
) -> Result<CvResult> {
    if folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    let assignment = assign_folds(data, folds, config.seed);
    let mut splits = Vec::with_capacity(folds);
    for f in 0..folds {
        let test: Vec<usize> = (0..data.len()).filter(|&i| assignment[i] == f).collect();
        let train: Vec<usize> = (0..data.len()).filter(|&i| assignment[i] != f).collect();
        let (test, train) = (data.subset(&test), data.subset(&train));
        for part in [&test, &train] {
            let p = part.positives();
            if p == 0 || p == part.len() {
                return Err(Error::DegenerateFold(f));
            }
        }
        splits.push((train, test));
    }

    let mut fold_auc = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut row = Vec::with_capacity(folds);
        for (train, test) in &splits {
            let report = train_batch(train, config.eta, lambda, config.tol, config.max_iters)?;
            row.push(auc(&scores(&report.model, test), &test.labels())?);
        }
        fold_auc.push(row);
    }
    let mean_auc: Vec<f64> = fold_auc
        .iter()
        .map(|row| row.iter().sum::<f64>() / row.len() as f64)
        .collect();
    let mut best = 0;
    for l in 1..lambdas.len() {
        let better = mean_auc[l] > mean_auc[best]
            || (mean_auc[l] == mean_auc[best] && lambdas[l] < lambdas[best]);
        if better {
            best = l;
        }
    }
    Ok(CvResult {
        best_lambda: lambdas[best],
        fold_auc,
        mean_auc,
    })
}
