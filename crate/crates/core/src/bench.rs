//! Benchmark grid: reduction method x dimension x block size x key size.
//!
//! Each cell fits its reduction on the training split, trains (in the clear
//! or through the private protocol), and scores AUC on the held-out split.
//! A failing cell becomes a row with the `error` column filled in; the rest
//! of the grid still runs.

use std::io::Write;
use std::time::Instant;

use rand::RngCore;

use crate::dataset::LabeledDataset;
use crate::dimreduce::{Method, ProjectionState, ReductionSpec};
use crate::error::{Error, Result};
use crate::logistic::{auc, scores, train_online_blocks, Model};
use crate::paillier::keygen;
use crate::protocol::{OpCounters, SessionParams};
use crate::rng::derive_rng;
use crate::transport::{run_training_session, Party, TrainingSession, Transport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchMode {
    Plain,
    Private,
}

impl BenchMode {
    pub fn name(self) -> &'static str {
        match self {
            BenchMode::Plain => "plain",
            BenchMode::Private => "private",
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchGrid {
    /// `None` trains on the unreduced features; `dims` is then ignored.
    pub methods: Vec<Option<Method>>,
    pub dims: Vec<u32>,
    pub block_sizes: Vec<u32>,
    pub key_bits: Vec<u32>,
    pub mode: BenchMode,
    pub epochs: usize,
    pub eta: f64,
    pub scale: u64,
    /// Private mode trains on at most this many documents.
    pub max_docs: Option<usize>,
    pub seed: u64,
}

impl BenchGrid {
    pub fn cells(&self) -> Vec<(Option<Method>, Option<u32>, u32, u32)> {
        let mut out = Vec::new();
        for &m in &self.methods {
            let dims: Vec<Option<u32>> = match m {
                Some(_) => self.dims.iter().map(|&d| Some(d)).collect(),
                None => vec![None],
            };
            for &d in &dims {
                for &k in &self.block_sizes {
                    for &b in &self.key_bits {
                        out.push((m, d, k, b));
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchRow {
    pub method: String,
    pub dim: u32,
    pub block_size: u32,
    pub key_bits: u32,
    pub mode: String,
    pub wall_seconds: f64,
    pub auc: Option<f64>,
    pub rounds: u64,
    pub counters: OpCounters,
    pub error: String,
}

impl BenchRow {
    pub const HEADER: [&'static str; 15] = [
        "method",
        "dim",
        "block_size",
        "key_bits",
        "mode",
        "wall_seconds",
        "auc",
        "rounds",
        "encryptions",
        "decryptions",
        "reencryptions",
        "rerandomizations",
        "crypto_ops",
        "elements_sent",
        "error",
    ];

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.method.clone(),
            self.dim.to_string(),
            self.block_size.to_string(),
            self.key_bits.to_string(),
            self.mode.clone(),
            format!("{:.6}", self.wall_seconds),
            self.auc.map(|a| format!("{a:.6}")).unwrap_or_default(),
            self.rounds.to_string(),
            self.counters.encryptions.to_string(),
            self.counters.decryptions.to_string(),
            self.counters.reencryptions.to_string(),
            self.counters.rerandomizations.to_string(),
            self.counters.crypto_ops().to_string(),
            self.counters.elements_sent().to_string(),
            self.error.clone(),
        ]
    }
}

fn reduce(
    method: Option<Method>,
    dim: Option<u32>,
    train: &LabeledDataset,
    test: &LabeledDataset,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    match (method, dim) {
        (Some(m), Some(d)) => {
            let spec = ReductionSpec::new(m, train.dim(), d, seed)?;
            let state = ProjectionState::fit(&spec, train)?;
            Ok((state.project_dataset(train)?, state.project_dataset(test)?))
        }
        _ => Ok((train.clone(), test.clone())),
    }
}

fn run_cell(
    grid: &BenchGrid,
    cell: (Option<Method>, Option<u32>, u32, u32),
    train: &LabeledDataset,
    test: &LabeledDataset,
    row: &mut BenchRow,
) -> Result<()> {
    let (method, dim, k, b) = cell;
    let label = format!("bench-{}-{:?}-{k}-{b}", row.method, dim);
    let seed = derive_rng(grid.seed, &label).next_u64();
    let t = Instant::now();
    let (train, test) = reduce(method, dim, train, test, seed)?;
    row.dim = train.dim();
    let model = match grid.mode {
        BenchMode::Plain => {
            row.rounds = (grid.epochs * train.len().div_ceil(k.max(1) as usize)) as u64;
            train_online_blocks(&train, k as usize, grid.epochs, grid.eta, 0.0)?
        }
        BenchMode::Private => {
            let train = match grid.max_docs {
                Some(m) if m < train.len() => train.subset(&(0..m).collect::<Vec<_>>()),
                _ => train,
            };
            let mut params = SessionParams::with_dim(train.dim());
            params.key_bits = b;
            params.scale = grid.scale;
            params.eta = grid.eta;
            params.block_size = k;
            params.validate()?;
            let keygen_start = Instant::now();
            let keys = keygen(b, &mut derive_rng(seed, "bench-keys"))?;
            let keygen_time = keygen_start.elapsed();
            let sess = TrainingSession {
                params,
                epochs: grid.epochs,
                tol: 0.0,
                seed,
                transport: Transport::InProc,
                timeout: None,
            };
            let model = Model::zeros(train.dim() as usize, grid.eta, 0.0)?;
            let report = run_training_session(&sess, Party::Both { keys, model, data: &train })?;
            row.rounds = report.rounds;
            row.counters = report.counters;
            row.wall_seconds -= keygen_time.as_secs_f64();
            report.model.ok_or_else(|| Error::Protocol("no model returned".into()))?
        }
    };
    row.auc = Some(auc(&scores(&model, &test), &test.labels())?);
    row.wall_seconds += t.elapsed().as_secs_f64();
    Ok(())
}

/// Runs every cell of `grid`. Fails only for an empty grid.
pub fn run_bench(grid: &BenchGrid, train: &LabeledDataset, test: &LabeledDataset) -> Result<Vec<BenchRow>> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::InvalidArgument("empty benchmark grid".into()));
    }
    Ok(cells
        .into_iter()
        .map(|cell| {
            let (method, dim, k, b) = cell;
            let mut row = BenchRow {
                method: method.map(|m| m.name().to_string()).unwrap_or_else(|| "none".into()),
                dim: dim.unwrap_or(train.dim()),
                block_size: k,
                key_bits: b,
                mode: grid.mode.name().into(),
                ..BenchRow::default()
            };
            if let Err(e) = run_cell(grid, cell, train, test, &mut row) {
                row.auc = None;
                row.error = e.to_string();
            }
            row
        })
        .collect())
}

/// Wall-time ratio of the largest to the smallest key size, per
/// (method, dim, block size) that was run at more than one key size.
pub fn slowdown_factors(rows: &[BenchRow]) -> Vec<(String, u32, u32, u32, u32, f64)> {
    let mut out = Vec::new();
    let mut seen: Vec<(String, u32, u32)> = Vec::new();
    for r in rows.iter().filter(|r| r.error.is_empty()) {
        let key = (r.method.clone(), r.dim, r.block_size);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key.clone());
        let group: Vec<&BenchRow> = rows
            .iter()
            .filter(|o| o.error.is_empty() && (o.method.clone(), o.dim, o.block_size) == key)
            .collect();
        let lo = group.iter().min_by_key(|o| o.key_bits).unwrap();
        let hi = group.iter().max_by_key(|o| o.key_bits).unwrap();
        if lo.key_bits != hi.key_bits && lo.wall_seconds > 0.0 {
            out.push((key.0, key.1, key.2, lo.key_bits, hi.key_bits, hi.wall_seconds / lo.wall_seconds));
        }
    }
    out
}

/// Writes `# key=value` provenance lines, then the CSV header and rows.
pub fn write_csv<W: Write>(mut out: W, provenance: &[(String, String)], rows: &[BenchRow]) -> Result<()> {
    for (k, v) in provenance {
        writeln!(out, "# {k}={v}")?;
    }
    write_rows(out, &BenchRow::HEADER, rows.iter().map(BenchRow::fields))
}

fn write_rows<W: Write, I: IntoIterator<Item = Vec<String>>>(out: W, header: &[&str], rows: I) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}
