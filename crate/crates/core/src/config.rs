//! Run configuration in a flat `key = value` text format.
//!
//! ```text
//! # comments and blank lines are ignored
//! key_bits = 1024
//! scale = 1000000
//! transport = 127.0.0.1:7700
//! ```
//!
//! Flags given on the command line are applied after the file with
//! [`RunConfig::set`], so they win.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use crate::dimreduce::{Method, ReductionSpec};
use crate::error::{Error, Result};
use crate::features::{DEFAULT_HASH_SPACE, DEFAULT_PREFIX_LIMIT};
use crate::protocol::SessionParams;
use crate::transport::Transport;

/// Reduction requested by a run: method and target dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DimRed {
    pub method: Method,
    pub target_dim: u32,
}

impl DimRed {
    pub fn spec(&self, source_dim: u32, seed: u64) -> Result<ReductionSpec> {
        ReductionSpec::new(self.method, source_dim, self.target_dim, seed)
    }
}

impl FromStr for DimRed {
    type Err = Error;

    /// `method:target`, e.g. `multinomial:10000`.
    fn from_str(s: &str) -> Result<Self> {
        let (m, t) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("dimred must be method:target, got {s:?}")))?;
        Ok(DimRed {
            method: m.parse()?,
            target_dim: t
                .parse()
                .map_err(|_| Error::Config(format!("bad dimred target {t:?}")))?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub key_bits: u32,
    pub scale: u64,
    pub eta: f64,
    pub reg_lambda: f64,
    pub block_size: u32,
    pub blind_bound: f64,
    pub epochs: usize,
    pub tol: f64,
    pub dimred: Option<DimRed>,
    pub transport: Transport,
    pub seed: u64,
    pub timeout: Option<Duration>,
    pub corpus_root: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub hash_space: u32,
    pub prefix_limit: usize,
    /// Fraction of documents held out for evaluation.
    pub test_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = SessionParams::default();
        RunConfig {
            key_bits: p.key_bits,
            scale: p.scale,
            eta: p.eta,
            reg_lambda: p.reg_lambda,
            block_size: p.block_size,
            blind_bound: p.blind_bound,
            epochs: 1,
            tol: 0.0,
            dimred: None,
            transport: Transport::InProc,
            seed: 0,
            timeout: None,
            corpus_root: None,
            labels: None,
            hash_space: DEFAULT_HASH_SPACE,
            prefix_limit: DEFAULT_PREFIX_LIMIT,
            test_fraction: 0.5,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

impl RunConfig {
    pub const KEYS: [&'static str; 17] = [
        "key_bits",
        "scale",
        "eta",
        "lambda",
        "block_size",
        "blind_bound",
        "epochs",
        "tol",
        "dimred",
        "transport",
        "seed",
        "timeout_secs",
        "corpus_root",
        "labels",
        "hash_space",
        "prefix_limit",
        "test_fraction",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "key_bits" => self.key_bits = parse(key, value)?,
            "scale" => self.scale = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "lambda" => self.reg_lambda = parse(key, value)?,
            "block_size" => self.block_size = parse(key, value)?,
            "blind_bound" => self.blind_bound = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "dimred" => {
                self.dimred = match value {
                    "" | "none" => None,
                    v => Some(v.parse()?),
                }
            }
            "transport" => {
                self.transport = match value {
                    "inproc" => Transport::InProc,
                    addr => Transport::Tcp(addr.to_string()),
                }
            }
            "seed" => self.seed = parse(key, value)?,
            "timeout_secs" => {
                let secs: f64 = parse(key, value)?;
                self.timeout = (secs > 0.0).then(|| Duration::from_secs_f64(secs));
            }
            "corpus_root" => self.corpus_root = (!value.is_empty()).then(|| PathBuf::from(value)),
            "labels" => self.labels = (!value.is_empty()).then(|| PathBuf::from(value)),
            "hash_space" => self.hash_space = parse(key, value)?,
            "prefix_limit" => self.prefix_limit = parse(key, value)?,
            "test_fraction" => self.test_fraction = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse_text(&fs::read_to_string(path)?)
    }

    /// Every key with its current value, in [`Self::KEYS`] order.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let values = [
            self.key_bits.to_string(),
            self.scale.to_string(),
            self.eta.to_string(),
            self.reg_lambda.to_string(),
            self.block_size.to_string(),
            self.blind_bound.to_string(),
            self.epochs.to_string(),
            self.tol.to_string(),
            self.dimred
                .map(|d| format!("{}:{}", d.method, d.target_dim))
                .unwrap_or_else(|| "none".into()),
            match &self.transport {
                Transport::InProc => "inproc".into(),
                Transport::Tcp(a) => a.clone(),
            },
            self.seed.to_string(),
            self.timeout.map(|t| t.as_secs_f64()).unwrap_or(0.0).to_string(),
            opt(&self.corpus_root),
            opt(&self.labels),
            self.hash_space.to_string(),
            self.prefix_limit.to_string(),
            self.test_fraction.to_string(),
        ];
        Self::KEYS.into_iter().zip(values).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.pairs() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Session parameters for feature dimension `dim`, checked against the
    /// key size before anything is encrypted.
    pub fn session_params(&self, dim: u32) -> Result<SessionParams> {
        let mut p = SessionParams::with_dim(dim);
        p.key_bits = self.key_bits;
        p.scale = self.scale;
        p.eta = self.eta;
        p.reg_lambda = self.reg_lambda;
        p.block_size = self.block_size;
        p.blind_bound = self.blind_bound;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must lie in (0, 1)".into()));
        }
        if self.hash_space == 0 {
            return Err(Error::Config("hash_space must be >= 1".into()));
        }
        self.session_params(1).map(|_| ())
    }
}
