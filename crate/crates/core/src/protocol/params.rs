//! Session parameters shared by both parties, and the check that a key size
//! can hold every intermediate value the protocol produces.

use std::fmt;

use crate::error::{Error, Result};
use crate::fixedpoint::DEFAULT_SCALE;
use crate::logistic::DEFAULT_ETA;

pub const PROTOCOL_VERSION: u8 = 1;

/// Fixed-point scale exponents used at each stage of a training round.
///
/// Weights travel at `weight`, exponentials at `share` (the unblinded
/// product lands at `2 * share`), reciprocals at `reciprocal`, and the
/// updated weights come back at `reciprocal + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScalePlan {
    pub weight: u32,
    pub share: u32,
    pub reciprocal: u32,
}

impl Default for ScalePlan {
    fn default() -> Self {
        ScalePlan {
            weight: 2,
            share: 3,
            reciprocal: 4,
        }
    }
}

impl ScalePlan {
    pub fn logit(&self) -> u32 {
        2 * self.share
    }

    pub fn update(&self) -> u32 {
        self.reciprocal + 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionParams {
    pub key_bits: u32,
    /// Scale constant `C`.
    pub scale: u64,
    pub dim: u32,
    /// Documents per gradient update.
    pub block_size: u32,
    pub eta: f64,
    pub reg_lambda: f64,
    /// Additive blinds are uniform on `[-R, R]`.
    pub blind_bound: f64,
    /// Multiplicative blinds are integers in `[1, |D|]`.
    pub q_domain: u64,
    /// Largest `|y w.x|` a training round accepts before aborting.
    pub margin_bound: f64,
    /// Largest `|w_j|` Bob will encrypt.
    pub weight_bound: f64,
    pub scales: ScalePlan,
    /// Largest `|w.x|` an evaluation session is sized for.
    pub eval_margin_bound: f64,
    /// Extra bits of slack that statistically hide the evaluation margin.
    pub stat_margin: u32,
}

impl Default for SessionParams {
    fn default() -> Self {
        SessionParams {
            key_bits: 256,
            scale: DEFAULT_SCALE,
            dim: 1,
            block_size: 100,
            eta: DEFAULT_ETA,
            reg_lambda: 0.0,
            blind_bound: 8.0,
            q_domain: 1 << 32,
            margin_bound: 50.0,
            weight_bound: 1e6,
            scales: ScalePlan::default(),
            eval_margin_bound: 1e4,
            stat_margin: 40,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `log2(a + b)` from `log2 a` and `log2 b`.
fn log2_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (1.0 + (lo - hi).exp2()).log2()
}

impl SessionParams {
    pub fn with_dim(dim: u32) -> Self {
        SessionParams {
            dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale == 0 {
            return Err(Error::Config("scale C must be >= 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("dimension must be >= 1".into()));
        }
        if self.block_size == 0 {
            return Err(Error::Config("block size K must be >= 1".into()));
        }
        positive("eta", self.eta)?;
        if !(self.reg_lambda >= 0.0 && self.reg_lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.reg_lambda)));
        }
        positive("blind bound R", self.blind_bound)?;
        positive("margin bound", self.margin_bound)?;
        positive("weight bound", self.weight_bound)?;
        positive("eval margin bound", self.eval_margin_bound)?;
        if self.q_domain == 0 || self.q_domain > 1 << 53 {
            return Err(Error::Config(format!(
                "|D| must lie in [1, 2^53], got {}",
                self.q_domain
            )));
        }
        let s = self.scales;
        if s.weight == 0 || s.share == 0 || s.reciprocal < s.weight {
            return Err(Error::Config(format!(
                "scale plan needs weight >= 1, share >= 1, reciprocal >= weight; got {s:?}"
            )));
        }
        if self.key_bits < 16 || self.key_bits % 2 != 0 {
            return Err(Error::Config(format!("bad key size {}", self.key_bits)));
        }
        let need = self.required_bits();
        if need >= (self.key_bits - 2) as f64 {
            return Err(Error::Config(format!(
                "a {}-bit key cannot hold the protocol's intermediate values: \
                 they reach {need:.1} bits; raise the key size or lower C, R or the bounds",
                self.key_bits
            )));
        }
        Ok(())
    }

    /// Scale of the weights and margin in an evaluation session. Truncating
    /// each weight loses less than `C^-es`, so the sign of any margin wider
    /// than `nnz / C^es` survives encoding.
    pub fn eval_scale(&self) -> u32 {
        self.scales.weight
    }

    /// Integer width `A` that comparison shares must clear, `ceil(C^es * bound)`.
    pub fn eval_offset(&self) -> u128 {
        ((self.scale as f64).powi(self.eval_scale() as i32) * self.eval_margin_bound).ceil() as u128
    }

    /// Bit width of the comparison inputs.
    pub fn compare_bits(&self) -> u32 {
        let a = self.eval_offset().max(1);
        (128 - (2 * a).leading_zeros()) + self.stat_margin
    }

    /// `log2` of the largest plaintext magnitude any step can produce.
    pub fn required_bits(&self) -> f64 {
        let lc = (self.scale as f64).log2();
        let s = self.scales;
        let e = std::f64::consts::LOG2_E;
        let w = self.weight_bound.log2();
        let d = (self.dim as f64).log2();
        let k = (self.block_size as f64).log2();
        let r = self.blind_bound;
        let m = self.margin_bound;
        // Blinded margin.
        let margins = log2_add(d + s.weight as f64 * lc + w, s.weight as f64 * lc + r.log2());
        // Unblinded and scaled logit: C^2s (e^(M+2R) + 1) q.
        let logits = log2_add(2.0 * s.share as f64 * lc + (m + 2.0 * r) * e, 2.0 * s.share as f64 * lc)
            + (self.q_domain as f64).log2();
        // Updated weights.
        let eta_int = (self.scale as f64 * self.eta).max(1.0).log2();
        let reg = (1.0 + 2.0 * self.reg_lambda).log2();
        let update = log2_add(
            k + s.reciprocal as f64 * lc + eta_int,
            s.update() as f64 * lc + reg + w,
        );
        // Evaluation: encrypted margin and blinded comparison share.
        let eval = log2_add(d + self.eval_scale() as f64 * lc + w, self.compare_bits() as f64);
        [margins, logits, update, eval]
            .into_iter()
            .fold(f64::MIN, f64::max)
    }

    /// Decimal fields in a fixed order, for the handshake.
    pub fn to_fields(&self) -> Vec<Vec<u8>> {
        let s = self.scales;
        [
            self.key_bits.to_string(),
            self.scale.to_string(),
            self.dim.to_string(),
            self.block_size.to_string(),
            self.eta.to_string(),
            self.reg_lambda.to_string(),
            self.blind_bound.to_string(),
            self.q_domain.to_string(),
            self.margin_bound.to_string(),
            self.weight_bound.to_string(),
            s.weight.to_string(),
            s.share.to_string(),
            s.reciprocal.to_string(),
            self.eval_margin_bound.to_string(),
            self.stat_margin.to_string(),
        ]
        .into_iter()
        .map(String::into_bytes)
        .collect()
    }

    pub const FIELD_COUNT: usize = 15;

    pub fn from_fields(fields: &[Vec<u8>]) -> Result<Self> {
        if fields.len() != Self::FIELD_COUNT {
            return Err(Error::Frame(format!(
                "expected {} parameter fields, got {}",
                Self::FIELD_COUNT,
                fields.len()
            )));
        }
        fn parse<T: std::str::FromStr>(raw: &[u8], name: &str) -> Result<T> {
            std::str::from_utf8(raw)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Frame(format!("bad parameter {name}")))
        }
        Ok(SessionParams {
            key_bits: parse(&fields[0], "key_bits")?,
            scale: parse(&fields[1], "scale")?,
            dim: parse(&fields[2], "dim")?,
            block_size: parse(&fields[3], "block_size")?,
            eta: parse(&fields[4], "eta")?,
            reg_lambda: parse(&fields[5], "lambda")?,
            blind_bound: parse(&fields[6], "blind_bound")?,
            q_domain: parse(&fields[7], "q_domain")?,
            margin_bound: parse(&fields[8], "margin_bound")?,
            weight_bound: parse(&fields[9], "weight_bound")?,
            scales: ScalePlan {
                weight: parse(&fields[10], "weight_scale")?,
                share: parse(&fields[11], "share_scale")?,
                reciprocal: parse(&fields[12], "reciprocal_scale")?,
            },
            eval_margin_bound: parse(&fields[13], "eval_margin_bound")?,
            stat_margin: parse(&fields[14], "stat_margin")?,
        })
    }

    /// Names of the fields on which two configurations disagree.
    pub fn mismatches(&self, other: &SessionParams) -> Vec<&'static str> {
        let names = [
            "key_bits",
            "scale",
            "dim",
            "block_size",
            "eta",
            "lambda",
            "blind_bound",
            "q_domain",
            "margin_bound",
            "weight_bound",
            "weight_scale",
            "share_scale",
            "reciprocal_scale",
            "eval_margin_bound",
            "stat_margin",
        ];
        self.to_fields()
            .iter()
            .zip(other.to_fields())
            .zip(names)
            .filter(|((a, b), _)| *a != b)
            .map(|(_, n)| n)
            .collect()
    }
}

impl fmt::Display for SessionParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "b={} C={} d={} K={} eta={} lambda={} R={} |D|={}",
            self.key_bits,
            self.scale,
            self.dim,
            self.block_size,
            self.eta,
            self.reg_lambda,
            self.blind_bound,
            self.q_domain
        )
    }
}
