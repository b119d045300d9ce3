//! Additive and multiplicative blinding draws.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Draws additive blinds uniform on `[-R, R]` and multiplicative blinds on
/// `{1, ..., |D|}` with `P(Q <= q) = ln q / ln |D|`.
pub struct BlindingSampler {
    rng: ChaCha20Rng,
    r_bound: f64,
    q_domain: u64,
}

impl BlindingSampler {
    pub fn new(rng: ChaCha20Rng, r_bound: f64, q_domain: u64) -> Result<Self> {
        if !(r_bound > 0.0 && r_bound.is_finite()) {
            return Err(Error::InvalidArgument(format!("R must be positive, got {r_bound}")));
        }
        if q_domain == 0 || q_domain > 1 << 53 {
            return Err(Error::InvalidArgument(format!("|D| must lie in [1, 2^53], got {q_domain}")));
        }
        Ok(BlindingSampler {
            rng,
            r_bound,
            q_domain,
        })
    }

    pub fn r_bound(&self) -> f64 {
        self.r_bound
    }

    pub fn q_domain(&self) -> u64 {
        self.q_domain
    }

    pub fn draw_r(&mut self) -> f64 {
        self.rng.random_range(-self.r_bound..=self.r_bound)
    }

    /// Inverse transform: `q = ceil(|D|^U)` for `U` uniform on `[0, 1)`.
    pub fn draw_q(&mut self) -> u64 {
        let u: f64 = self.rng.random();
        let q = ((self.q_domain as f64).ln() * u).exp().ceil();
        (q as u64).clamp(1, self.q_domain)
    }

    /// The sampler's own generator, for other per-round randomness.
    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }
}

/// `P(Q <= q)` under the multiplicative blinding law.
pub fn q_cdf(q: u64, q_domain: u64) -> f64 {
    if q_domain <= 1 {
        return 1.0;
    }
    (q.clamp(1, q_domain) as f64).ln() / (q_domain as f64).ln()
}
