//! The two state machines of a private training round.
//!
//! Bob owns the model and the key pair; Alice owns a block of labeled
//! documents. One round moves through twelve steps:
//!
//! | step | party | action |
//! |------|-------|--------|
//! | 1 | Bob | encrypt `w`, send `E[w]` |
//! | 2, 3 | Alice | form `E[y w.x - r]` per document |
//! | 4, 5 | Bob | decrypt, exponentiate, send `E[e^(y w.x - r)]` |
//! | 6, 7 | Alice | unblind with `e^r`, add `E[1]`, scale by `q` |
//! | 8 | Bob | decrypt, take the reciprocal, encrypt |
//! | 9, 10 | Alice | unscale by `q`, accumulate `E[grad]` |
//! | 11 | Alice | form `E[(1 + 2 lambda) w + eta grad]` |
//! | 12 | Bob | decrypt the new weights |
//!
//! Every transition checks the incoming message's stage against the phase
//! and rejects anything else before touching state.

use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::blinding::BlindingSampler;
use super::message::{EncPayload, MessageType, ProtocolMessage, Stage};
use super::params::SessionParams;
use super::stats::{OpCounters, StepGroup, StepTimings};
use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::fixedpoint::{floor_scaled, ratio_to_f64, CodecParams, ScaledCiphertext};
use crate::logistic::Model;
use crate::paillier::{KeyPair, PublicKey};
use crate::rng::derive_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BobPhase {
    Start,
    AwaitingMargins,
    AwaitingLogits,
    AwaitingUpdate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlicePhase {
    AwaitingWeights,
    AwaitingExponentials,
    AwaitingReciprocals,
}

fn expect_stage(msg: &ProtocolMessage, session_id: u64, expected: Stage) -> Result<()> {
    msg.check_abort()?;
    if msg.session_id != session_id {
        return Err(Error::Protocol(format!(
            "message for session {:016x}, expected {session_id:016x}",
            msg.session_id
        )));
    }
    let got = msg.stage()?;
    if got != expected {
        return Err(Error::OutOfOrder {
            expected: expected.to_string(),
            got: got.to_string(),
        });
    }
    Ok(())
}

fn expect_shape(p: &EncPayload, scale: u32, len: usize, what: &str) -> Result<()> {
    if p.scale != scale {
        return Err(Error::ScaleMismatch {
            left: p.scale,
            right: scale,
        });
    }
    if p.values.len() != len {
        return Err(Error::Dimension(format!(
            "{what}: expected {len} values, got {}",
            p.values.len()
        )));
    }
    Ok(())
}

fn out_of_order(expected: &str, msg: &ProtocolMessage) -> Error {
    Error::OutOfOrder {
        expected: expected.to_string(),
        got: msg.stage().map(|s| s.to_string()).unwrap_or_else(|_| format!("{:?}", msg.kind)),
    }
}

/// Public bound of a nonnegative real at a given scale.
fn scaled_bound(codec: &CodecParams, x: f64, scale: u32) -> BigUint {
    let v = floor_scaled(x, &codec.c_pow(scale)).expect("finite bound");
    v.magnitude() + 1u32
}

fn max_bound(items: &[ScaledCiphertext]) -> BigUint {
    items.iter().map(|c| &c.bound).max().cloned().unwrap_or_default()
}

/// The model owner's side of the protocol.
pub struct BobTrainer {
    keys: KeyPair,
    codec: CodecParams,
    params: SessionParams,
    model: Model,
    phase: BobPhase,
    session_id: u64,
    rng: ChaCha20Rng,
    counters: OpCounters,
    timings: StepTimings,
    pending: usize,
    rounds: u64,
}

impl BobTrainer {
    pub fn new(keys: KeyPair, model: Model, params: SessionParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if keys.public.bits() != params.key_bits {
            return Err(Error::Config(format!(
                "key has {} bits, parameters say {}",
                keys.public.bits(),
                params.key_bits
            )));
        }
        if model.dim() != params.dim as usize {
            return Err(Error::Dimension(format!(
                "model has {} weights, session expects {}",
                model.dim(),
                params.dim
            )));
        }
        if model.eta != params.eta || model.reg_lambda != params.reg_lambda {
            return Err(Error::Config("model eta/lambda differ from session parameters".into()));
        }
        let codec = CodecParams::new(params.scale, &keys.public)?;
        let mut rng = derive_rng(seed, "bob");
        let session_id = rng.next_u64();
        Ok(BobTrainer {
            keys,
            codec,
            params,
            model,
            phase: BobPhase::Start,
            session_id,
            rng,
            counters: OpCounters::default(),
            timings: StepTimings::default(),
            pending: 0,
            rounds: 0,
        })
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.keys.public
    }

    pub fn params(&self) -> &SessionParams {
        &self.params
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn phase(&self) -> BobPhase {
        self.phase
    }

    pub fn session_id(&self) -> u64 {
        self.session_id
    }

    pub fn counters(&self) -> &OpCounters {
        &self.counters
    }

    pub fn timings(&self) -> &StepTimings {
        &self.timings
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Replaces the weights between rounds.
    pub fn set_weights(&mut self, w: Vec<f64>) -> Result<()> {
        if self.phase != BobPhase::Start {
            return Err(Error::OutOfOrder {
                expected: "Start".into(),
                got: format!("set_weights during {:?}", self.phase),
            });
        }
        if w.len() != self.model.dim() {
            return Err(Error::Dimension(format!("{} weights, model has {}", w.len(), self.model.dim())));
        }
        self.model.w = w;
        Ok(())
    }

    /// Discards any half-finished round.
    pub fn reset(&mut self) {
        self.phase = BobPhase::Start;
        self.pending = 0;
    }

    /// Step 1.
    pub fn start_round(&mut self) -> Result<ProtocolMessage> {
        if self.phase != BobPhase::Start {
            return Err(Error::OutOfOrder {
                expected: format!("{:?}", self.phase),
                got: "start_round".into(),
            });
        }
        let t = Instant::now();
        let ws = self.params.scales.weight;
        if let Some(w) = self.model.w.iter().find(|w| !(w.abs() <= self.params.weight_bound)) {
            return Err(Error::Overflow(format!(
                "weight {w} exceeds the bound {}",
                self.params.weight_bound
            )));
        }
        let bound = scaled_bound(&self.codec, self.params.weight_bound, ws);
        let values = self
            .model
            .w
            .iter()
            .map(|&w| Ok(self.codec.encrypt(w, ws, &mut self.rng)?.cipher))
            .collect::<Result<Vec<_>>>()?;
        let d = values.len() as u64;
        let msg = ProtocolMessage::encrypted(
            self.session_id,
            MessageType::EncVector,
            &EncPayload {
                stage: Stage::Weights,
                scale: ws,
                bound,
                values,
            },
        );
        self.counters.encryptions += d;
        self.counters.sent_by_bob += d;
        self.timings.add(StepGroup::S1, t.elapsed());
        self.phase = BobPhase::AwaitingMargins;
        Ok(msg)
    }

    /// Steps 4 and 5.
    pub fn exponentiate_share(&mut self, msg: &ProtocolMessage) -> Result<ProtocolMessage> {
        if self.phase != BobPhase::AwaitingMargins {
            return Err(out_of_order(&format!("{:?}", self.phase), msg));
        }
        expect_stage(msg, self.session_id, Stage::BlindedMargins)?;
        let t = Instant::now();
        let p = msg.enc_payload(&self.keys.public)?;
        let n = p.values.len();
        if n == 0 || n > self.params.block_size as usize {
            return Err(Error::Dimension(format!(
                "block of {n} documents, allowed 1..={}",
                self.params.block_size
            )));
        }
        expect_shape(&p, self.params.scales.weight, n, "blinded margins")?;
        let limit = self.params.margin_bound + self.params.blind_bound;
        let ss = self.params.scales.share;
        let c_ws = self.codec.c_pow(p.scale);
        let c_ss = self.codec.c_pow(ss);
        let mut values = Vec::with_capacity(n);
        for c in &p.values {
            let m = self.keys.decrypt(c)?;
            let v = ratio_to_f64(&self.codec.lift(&m), &c_ws);
            if !(v.abs() <= limit) {
                return Err(Error::Overflow(format!("blinded margin {v:.3} outside +-{limit}")));
            }
            let e = floor_scaled(v.exp(), &c_ss)?;
            values.push(self.codec.encrypt_int(&e, ss, &mut self.rng)?.cipher);
        }
        let bound = scaled_bound(&self.codec, limit.exp(), ss);
        let out = ProtocolMessage::encrypted(
            self.session_id,
            MessageType::EncScalars,
            &EncPayload {
                stage: Stage::Exponentials,
                scale: ss,
                bound,
                values,
            },
        );
        let n64 = n as u64;
        self.counters.decryptions += n64;
        self.counters.encryptions += n64;
        self.counters.reencryptions += n64;
        self.counters.sent_by_bob += n64;
        self.timings.add(StepGroup::S4to5, t.elapsed());
        self.pending = n;
        self.phase = BobPhase::AwaitingLogits;
        Ok(out)
    }

    /// Step 8.
    pub fn reciprocal(&mut self, msg: &ProtocolMessage) -> Result<ProtocolMessage> {
        if self.phase != BobPhase::AwaitingLogits {
            return Err(out_of_order(&format!("{:?}", self.phase), msg));
        }
        expect_stage(msg, self.session_id, Stage::ScaledLogits)?;
        let t = Instant::now();
        let p = msg.enc_payload(&self.keys.public)?;
        expect_shape(&p, self.params.scales.logit(), self.pending, "scaled logits")?;
        let rs = self.params.scales.reciprocal;
        let c_in = self.codec.c_pow(p.scale);
        let c_rs = self.codec.c_pow(rs);
        let mut values = Vec::with_capacity(self.pending);
        for c in &p.values {
            let m = self.keys.decrypt(c)?;
            let z = ratio_to_f64(&self.codec.lift(&m), &c_in);
            // z = q (1 + e^margin) >= 1 for an honest peer.
            if !(z >= 1.0 && z.is_finite()) {
                return Err(Error::Protocol(format!("scaled logit {z} is below 1")));
            }
            let inv = floor_scaled(1.0 / z, &c_rs)?;
            values.push(self.codec.encrypt_int(&inv, rs, &mut self.rng)?.cipher);
        }
        let out = ProtocolMessage::encrypted(
            self.session_id,
            MessageType::EncScalars,
            &EncPayload {
                stage: Stage::Reciprocals,
                scale: rs,
                bound: c_rs,
                values,
            },
        );
        let n64 = self.pending as u64;
        self.counters.decryptions += n64;
        self.counters.encryptions += n64;
        self.counters.reencryptions += n64;
        self.counters.sent_by_bob += n64;
        self.timings.add(StepGroup::S8, t.elapsed());
        self.phase = BobPhase::AwaitingUpdate;
        Ok(out)
    }

    /// Step 12. Returns the max-norm of the weight change.
    pub fn finish_round(&mut self, msg: &ProtocolMessage) -> Result<f64> {
        if self.phase != BobPhase::AwaitingUpdate {
            return Err(out_of_order(&format!("{:?}", self.phase), msg));
        }
        expect_stage(msg, self.session_id, Stage::Update)?;
        let t = Instant::now();
        let p = msg.enc_payload(&self.keys.public)?;
        expect_shape(&p, self.params.scales.update(), self.model.dim(), "updated weights")?;
        let next = self.decrypt_vector(&p)?;
        let change = next
            .iter()
            .zip(&self.model.w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        self.model.w = next;
        self.counters.decryptions += p.values.len() as u64;
        self.timings.add(StepGroup::S12, t.elapsed());
        self.pending = 0;
        self.rounds += 1;
        self.phase = BobPhase::Start;
        Ok(change)
    }

    fn decrypt_vector(&self, p: &EncPayload) -> Result<Vec<f64>> {
        let c = self.codec.c_pow(p.scale);
        p.values
            .iter()
            .map(|v| {
                let m = self.keys.decrypt(v)?;
                let x = ratio_to_f64(&self.codec.lift(&m), &c);
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(Error::Divergence("non-finite decrypted weight".into()))
                }
            })
            .collect()
    }

    /// A trainer for one party of a multi-party round: same keys and model,
    /// fresh session id, randomness and counters.
    pub fn fork(&mut self) -> BobTrainer {
        let mut rng = ChaCha20Rng::from_rng(&mut self.rng);
        let session_id = rng.next_u64();
        BobTrainer {
            keys: self.keys.clone(),
            codec: self.codec.clone(),
            params: self.params.clone(),
            model: self.model.clone(),
            phase: BobPhase::Start,
            session_id,
            rng,
            counters: OpCounters::default(),
            timings: StepTimings::default(),
            pending: 0,
            rounds: self.rounds,
        }
    }

    /// Folds a fork's counters and timings into this trainer's.
    pub fn absorb(&mut self, fork: &BobTrainer) {
        self.counters += fork.counters;
        self.timings += fork.timings;
    }

    /// Sums the parties' encrypted gradients, decrypts the sum once and
    /// applies the plaintext update. Returns the max-norm of the change.
    pub fn aggregate_multi_party(&mut self, gradients: &[(u64, ProtocolMessage)]) -> Result<f64> {
        if self.phase != BobPhase::Start {
            return Err(Error::OutOfOrder {
                expected: format!("{:?}", self.phase),
                got: "aggregate".into(),
            });
        }
        if gradients.is_empty() {
            return Err(Error::InvalidArgument("no gradients to aggregate".into()));
        }
        let t = Instant::now();
        let d = self.model.dim();
        let rs = self.params.scales.reciprocal;
        let mut sum: Vec<ScaledCiphertext> = vec![self.codec.zero(rs); d];
        for (session_id, msg) in gradients {
            expect_stage(msg, *session_id, Stage::Gradient)?;
            let p = msg.enc_payload(&self.keys.public)?;
            expect_shape(&p, rs, d, "gradient")?;
            for (acc, c) in sum.iter_mut().zip(p.values) {
                let c = self.codec.adopt(c, rs, p.bound.clone())?;
                *acc = self.codec.scaled_add(acc, &c)?;
            }
        }
        let payload = EncPayload {
            stage: Stage::Gradient,
            scale: rs,
            bound: max_bound(&sum),
            values: sum.into_iter().map(|c| c.cipher).collect(),
        };
        let grad = self.decrypt_vector(&payload)?;
        let mut model = self.model.clone();
        let change = model.step(&grad)?;
        self.model = model;
        self.counters.decryptions += d as u64;
        self.timings.add(StepGroup::S12, t.elapsed());
        self.rounds += 1;
        Ok(change)
    }
}

#[derive(Clone)]
struct Blind {
    /// `floor(C^ws r)`, the additive blind actually subtracted.
    #[cfg_attr(not(test), allow(dead_code))]
    r_int: BigInt,
    /// `r_int / C^ws`.
    r: f64,
    q: u64,
}

/// The data owner's side of the protocol.
pub struct AliceTrainer {
    pk: PublicKey,
    codec: CodecParams,
    params: SessionParams,
    block: LabeledDataset,
    sampler: BlindingSampler,
    session_id: u64,
    phase: AlicePhase,
    blinds: Vec<Blind>,
    weights: Vec<ScaledCiphertext>,
    counters: OpCounters,
    timings: StepTimings,
}

impl AliceTrainer {
    pub fn new(
        pk: PublicKey,
        params: SessionParams,
        block: LabeledDataset,
        session_id: u64,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        if pk.bits() != params.key_bits {
            return Err(Error::Handshake(format!(
                "key has {} bits, parameters say {}",
                pk.bits(),
                params.key_bits
            )));
        }
        if block.is_empty() {
            return Err(Error::InvalidArgument("empty block".into()));
        }
        if block.len() > params.block_size as usize {
            return Err(Error::InvalidArgument(format!(
                "block of {} documents exceeds K = {}",
                block.len(),
                params.block_size
            )));
        }
        if block.dim() != params.dim {
            return Err(Error::Dimension(format!(
                "block has dimension {}, session expects {}",
                block.dim(),
                params.dim
            )));
        }
        let codec = CodecParams::new(params.scale, &pk)?;
        let sampler = BlindingSampler::new(derive_rng(seed, "alice"), params.blind_bound, params.q_domain)?;
        Ok(AliceTrainer {
            pk,
            codec,
            params,
            block,
            sampler,
            session_id,
            phase: AlicePhase::AwaitingWeights,
            blinds: Vec::new(),
            weights: Vec::new(),
            counters: OpCounters::default(),
            timings: StepTimings::default(),
        })
    }

    pub fn phase(&self) -> AlicePhase {
        self.phase
    }

    pub fn counters(&self) -> &OpCounters {
        &self.counters
    }

    pub fn timings(&self) -> &StepTimings {
        &self.timings
    }

    pub fn block(&self) -> &LabeledDataset {
        &self.block
    }

    /// Replaces the block for the next round.
    pub fn set_block(&mut self, block: LabeledDataset) -> Result<()> {
        if self.phase != AlicePhase::AwaitingWeights {
            return Err(Error::Protocol("cannot swap the block mid-round".into()));
        }
        if block.is_empty() || block.len() > self.params.block_size as usize || block.dim() != self.params.dim {
            return Err(Error::InvalidArgument("block does not fit the session".into()));
        }
        self.block = block;
        Ok(())
    }

    /// Forgets the blinds and cached weights of a half-finished round.
    pub fn reset(&mut self) {
        self.blinds.clear();
        self.weights.clear();
        self.phase = AlicePhase::AwaitingWeights;
    }

    /// Steps 2 and 3.
    pub fn blind_margins(&mut self, msg: &ProtocolMessage) -> Result<ProtocolMessage> {
        if self.phase != AlicePhase::AwaitingWeights {
            return Err(out_of_order(&format!("{:?}", self.phase), msg));
        }
        expect_stage(msg, self.session_id, Stage::Weights)?;
        let t = Instant::now();
        let p = msg.enc_payload(&self.pk)?;
        let ws = self.params.scales.weight;
        expect_shape(&p, ws, self.params.dim as usize, "weights")?;
        let weights = p
            .values
            .into_iter()
            .map(|c| self.codec.adopt(c, ws, p.bound.clone()))
            .collect::<Result<Vec<_>>>()?;
        let c_ws = self.codec.c_pow(ws);
        let mut blinds = Vec::with_capacity(self.block.len());
        let mut values = Vec::with_capacity(self.block.len());
        let mut bound = BigUint::zero();
        for (x, y) in self.block.iter() {
            let mut acc = self.codec.zero(ws);
            for &j in x.indices() {
                acc = self.codec.scaled_add(&acc, &weights[j as usize])?;
            }
            if *y == Label::Negative {
                acc = self.codec.mul_int(&acc, &BigInt::from(-1))?;
            }
            let r = self.sampler.draw_r();
            let q = self.sampler.draw_q();
            let r_int = floor_scaled(r, &c_ws)?;
            let minus_r = self.codec.encrypt_int(&-&r_int, ws, self.sampler.rng())?;
            let blinded = self.codec.scaled_add(&acc, &minus_r)?;
            bound = bound.max(blinded.bound.clone());
            values.push(blinded.cipher);
            blinds.push(Blind {
                r: ratio_to_f64(&r_int, &c_ws),
                r_int,
                q,
            });
        }
        let out = ProtocolMessage::encrypted(
            self.session_id,
            MessageType::EncScalars,
            &EncPayload {
                stage: Stage::BlindedMargins,
                scale: ws,
                bound,
                values,
            },
        );
        let n = self.block.len() as u64;
        self.counters.encryptions += n;
        self.counters.sent_by_data_owner += n;
        self.timings.add(StepGroup::S2to3, t.elapsed());
        self.blinds = blinds;
        self.weights = weights;
        self.phase = AlicePhase::AwaitingExponentials;
        Ok(out)
    }

    /// Steps 6 and 7.
    pub fn unblind_and_scale(&mut self, msg: &ProtocolMessage) -> Result<ProtocolMessage> {
        if self.phase != AlicePhase::AwaitingExponentials {
            return Err(out_of_order(&format!("{:?}", self.phase), msg));
        }
        expect_stage(msg, self.session_id, Stage::Exponentials)?;
        let t = Instant::now();
        let p = msg.enc_payload(&self.pk)?;
        let ss = self.params.scales.share;
        expect_shape(&p, ss, self.blinds.len(), "exponentials")?;
        let c_ss = self.codec.c_pow(ss);
        let one = self
            .codec
            .trivial_int(&BigInt::from(self.codec.c_pow(2 * ss)), 2 * ss)?;
        let mut out_values = Vec::with_capacity(self.blinds.len());
        let mut bound = BigUint::zero();
        for (c, b) in p.values.into_iter().zip(&self.blinds) {
            let c = self.codec.adopt(c, ss, p.bound.clone())?;
            let unblind = floor_scaled(b.r.exp(), &c_ss)?;
            let e = self.codec.mul_scaled_int(&c, &unblind, ss)?;
            let shifted = self.codec.scaled_add(&e, &one)?;
            let scaled = self.codec.mul_int(&shifted, &BigInt::from(b.q))?;
            bound = bound.max(scaled.bound.clone());
            // Built only from Bob's ciphertexts, so its randomness is his
            // u^(N e^r q); refresh it or he can solve for r and q.
            out_values.push(self.pk.rerandomize(&scaled.cipher, self.sampler.rng())?);
        }
        self.counters.rerandomizations += self.blinds.len() as u64;
        let out = ProtocolMessage::encrypted(
            self.session_id,
            MessageType::EncScalars,
            &EncPayload {
                stage: Stage::ScaledLogits,
                scale: 2 * ss,
                bound,
                values: out_values,
            },
        );
        self.counters.sent_by_data_owner += self.blinds.len() as u64;
        self.timings.add(StepGroup::S6to7, t.elapsed());
        self.phase = AlicePhase::AwaitingReciprocals;
        Ok(out)
    }

    /// Steps 9 and 10: the encrypted gradient at the reciprocal scale.
    fn gradient(&mut self, msg: &ProtocolMessage) -> Result<Vec<ScaledCiphertext>> {
        if self.phase != AlicePhase::AwaitingReciprocals {
            return Err(out_of_order(&format!("{:?}", self.phase), msg));
        }
        expect_stage(msg, self.session_id, Stage::Reciprocals)?;
        let t = Instant::now();
        let p = msg.enc_payload(&self.pk)?;
        let rs = self.params.scales.reciprocal;
        expect_shape(&p, rs, self.blinds.len(), "reciprocals")?;
        let c_rs = self.codec.c_pow(rs);
        let mut grad = vec![self.codec.zero(rs); self.params.dim as usize];
        for ((c, b), (x, y)) in p.values.into_iter().zip(&self.blinds).zip(self.block.iter()) {
            let c = self.codec.adopt(c, rs, p.bound.clone())?;
            let mut s = self.codec.mul_int(&c, &BigInt::from(b.q))?;
            // floor(C^rs / z) q <= C^rs / (1 + e^margin) < C^rs.
            s.bound = c_rs.clone();
            if *y == Label::Negative {
                s = self.codec.mul_int(&s, &BigInt::from(-1))?;
            }
            for &j in x.indices() {
                let g = &mut grad[j as usize];
                *g = self.codec.scaled_add(g, &s)?;
            }
        }
        self.timings.add(StepGroup::S9to10, t.elapsed());
        Ok(grad)
    }

    fn end_round(&mut self) {
        self.blinds.clear();
        self.weights.clear();
        self.phase = AlicePhase::AwaitingWeights;
    }

    /// Steps 9 to 11.
    pub fn finish_gradient(&mut self, msg: &ProtocolMessage) -> Result<ProtocolMessage> {
        let grad = self.gradient(msg)?;
        let t = Instant::now();
        let s = self.params.scales;
        let c = self.codec.c();
        let eta = floor_scaled(self.params.eta, &BigUint::from(c))?;
        let decay = floor_scaled(1.0 + 2.0 * self.params.reg_lambda, &BigUint::from(c))?
            * BigInt::from(self.codec.c_pow(s.reciprocal - s.weight));
        let mut values = Vec::with_capacity(grad.len());
        let mut bound = BigUint::zero();
        for (w, g) in self.weights.iter().zip(&grad) {
            let w = self.codec.mul_scaled_int(w, &decay, s.reciprocal + 1 - s.weight)?;
            let g = self.codec.mul_scaled_int(g, &eta, 1)?;
            let next = self.codec.scaled_add(&w, &g)?;
            bound = bound.max(next.bound.clone());
            values.push(self.pk.rerandomize(&next.cipher, self.sampler.rng())?);
        }
        self.counters.rerandomizations += values.len() as u64;
        let out = ProtocolMessage::encrypted(
            self.session_id,
            MessageType::EncVector,
            &EncPayload {
                stage: Stage::Update,
                scale: s.update(),
                bound,
                values,
            },
        );
        self.counters.sent_by_data_owner += grad.len() as u64;
        self.timings.add(StepGroup::S11, t.elapsed());
        self.end_round();
        Ok(out)
    }

    /// Steps 9 and 10 only, for the multi-party variant: sends `E[grad]`.
    pub fn finish_gradient_only(&mut self, msg: &ProtocolMessage) -> Result<ProtocolMessage> {
        let grad = self.gradient(msg)?;
        let values = grad
            .iter()
            .map(|c| self.pk.rerandomize(&c.cipher, self.sampler.rng()))
            .collect::<Result<Vec<_>>>()?;
        let out = ProtocolMessage::encrypted(
            self.session_id,
            MessageType::EncVector,
            &EncPayload {
                stage: Stage::Gradient,
                scale: self.params.scales.reciprocal,
                bound: max_bound(&grad),
                values,
            },
        );
        self.counters.rerandomizations += self.params.dim as u64;
        self.counters.sent_by_data_owner += self.params.dim as u64;
        self.end_round();
        Ok(out)
    }
}

/// Runs one in-memory round between the two state machines.
pub fn run_round(bob: &mut BobTrainer, alice: &mut AliceTrainer) -> Result<f64> {
    let m1 = bob.start_round()?;
    let m3 = alice.blind_margins(&m1)?;
    let m5 = bob.exponentiate_share(&m3)?;
    let m7 = alice.unblind_and_scale(&m5)?;
    let m8 = bob.reciprocal(&m7)?;
    let m11 = alice.finish_gradient(&m8)?;
    bob.finish_round(&m11)
}
