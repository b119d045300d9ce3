//! Private classification: Carol learns the sign of `w.x'` without seeing
//! `w`, Bob learns the same bit without seeing `x'`.
//!
//! Bob sends `E[w]` (encrypted once and cached). Carol forms
//! `E[w.x' - r]` for a random `r` in `[A, 2^l - A)`, where `A` covers the
//! largest admissible margin. Bob decrypts the blinded value, negates it
//! into the share `s = r - w.x'`, and the two run the bitwise comparison on
//! `(r, s)`: `r > s` exactly when `w.x' > 0`.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::Zero;
use rand_chacha::ChaCha20Rng;

use super::compare::{decide, encrypt_bits, mask_comparison};
use super::message::{EncPayload, MessageType, ProtocolMessage, Stage};
use super::params::SessionParams;
use super::stats::OpCounters;
use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::features::SparseBinaryVector;
use crate::fixedpoint::{floor_scaled, CodecParams, ScaledCiphertext};
use crate::logistic::Model;
use crate::paillier::{KeyPair, PublicKey};
use crate::rng::{derive_rng, random_range};

fn expect(msg: &ProtocolMessage, session_id: u64, stage: Stage) -> Result<()> {
    msg.check_abort()?;
    if msg.session_id != session_id {
        return Err(Error::Protocol("message for another session".into()));
    }
    let got = msg.stage()?;
    if got != stage {
        return Err(Error::OutOfOrder {
            expected: stage.to_string(),
            got: got.to_string(),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalPhase {
    Opened,
    AwaitingMasked,
    Done,
}

/// Bob's per-session state.
#[derive(Debug)]
pub struct BobEvalSession {
    session_id: u64,
    phase: EvalPhase,
}

impl BobEvalSession {
    pub fn session_id(&self) -> u64 {
        self.session_id
    }

    pub fn phase(&self) -> EvalPhase {
        self.phase
    }
}

/// The model owner's evaluation endpoint. Serves any number of sessions.
pub struct BobEvaluator {
    keys: KeyPair,
    codec: CodecParams,
    params: SessionParams,
    model: Model,
    cached: Option<(BigUint, Vec<ScaledCiphertext>)>,
    rng: ChaCha20Rng,
    counters: OpCounters,
}

impl BobEvaluator {
    pub fn new(keys: KeyPair, model: Model, params: SessionParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if model.dim() != params.dim as usize {
            return Err(Error::Dimension(format!(
                "model has {} weights, session expects {}",
                model.dim(),
                params.dim
            )));
        }
        let codec = CodecParams::new(params.scale, &keys.public)?;
        Ok(BobEvaluator {
            keys,
            codec,
            params,
            model,
            cached: None,
            rng: derive_rng(seed, "bob-eval"),
            counters: OpCounters::default(),
        })
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.keys.public
    }

    pub fn counters(&self) -> &OpCounters {
        &self.counters
    }

    pub fn params(&self) -> &SessionParams {
        &self.params
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn next_session_id(&mut self) -> u64 {
        rand::RngCore::next_u64(&mut self.rng)
    }

    /// Encrypts `w` at the evaluation scale on first use; later sessions reuse it.
    fn encrypted_weights(&mut self) -> Result<(BigUint, Vec<ScaledCiphertext>)> {
        if self.cached.is_none() {
            let w_max = self.params.weight_bound;
            if let Some(w) = self.model.w.iter().find(|w| !(w.abs() <= w_max)) {
                return Err(Error::Overflow(format!("weight {w} exceeds the bound {w_max}")));
            }
            let es = self.params.eval_scale();
            let bound = floor_scaled(w_max, &self.codec.c_pow(es))?.magnitude() + 1u32;
            let values = self
                .model
                .w
                .iter()
                .map(|&w| self.codec.encrypt(w, es, &mut self.rng))
                .collect::<Result<Vec<_>>>()?;
            self.counters.encryptions += values.len() as u64;
            self.cached = Some((bound, values));
        }
        Ok(self.cached.clone().expect("filled above"))
    }

    /// Opens a session and returns the encrypted-weights message.
    pub fn open(&mut self, session_id: u64) -> Result<(BobEvalSession, ProtocolMessage)> {
        let (bound, values) = self.encrypted_weights()?;
        self.counters.sent_by_bob += values.len() as u64;
        let msg = ProtocolMessage::encrypted(
            session_id,
            MessageType::EncVector,
            &EncPayload {
                stage: Stage::EvalWeights,
                scale: self.params.eval_scale(),
                bound,
                values: values.into_iter().map(|c| c.cipher).collect(),
            },
        );
        Ok((
            BobEvalSession {
                session_id,
                phase: EvalPhase::Opened,
            },
            msg,
        ))
    }

    /// Decrypts `w.x' - r`, forms `s = r - w.x'` and sends `E[s_j]`.
    pub fn receive_share(&mut self, sess: &mut BobEvalSession, msg: &ProtocolMessage) -> Result<ProtocolMessage> {
        if sess.phase != EvalPhase::Opened {
            return Err(Error::OutOfOrder {
                expected: format!("{:?}", sess.phase),
                got: "share".into(),
            });
        }
        expect(msg, sess.session_id, Stage::EvalShare)?;
        let p = msg.enc_payload(&self.keys.public)?;
        if p.values.len() != 1 || p.scale != self.params.eval_scale() {
            return Err(Error::Protocol("share must be one value at the evaluation scale".into()));
        }
        let bits = self.params.compare_bits();
        let t = self.codec.lift(&self.keys.decrypt(&p.values[0])?);
        let s = -t;
        if s.sign() == Sign::Minus || s.bits() > bits as u64 {
            return Err(Error::Overflow("evaluation margin exceeds its bound".into()));
        }
        let s = s.to_biguint().expect("nonnegative");
        let enc = encrypt_bits(&self.keys.public, &s, bits, &mut self.rng)?;
        self.counters.decryptions += 1;
        self.counters.encryptions += enc.len() as u64;
        self.counters.sent_by_bob += enc.len() as u64;
        sess.phase = EvalPhase::AwaitingMasked;
        Ok(ProtocolMessage::encrypted(
            sess.session_id,
            MessageType::CompareBits,
            &EncPayload {
                stage: Stage::CompareInput,
                scale: 0,
                bound: BigUint::from(1u32),
                values: enc,
            },
        ))
    }

    /// Learns the label and returns it together with the message telling Carol.
    pub fn decide(&mut self, sess: &mut BobEvalSession, msg: &ProtocolMessage) -> Result<(Label, ProtocolMessage)> {
        if sess.phase != EvalPhase::AwaitingMasked {
            return Err(Error::OutOfOrder {
                expected: format!("{:?}", sess.phase),
                got: "masked comparison".into(),
            });
        }
        expect(msg, sess.session_id, Stage::CompareMasked)?;
        let p = msg.enc_payload(&self.keys.public)?;
        if p.values.len() != self.params.compare_bits() as usize {
            return Err(Error::Protocol("wrong number of masked values".into()));
        }
        let positive = decide(&self.keys, &p.values)?;
        self.counters.decryptions += p.values.len() as u64;
        sess.phase = EvalPhase::Done;
        let label = if positive { Label::Positive } else { Label::Negative };
        Ok((
            label,
            ProtocolMessage::control(sess.session_id, Stage::CompareResult, &[positive as u8]),
        ))
    }
}

/// The document owner's side of one evaluation.
pub struct CarolEvaluator {
    pk: PublicKey,
    codec: CodecParams,
    params: SessionParams,
    x: SparseBinaryVector,
    session_id: u64,
    r: Option<BigUint>,
    phase: EvalPhase,
    rng: ChaCha20Rng,
    counters: OpCounters,
}

impl CarolEvaluator {
    pub fn new(pk: PublicKey, params: SessionParams, x: SparseBinaryVector, session_id: u64, seed: u64) -> Result<Self> {
        params.validate()?;
        if x.dim() != params.dim {
            return Err(Error::Dimension(format!(
                "document has dimension {}, session expects {}",
                x.dim(),
                params.dim
            )));
        }
        let codec = CodecParams::new(params.scale, &pk)?;
        let rng = derive_rng(seed, &format!("carol-{session_id:016x}"));
        Ok(CarolEvaluator {
            pk,
            codec,
            params,
            x,
            session_id,
            r: None,
            phase: EvalPhase::Opened,
            rng,
            counters: OpCounters::default(),
        })
    }

    pub fn counters(&self) -> &OpCounters {
        &self.counters
    }

    /// `E[w.x' - r]`.
    pub fn inner_product(&mut self, msg: &ProtocolMessage) -> Result<ProtocolMessage> {
        if self.phase != EvalPhase::Opened || self.r.is_some() {
            return Err(Error::OutOfOrder {
                expected: "compare input".into(),
                got: "weights".into(),
            });
        }
        expect(msg, self.session_id, Stage::EvalWeights)?;
        let p = msg.enc_payload(&self.pk)?;
        let es = self.params.eval_scale();
        if p.scale != es || p.values.len() != self.params.dim as usize {
            return Err(Error::Protocol("weights must be d values at the evaluation scale".into()));
        }
        let mut acc = self.codec.zero(es);
        for &j in self.x.indices() {
            let w = self.codec.adopt(p.values[j as usize].clone(), es, p.bound.clone())?;
            acc = self.codec.scaled_add(&acc, &w)?;
        }
        let a = BigUint::from(self.params.eval_offset());
        let top = BigUint::from(1u32) << self.params.compare_bits();
        let r = random_range(&mut self.rng, &a, &(&top - &a));
        let minus_r = self
            .codec
            .encrypt_int(&BigInt::from_biguint(Sign::Minus, r.clone()), es, &mut self.rng)?;
        let share = self.codec.scaled_add(&acc, &minus_r)?;
        self.counters.encryptions += 1;
        self.counters.sent_by_data_owner += 1;
        self.r = Some(r);
        Ok(ProtocolMessage::encrypted(
            self.session_id,
            MessageType::EncScalars,
            &EncPayload {
                stage: Stage::EvalShare,
                scale: es,
                bound: share.bound,
                values: vec![share.cipher],
            },
        ))
    }

    pub fn mask(&mut self, msg: &ProtocolMessage) -> Result<ProtocolMessage> {
        let r = match (&self.r, self.phase) {
            (Some(r), EvalPhase::Opened) => r.clone(),
            _ => {
                return Err(Error::OutOfOrder {
                    expected: format!("{:?}", self.phase),
                    got: "compare input".into(),
                })
            }
        };
        expect(msg, self.session_id, Stage::CompareInput)?;
        let p = msg.enc_payload(&self.pk)?;
        if p.values.len() != self.params.compare_bits() as usize {
            return Err(Error::Protocol("wrong comparison width".into()));
        }
        let masked = mask_comparison(&self.pk, &p.values, &r, &mut self.rng)?;
        self.counters.encryptions += masked.len() as u64;
        self.counters.sent_by_data_owner += masked.len() as u64;
        self.phase = EvalPhase::AwaitingMasked;
        Ok(ProtocolMessage::encrypted(
            self.session_id,
            MessageType::CompareBits,
            &EncPayload {
                stage: Stage::CompareMasked,
                scale: 0,
                bound: BigUint::zero(),
                values: masked,
            },
        ))
    }

    pub fn learn(&mut self, msg: &ProtocolMessage) -> Result<Label> {
        if self.phase != EvalPhase::AwaitingMasked {
            return Err(Error::OutOfOrder {
                expected: format!("{:?}", self.phase),
                got: "result".into(),
            });
        }
        expect(msg, self.session_id, Stage::CompareResult)?;
        let bit = msg
            .fields
            .get(1)
            .and_then(|f| f.first())
            .ok_or_else(|| Error::Frame("result carries no bit".into()))?;
        self.phase = EvalPhase::Done;
        self.r = None;
        Ok(if *bit == 1 { Label::Positive } else { Label::Negative })
    }
}

/// One in-memory evaluation. Returns Carol's label; Bob learns the same.
pub fn classify_private(bob: &mut BobEvaluator, x: &SparseBinaryVector, session_id: u64, seed: u64) -> Result<Label> {
    let params = bob.params.clone();
    let mut carol = CarolEvaluator::new(bob.public_key().clone(), params, x.clone(), session_id, seed)?;
    let (mut sess, m1) = bob.open(session_id)?;
    let m2 = carol.inner_product(&m1)?;
    let m3 = bob.receive_share(&mut sess, &m2)?;
    let m4 = carol.mask(&m3)?;
    let (bob_label, m5) = bob.decide(&mut sess, &m4)?;
    let label = carol.learn(&m5)?;
    debug_assert_eq!(bob_label, label);
    bob.counters += carol.counters;
    Ok(label)
}
