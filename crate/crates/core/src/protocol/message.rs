//! Length-framed protocol messages.
//!
//! A frame is a 4-byte big-endian length followed by the body:
//! version (1 byte), session id (8 bytes), type tag (1 byte), field count
//! (4 bytes) and then each field as a 4-byte length plus its bytes.

use std::fmt;
use std::io::{Read, Write};

use num_bigint::BigUint;

use super::params::PROTOCOL_VERSION;
use crate::error::{Error, Result};
use crate::paillier::{Ciphertext, PublicKey};
use crate::wire::{put_biguint, Reader};

/// Largest frame body accepted unless a session negotiates otherwise.
pub const DEFAULT_MAX_FRAME: usize = 1 << 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MessageType {
    Handshake = 1,
    EncVector = 2,
    EncScalars = 3,
    PlainScalars = 4,
    CompareBits = 5,
    Control = 6,
    Abort = 7,
}

impl MessageType {
    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            1 => MessageType::Handshake,
            2 => MessageType::EncVector,
            3 => MessageType::EncScalars,
            4 => MessageType::PlainScalars,
            5 => MessageType::CompareBits,
            6 => MessageType::Control,
            7 => MessageType::Abort,
            other => return Err(Error::Frame(format!("unknown type tag {other}"))),
        })
    }
}

/// Which protocol step a payload belongs to. Carried as the first byte of
/// the first field of every non-handshake message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Bob's encrypted weights.
    Weights = 1,
    /// Alice's blinded margins.
    BlindedMargins = 3,
    /// Bob's encrypted exponentials.
    Exponentials = 5,
    /// Alice's unblinded, rescaled logits.
    ScaledLogits = 7,
    /// Bob's encrypted reciprocals.
    Reciprocals = 8,
    /// Alice's encrypted gradient (multi-party variant).
    Gradient = 10,
    /// Alice's encrypted updated weights.
    Update = 11,
    EvalWeights = 20,
    EvalShare = 21,
    CompareInput = 22,
    CompareMasked = 23,
    CompareResult = 24,
    Done = 30,
}

impl Stage {
    pub fn from_tag(tag: u8) -> Result<Self> {
        use Stage::*;
        Ok(match tag {
            1 => Weights,
            3 => BlindedMargins,
            5 => Exponentials,
            7 => ScaledLogits,
            8 => Reciprocals,
            10 => Gradient,
            11 => Update,
            20 => EvalWeights,
            21 => EvalShare,
            22 => CompareInput,
            23 => CompareMasked,
            24 => CompareResult,
            30 => Done,
            other => return Err(Error::Frame(format!("unknown stage {other}"))),
        })
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolMessage {
    pub version: u8,
    pub session_id: u64,
    pub kind: MessageType,
    pub fields: Vec<Vec<u8>>,
}

/// Ciphertexts sharing one scale and one public magnitude bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncPayload {
    pub stage: Stage,
    pub scale: u32,
    pub bound: BigUint,
    pub values: Vec<Ciphertext>,
}

impl ProtocolMessage {
    pub fn new(session_id: u64, kind: MessageType, fields: Vec<Vec<u8>>) -> Self {
        ProtocolMessage {
            version: PROTOCOL_VERSION,
            session_id,
            kind,
            fields,
        }
    }

    pub fn abort(session_id: u64, reason: &str) -> Self {
        Self::new(session_id, MessageType::Abort, vec![reason.as_bytes().to_vec()])
    }

    pub fn control(session_id: u64, stage: Stage, payload: &[u8]) -> Self {
        Self::new(session_id, MessageType::Control, vec![vec![stage as u8], payload.to_vec()])
    }

    /// Body bytes without the outer length prefix.
    pub fn body(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + self.fields.iter().map(|f| f.len() + 4).sum::<usize>());
        out.push(self.version);
        out.extend_from_slice(&self.session_id.to_be_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&(self.fields.len() as u32).to_be_bytes());
        for f in &self.fields {
            out.extend_from_slice(&(f.len() as u32).to_be_bytes());
            out.extend_from_slice(f);
        }
        out
    }

    pub fn to_frame(&self) -> Vec<u8> {
        let body = self.body();
        let mut out = Vec::with_capacity(body.len() + 4);
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
        out
    }

    pub fn from_body(body: &[u8]) -> Result<Self> {
        let mut r = Reader::new(body);
        let version = r.u8()?;
        if version != PROTOCOL_VERSION {
            return Err(Error::Frame(format!("unsupported version {version}")));
        }
        let session_id = u64::from_be_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let kind = MessageType::from_tag(r.u8()?)?;
        let count = r.u32()? as usize;
        let mut fields = Vec::with_capacity(count.min(r.remaining() / 4));
        for _ in 0..count {
            let len = r.u32()? as usize;
            fields.push(r.take(len)?.to_vec());
        }
        if !r.is_empty() {
            return Err(Error::Frame(format!("{} trailing bytes", r.remaining())));
        }
        Ok(ProtocolMessage {
            version,
            session_id,
            kind,
            fields,
        })
    }

    pub fn from_frame(frame: &[u8]) -> Result<Self> {
        let mut r = Reader::new(frame);
        let len = r.u32()? as usize;
        let body = r.take(len)?;
        if !r.is_empty() {
            return Err(Error::Frame("bytes after frame body".into()));
        }
        Self::from_body(body)
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(&self.to_frame())?;
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R, max_frame: usize) -> Result<Self> {
        let mut len = [0u8; 4];
        input.read_exact(&mut len)?;
        let len = u32::from_be_bytes(len) as usize;
        if len > max_frame {
            return Err(Error::Frame(format!("frame of {len} bytes exceeds limit {max_frame}")));
        }
        let mut body = vec![0u8; len];
        input.read_exact(&mut body)?;
        Self::from_body(&body)
    }

    /// Stage tag of a payload-bearing message.
    pub fn stage(&self) -> Result<Stage> {
        let first = self
            .fields
            .first()
            .and_then(|f| f.first())
            .ok_or_else(|| Error::Frame("message carries no stage".into()))?;
        Stage::from_tag(*first)
    }

    /// Fails with the peer's reason if this is an abort.
    pub fn check_abort(&self) -> Result<()> {
        if self.kind == MessageType::Abort {
            let reason = self.fields.first().map(|f| String::from_utf8_lossy(f).into_owned());
            return Err(Error::Aborted(reason.unwrap_or_default()));
        }
        Ok(())
    }

    /// Number of ciphertexts or scalars carried, as counted for traffic.
    pub fn element_count(&self) -> usize {
        match self.kind {
            MessageType::EncVector | MessageType::EncScalars | MessageType::CompareBits => {
                self.fields.len().saturating_sub(1)
            }
            _ => 0,
        }
    }

    pub fn encrypted(session_id: u64, kind: MessageType, payload: &EncPayload) -> Self {
        let mut head = vec![payload.stage as u8];
        head.extend_from_slice(&payload.scale.to_be_bytes());
        put_biguint(&mut head, &payload.bound);
        let mut fields = Vec::with_capacity(payload.values.len() + 1);
        fields.push(head);
        for c in &payload.values {
            let mut f = Vec::new();
            put_biguint(&mut f, c.value());
            fields.push(f);
        }
        Self::new(session_id, kind, fields)
    }

    /// Parses an encrypted payload, validating every ciphertext under `pk`.
    pub fn enc_payload(&self, pk: &PublicKey) -> Result<EncPayload> {
        self.check_abort()?;
        if !matches!(
            self.kind,
            MessageType::EncVector | MessageType::EncScalars | MessageType::CompareBits
        ) {
            return Err(Error::Frame(format!("{:?} carries no ciphertexts", self.kind)));
        }
        let head = self.fields.first().ok_or_else(|| Error::Frame("empty message".into()))?;
        let mut r = Reader::new(head);
        let stage = Stage::from_tag(r.u8()?)?;
        let scale = r.u32()?;
        let bound = r.biguint()?;
        let values = self.fields[1..]
            .iter()
            .map(|f| {
                let mut r = Reader::new(f);
                let v = r.biguint()?;
                if !r.is_empty() {
                    return Err(Error::Frame("trailing bytes in ciphertext".into()));
                }
                Ciphertext::from_raw(pk, v)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EncPayload {
            stage,
            scale,
            bound,
            values,
        })
    }
}
