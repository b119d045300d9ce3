//! Byte encodings shared by keys, ciphertexts and protocol frames.
//!
//! Integers: one sign byte (`0x00` nonnegative, `0x01` negative), a 4-byte
//! big-endian magnitude length, then the big-endian magnitude.

use num_bigint::{BigInt, BigUint, Sign};

use crate::error::{Error, Result};

pub fn put_bigint(out: &mut Vec<u8>, value: &BigInt) {
    let (sign, magnitude) = value.to_bytes_be();
    out.push(if sign == Sign::Minus { 0x01 } else { 0x00 });
    let magnitude = if value.sign() == Sign::NoSign {
        Vec::new()
    } else {
        magnitude
    };
    out.extend_from_slice(&(magnitude.len() as u32).to_be_bytes());
    out.extend_from_slice(&magnitude);
}

pub fn put_biguint(out: &mut Vec<u8>, value: &BigUint) {
    put_bigint(out, &BigInt::from(value.clone()))
}

pub fn encode_bigint(value: &BigInt) -> Vec<u8> {
    let mut out = Vec::new();
    put_bigint(&mut out, value);
    out
}

pub fn encode_biguint(value: &BigUint) -> Vec<u8> {
    let mut out = Vec::new();
    put_biguint(&mut out, value);
    out
}

/// Cursor over a byte slice.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Frame(format!(
                "wanted {n} bytes, {} left",
                self.remaining()
            )));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn bigint(&mut self) -> Result<BigInt> {
        let sign = self.u8()?;
        let len = self.u32()? as usize;
        let magnitude = BigUint::from_bytes_be(self.take(len)?);
        match sign {
            0x00 => Ok(BigInt::from(magnitude)),
            0x01 => Ok(-BigInt::from(magnitude)),
            other => Err(Error::Frame(format!("bad sign byte {other:#04x}"))),
        }
    }

    pub fn biguint(&mut self) -> Result<BigUint> {
        self.bigint()?
            .to_biguint()
            .ok_or_else(|| Error::Frame("expected a nonnegative integer".into()))
    }
}

pub fn decode_bigint(bytes: &[u8]) -> Result<BigInt> {
    let mut reader = Reader::new(bytes);
    let value = reader.bigint()?;
    if !reader.is_empty() {
        return Err(Error::Frame("trailing bytes after integer".into()));
    }
    Ok(value)
}
