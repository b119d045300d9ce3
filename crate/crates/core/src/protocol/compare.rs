//! Bitwise private comparison of two integers held by different parties.
//!
//! The key holder (Bob) encrypts the bits of `s`. The other party (Carol),
//! knowing `r` in the clear, forms for every bit position `j`
//!
//! ```text
//! c_j = s_j - r_j + 1 + 3 * sum_{t > j} (r_t xor s_t)
//! ```
//!
//! under encryption. `c_j` is zero exactly at the highest differing bit
//! when that bit is set in `r` and clear in `s`, so some `c_j` vanishes iff
//! `r > s`. Carol raises each `c_j` to a random unit, rerandomizes and
//! shuffles, so the key holder learns only whether a zero is present.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::paillier::{Ciphertext, KeyPair, PublicKey};

fn check_range(v: &BigUint, bits: u32, who: &str) -> Result<()> {
    if v.bits() > bits as u64 {
        return Err(Error::InvalidArgument(format!("{who} input does not fit in {bits} bits")));
    }
    Ok(())
}

fn min_modulus(pk: &PublicKey, bits: u32) -> Result<()> {
    // Largest c_j is 2 + 3 (bits - 1); it must not wrap mod N.
    if pk.n() <= &BigUint::from(3 * bits as u64 + 2) {
        return Err(Error::InvalidArgument("modulus too small for this bit width".into()));
    }
    Ok(())
}

/// Key holder, first move: `E[s_j]` for `j = 0..bits`, least significant first.
pub fn encrypt_bits<R: RngCore + ?Sized>(
    pk: &PublicKey,
    s: &BigUint,
    bits: u32,
    rng: &mut R,
) -> Result<Vec<Ciphertext>> {
    check_range(s, bits, "key holder")?;
    min_modulus(pk, bits)?;
    (0..bits as u64)
        .map(|j| {
            let bit = if s.bit(j) { BigUint::one() } else { BigUint::zero() };
            pk.encrypt(&bit, rng)
        })
        .collect()
}

/// Other party: the masked, shuffled `c_j`.
pub fn mask_comparison<R: RngCore + ?Sized>(
    pk: &PublicKey,
    enc_s: &[Ciphertext],
    r: &BigUint,
    rng: &mut R,
) -> Result<Vec<Ciphertext>> {
    let bits = enc_s.len() as u32;
    check_range(r, bits, "masking")?;
    min_modulus(pk, bits)?;
    let one = pk.trivial(&BigUint::one())?;
    let mut out = Vec::with_capacity(enc_s.len());
    // E[sum_{t > j} (r_t xor s_t)], built from the top bit down.
    let mut suffix = pk.identity();
    for j in (0..enc_s.len()).rev() {
        let r_j = r.bit(j as u64);
        let mut c = enc_s[j].clone();
        if !r_j {
            c = pk.hom_add(&c, &one);
        }
        c = pk.hom_add(&c, &pk.hom_scale_i64(&suffix, 3)?);
        let rho = pk.random_unit(rng);
        let masked = pk.hom_scale(&c, &rho.into())?;
        out.push(pk.rerandomize(&masked, rng)?);
        let xor = if r_j {
            pk.hom_add(&one, &pk.negate(&enc_s[j])?)
        } else {
            enc_s[j].clone()
        };
        suffix = pk.hom_add(&suffix, &xor);
    }
    out.shuffle(rng);
    Ok(out)
}

/// Key holder, final move: `r > s` iff some masked value decrypts to zero.
pub fn decide(keys: &KeyPair, masked: &[Ciphertext]) -> Result<bool> {
    let mut found = false;
    for c in masked {
        // Decrypt everything so the work does not depend on the answer.
        found |= keys.decrypt(c)?.is_zero();
    }
    Ok(found)
}

/// Both moves in memory; returns `r > s`.
pub fn secure_compare<R: RngCore + ?Sized>(
    keys: &KeyPair,
    r: &BigUint,
    s: &BigUint,
    bits: u32,
    rng: &mut R,
) -> Result<bool> {
    check_range(r, bits, "masking")?;
    let enc_s = encrypt_bits(&keys.public, s, bits, rng)?;
    let masked = mask_comparison(&keys.public, &enc_s, r, rng)?;
    decide(keys, &masked)
}
