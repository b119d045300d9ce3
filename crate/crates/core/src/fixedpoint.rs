//! Fixed-point reals inside `Z_N`.
//!
//! A real `x` at scale `s` is the integer `floor(C^s |x|)` with the sign
//! folded in as the additive inverse mod `N`. Residues above `(N - 1) / 2`
//! read back as negative. Every [`ScaledCiphertext`] carries its scale and a
//! public bound on the magnitude of its plaintext integer; operations refuse
//! to run when the bound would pass `(N - 1) / 2`, which is the point where
//! the sign convention starts lying.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::paillier::{Ciphertext, PrivateKey, PublicKey};

/// Default scale constant `C`.
pub const DEFAULT_SCALE: u64 = 1_000_000;

#[derive(Clone, Debug)]
pub struct CodecParams {
    c: u64,
    pk: PublicKey,
    half: BigUint,
}

/// A ciphertext whose plaintext represents `real * C^scale`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaledCiphertext {
    pub cipher: Ciphertext,
    pub scale: u32,
    /// Public upper bound on `|plaintext integer|`.
    pub bound: BigUint,
}

impl CodecParams {
    pub fn new(c: u64, pk: &PublicKey) -> Result<Self> {
        if c == 0 {
            return Err(Error::InvalidArgument("scale constant C must be >= 1".into()));
        }
        let half = (pk.n() - 1u32) >> 1;
        let params = CodecParams {
            c,
            pk: pk.clone(),
            half,
        };
        if params.domain_bound().is_zero() {
            return Err(Error::InvalidArgument(format!(
                "C = {c} leaves an empty domain for a {}-bit modulus",
                pk.bits()
            )));
        }
        Ok(params)
    }

    pub fn c(&self) -> u64 {
        self.c
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.pk
    }

    /// Largest representable magnitude of a plaintext integer, `(N - 1) / 2`.
    pub fn half_modulus(&self) -> &BigUint {
        &self.half
    }

    /// `B = floor((N - 1) / (2C))`, the largest real magnitude at scale 1.
    pub fn domain_bound(&self) -> BigUint {
        (self.pk.n() - 1u32) / (BigUint::from(self.c) * 2u32)
    }

    pub fn c_pow(&self, exponent: u32) -> BigUint {
        BigUint::from(self.c).pow(exponent)
    }

    pub fn check_bound(&self, bound: &BigUint, what: &str) -> Result<()> {
        if bound > &self.half {
            Err(Error::Overflow(format!(
                "{what} may reach {} bits, limit is {} bits",
                bound.bits(),
                self.half.bits()
            )))
        } else {
            Ok(())
        }
    }

    /// Exact `sign(x) * floor(C^scale * |x|)`, checked against the domain.
    pub fn encode_signed(&self, x: f64, scale: u32) -> Result<BigInt> {
        let value = floor_scaled(x, &self.c_pow(scale))?;
        self.check_bound(value.magnitude(), "encoded value")?;
        Ok(value)
    }

    /// Residue of a signed integer mod `N`.
    pub fn to_residue(&self, v: &BigInt) -> Result<BigUint> {
        self.check_bound(v.magnitude(), "plaintext")?;
        let n = BigInt::from(self.pk.n().clone());
        Ok(v.mod_floor(&n).to_biguint().expect("mod_floor is nonnegative"))
    }

    /// Signed lift of a residue: values above `(N - 1) / 2` are negative.
    pub fn lift(&self, m: &BigUint) -> BigInt {
        if m > &self.half {
            BigInt::from(m.clone()) - BigInt::from(self.pk.n().clone())
        } else {
            BigInt::from(m.clone())
        }
    }

    /// Nonnegative `x` maps to `floor(C^s x)`, negative `x` to `N - floor(C^s |x|)`.
    pub fn encode(&self, x: f64, scale: u32) -> Result<BigUint> {
        let v = self.encode_signed(x, scale)?;
        self.to_residue(&v)
    }

    pub fn decode(&self, m: &BigUint, scale: u32) -> f64 {
        ratio_to_f64(&self.lift(m), &self.c_pow(scale))
    }

    /// Quantizes `x` exactly as `encode` would and reads it back.
    pub fn quantize(&self, x: f64, scale: u32) -> Result<f64> {
        let v = self.encode_signed(x, scale)?;
        Ok(ratio_to_f64(&v, &self.c_pow(scale)))
    }

    pub fn encrypt<R: RngCore + ?Sized>(&self, x: f64, scale: u32, rng: &mut R) -> Result<ScaledCiphertext> {
        let v = self.encode_signed(x, scale)?;
        self.encrypt_int(&v, scale, rng)
    }

    pub fn encrypt_int<R: RngCore + ?Sized>(&self, v: &BigInt, scale: u32, rng: &mut R) -> Result<ScaledCiphertext> {
        let m = self.to_residue(v)?;
        Ok(ScaledCiphertext {
            cipher: self.pk.encrypt(&m, rng)?,
            scale,
            bound: v.magnitude().clone(),
        })
    }

    /// Deterministic encoding of a public constant (no blinding factor).
    pub fn trivial_int(&self, v: &BigInt, scale: u32) -> Result<ScaledCiphertext> {
        let m = self.to_residue(v)?;
        Ok(ScaledCiphertext {
            cipher: self.pk.trivial(&m)?,
            scale,
            bound: v.magnitude().clone(),
        })
    }

    /// Encryption of zero with blinding factor 1.
    pub fn zero(&self, scale: u32) -> ScaledCiphertext {
        ScaledCiphertext {
            cipher: self.pk.identity(),
            scale,
            bound: BigUint::zero(),
        }
    }

    pub fn decrypt(&self, sk: &PrivateKey, c: &ScaledCiphertext) -> Result<f64> {
        let m = sk.decrypt(&self.pk, &c.cipher)?;
        Ok(self.decode(&m, c.scale))
    }

    /// Sum of two ciphertexts at the same scale.
    pub fn scaled_add(&self, a: &ScaledCiphertext, b: &ScaledCiphertext) -> Result<ScaledCiphertext> {
        if a.scale != b.scale {
            return Err(Error::ScaleMismatch {
                left: a.scale,
                right: b.scale,
            });
        }
        let bound = &a.bound + &b.bound;
        self.check_bound(&bound, "sum")?;
        Ok(ScaledCiphertext {
            cipher: self.pk.hom_add(&a.cipher, &b.cipher),
            scale: a.scale,
            bound,
        })
    }

    /// Multiplies by an integer; the scale is unchanged.
    pub fn mul_int(&self, a: &ScaledCiphertext, k: &BigInt) -> Result<ScaledCiphertext> {
        let bound = &a.bound * k.magnitude();
        self.check_bound(&bound, "integer product")?;
        Ok(ScaledCiphertext {
            cipher: self.pk.hom_scale(&a.cipher, k)?,
            scale: a.scale,
            bound,
        })
    }

    /// Multiplies by a real encoded at scale 1; the scale grows by one.
    pub fn scaled_mul_plain(&self, a: &ScaledCiphertext, y: f64) -> Result<ScaledCiphertext> {
        let k = self.encode_signed(y, 1)?;
        self.mul_scaled_int(a, &k, 1)
    }

    /// Multiplies by an already encoded factor of scale `factor_scale`.
    pub fn mul_scaled_int(
        &self,
        a: &ScaledCiphertext,
        k: &BigInt,
        factor_scale: u32,
    ) -> Result<ScaledCiphertext> {
        let mut out = self.mul_int(a, k)?;
        out.scale += factor_scale;
        Ok(out)
    }

    /// Raises the scale to `target` by multiplying with `C^(target - scale)`.
    pub fn rebase(&self, a: &ScaledCiphertext, target: u32) -> Result<ScaledCiphertext> {
        if target < a.scale {
            return Err(Error::ScaleMismatch {
                left: a.scale,
                right: target,
            });
        }
        let k = BigInt::from(self.c_pow(target - a.scale));
        self.mul_scaled_int(a, &k, 0).map(|mut c| {
            c.scale = target;
            c
        })
    }

    /// Attaches scale and bound to a ciphertext received from a peer.
    pub fn adopt(&self, cipher: Ciphertext, scale: u32, bound: BigUint) -> Result<ScaledCiphertext> {
        self.check_bound(&bound, "received value")?;
        Ok(ScaledCiphertext {
            cipher,
            scale,
            bound,
        })
    }
}

/// Exact `sign(x) * floor(|x| * factor)` for a finite double.
pub fn floor_scaled(x: f64, factor: &BigUint) -> Result<BigInt> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("cannot encode {x}")));
    }
    if x == 0.0 {
        return Ok(BigInt::zero());
    }
    let bits = x.abs().to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mantissa, exp) = if raw_exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), raw_exp - 1075)
    };
    let product = BigUint::from(mantissa) * factor;
    let magnitude = if exp >= 0 {
        product << (exp as u64)
    } else {
        product >> ((-exp) as u64)
    };
    let sign = if x < 0.0 { Sign::Minus } else { Sign::Plus };
    Ok(BigInt::from_biguint(sign, magnitude))
}

/// `num / den` as a double, accurate to a couple of ulps for any sizes.
pub fn ratio_to_f64(num: &BigInt, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let nb = num.magnitude().bits() as i64;
    let db = den.bits() as i64;
    // Shift both to ~64 significant bits before converting.
    let shift_n = (nb - 64).max(0);
    let shift_d = (db - 64).max(0);
    let n = (num.magnitude() >> shift_n as u64).to_f64().unwrap_or(f64::INFINITY);
    let d = (den >> shift_d as u64).to_f64().unwrap_or(f64::INFINITY);
    let value = n / d * 2f64.powi((shift_n - shift_d) as i32);
    if num.sign() == Sign::Minus {
        -value
    } else {
        value
    }
}

/// An integer strictly above a nonnegative real, for public bounds.
pub fn int_above(x: f64) -> BigUint {
    if !(x > 0.0) {
        return BigUint::zero();
    }
    let v = floor_scaled(x, &BigUint::one()).expect("finite");
    v.magnitude() + 1u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paillier::{keygen, KeyPair};
    use crate::rng::derive_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn keys(bits: u32) -> KeyPair {
        keygen(bits, &mut derive_rng(bits as u64, "codec-keys")).unwrap()
    }

    #[test]
    fn encode_truncates_toward_zero() {
        let k = keys(64);
        let codec = CodecParams::new(1000, &k.public).unwrap();
        assert_eq!(codec.encode(1.2345, 1).unwrap(), BigUint::from(1234u32));
        assert_eq!(codec.encode(0.0, 1).unwrap(), BigUint::zero());
        let n = k.public.n();
        assert_eq!(codec.encode(-1.2345, 1).unwrap(), n - 1234u32);
    }

    #[test]
    fn negative_half_convention_on_toy_key() {
        let k = keys(16);
        let codec = CodecParams::new(10, &k.public).unwrap();
        let n = k.public.n().clone();
        let m = codec.encode(-2.5, 1).unwrap();
        assert_eq!(m, &n - 25u32);
        assert_eq!(codec.decode(&(&n - 25u32), 1), -2.5);
        assert_eq!(codec.decode(&BigUint::zero(), 1), 0.0);
        // Midpoint split: (N-1)/2 is the largest positive residue.
        let half = codec.half_modulus().clone();
        assert!(codec.decode(&half, 0) > 0.0);
        assert!(codec.decode(&(&half + 1u32), 0) < 0.0);
    }

    #[test]
    fn overflow_is_rejected() {
        let k = keys(16);
        let codec = CodecParams::new(10, &k.public).unwrap();
        let b = codec.domain_bound().to_f64().unwrap();
        assert!(codec.encode(b, 1).is_ok());
        assert!(codec.encode(-b, 1).is_ok());
        assert!(matches!(codec.encode(b + 1.0, 1), Err(Error::Overflow(_))));
        assert!(codec.encode(f64::NAN, 1).is_err());
    }

    #[test]
    fn floor_scaled_is_exact() {
        let c6 = BigUint::from(1_000_000u64);
        assert_eq!(floor_scaled(0.1, &c6).unwrap(), BigInt::from(100_000));
        assert_eq!(floor_scaled(-2.5, &c6).unwrap(), BigInt::from(-2_500_000));
        // 0.3 is slightly below 3/10 in binary.
        let c1 = BigUint::from(10u32);
        assert_eq!(floor_scaled(0.3, &c1).unwrap(), BigInt::from(2));
        assert_eq!(floor_scaled(5e-324, &c6).unwrap(), BigInt::zero());
    }

    #[test]
    fn scaled_arithmetic() {
        let k = keys(128);
        let mut rng = derive_rng(1, "arith");
        let codec = CodecParams::new(100, &k.public).unwrap();
        let a = codec.encrypt(1.5, 1, &mut rng).unwrap();
        let b = codec.encrypt(2.25, 1, &mut rng).unwrap();
        let sum = codec.scaled_add(&a, &b).unwrap();
        assert_eq!(codec.decrypt(&k.private, &sum).unwrap(), 3.75);

        let zero = codec.encrypt(0.0, 1, &mut rng).unwrap();
        let same = codec.scaled_add(&a, &zero).unwrap();
        assert_eq!(codec.decrypt(&k.private, &same).unwrap(), 1.5);

        let two = codec.encrypt(2.0, 1, &mut rng).unwrap();
        let six = codec.mul_int(&two, &BigInt::from(3)).unwrap();
        assert_eq!(six.scale, 1);
        assert_eq!(codec.decrypt(&k.private, &six).unwrap(), 6.0);
        let neg = codec.mul_int(&two, &BigInt::from(-1)).unwrap();
        assert_eq!(codec.decrypt(&k.private, &neg).unwrap(), -2.0);

        let real = codec.scaled_mul_plain(&two, 1.0).unwrap();
        assert_eq!(real.scale, 2);
        assert_eq!(codec.decrypt(&k.private, &real).unwrap(), 2.0);

        let mismatch = codec.scaled_add(&a, &real);
        assert!(matches!(mismatch, Err(Error::ScaleMismatch { left: 1, right: 2 })));

        let rebased = codec.rebase(&a, 3).unwrap();
        assert_eq!(codec.decrypt(&k.private, &rebased).unwrap(), 1.5);
        assert!(codec.rebase(&rebased, 1).is_err());
    }

    #[test]
    fn bound_tracking_stops_overflow_before_it_happens() {
        let k = keys(32);
        let mut rng = derive_rng(2, "overflow");
        let codec = CodecParams::new(10, &k.public).unwrap();
        let a = codec.encrypt(1000.0, 1, &mut rng).unwrap();
        // Plaintext shadow: 10_000 * 10^6 > (N-1)/2 for a 32-bit N.
        let shadow = BigUint::from(10_000u64) * 1_000_000u64;
        assert!(shadow > *codec.half_modulus());
        assert!(matches!(
            codec.mul_int(&a, &BigInt::from(1_000_000)),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn roundtrip_within_one_over_c() {
        let k = keys(64);
        let codec = CodecParams::new(1_000_000, &k.public).unwrap();
        let b = codec.domain_bound().to_f64().unwrap();
        let mut rng = derive_rng(3, "rt");
        for _ in 0..10_000 {
            let x: f64 = rng.random_range(-b..=b);
            let back = codec.decode(&codec.encode(x, 1).unwrap(), 1);
            assert!((back - x).abs() <= 1e-6 * (1.0 + x.abs() * 1e-9), "{x} {back}");
        }
    }

    #[test]
    fn ratio_to_f64_handles_huge_operands() {
        let num = BigInt::from(3) << 400u32;
        let den = BigUint::from(1u32) << 400u32;
        assert_eq!(ratio_to_f64(&num, &den), 3.0);
        assert_eq!(ratio_to_f64(&BigInt::from(-1), &BigUint::from(4u32)), -0.25);
    }

    proptest! {
        #[test]
        fn decode_is_monotone_on_each_half(a in 0u64..1_000_000, b in 0u64..1_000_000) {
            let k = keys(64);
            let codec = CodecParams::new(1000, &k.public).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            let pos = |v: u64| codec.decode(&BigUint::from(v), 1);
            let neg = |v: u64| codec.decode(&(k.public.n() - 1u32 - v), 1);
            prop_assert!(pos(lo) <= pos(hi));
            prop_assert!(neg(hi) <= neg(lo));
        }
    }
}
