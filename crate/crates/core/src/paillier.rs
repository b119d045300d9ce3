//! Paillier cryptosystem with generator `g = N + 1`.
//!
//! Plaintexts live in `Z_N`, ciphertexts in the units of `Z_{N^2}`.
//! Multiplying ciphertexts adds plaintexts mod `N`; raising a ciphertext to
//! an integer power multiplies the plaintext by it. Negative powers go
//! through the inverse of the ciphertext modulo `N^2`.
//!
//! Every probabilistic operation takes its randomness source explicitly.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng::{random_below, random_bits, random_range};
use crate::wire::{put_biguint, Reader};

/// Smallest key size accepted by [`keygen`]. Anything this small is a toy.
pub const MIN_KEY_BITS: u32 = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    n: BigUint,
    g: BigUint,
    n_squared: BigUint,
    bits: u32,
}

#[derive(Clone, PartialEq, Eq)]
pub struct PrivateKey {
    lambda: BigUint,
    mu: BigUint,
}

impl std::fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("PrivateKey { .. }")
    }
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    pub public: PublicKey,
    pub private: PrivateKey,
}

/// An element of `Z_{N^2}^*`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ciphertext(BigUint);

impl Ciphertext {
    /// Wraps a raw value, checking that it is a unit modulo `N^2`.
    pub fn from_raw(pk: &PublicKey, value: BigUint) -> Result<Self> {
        if value >= pk.n_squared || value.is_zero() || !value.gcd(&pk.n).is_one() {
            return Err(Error::NotInvertible);
        }
        Ok(Ciphertext(value))
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

impl PublicKey {
    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Rebuilds a public key from its modulus. `g` is always `N + 1`.
    pub fn from_modulus(n: BigUint) -> Result<Self> {
        if n.bits() < 4 || n.is_even() {
            return Err(Error::InvalidArgument("modulus must be odd and > 8".into()));
        }
        let bits = n.bits() as u32;
        Ok(PublicKey {
            g: &n + 1u32,
            n_squared: &n * &n,
            n,
            bits,
        })
    }

    /// `E[m; r] = g^m r^N mod N^2`, with `g^m = 1 + mN` for `g = N + 1`.
    pub fn encrypt_with(&self, m: &BigUint, r: &BigUint) -> Result<Ciphertext> {
        if m >= &self.n {
            return Err(Error::PlaintextRange);
        }
        if r.is_zero() || r >= &self.n || !r.gcd(&self.n).is_one() {
            return Err(Error::NotCoprime);
        }
        let gm = (BigUint::one() + m * &self.n) % &self.n_squared;
        let rn = r.modpow(&self.n, &self.n_squared);
        Ok(Ciphertext(gm * rn % &self.n_squared))
    }

    pub fn encrypt<R: RngCore + ?Sized>(&self, m: &BigUint, rng: &mut R) -> Result<Ciphertext> {
        let r = self.random_unit(rng);
        self.encrypt_with(m, &r)
    }

    /// Deterministic encoding `g^m` with blinding factor 1.
    ///
    /// Only hides nothing; used for public constants that get folded into
    /// an already randomized ciphertext.
    pub fn trivial(&self, m: &BigUint) -> Result<Ciphertext> {
        if m >= &self.n {
            return Err(Error::PlaintextRange);
        }
        Ok(Ciphertext((BigUint::one() + m * &self.n) % &self.n_squared))
    }

    /// The neutral ciphertext, a trivial encryption of zero.
    pub fn identity(&self) -> Ciphertext {
        Ciphertext(BigUint::one())
    }

    /// Uniform draw from the units of `Z_N`.
    pub fn random_unit<R: RngCore + ?Sized>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = random_range(rng, &BigUint::one(), &self.n);
            if r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }

    pub fn hom_add(&self, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        Ciphertext(&a.0 * &b.0 % &self.n_squared)
    }

    /// Inverse of a ciphertext in `Z_{N^2}`, i.e. an encryption of `-x`.
    pub fn negate(&self, c: &Ciphertext) -> Result<Ciphertext> {
        c.0.modinv(&self.n_squared)
            .map(Ciphertext)
            .ok_or(Error::NotInvertible)
    }

    /// `E[x]^k = E[k x mod N]` for any signed `k`.
    pub fn hom_scale(&self, c: &Ciphertext, k: &BigInt) -> Result<Ciphertext> {
        let magnitude = k.magnitude();
        match k.sign() {
            Sign::NoSign => Ok(self.identity()),
            Sign::Plus => Ok(Ciphertext(c.0.modpow(magnitude, &self.n_squared))),
            Sign::Minus => {
                let inv = self.negate(c)?;
                Ok(Ciphertext(inv.0.modpow(magnitude, &self.n_squared)))
            }
        }
    }

    pub fn hom_scale_i64(&self, c: &Ciphertext, k: i64) -> Result<Ciphertext> {
        self.hom_scale(c, &BigInt::from(k))
    }

    /// Multiplies by a fresh encryption of zero.
    pub fn rerandomize<R: RngCore + ?Sized>(&self, c: &Ciphertext, rng: &mut R) -> Result<Ciphertext> {
        let zero = self.encrypt(&BigUint::zero(), rng)?;
        Ok(self.hom_add(c, &zero))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_biguint(&mut out, &self.n);
        put_biguint(&mut out, &self.g);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = Reader::new(bytes);
        let pk = Self::read(&mut reader)?;
        if !reader.is_empty() {
            return Err(Error::Frame("trailing bytes after public key".into()));
        }
        Ok(pk)
    }

    pub(crate) fn read(reader: &mut Reader<'_>) -> Result<Self> {
        let n = reader.biguint()?;
        let g = reader.biguint()?;
        let pk = Self::from_modulus(n)?;
        if g != pk.g {
            return Err(Error::Frame("generator must equal N + 1".into()));
        }
        Ok(pk)
    }
}

impl PrivateKey {
    pub fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.mu
    }

    /// `m = L(c^lambda mod N^2) * mu mod N`, `L(u) = (u - 1) / N`.
    pub fn decrypt(&self, pk: &PublicKey, c: &Ciphertext) -> Result<BigUint> {
        if c.0.is_zero() || c.0 >= pk.n_squared || !c.0.gcd(&pk.n).is_one() {
            return Err(Error::NotInvertible);
        }
        let u = c.0.modpow(&self.lambda, &pk.n_squared);
        Ok(ell(&u, &pk.n) * &self.mu % &pk.n)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_biguint(&mut out, &self.lambda);
        put_biguint(&mut out, &self.mu);
        out
    }

    pub(crate) fn read(reader: &mut Reader<'_>) -> Result<Self> {
        Ok(PrivateKey {
            lambda: reader.biguint()?,
            mu: reader.biguint()?,
        })
    }
}

impl KeyPair {
    /// Builds the key pair for two distinct odd primes of equal bit length.
    pub fn from_primes(p: &BigUint, q: &BigUint) -> Result<Self> {
        if p == q || p.is_even() || q.is_even() {
            return Err(Error::InvalidArgument("primes must be distinct and odd".into()));
        }
        let p1 = p - 1u32;
        let q1 = q - 1u32;
        let n = p * q;
        if !n.gcd(&(&p1 * &q1)).is_one() {
            return Err(Error::InvalidArgument("gcd(pq, (p-1)(q-1)) != 1".into()));
        }
        let public = PublicKey::from_modulus(n)?;
        let lambda = p1.lcm(&q1);
        let u = public.g.modpow(&lambda, &public.n_squared);
        let mu = ell(&u, &public.n)
            .modinv(&public.n)
            .ok_or_else(|| Error::InvalidArgument("L(g^lambda) not invertible".into()))?;
        Ok(KeyPair {
            public,
            private: PrivateKey { lambda, mu },
        })
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint> {
        self.private.decrypt(&self.public, c)
    }

    /// Public fields followed by private fields, each in the integer encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.public.to_bytes();
        out.extend(self.private.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = Reader::new(bytes);
        let public = PublicKey::read(&mut reader)?;
        let private = PrivateKey::read(&mut reader)?;
        if !reader.is_empty() {
            return Err(Error::Frame("trailing bytes after key pair".into()));
        }
        Ok(KeyPair { public, private })
    }
}

fn ell(u: &BigUint, n: &BigUint) -> BigUint {
    (u - 1u32) / n
}

/// Generates a `bits`-bit key from two `bits/2`-bit primes.
pub fn keygen<R: RngCore + ?Sized>(bits: u32, rng: &mut R) -> Result<KeyPair> {
    if bits < MIN_KEY_BITS || bits % 2 != 0 {
        return Err(Error::KeySize(bits));
    }
    let half = bits / 2;
    let budget = 64 * bits as usize;
    for _ in 0..budget {
        let p = random_prime(half, rng)?;
        let q = random_prime(half, rng)?;
        if p == q {
            continue;
        }
        let n = &p * &q;
        if n.bits() != bits as u64 {
            continue;
        }
        match KeyPair::from_primes(&p, &q) {
            Ok(keys) => return Ok(keys),
            Err(_) => continue,
        }
    }
    Err(Error::PrimeSearch(budget))
}

const SMALL_PRIMES: [u32; 24] = [
    3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

/// Random prime with exactly `bits` bits and the top two bits set, so that
/// the product of two of them has exactly `2 * bits` bits.
pub fn random_prime<R: RngCore + ?Sized>(bits: u32, rng: &mut R) -> Result<BigUint> {
    if bits < 3 {
        return Err(Error::InvalidArgument("prime size must be >= 3 bits".into()));
    }
    let top = (BigUint::one() << (bits - 1)) | (BigUint::one() << (bits - 2));
    let budget = 1000 * bits as usize;
    for _ in 0..budget {
        let candidate = random_bits(rng, bits as u64) | &top | BigUint::one();
        if is_probable_prime(&candidate, 40, rng) {
            return Ok(candidate);
        }
    }
    Err(Error::PrimeSearch(budget))
}

/// Miller-Rabin with `rounds` random bases after trial division.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for &p in SMALL_PRIMES.iter().chain(std::iter::once(&2u32)) {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n1 = n - 1u32;
    let s = n1.trailing_zeros().unwrap_or(0);
    let d = &n1 >> s;
    'witness: for _ in 0..rounds {
        let a = random_range(rng, &two, &n1);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n1 {
            continue;
        }
        for _ in 1..s {
            x = &x * &x % n;
            if x == n1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Uniform element of `Z_N` (test and sampling helper).
pub fn random_plaintext<R: RngCore + ?Sized>(pk: &PublicKey, rng: &mut R) -> BigUint {
    random_below(rng, &pk.n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    fn toy() -> KeyPair {
        KeyPair::from_primes(&BigUint::from(3u32), &BigUint::from(5u32)).unwrap()
    }

    #[test]
    fn textbook_key_for_3_and_5() {
        let keys = toy();
        assert_eq!(keys.public.n(), &BigUint::from(15u32));
        assert_eq!(keys.public.g(), &BigUint::from(16u32));
        assert_eq!(keys.private.lambda(), &BigUint::from(4u32));
        assert_eq!(keys.private.mu(), &BigUint::from(4u32));
    }

    #[test]
    fn exhaustive_roundtrip_mod_15() {
        let keys = toy();
        let mut rng = derive_rng(3, "toy");
        for m in 0u32..15 {
            let m = BigUint::from(m);
            for _ in 0..5 {
                let c = keys.public.encrypt(&m, &mut rng).unwrap();
                assert_eq!(keys.decrypt(&c).unwrap(), m);
            }
        }
    }

    #[test]
    fn negative_scale_mod_15() {
        let keys = toy();
        let mut rng = derive_rng(4, "toy");
        let c = keys.public.encrypt(&BigUint::from(3u32), &mut rng).unwrap();
        let scaled = keys.public.hom_scale_i64(&c, -2).unwrap();
        assert_eq!(keys.decrypt(&scaled).unwrap(), BigUint::from(9u32));
    }

    #[test]
    fn encrypt_rejects_bad_inputs() {
        let keys = toy();
        let pk = &keys.public;
        assert!(matches!(
            pk.encrypt_with(&BigUint::from(15u32), &BigUint::from(2u32)),
            Err(Error::PlaintextRange)
        ));
        assert!(matches!(
            pk.encrypt_with(&BigUint::from(1u32), &BigUint::from(6u32)),
            Err(Error::NotCoprime)
        ));
    }

    #[test]
    fn decrypt_rejects_non_units() {
        let keys = toy();
        let c = Ciphertext(BigUint::from(30u32));
        assert!(matches!(keys.decrypt(&c), Err(Error::NotInvertible)));
        assert!(keys.public.hom_scale_i64(&c, -1).is_err());
        assert!(Ciphertext::from_raw(&keys.public, BigUint::from(30u32)).is_err());
    }

    #[test]
    fn distinct_blinding_gives_distinct_ciphertexts() {
        let mut rng = derive_rng(5, "keys");
        let keys = keygen(64, &mut rng).unwrap();
        let seven = BigUint::from(7u32);
        let a = keys.public.encrypt_with(&seven, &BigUint::from(2u32)).unwrap();
        let b = keys.public.encrypt_with(&seven, &BigUint::from(3u32)).unwrap();
        assert_ne!(a, b);
        assert_eq!(keys.decrypt(&a).unwrap(), seven);
        assert_eq!(keys.decrypt(&b).unwrap(), seven);
    }

    #[test]
    fn keygen_sizes() {
        let mut rng = derive_rng(6, "keys");
        for bits in [16u32, 32, 128, 256] {
            let keys = keygen(bits, &mut rng).unwrap();
            assert_eq!(keys.public.n().bits(), bits as u64);
            assert_eq!(keys.public.bits(), bits);
        }
        assert!(matches!(keygen(15, &mut rng), Err(Error::KeySize(15))));
        assert!(matches!(keygen(8, &mut rng), Err(Error::KeySize(8))));
    }

    #[test]
    fn miller_rabin_matches_sieve_below_2000() {
        let mut rng = derive_rng(7, "mr");
        let mut sieve = vec![true; 2000];
        sieve[0] = false;
        sieve[1] = false;
        for i in 2..2000 {
            if sieve[i] {
                let mut j = i * i;
                while j < 2000 {
                    sieve[j] = false;
                    j += i;
                }
            }
        }
        for (i, &prime) in sieve.iter().enumerate() {
            assert_eq!(
                is_probable_prime(&BigUint::from(i), 20, &mut rng),
                prime,
                "{i}"
            );
        }
    }

    #[test]
    fn rerandomize_keeps_plaintext() {
        let mut rng = derive_rng(8, "keys");
        let keys = keygen(32, &mut rng).unwrap();
        for m in [0u32, 5] {
            let c = keys.public.encrypt(&BigUint::from(m), &mut rng).unwrap();
            for _ in 0..100 {
                let fresh = keys.public.rerandomize(&c, &mut rng).unwrap();
                assert_ne!(fresh, c);
                assert_eq!(keys.decrypt(&fresh).unwrap(), BigUint::from(m));
            }
        }
    }

    #[test]
    fn key_bytes_roundtrip() {
        let mut rng = derive_rng(9, "keys");
        let keys = keygen(64, &mut rng).unwrap();
        let back = KeyPair::from_bytes(&keys.to_bytes()).unwrap();
        assert_eq!(back.public, keys.public);
        assert_eq!(back.private, keys.private);
        assert_eq!(PublicKey::from_bytes(&keys.public.to_bytes()).unwrap(), keys.public);
    }
}
