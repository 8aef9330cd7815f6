//! Paillier with `g = N + 1` and CRT decryption.

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

use super::params::PAILLIER_KEY_SIZES;
use super::prime::{crt, random_prime};
use super::{expect_scheme, Ciphertext, HeError, HomomorphicKey, Scheme};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaillierPublicKey {
    n: BigUint,
    n_squared: BigUint,
}

#[derive(Debug, Clone)]
pub struct PaillierPrivateKey {
    public: PaillierPublicKey,
    p: BigUint,
    q: BigUint,
    p_squared: BigUint,
    q_squared: BigUint,
    p_minus_one: BigUint,
    q_minus_one: BigUint,
    h_p: BigUint,
    h_q: BigUint,
    q_inv_p: BigUint,
}

#[derive(Debug, Clone)]
pub struct PaillierKeypair {
    pub public: PaillierPublicKey,
    pub private: PaillierPrivateKey,
}

/// Generates a keypair whose modulus has exactly `bits` bits.
pub fn paillier_keygen(bits: u32) -> Result<PaillierKeypair, HeError> {
    paillier_keygen_with(bits, &mut rand::rngs::OsRng)
}

pub fn paillier_keygen_with<R: RngCore + CryptoRng>(bits: u32, rng: &mut R) -> Result<PaillierKeypair, HeError> {
    if !PAILLIER_KEY_SIZES.contains(&bits) {
        return Err(HeError::Parameter(format!("paillier key size {bits} not one of {PAILLIER_KEY_SIZES:?}")));
    }
    let half = u64::from(bits / 2);
    loop {
        let p = random_prime(half, rng);
        let q = random_prime(half, rng);
        if p == q {
            continue;
        }
        let private = PaillierPrivateKey::from_primes(p, q)?;
        return Ok(PaillierKeypair { public: private.public.clone(), private });
    }
}

impl PaillierPublicKey {
    pub fn from_modulus(n: BigUint) -> Result<Self, HeError> {
        if n.bits() < 64 || n.is_even() {
            return Err(HeError::KeyFormat("paillier modulus must be odd and at least 64 bits".into()));
        }
        let n_squared = &n * &n;
        Ok(Self { n, n_squared })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
    }

    /// Maps a signed value into `[0, N)`: non-negative values are kept,
    /// negative `v` becomes `N − |v|`. Requires `|v| < N/2`.
    pub fn encode_signed(&self, v: &BigInt) -> Result<BigUint, HeError> {
        let magnitude = v.magnitude();
        // N is odd, so |v| < N/2 is |v| <= (N-1)/2.
        if magnitude > &(&self.n >> 1) {
            return Err(HeError::Range(format!("|{v}| is not below N/2")));
        }
        Ok(match v.sign() {
            Sign::Minus => &self.n - magnitude,
            _ => magnitude.clone(),
        })
    }

    /// Inverse of [`encode_signed`](Self::encode_signed) using the `N/2`
    /// midpoint.
    pub fn decode_signed(&self, m: &BigUint) -> Result<BigInt, HeError> {
        if m >= &self.n {
            return Err(HeError::Range("encoded value not below N".into()));
        }
        if m <= &(&self.n >> 1) {
            Ok(BigInt::from(m.clone()))
        } else {
            Ok(-BigInt::from(&self.n - m))
        }
    }

    pub fn encode_signed_i64(&self, v: i64) -> Result<BigUint, HeError> {
        self.encode_signed(&BigInt::from(v))
    }

    fn random_unit<R: RngCore + CryptoRng>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_below(&self.n);
            if !r.is_zero() && r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }

    fn g_pow(&self, m: &BigUint) -> BigUint {
        // (1 + N)^m = 1 + m·N (mod N^2)
        (BigUint::one() + m * &self.n) % &self.n_squared
    }
}

impl HomomorphicKey for PaillierPublicKey {
    fn scheme(&self) -> Scheme {
        Scheme::Paillier
    }

    fn plaintext_modulus(&self) -> BigUint {
        self.n.clone()
    }

    fn check(&self, c: &Ciphertext) -> Result<(), HeError> {
        expect_scheme(Scheme::Paillier, c)?;
        if c.value().is_zero() || c.value() >= &self.n_squared {
            return Err(HeError::Type("paillier ciphertext outside (0, N^2)".into()));
        }
        Ok(())
    }

    fn encrypt_with<R: RngCore + CryptoRng>(&self, m: &BigUint, rng: &mut R) -> Result<Ciphertext, HeError> {
        if m >= &self.n {
            return Err(HeError::Range("paillier plaintext must be below N".into()));
        }
        let r = self.random_unit(rng);
        let c = (self.g_pow(m) * r.modpow(&self.n, &self.n_squared)) % &self.n_squared;
        Ok(Ciphertext::from_raw(Scheme::Paillier, c))
    }

    fn add(&self, c1: &Ciphertext, c2: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.check(c1)?;
        self.check(c2)?;
        let c = (c1.value() * c2.value()) % &self.n_squared;
        Ok(Ciphertext::from_raw(Scheme::Paillier, c))
    }

    fn scalar_mul(&self, c: &Ciphertext, k: &BigUint) -> Result<Ciphertext, HeError> {
        self.check(c)?;
        if k >= &self.n {
            return Err(HeError::Range("paillier scalar must be below N".into()));
        }
        Ok(Ciphertext::from_raw(Scheme::Paillier, c.value().modpow(k, &self.n_squared)))
    }

    fn add_plain(&self, c: &Ciphertext, k: &BigUint) -> Result<Ciphertext, HeError> {
        self.check(c)?;
        if k >= &self.n {
            return Err(HeError::Range("paillier plaintext must be below N".into()));
        }
        let v = (c.value() * self.g_pow(k)) % &self.n_squared;
        Ok(Ciphertext::from_raw(Scheme::Paillier, v))
    }

    fn rerandomize_with<R: RngCore + CryptoRng>(&self, c: &Ciphertext, rng: &mut R) -> Result<Ciphertext, HeError> {
        self.check(c)?;
        let r = self.random_unit(rng);
        let v = (c.value() * r.modpow(&self.n, &self.n_squared)) % &self.n_squared;
        Ok(Ciphertext::from_raw(Scheme::Paillier, v))
    }
}

impl PaillierPrivateKey {
    pub fn from_primes(p: BigUint, q: BigUint) -> Result<Self, HeError> {
        if p == q || p.bits() < 32 || q.bits() < 32 {
            return Err(HeError::KeyFormat("paillier primes must be distinct and non-trivial".into()));
        }
        let public = PaillierPublicKey::from_modulus(&p * &q)?;
        let one = BigUint::one();
        let p_squared = &p * &p;
        let q_squared = &q * &q;
        let p_minus_one = &p - &one;
        let q_minus_one = &q - &one;
        let g = &public.n + &one;
        let h_p = l_function(&g.modpow(&p_minus_one, &p_squared), &p)
            .modinv(&p)
            .ok_or_else(|| HeError::KeyFormat("paillier prime p not invertible".into()))?;
        let h_q = l_function(&g.modpow(&q_minus_one, &q_squared), &q)
            .modinv(&q)
            .ok_or_else(|| HeError::KeyFormat("paillier prime q not invertible".into()))?;
        let q_inv_p = q.modinv(&p).ok_or_else(|| HeError::KeyFormat("paillier primes not coprime".into()))?;
        Ok(Self { public, p, q, p_squared, q_squared, p_minus_one, q_minus_one, h_p, h_q, q_inv_p })
    }

    pub fn public(&self) -> &PaillierPublicKey {
        &self.public
    }

    pub fn primes(&self) -> (&BigUint, &BigUint) {
        (&self.p, &self.q)
    }

    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint, HeError> {
        self.public.check(c)?;
        let m_p = (l_function(&c.value().modpow(&self.p_minus_one, &self.p_squared), &self.p) * &self.h_p) % &self.p;
        let m_q = (l_function(&c.value().modpow(&self.q_minus_one, &self.q_squared), &self.q) * &self.h_q) % &self.q;
        Ok(crt(&m_p, &self.p, &m_q, &self.q, &self.q_inv_p))
    }

    pub fn decrypt_signed(&self, c: &Ciphertext) -> Result<BigInt, HeError> {
        let m = self.decrypt(c)?;
        self.public.decode_signed(&m)
    }
}

fn l_function(x: &BigUint, d: &BigUint) -> BigUint {
    (x - BigUint::one()) / d
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn keys() -> &'static PaillierKeypair {
        static KEYS: OnceLock<PaillierKeypair> = OnceLock::new();
        KEYS.get_or_init(|| paillier_keygen(512).unwrap())
    }

    #[test]
    fn keygen_size_contract() {
        let kp = keys();
        assert_eq!(kp.public.n().bits(), 512);
        assert!(matches!(paillier_keygen(768), Err(HeError::Parameter(_))));
        let other = paillier_keygen(512).unwrap();
        assert_ne!(other.public.n(), kp.public.n());
    }

    #[test]
    fn probabilistic_encryption() {
        let pk = &keys().public;
        let a = pk.encrypt_u64(5).unwrap();
        let b = pk.encrypt_u64(5).unwrap();
        assert_ne!(a, b);
        assert_eq!(keys().private.decrypt(&a).unwrap(), BigUint::from(5u8));
        assert_eq!(keys().private.decrypt(&b).unwrap(), BigUint::from(5u8));
    }

    #[test]
    fn boundary_plaintexts() {
        let kp = keys();
        let n_minus_one = kp.public.n() - 1u8;
        let c = kp.public.encrypt(&n_minus_one).unwrap();
        assert_eq!(kp.private.decrypt(&c).unwrap(), n_minus_one);
        let zero = kp.public.encrypt(&BigUint::zero()).unwrap();
        assert!(kp.private.decrypt(&zero).unwrap().is_zero());
        assert!(matches!(kp.public.encrypt(kp.public.n()), Err(HeError::Range(_))));
    }

    #[test]
    fn addition_wraps_modulo_n() {
        let kp = keys();
        let pk = &kp.public;
        let sum = pk.add(&pk.encrypt(&(pk.n() - 1u8)).unwrap(), &pk.encrypt_u64(2).unwrap()).unwrap();
        assert_eq!(kp.private.decrypt(&sum).unwrap(), BigUint::one());
        let small = pk.add(&pk.encrypt_u64(2).unwrap(), &pk.encrypt_u64(3).unwrap()).unwrap();
        assert_eq!(kp.private.decrypt(&small).unwrap(), BigUint::from(5u8));
    }

    #[test]
    fn scalar_multiplication() {
        let kp = keys();
        let pk = &kp.public;
        let c = pk.encrypt_u64(3).unwrap();
        assert_eq!(kp.private.decrypt(&pk.scalar_mul(&c, &BigUint::from(4u8)).unwrap()).unwrap(), BigUint::from(12u8));
        assert_eq!(kp.private.decrypt(&pk.scalar_mul(&c, &BigUint::one()).unwrap()).unwrap(), BigUint::from(3u8));
        let zero = pk.scalar_mul(&pk.encrypt_u64(5).unwrap(), &BigUint::zero()).unwrap();
        assert!(kp.private.decrypt(&zero).unwrap().is_zero());
    }

    #[test]
    fn signed_encoding() {
        let kp = keys();
        let pk = &kp.public;
        assert_eq!(pk.encode_signed_i64(-5).unwrap(), pk.n() - 5u8);
        assert_eq!(pk.encode_signed_i64(0).unwrap(), BigUint::zero());
        let diff =
            pk.add(&pk.encrypt_u64(9).unwrap(), &pk.encrypt(&pk.encode_signed_i64(-5).unwrap()).unwrap()).unwrap();
        assert_eq!(kp.private.decrypt_signed(&diff).unwrap(), BigInt::from(4));
        let half: BigUint = pk.n() >> 1;
        assert!(pk.encode_signed(&BigInt::from(half.clone())).is_ok());
        assert!(matches!(pk.encode_signed(&BigInt::from(half + 1u8)), Err(HeError::Range(_))));
    }

    #[test]
    fn scheme_and_range_are_checked() {
        let kp = keys();
        let dgk_tagged = Ciphertext::from_raw(Scheme::Dgk, BigUint::from(7u8));
        assert!(matches!(kp.private.decrypt(&dgk_tagged), Err(HeError::Type(_))));
        let too_big = Ciphertext::from_raw(Scheme::Paillier, kp.public.n_squared().clone());
        assert!(matches!(kp.public.add(&too_big, &too_big), Err(HeError::Type(_))));
    }
}
