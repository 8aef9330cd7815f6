//! DGK encryption over a small prime plaintext space `u`.
//!
//! `n = p·q` with `u | p−1`, `u | q−1`, and secret primes `v_p | p−1`,
//! `v_q | q−1`. `g` has order `u·v_p·v_q`, `h` has order `v_p·v_q`, and
//! `Enc(m) = g^m·h^r mod n`. Raising a ciphertext to `v_p` modulo `p` kills
//! the randomness, which gives a zero test without a discrete log.

use std::collections::HashMap;
use std::sync::OnceLock;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

use super::params::ProtocolParams;
use super::prime::{crt, is_prime_u64, is_probable_prime, random_prime};
use super::{expect_scheme, Ciphertext, HeError, HomomorphicKey, Scheme};

/// Bit length of the secret subgroup orders `v_p`, `v_q`.
pub const DGK_SUBGROUP_BITS: u32 = 160;
/// Randomness exponents are `2.5 ×` the subgroup size.
pub const DGK_RANDOMNESS_FACTOR: (u32, u32) = (5, 2);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DgkPublicKey {
    n: BigUint,
    g: BigUint,
    h: BigUint,
    u: u64,
    randomness_bits: u32,
}

#[derive(Debug)]
pub struct DgkPrivateKey {
    public: DgkPublicKey,
    p: BigUint,
    q: BigUint,
    vp: BigUint,
    vq: BigUint,
    /// `g^{v_p} mod p`, a generator of the order-`u` subgroup.
    g_vp: BigUint,
    table: OnceLock<HashMap<BigUint, u64>>,
}

impl Clone for DgkPrivateKey {
    fn clone(&self) -> Self {
        Self {
            public: self.public.clone(),
            p: self.p.clone(),
            q: self.q.clone(),
            vp: self.vp.clone(),
            vq: self.vq.clone(),
            g_vp: self.g_vp.clone(),
            table: OnceLock::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DgkKeypair {
    pub public: DgkPublicKey,
    pub private: DgkPrivateKey,
}

pub fn dgk_keygen(params: &ProtocolParams) -> Result<DgkKeypair, HeError> {
    dgk_keygen_with(params, &mut rand::rngs::OsRng)
}

pub fn dgk_keygen_with<R: RngCore + CryptoRng>(params: &ProtocolParams, rng: &mut R) -> Result<DgkKeypair, HeError> {
    let u = params.dgk_u;
    if !is_prime_u64(u) {
        return Err(HeError::Parameter(format!("dgk plaintext space {u} is not prime")));
    }
    let half = u64::from(params.dgk_bits / 2);
    let u_big = BigUint::from(u);
    let fixed_bits = 1 + u_big.bits() + u64::from(DGK_SUBGROUP_BITS);
    if half < fixed_bits + 32 {
        return Err(HeError::Parameter(format!("dgk key size {} too small", params.dgk_bits)));
    }

    let vp = random_prime(u64::from(DGK_SUBGROUP_BITS), rng);
    let vq = loop {
        let v = random_prime(u64::from(DGK_SUBGROUP_BITS), rng);
        if v != vp {
            break v;
        }
    };
    let p = structured_prime(&u_big, &vp, half, rng);
    let q = loop {
        let q = structured_prime(&u_big, &vq, half, rng);
        if q != p {
            break q;
        }
    };

    let uv_p = &u_big * &vp;
    let uv_q = &u_big * &vq;
    let g_p = element_of_order(&p, &uv_p, &[&u_big, &vp], rng);
    let g_q = element_of_order(&q, &uv_q, &[&u_big, &vq], rng);
    let h_p = element_of_order(&p, &vp, &[&vp], rng);
    let h_q = element_of_order(&q, &vq, &[&vq], rng);
    let q_inv_p = q.modinv(&p).expect("distinct primes are coprime");
    let g = crt(&g_p, &p, &g_q, &q, &q_inv_p);
    let h = crt(&h_p, &p, &h_q, &q, &q_inv_p);
    debug_assert!(g.modpow(&(&uv_p * &vq), &(&p * &q)).is_one());

    let randomness_bits = DGK_SUBGROUP_BITS * DGK_RANDOMNESS_FACTOR.0 / DGK_RANDOMNESS_FACTOR.1;
    let private = DgkPrivateKey::from_parts(p, q, vp, vq, g, h, u, randomness_bits)?;
    Ok(DgkKeypair { public: private.public.clone(), private })
}

/// Prime `p = 2·u·v·r + 1` of exactly `bits` bits.
fn structured_prime<R: RngCore + CryptoRng>(u: &BigUint, v: &BigUint, bits: u64, rng: &mut R) -> BigUint {
    let base = BigUint::from(2u8) * u * v;
    let r_bits = bits - base.bits() + 1;
    loop {
        let mut r = rng.gen_biguint(r_bits);
        r.set_bit(r_bits - 1, true);
        let candidate = &base * &r + 1u8;
        if candidate.bits() == bits && is_probable_prime(&candidate, rng) {
            return candidate;
        }
    }
}

/// Random element of `Z_p^*` whose order is exactly `order`, given the prime
/// factors of `order`.
fn element_of_order<R: RngCore + CryptoRng>(
    p: &BigUint,
    order: &BigUint,
    factors: &[&BigUint],
    rng: &mut R,
) -> BigUint {
    let p_minus_one = p - 1u8;
    let cofactor = &p_minus_one / order;
    let two = BigUint::from(2u8);
    loop {
        let x = rng.gen_biguint_range(&two, &p_minus_one);
        let candidate = x.modpow(&cofactor, p);
        if candidate.is_one() {
            continue;
        }
        let exact = factors.iter().all(|f| !candidate.modpow(&(order / *f), p).is_one());
        if exact {
            return candidate;
        }
    }
}

impl DgkPublicKey {
    pub fn from_parts(n: BigUint, g: BigUint, h: BigUint, u: u64, randomness_bits: u32) -> Result<Self, HeError> {
        if n.bits() < 64 || g.is_zero() || h.is_zero() || g >= n || h >= n {
            return Err(HeError::KeyFormat("dgk public key components out of range".into()));
        }
        if !is_prime_u64(u) {
            return Err(HeError::KeyFormat(format!("dgk plaintext space {u} is not prime")));
        }
        if !(16..=4096).contains(&randomness_bits) {
            return Err(HeError::KeyFormat(format!("dgk randomness size {randomness_bits} out of range")));
        }
        Ok(Self { n, g, h, u, randomness_bits })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn h(&self) -> &BigUint {
        &self.h
    }

    pub fn u(&self) -> u64 {
        self.u
    }

    pub fn randomness_bits(&self) -> u32 {
        self.randomness_bits
    }

    fn blinding<R: RngCore + CryptoRng>(&self, rng: &mut R) -> BigUint {
        let r = rng.gen_biguint(u64::from(self.randomness_bits));
        self.h.modpow(&r, &self.n)
    }

    fn check_plaintext(&self, m: &BigUint) -> Result<(), HeError> {
        if m >= &BigUint::from(self.u) {
            return Err(HeError::Range(format!("dgk plaintext must be below u = {}", self.u)));
        }
        Ok(())
    }
}

impl HomomorphicKey for DgkPublicKey {
    fn scheme(&self) -> Scheme {
        Scheme::Dgk
    }

    fn plaintext_modulus(&self) -> BigUint {
        BigUint::from(self.u)
    }

    fn check(&self, c: &Ciphertext) -> Result<(), HeError> {
        expect_scheme(Scheme::Dgk, c)?;
        if c.value().is_zero() || c.value() >= &self.n {
            return Err(HeError::Type("dgk ciphertext outside (0, n)".into()));
        }
        Ok(())
    }

    fn encrypt_with<R: RngCore + CryptoRng>(&self, m: &BigUint, rng: &mut R) -> Result<Ciphertext, HeError> {
        self.check_plaintext(m)?;
        let c = (self.g.modpow(m, &self.n) * self.blinding(rng)) % &self.n;
        Ok(Ciphertext::from_raw(Scheme::Dgk, c))
    }

    fn add(&self, c1: &Ciphertext, c2: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.check(c1)?;
        self.check(c2)?;
        Ok(Ciphertext::from_raw(Scheme::Dgk, (c1.value() * c2.value()) % &self.n))
    }

    fn scalar_mul(&self, c: &Ciphertext, k: &BigUint) -> Result<Ciphertext, HeError> {
        self.check(c)?;
        self.check_plaintext(k)?;
        Ok(Ciphertext::from_raw(Scheme::Dgk, c.value().modpow(k, &self.n)))
    }

    fn add_plain(&self, c: &Ciphertext, k: &BigUint) -> Result<Ciphertext, HeError> {
        self.check(c)?;
        self.check_plaintext(k)?;
        Ok(Ciphertext::from_raw(Scheme::Dgk, (c.value() * self.g.modpow(k, &self.n)) % &self.n))
    }

    fn rerandomize_with<R: RngCore + CryptoRng>(&self, c: &Ciphertext, rng: &mut R) -> Result<Ciphertext, HeError> {
        self.check(c)?;
        Ok(Ciphertext::from_raw(Scheme::Dgk, (c.value() * self.blinding(rng)) % &self.n))
    }
}

impl DgkPrivateKey {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        p: BigUint,
        q: BigUint,
        vp: BigUint,
        vq: BigUint,
        g: BigUint,
        h: BigUint,
        u: u64,
        randomness_bits: u32,
    ) -> Result<Self, HeError> {
        let public = DgkPublicKey::from_parts(&p * &q, g, h, u, randomness_bits)?;
        let u_big = BigUint::from(u);
        let p_minus_one = &p - 1u8;
        let q_minus_one = &q - 1u8;
        let divides = |a: &BigUint, b: &BigUint| (b % a).is_zero();
        if !(divides(&u_big, &p_minus_one)
            && divides(&u_big, &q_minus_one)
            && divides(&vp, &p_minus_one)
            && divides(&vq, &q_minus_one))
        {
            return Err(HeError::KeyFormat("dgk primes do not match the subgroup structure".into()));
        }
        let g_vp = public.g.modpow(&vp, &p);
        if g_vp.is_one() || !g_vp.modpow(&u_big, &p).is_one() {
            return Err(HeError::KeyFormat("dgk generator has the wrong order".into()));
        }
        Ok(Self { public, p, q, vp, vq, g_vp, table: OnceLock::new() })
    }

    pub fn public(&self) -> &DgkPublicKey {
        &self.public
    }

    /// `(p, q, v_p, v_q)`.
    pub fn secrets(&self) -> (&BigUint, &BigUint, &BigUint, &BigUint) {
        (&self.p, &self.q, &self.vp, &self.vq)
    }

    /// True iff the ciphertext encrypts `0 mod u`.
    pub fn is_zero(&self, c: &Ciphertext) -> Result<bool, HeError> {
        self.public.check(c)?;
        Ok(c.value().modpow(&self.vp, &self.p).is_one())
    }

    /// Full decryption by table lookup over the order-`u` subgroup. The
    /// table is built on first use; the protocol itself only needs
    /// [`is_zero`](Self::is_zero).
    pub fn decrypt(&self, c: &Ciphertext) -> Result<u64, HeError> {
        self.public.check(c)?;
        let table = self.table.get_or_init(|| {
            let mut table = HashMap::with_capacity(self.public.u as usize);
            let mut acc = BigUint::one();
            for m in 0..self.public.u {
                table.insert(acc.clone(), m);
                acc = (acc * &self.g_vp) % &self.p;
            }
            table
        });
        let key = c.value().modpow(&self.vp, &self.p);
        table.get(&key).copied().ok_or_else(|| HeError::Type("dgk ciphertext does not decrypt under this key".into()))
    }
}

impl DgkKeypair {
    pub fn u(&self) -> u64 {
        self.public.u
    }
}
