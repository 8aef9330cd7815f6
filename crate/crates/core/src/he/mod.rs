//! Additively homomorphic encryption: Paillier for attribute values and
//! thresholds, DGK for the bitwise comparison sub-protocol.
//!
//! Both schemes share the [`Ciphertext`] representation and the
//! [`HomomorphicKey`] trait so the comparison engine and the property suites
//! can be written once.

mod dgk;
mod keys;
mod paillier;
mod params;
pub mod prime;

use num_bigint::BigUint;
use rand::{CryptoRng, RngCore};
use thiserror::Error;

pub use dgk::{dgk_keygen, DgkKeypair, DgkPrivateKey, DgkPublicKey, DGK_RANDOMNESS_FACTOR, DGK_SUBGROUP_BITS};
pub use keys::{decode_fields, encode_fields, ClientKeys, PublicKeys};
pub use paillier::{paillier_keygen, PaillierKeypair, PaillierPrivateKey, PaillierPublicKey};
pub use params::ProtocolParams;

/// Errors raised by key generation and homomorphic operations.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HeError {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("plaintext out of range: {0}")]
    Range(String),
    #[error("ciphertext type error: {0}")]
    Type(String),
    #[error("malformed key material: {0}")]
    KeyFormat(String),
}

/// Which cryptosystem produced a ciphertext.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Paillier,
    Dgk,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Paillier => f.write_str("paillier"),
            Scheme::Dgk => f.write_str("dgk"),
        }
    }
}

/// An encrypted integer. The residue lives in `Z_{N^2}` for Paillier and
/// `Z_n` for DGK.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ciphertext {
    scheme: Scheme,
    value: BigUint,
}

impl Ciphertext {
    /// Wraps a raw residue. Range is checked by the key when the ciphertext
    /// is used, not here.
    pub fn from_raw(scheme: Scheme, value: BigUint) -> Self {
        Self { scheme, value }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn into_value(self) -> BigUint {
        self.value
    }
}

/// Operations common to both additively homomorphic schemes.
///
/// Plaintext arithmetic is modulo [`HomomorphicKey::plaintext_modulus`].
pub trait HomomorphicKey {
    fn scheme(&self) -> Scheme;

    fn plaintext_modulus(&self) -> BigUint;

    /// Rejects ciphertexts of the wrong scheme or outside the residue range.
    fn check(&self, c: &Ciphertext) -> Result<(), HeError>;

    fn encrypt_with<R: RngCore + CryptoRng>(&self, m: &BigUint, rng: &mut R) -> Result<Ciphertext, HeError>;

    /// `Enc(m1) ⊞ Enc(m2) = Enc(m1 + m2)`.
    fn add(&self, c1: &Ciphertext, c2: &Ciphertext) -> Result<Ciphertext, HeError>;

    /// `Enc(m)^k = Enc(k·m)`; `k` must be below the plaintext modulus.
    fn scalar_mul(&self, c: &Ciphertext, k: &BigUint) -> Result<Ciphertext, HeError>;

    /// Adds a public constant without fresh randomness.
    fn add_plain(&self, c: &Ciphertext, k: &BigUint) -> Result<Ciphertext, HeError>;

    /// Multiplies in a fresh encryption of zero.
    fn rerandomize_with<R: RngCore + CryptoRng>(&self, c: &Ciphertext, rng: &mut R) -> Result<Ciphertext, HeError>;

    fn encrypt(&self, m: &BigUint) -> Result<Ciphertext, HeError> {
        self.encrypt_with(m, &mut rand::rngs::OsRng)
    }

    fn encrypt_u64(&self, m: u64) -> Result<Ciphertext, HeError> {
        self.encrypt(&BigUint::from(m))
    }

    fn rerandomize(&self, c: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.rerandomize_with(c, &mut rand::rngs::OsRng)
    }
}

pub(crate) fn expect_scheme(expected: Scheme, c: &Ciphertext) -> Result<(), HeError> {
    if c.scheme != expected {
        return Err(HeError::Type(format!("expected {expected} ciphertext, got {}", c.scheme)));
    }
    Ok(())
}
