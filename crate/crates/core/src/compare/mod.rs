//! Two-party encrypted comparison between a level-site and the client.
//!
//! The level-site holds `⟦x⟧` and `⟦−T⟧` under the client's Paillier key and
//! ends up with the bit `β = 1{T ≤ x}` (numeric) or `β = 1{T == x}`
//! (equality). The client only ever sees values masked by the level-site's
//! randomness. Message flow:
//!
//! ```text
//! site   -> client  BlindedValue    ⟦M⟧, M = x − T + μ (+ 2^t numeric)
//! client -> site    BitVector       t+1 DGK bit encryptions of M mod 2^(t+1)
//! site   -> client  MaskedSequence  t+2 shuffled, masked DGK values
//! site   -> client  ShareV          blinded site share
//! client -> site    ShareW          v with the client share folded in
//! ```
//!
//! Sessions are transport agnostic and reject any message outside this
//! schedule. Every session performs the same number of operations and moves
//! the same number of ciphertexts regardless of `x` and `T`; the
//! [`WorkCounters`] make that observable.

mod client;
mod site;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::he::{Ciphertext, HeError};

pub use client::ClientSession;
pub use site::{SiteSecrets, SiteSession};

/// Which predicate a node tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompareMode {
    /// `1{T ≤ x}`
    Numeric,
    /// `1{T == x}`
    Equality,
}

impl CompareMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CompareMode::Numeric => "numeric",
            CompareMode::Equality => "equality",
        }
    }

    /// Plaintext reference predicate.
    pub fn evaluate(self, threshold: u64, x: u64) -> bool {
        match self {
            CompareMode::Numeric => threshold <= x,
            CompareMode::Equality => threshold == x,
        }
    }
}

impl fmt::Display for CompareMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Random 16-byte query identifier, carried on every post-setup message.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SessionId(pub [u8; 16]);

impl SessionId {
    pub fn random() -> Self {
        let mut id = [0u8; 16];
        rand::RngCore::fill_bytes(&mut rand::rngs::OsRng, &mut id);
        Self(id)
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SessionId({self})")
    }
}

/// Messages of one comparison, in schedule order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompareMessage {
    BlindedValue { session: SessionId, value: Ciphertext, mode: CompareMode },
    BitVector { session: SessionId, bits: Vec<Ciphertext> },
    MaskedSequence { session: SessionId, items: Vec<Ciphertext> },
    ShareV { session: SessionId, v: u64 },
    ShareW { session: SessionId, w: u64 },
}

impl CompareMessage {
    pub fn session(&self) -> SessionId {
        match self {
            CompareMessage::BlindedValue { session, .. }
            | CompareMessage::BitVector { session, .. }
            | CompareMessage::MaskedSequence { session, .. }
            | CompareMessage::ShareV { session, .. }
            | CompareMessage::ShareW { session, .. } => *session,
        }
    }

    /// Position in the message schedule.
    pub fn phase(&self) -> u8 {
        match self {
            CompareMessage::BlindedValue { .. } => 0,
            CompareMessage::BitVector { .. } => 1,
            CompareMessage::MaskedSequence { .. } => 2,
            CompareMessage::ShareV { .. } => 3,
            CompareMessage::ShareW { .. } => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CompareMessage::BlindedValue { .. } => "BLINDED_VALUE",
            CompareMessage::BitVector { .. } => "BIT_VECTOR",
            CompareMessage::MaskedSequence { .. } => "MASKED_SEQUENCE",
            CompareMessage::ShareV { .. } => "SHARE_V",
            CompareMessage::ShareW { .. } => "SHARE_W",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompareError {
    #[error("message {got} out of phase (expected {expected})")]
    OutOfPhase { expected: &'static str, got: &'static str },
    #[error("message for session {got} delivered to session {expected}")]
    SessionMismatch { expected: SessionId, got: SessionId },
    #[error("expected {expected} ciphertexts, got {got}")]
    Length { expected: usize, got: usize },
    #[error("malformed share reply")]
    BadShare,
    #[error("session already aborted")]
    Aborted,
    #[error(transparent)]
    He(#[from] HeError),
}

/// Operation and traffic counts for one side of one comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct WorkCounters {
    pub encryptions: u32,
    pub decryptions: u32,
    pub hom_adds: u32,
    pub plain_adds: u32,
    pub scalar_muls: u32,
    pub rerandomizations: u32,
    pub zero_checks: u32,
    pub dgk_sent: u32,
    pub dgk_received: u32,
}

impl WorkCounters {
    pub fn homomorphic_ops(&self) -> u32 {
        self.hom_adds + self.plain_adds + self.scalar_muls + self.rerandomizations
    }
}

/// Outcome of a comparison run entirely in one process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalRun {
    pub beta: bool,
    pub site: WorkCounters,
    pub client: WorkCounters,
    /// The client's raw share before the exchange.
    pub delta_client: bool,
    pub v: u64,
}

/// Runs the full schedule between an in-process site and client. Used by the
/// exhaustive protocol test and by benchmarks of the raw comparison.
pub fn run_local<R: rand::RngCore + rand::CryptoRng>(
    client_keys: &std::sync::Arc<crate::he::ClientKeys>,
    x: u64,
    threshold: u64,
    mode: CompareMode,
    secrets: Option<SiteSecrets>,
    rng: &mut R,
) -> Result<LocalRun, CompareError> {
    use crate::he::HomomorphicKey;

    let public = std::sync::Arc::new(client_keys.public());
    let pk = &public.paillier;
    let enc_x = pk.encrypt_with(&x.into(), rng)?;
    let enc_neg_t = pk.encrypt_with(&pk.encode_signed_i64(-(threshold as i64))?, rng)?;
    let session = SessionId::random();

    let (mut site, blinded) = match secrets {
        Some(s) => SiteSession::begin_with_secrets(public, session, &enc_x, &enc_neg_t, mode, s, rng)?,
        None => SiteSession::begin(public, session, &enc_x, &enc_neg_t, mode, rng)?,
    };
    let mut client = ClientSession::new(client_keys.clone(), session);
    let bits = client.on_blinded_value(&blinded, rng)?;
    let sequence = site.on_bit_vector(&bits, rng)?;
    client.scan_sequence(&sequence)?;
    let v_msg = site.share_reveal()?;
    let w_msg = client.share_reply(&v_msg)?;
    let beta = site.finish(&w_msg)?;
    let v = match v_msg {
        CompareMessage::ShareV { v, .. } => v,
        _ => unreachable!("share_reveal returns ShareV"),
    };
    Ok(LocalRun {
        beta,
        site: site.counters(),
        client: client.counters(),
        delta_client: client.delta().expect("scan completed"),
        v,
    })
}

#[cfg(test)]
mod tests;
