//! Key bundles and their byte encodings.
//!
//! Key components are written as a sequence of fields, each an unsigned
//! big-endian magnitude preceded by its 4-byte big-endian byte count. Zero is
//! the empty field; leading zero bytes are rejected so every integer has one
//! encoding.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::dgk::{dgk_keygen_with, DgkKeypair, DgkPrivateKey, DgkPublicKey};
use super::paillier::{paillier_keygen_with, PaillierKeypair, PaillierPrivateKey, PaillierPublicKey};
use super::params::ProtocolParams;
use super::HeError;

/// Upper bound on a single field; far above any supported key size.
const MAX_FIELD_BYTES: usize = 1 << 16;

const PRIVATE_KEY_MAGIC: &[u8; 8] = b"PPDTSK\x00\x01";

pub fn encode_fields(fields: &[&BigUint]) -> Vec<u8> {
    let mut out = Vec::new();
    for field in fields {
        let bytes = if field.bits() == 0 { Vec::new() } else { field.to_bytes_be() };
        out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
        out.extend_from_slice(&bytes);
    }
    out
}

pub fn decode_fields(mut bytes: &[u8]) -> Result<Vec<BigUint>, HeError> {
    let mut fields = Vec::new();
    while !bytes.is_empty() {
        if bytes.len() < 4 {
            return Err(HeError::KeyFormat("truncated field length".into()));
        }
        let len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
        bytes = &bytes[4..];
        if len > MAX_FIELD_BYTES || len > bytes.len() {
            return Err(HeError::KeyFormat(format!("field length {len} exceeds remaining input")));
        }
        let (field, rest) = bytes.split_at(len);
        if field.first() == Some(&0) {
            return Err(HeError::KeyFormat("non-canonical field with leading zero".into()));
        }
        fields.push(BigUint::from_bytes_be(field));
        bytes = rest;
    }
    Ok(fields)
}

fn small(v: &BigUint, what: &str) -> Result<u64, HeError> {
    v.to_u64().ok_or_else(|| HeError::KeyFormat(format!("{what} does not fit 64 bits")))
}

fn expect_count(fields: &[BigUint], n: usize, what: &str) -> Result<(), HeError> {
    if fields.len() != n {
        return Err(HeError::KeyFormat(format!("{what}: expected {n} fields, found {}", fields.len())));
    }
    Ok(())
}

/// The public half of a client's key material plus the protocol parameters.
/// This is what level-sites and the model owner receive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKeys {
    pub params: ProtocolParams,
    pub paillier: PaillierPublicKey,
    pub dgk: DgkPublicKey,
}

impl PublicKeys {
    /// Hex digest binding slices to the key they were encrypted under.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.paillier_bytes());
        hasher.update(self.dgk_bytes());
        let digest = hasher.finalize();
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `[N]`.
    pub fn paillier_bytes(&self) -> Vec<u8> {
        encode_fields(&[self.paillier.n()])
    }

    /// `[n, g, h, u, randomness_bits]`.
    pub fn dgk_bytes(&self) -> Vec<u8> {
        let u = BigUint::from(self.dgk.u());
        let r = BigUint::from(self.dgk.randomness_bits());
        encode_fields(&[self.dgk.n(), self.dgk.g(), self.dgk.h(), &u, &r])
    }

    pub fn from_bytes(params: ProtocolParams, paillier: &[u8], dgk: &[u8]) -> Result<Self, HeError> {
        let pf = decode_fields(paillier)?;
        expect_count(&pf, 1, "paillier public key")?;
        let df = decode_fields(dgk)?;
        expect_count(&df, 5, "dgk public key")?;
        let [n, g, h, u, r]: [BigUint; 5] = df.try_into().expect("count checked");
        let randomness_bits = u32::try_from(small(&r, "dgk randomness size")?)
            .map_err(|_| HeError::KeyFormat("dgk randomness size too large".into()))?;
        let keys = Self {
            params,
            paillier: PaillierPublicKey::from_modulus(pf.into_iter().next().expect("count checked"))?,
            dgk: DgkPublicKey::from_parts(n, g, h, small(&u, "dgk u")?, randomness_bits)?,
        };
        keys.validate()?;
        Ok(keys)
    }

    /// Cross-checks parameters against the concrete keys.
    pub fn validate(&self) -> Result<(), HeError> {
        self.params.validate()?;
        self.params.check_modulus(self.paillier.n())?;
        if self.dgk.u() != self.params.dgk_u {
            return Err(HeError::Parameter(format!(
                "dgk key plaintext space {} differs from params {}",
                self.dgk.u(),
                self.params.dgk_u
            )));
        }
        Ok(())
    }
}

/// Everything the client holds. Never leaves the client.
#[derive(Debug, Clone)]
pub struct ClientKeys {
    pub params: ProtocolParams,
    pub paillier: PaillierKeypair,
    pub dgk: DgkKeypair,
}

impl ClientKeys {
    pub fn generate(params: ProtocolParams) -> Result<Self, HeError> {
        Self::generate_with(params, &mut rand::rngs::OsRng)
    }

    pub fn generate_with<R: RngCore + CryptoRng>(params: ProtocolParams, rng: &mut R) -> Result<Self, HeError> {
        params.validate()?;
        let paillier = paillier_keygen_with(params.paillier_bits, rng)?;
        let dgk = dgk_keygen_with(&params, rng)?;
        let keys = Self { params, paillier, dgk };
        keys.public().validate()?;
        Ok(keys)
    }

    pub fn public(&self) -> PublicKeys {
        PublicKeys { params: self.params, paillier: self.paillier.public.clone(), dgk: self.dgk.public.clone() }
    }

    /// Private key file: 8-byte magic, then fields
    /// `[t, kappa, paillier_bits, dgk_bits, dgk_u, tau, P_p, P_q, D_p, D_q, v_p, v_q, g, h, randomness_bits]`.
    pub fn to_private_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let scalars: Vec<BigUint> = [
            u64::from(p.t),
            u64::from(p.kappa),
            u64::from(p.paillier_bits),
            u64::from(p.dgk_bits),
            p.dgk_u,
            u64::from(p.tau),
        ]
        .into_iter()
        .map(BigUint::from)
        .collect();
        let (pp, pq) = self.paillier.private.primes();
        let (dp, dq, vp, vq) = self.dgk.private.secrets();
        let r = BigUint::from(self.dgk.public.randomness_bits());
        let mut fields: Vec<&BigUint> = scalars.iter().collect();
        fields.extend([pp, pq, dp, dq, vp, vq, self.dgk.public.g(), self.dgk.public.h(), &r]);
        let mut out = PRIVATE_KEY_MAGIC.to_vec();
        out.extend(encode_fields(&fields));
        out
    }

    pub fn from_private_bytes(bytes: &[u8]) -> Result<Self, HeError> {
        let body = bytes
            .strip_prefix(PRIVATE_KEY_MAGIC.as_slice())
            .ok_or_else(|| HeError::KeyFormat("missing private key header".into()))?;
        let fields = decode_fields(body)?;
        expect_count(&fields, 15, "private key")?;
        let narrow = |i: usize, what: &str| -> Result<u32, HeError> {
            u32::try_from(small(&fields[i], what)?).map_err(|_| HeError::KeyFormat(format!("{what} too large")))
        };
        let params = ProtocolParams {
            t: narrow(0, "t")?,
            kappa: narrow(1, "kappa")?,
            paillier_bits: narrow(2, "paillier_bits")?,
            dgk_bits: narrow(3, "dgk_bits")?,
            dgk_u: small(&fields[4], "dgk_u")?,
            tau: narrow(5, "tau")?,
        };
        params.validate()?;
        let paillier_private = PaillierPrivateKey::from_primes(fields[6].clone(), fields[7].clone())?;
        let dgk_private = DgkPrivateKey::from_parts(
            fields[8].clone(),
            fields[9].clone(),
            fields[10].clone(),
            fields[11].clone(),
            fields[12].clone(),
            fields[13].clone(),
            params.dgk_u,
            narrow(14, "randomness_bits")?,
        )?;
        let keys = Self {
            params,
            paillier: PaillierKeypair { public: paillier_private.public().clone(), private: paillier_private },
            dgk: DgkKeypair { public: dgk_private.public().clone(), private: dgk_private },
        };
        keys.public().validate()?;
        Ok(keys)
    }
}
