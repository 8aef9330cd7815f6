use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use super::prime::{is_prime_u64, next_prime_u64};
use super::HeError;

/// Bit widths and moduli shared by every party of a deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Bit length of attribute values and thresholds.
    pub t: u32,
    /// Statistical masking parameter.
    pub kappa: u32,
    pub paillier_bits: u32,
    pub dgk_bits: u32,
    /// DGK plaintext space, a prime.
    pub dgk_u: u64,
    /// Bit length of the share blinder.
    pub tau: u32,
}

pub const PAILLIER_KEY_SIZES: [u32; 4] = [512, 1024, 2048, 3072];

impl Default for ProtocolParams {
    fn default() -> Self {
        Self { t: 32, kappa: 40, paillier_bits: 2048, dgk_bits: 2048, dgk_u: next_prime_u64(1 << 16), tau: 32 }
    }
}

impl ProtocolParams {
    /// Small keys for tests and benchmarks. Not for deployment.
    pub fn testing(t: u32) -> Self {
        Self { t, kappa: 40, paillier_bits: 512, dgk_bits: 512, ..Self::default() }
    }

    /// Checks every invariant that does not depend on concrete keys.
    pub fn validate(&self) -> Result<(), HeError> {
        if !(2..=62).contains(&self.t) {
            return Err(HeError::Parameter(format!("t = {} outside [2, 62]", self.t)));
        }
        if self.kappa < 8 {
            return Err(HeError::Parameter(format!("kappa = {} below 8", self.kappa)));
        }
        if !(8..=64).contains(&self.tau) {
            return Err(HeError::Parameter(format!("tau = {} outside [8, 64]", self.tau)));
        }
        if !PAILLIER_KEY_SIZES.contains(&self.paillier_bits) {
            return Err(HeError::Parameter(format!(
                "paillier key size {} not one of {PAILLIER_KEY_SIZES:?}",
                self.paillier_bits
            )));
        }
        if !PAILLIER_KEY_SIZES.contains(&self.dgk_bits) {
            return Err(HeError::Parameter(format!(
                "dgk key size {} not one of {PAILLIER_KEY_SIZES:?}",
                self.dgk_bits
            )));
        }
        if !is_prime_u64(self.dgk_u) {
            return Err(HeError::Parameter(format!("dgk plaintext space {} is not prime", self.dgk_u)));
        }
        if self.dgk_u <= 3 * (u64::from(self.t) + 2) {
            return Err(HeError::Parameter(format!(
                "dgk plaintext space {} must exceed 3(t+2) = {}",
                self.dgk_u,
                3 * (self.t + 2)
            )));
        }
        // Blinded values stay below 2^(t+kappa+2); the modulus is at least
        // paillier_bits - 1 bits long.
        if self.t + self.kappa + 2 >= self.paillier_bits - 1 {
            return Err(HeError::Parameter(format!(
                "2^(t+kappa+2) does not fit a {}-bit paillier modulus",
                self.paillier_bits
            )));
        }
        Ok(())
    }

    /// Checks the wraparound bound against a concrete Paillier modulus.
    pub fn check_modulus(&self, n: &BigUint) -> Result<(), HeError> {
        let bound = BigUint::from(1u8) << (self.t + self.kappa + 2);
        if &bound >= n {
            return Err(HeError::Parameter("2^(t+kappa+2) must be below the paillier modulus".into()));
        }
        Ok(())
    }

    /// `2^t`, the exclusive upper bound of attribute values.
    pub fn value_bound(&self) -> u64 {
        1u64 << self.t
    }
}
