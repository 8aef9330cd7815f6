//! Probable-prime generation for key setup.

use std::sync::OnceLock;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, RngCore};

const SIEVE_LIMIT: usize = 4096;
const MILLER_RABIN_ROUNDS: usize = 40;

fn small_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let mut composite = vec![false; SIEVE_LIMIT];
        let mut primes = Vec::new();
        for i in 2..SIEVE_LIMIT {
            if !composite[i] {
                primes.push(i as u32);
                let mut j = i * i;
                while j < SIEVE_LIMIT {
                    composite[j] = true;
                    j += i;
                }
            }
        }
        primes
    })
}

/// Trial division followed by Miller-Rabin with random bases.
pub fn is_probable_prime<R: RngCore + CryptoRng>(n: &BigUint, rng: &mut R) -> bool {
    if n < &BigUint::from(2u32) {
        return false;
    }
    for &p in small_primes() {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }

    let one = BigUint::one();
    let two = BigUint::from(2u32);
    let n_minus_one = n - &one;
    let mut d = n_minus_one.clone();
    let mut s = 0u32;
    while d.is_even() {
        d >>= 1;
        s += 1;
    }

    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = rng.gen_biguint_range(&two, &n_minus_one);
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
            if x == one {
                return false;
            }
        }
        return false;
    }
    true
}

/// Uniform odd `bits`-bit probable prime with the top two bits set, so the
/// product of two such primes has exactly `2·bits` bits.
pub fn random_prime<R: RngCore + CryptoRng>(bits: u64, rng: &mut R) -> BigUint {
    assert!(bits >= 8, "prime size too small");
    loop {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(bits - 2, true);
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, rng) {
            return candidate;
        }
    }
}

/// Deterministic primality for machine-word values.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in small_primes() {
        let p = u64::from(p);
        if p * p > n {
            return true;
        }
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    // Beyond the sieve: deterministic Miller-Rabin bases for 64-bit inputs.
    let big = BigUint::from(n);
    let n_minus_one = BigUint::from(n - 1);
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = BigUint::from(a).modpow(&BigUint::from(d), &big);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % &big;
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime `>= n`.
pub fn next_prime_u64(n: u64) -> u64 {
    let mut candidate = n.max(2);
    while !is_prime_u64(candidate) {
        candidate += 1;
    }
    candidate
}

/// Solves `x ≡ a (mod p)`, `x ≡ b (mod q)` for coprime `p`, `q`.
pub(crate) fn crt(a: &BigUint, p: &BigUint, b: &BigUint, q: &BigUint, q_inv_mod_p: &BigUint) -> BigUint {
    // x = b + q·((a − b)·q⁻¹ mod p)
    let b_mod_p = b % p;
    let diff = if a >= &b_mod_p { a - &b_mod_p } else { a + p - &b_mod_p };
    let h = (diff * q_inv_mod_p) % p;
    b + q * h
}
