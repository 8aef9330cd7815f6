use std::collections::HashSet;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::*;
use crate::he::{HomomorphicKey, PublicKeys};
use crate::test_support::client_keys;

/// Plaintext values of the numeric sequence before masking and shuffling,
/// computed straight from the item formula.
fn numeric_items_oracle(a: u64, b: u64, t: u32, sigma: bool) -> Vec<i64> {
    let bit = |v: u64, i: u32| ((v >> i) & 1) as i64;
    let s = if sigma { -1 } else { 1 };
    let mut items = Vec::new();
    for i in 0..t {
        let higher: i64 = (i + 1..t).map(|j| bit(a, j) ^ bit(b, j)).sum();
        items.push(s * (bit(a, i) - bit(b, i)) + 1 + 3 * higher);
    }
    let all: i64 = (0..t).map(|j| bit(a, j) ^ bit(b, j)).sum();
    items.push(if sigma { all } else { all + 1 });
    items.push(all + t as i64 + 2);
    items
}

fn equality_items_oracle(a: u64, b: u64, t: u32, sigma: bool) -> Vec<i64> {
    let c = ((a ^ b) & ((1 << (t + 1)) - 1)).count_ones() as i64;
    if sigma {
        (1..=t as i64 + 1).map(|k| c - k).chain([c + t as i64 + 2]).collect()
    } else {
        (0..=t as i64 + 1).map(|k| c + k).collect()
    }
}

#[test]
fn numeric_item_formula_worked_example() {
    // a = 9, b = 5, t = 4, sigma = 0; items listed from i = 0 upwards.
    let items = numeric_items_oracle(9, 5, 4, false);
    assert_eq!(&items[..4], &[7, 7, 3, 2]);
    assert!(!items.contains(&0));
}

#[test]
fn numeric_item_formula_exhaustive_t3() {
    let t = 3;
    for a in 0..8u64 {
        for b in 0..8u64 {
            for sigma in [false, true] {
                let items = numeric_items_oracle(a, b, t, sigma);
                assert_eq!(items.len(), t as usize + 2);
                let has_zero = items.contains(&0);
                let expected = if sigma { b <= a } else { a < b };
                assert_eq!(has_zero, expected, "a={a} b={b} sigma={sigma}");
                assert!(items.iter().all(|&v| v >= 0 && v < 3 * (t as i64 + 2)));
            }
        }
    }
}

#[test]
fn equality_item_formula_exhaustive_t3() {
    let t = 3;
    for a in 0..16u64 {
        for b in 0..16u64 {
            for sigma in [false, true] {
                let items = equality_items_oracle(a, b, t, sigma);
                let expected = if sigma { a != b } else { a == b };
                assert_eq!(items.contains(&0), expected);
                assert!(items.iter().filter(|&&v| v == 0).count() <= 1);
            }
        }
    }
}

/// The share construction: bit t of `z = x − T + 2^t` is `1{T ≤ x}` and
/// equals `bit_t(M) ⊕ bit_t(μ) ⊕ 1{M mod 2^t < μ mod 2^t}`.
#[test]
fn numeric_parity_convention_exhaustive() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for t in 2..=6u32 {
        let top = 1u64 << t;
        for x in 0..top {
            for threshold in 0..top {
                let mu: u64 = rng.gen_range(0..1 << (t + 8));
                let m = x + top + mu - threshold;
                let borrow = (m % top) < (mu % top);
                let beta = ((m >> t) & 1 == 1) ^ ((mu >> t) & 1 == 1) ^ borrow;
                assert_eq!(beta, threshold <= x, "t={t} x={x} T={threshold} mu={mu}");
            }
        }
    }
}

fn fixed_secrets(mu: u64, sigma: bool) -> SiteSecrets {
    SiteSecrets { mu: BigUint::from(mu), sigma, r_prime: 12345 }
}

fn setup(t: u32) -> (Arc<crate::he::ClientKeys>, Arc<PublicKeys>) {
    let keys = client_keys(t);
    let public = Arc::new(keys.public());
    (keys, public)
}

fn begin(
    public: &Arc<PublicKeys>,
    x: u64,
    threshold: u64,
    mode: CompareMode,
    secrets: SiteSecrets,
) -> (SiteSession, CompareMessage) {
    let mut rng = rand::rngs::OsRng;
    let pk = &public.paillier;
    let ex = pk.encrypt_u64(x).unwrap();
    let et = pk.encrypt(&pk.encode_signed_i64(-(threshold as i64)).unwrap()).unwrap();
    SiteSession::begin_with_secrets(public.clone(), SessionId([1; 16]), &ex, &et, mode, secrets, &mut rng).unwrap()
}

#[test]
fn blinded_values_match_plain_arithmetic() {
    let (keys, public) = setup(4);
    let cases =
        [(9, 5, CompareMode::Numeric, 57u64), (5, 5, CompareMode::Numeric, 53), (5, 5, CompareMode::Equality, 37)];
    for (x, threshold, mode, expected) in cases {
        let (_, msg) = begin(&public, x, threshold, mode, fixed_secrets(37, false));
        let CompareMessage::BlindedValue { value, mode: sent_mode, .. } = msg else { panic!() };
        assert_eq!(sent_mode, mode);
        assert_eq!(keys.paillier.private.decrypt(&value).unwrap(), BigUint::from(expected));
    }
}

#[test]
fn client_bit_decomposition() {
    let (keys, public) = setup(4);
    let mut rng = rand::rngs::OsRng;
    for (x, threshold, mu, expected) in [(9u64, 5u64, 37u64, [1u64, 0, 0, 1, 1]), (5, 5, 37, [1, 0, 1, 0, 1])] {
        let (_, msg) = begin(&public, x, threshold, CompareMode::Numeric, fixed_secrets(mu, false));
        let mut client = ClientSession::new(keys.clone(), SessionId([1; 16]));
        let CompareMessage::BitVector { bits, .. } = client.on_blinded_value(&msg, &mut rng).unwrap() else { panic!() };
        let plain: Vec<u64> = bits.iter().map(|b| keys.dgk.private.decrypt(b).unwrap()).collect();
        assert_eq!(plain, expected);
    }
    // M = 0: x = T, mu = 0, equality mode
    let (_, msg) = begin(&public, 3, 3, CompareMode::Equality, fixed_secrets(0, false));
    let mut client = ClientSession::new(keys.clone(), SessionId([1; 16]));
    let CompareMessage::BitVector { bits, .. } = client.on_blinded_value(&msg, &mut rng).unwrap() else { panic!() };
    assert!(bits.iter().all(|b| keys.dgk.private.decrypt(b).unwrap() == 0));
}

fn zero_count(keys: &crate::he::ClientKeys, items: &[crate::he::Ciphertext]) -> usize {
    items.iter().filter(|c| keys.dgk.private.decrypt(c).unwrap() == 0).count()
}

#[test]
fn masked_sequences_match_oracle_exhaustive_t3() {
    let (keys, public) = setup(3);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let t = 3u32;
    for x in 0..8u64 {
        for threshold in 0..8u64 {
            for sigma in [false, true] {
                for mode in [CompareMode::Numeric, CompareMode::Equality] {
                    let mu = rng.gen_range(0..1u64 << (t + 8));
                    let (mut site, msg) = begin(&public, x, threshold, mode, fixed_secrets(mu, sigma));
                    let mut client = ClientSession::new(keys.clone(), SessionId([1; 16]));
                    let bits = client.on_blinded_value(&msg, &mut rng).unwrap();
                    let CompareMessage::MaskedSequence { items, .. } = site.on_bit_vector(&bits, &mut rng).unwrap()
                    else {
                        panic!()
                    };
                    assert_eq!(items.len(), t as usize + 2);
                    let offset = if mode == CompareMode::Numeric { 1 << t } else { 0 };
                    let m = x + offset + mu - threshold;
                    let expected = match mode {
                        CompareMode::Numeric => numeric_items_oracle(m % (1 << t), mu % (1 << t), t, sigma),
                        CompareMode::Equality => equality_items_oracle(m, mu, t, sigma),
                    };
                    let expected_zeros = expected.iter().filter(|&&v| v == 0).count();
                    assert_eq!(zero_count(&keys, &items), expected_zeros, "x={x} T={threshold} sigma={sigma} {mode}");
                }
            }
        }
    }
}

#[test]
fn equality_examples() {
    let (keys, public) = setup(4);
    let mut rng = rand::rngs::OsRng;
    for (x, threshold, expected_delta) in [(5u64, 5u64, true), (6, 5, false)] {
        let (mut site, msg) = begin(&public, x, threshold, CompareMode::Equality, fixed_secrets(37, false));
        let mut client = ClientSession::new(keys.clone(), SessionId([1; 16]));
        let bits = client.on_blinded_value(&msg, &mut rng).unwrap();
        let seq = site.on_bit_vector(&bits, &mut rng).unwrap();
        client.scan_sequence(&seq).unwrap();
        assert_eq!(client.delta(), Some(expected_delta));
        let w = client.share_reply(&site.share_reveal().unwrap()).unwrap();
        assert_eq!(site.finish(&w).unwrap(), x == threshold);
    }
}

#[test]
fn numeric_boundary_examples() {
    let keys = client_keys(4);
    let mut rng = rand::rngs::OsRng;
    for (x, threshold) in [(9u64, 5u64), (3, 7), (5, 5), (0, 0), (15, 0), (0, 15)] {
        for sigma in [false, true] {
            let run =
                run_local(&keys, x, threshold, CompareMode::Numeric, Some(fixed_secrets(37, sigma)), &mut rng).unwrap();
            assert_eq!(run.beta, threshold <= x, "x={x} T={threshold} sigma={sigma}");
        }
    }
}

#[test]
fn exhaustive_t4_both_modes() {
    let keys = client_keys(4);
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    for x in 0..16u64 {
        for threshold in 0..16u64 {
            let numeric = run_local(&keys, x, threshold, CompareMode::Numeric, None, &mut rng).unwrap();
            assert_eq!(numeric.beta, threshold <= x, "numeric x={x} T={threshold}");
            let equality = run_local(&keys, x, threshold, CompareMode::Equality, None, &mut rng).unwrap();
            assert_eq!(equality.beta, threshold == x, "equality x={x} T={threshold}");
        }
    }
}

#[test]
fn constant_work_across_inputs() {
    let keys = client_keys(4);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for mode in [CompareMode::Numeric, CompareMode::Equality] {
        let mut site_counts = HashSet::new();
        let mut client_counts = HashSet::new();
        for _ in 0..40 {
            let x = rng.gen_range(0..16);
            let threshold = rng.gen_range(0..16);
            let run = run_local(&keys, x, threshold, mode, None, &mut rng).unwrap();
            assert_eq!(run.client.dgk_sent, 5);
            assert_eq!(run.client.zero_checks, 6);
            assert_eq!(run.site.dgk_sent, 6);
            site_counts.insert(run.site);
            client_counts.insert(run.client);
        }
        assert_eq!(site_counts.len(), 1, "{mode}: {site_counts:?}");
        assert_eq!(client_counts.len(), 1, "{mode}: {client_counts:?}");
    }
}

#[test]
fn share_privacy_surrogate() {
    let keys = client_keys(4);
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let sessions = 1000;
    let mut ones = 0;
    let mut bins = [0u32; 16];
    for _ in 0..sessions {
        let run = run_local(&keys, 9, 5, CompareMode::Numeric, None, &mut rng).unwrap();
        assert!(run.beta);
        ones += u32::from(run.delta_client);
        bins[(run.v >> 28) as usize] += 1;
    }
    let fraction = f64::from(ones) / f64::from(sessions);
    assert!((fraction - 0.5).abs() <= 0.05, "client share fraction {fraction}");
    let expected = f64::from(sessions) / 16.0;
    let chi2: f64 = bins.iter().map(|&o| (f64::from(o) - expected).powi(2) / expected).sum();
    // 15 degrees of freedom, significance 0.01
    assert!(chi2 < 30.578, "chi-square {chi2}");
}

#[test]
fn out_of_phase_messages_abort() {
    let (keys, public) = setup(4);
    let mut rng = rand::rngs::OsRng;
    let session = SessionId([1; 16]);

    let (mut site, blinded) = begin(&public, 3, 2, CompareMode::Numeric, fixed_secrets(37, false));
    let err = site.finish(&CompareMessage::ShareW { session, w: 0 }).unwrap_err();
    assert!(matches!(err, CompareError::OutOfPhase { .. }));
    let mut client = ClientSession::new(keys.clone(), session);
    let bits = client.on_blinded_value(&blinded, &mut rng).unwrap();
    assert_eq!(site.on_bit_vector(&bits, &mut rng).unwrap_err(), CompareError::Aborted);

    // Client receiving the share before the sequence.
    let (_, blinded) = begin(&public, 3, 2, CompareMode::Numeric, fixed_secrets(37, false));
    let mut client = ClientSession::new(keys.clone(), session);
    client.on_blinded_value(&blinded, &mut rng).unwrap();
    let err = client.share_reply(&CompareMessage::ShareV { session, v: 1 }).unwrap_err();
    assert!(matches!(err, CompareError::OutOfPhase { .. }));
    assert!(client.delta().is_none());

    // Replaying the blinded value.
    let (_, blinded) = begin(&public, 3, 2, CompareMode::Numeric, fixed_secrets(37, false));
    let mut client = ClientSession::new(keys.clone(), session);
    client.handle(&blinded, &mut rng).unwrap();
    assert!(client.handle(&blinded, &mut rng).is_err());
}

#[test]
fn wrong_lengths_and_sessions_are_rejected() {
    let (keys, public) = setup(4);
    let mut rng = rand::rngs::OsRng;
    let (mut site, blinded) = begin(&public, 3, 2, CompareMode::Equality, fixed_secrets(37, false));
    let mut client = ClientSession::new(keys.clone(), SessionId([1; 16]));
    let CompareMessage::BitVector { session, mut bits } = client.on_blinded_value(&blinded, &mut rng).unwrap() else {
        panic!()
    };
    bits.pop();
    let err = site.on_bit_vector(&CompareMessage::BitVector { session, bits }, &mut rng).unwrap_err();
    assert_eq!(err, CompareError::Length { expected: 5, got: 4 });

    let (mut site, _) = begin(&public, 3, 2, CompareMode::Equality, fixed_secrets(37, false));
    let err = site
        .on_bit_vector(&CompareMessage::BitVector { session: SessionId([2; 16]), bits: vec![] }, &mut rng)
        .unwrap_err();
    assert!(matches!(err, CompareError::SessionMismatch { .. }));

    let mut client = ClientSession::new(keys.clone(), SessionId([1; 16]));
    client.on_blinded_value(&begin(&public, 1, 1, CompareMode::Numeric, fixed_secrets(1, true)).1, &mut rng).unwrap();
    let short = CompareMessage::MaskedSequence { session: SessionId([1; 16]), items: vec![] };
    assert_eq!(client.scan_sequence(&short).unwrap_err(), CompareError::Length { expected: 6, got: 0 });
}

#[test]
fn tampered_share_reply_is_rejected() {
    let (keys, public) = setup(4);
    let mut rng = rand::rngs::OsRng;
    let (mut site, blinded) = begin(&public, 3, 2, CompareMode::Numeric, fixed_secrets(37, false));
    let mut client = ClientSession::new(keys.clone(), SessionId([1; 16]));
    let bits = client.on_blinded_value(&blinded, &mut rng).unwrap();
    client.scan_sequence(&site.on_bit_vector(&bits, &mut rng).unwrap()).unwrap();
    let CompareMessage::ShareV { session, v } = site.share_reveal().unwrap() else { panic!() };
    let err = site.finish(&CompareMessage::ShareW { session, w: v ^ 0b10 }).unwrap_err();
    assert_eq!(err, CompareError::BadShare);
}

#[test]
fn dummy_round_matches_real_site_work() {
    let keys = client_keys(4);
    let public = Arc::new(keys.public());
    let mut rng = rand::rngs::OsRng;
    for mode in [CompareMode::Numeric, CompareMode::Equality] {
        let dummy = SiteSession::dummy_round(public.clone(), mode, &mut rng).unwrap();
        let real = run_local(&keys, 4, 9, mode, None, &mut rng).unwrap();
        assert_eq!(dummy, real.site);
    }
}
