use std::sync::Arc;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{CryptoRng, Rng, RngCore};

use super::{CompareError, CompareMessage, CompareMode, SessionId, WorkCounters};
use crate::he::{Ciphertext, DgkPublicKey, HomomorphicKey, PublicKeys};

/// Per-session randomness of the level-site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteSecrets {
    /// Additive mask, `t + kappa` bits.
    pub mu: BigUint,
    /// Direction bit; flips which side of the comparison produces a zero.
    pub sigma: bool,
    /// Share blinder, `tau` bits.
    pub r_prime: u64,
}

impl SiteSecrets {
    pub fn sample<R: RngCore + CryptoRng>(keys: &PublicKeys, rng: &mut R) -> Self {
        let p = &keys.params;
        let r_prime = if p.tau == 64 { rng.gen::<u64>() } else { rng.gen_range(0..1u64 << p.tau) };
        Self { mu: rng.gen_biguint(u64::from(p.t + p.kappa)), sigma: rng.gen(), r_prime }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitBits,
    SequenceSent,
    Revealed,
    Done,
    Aborted,
}

/// Level-site side of one comparison.
#[derive(Debug)]
pub struct SiteSession {
    keys: Arc<PublicKeys>,
    session: SessionId,
    mode: CompareMode,
    secrets: SiteSecrets,
    /// The level-site's share of the final bit once the sequence is built.
    share: Option<bool>,
    phase: Phase,
    counters: WorkCounters,
}

impl SiteSession {
    /// Computes `⟦M⟧ = ⟦x⟧ ⊞ ⟦−T⟧ ⊞ ⟦c⟧` with `c = 2^t + μ` (numeric) or
    /// `c = μ` (equality), under fresh secrets.
    pub fn begin<R: RngCore + CryptoRng>(
        keys: Arc<PublicKeys>,
        session: SessionId,
        enc_x: &Ciphertext,
        enc_neg_threshold: &Ciphertext,
        mode: CompareMode,
        rng: &mut R,
    ) -> Result<(Self, CompareMessage), CompareError> {
        let secrets = SiteSecrets::sample(&keys, rng);
        Self::begin_with_secrets(keys, session, enc_x, enc_neg_threshold, mode, secrets, rng)
    }

    /// As [`begin`](Self::begin) with caller-chosen secrets.
    pub fn begin_with_secrets<R: RngCore + CryptoRng>(
        keys: Arc<PublicKeys>,
        session: SessionId,
        enc_x: &Ciphertext,
        enc_neg_threshold: &Ciphertext,
        mode: CompareMode,
        secrets: SiteSecrets,
        rng: &mut R,
    ) -> Result<(Self, CompareMessage), CompareError> {
        keys.validate()?;
        let t = keys.params.t;
        if secrets.mu.bits() > u64::from(t + keys.params.kappa) {
            return Err(crate::he::HeError::Parameter("mask wider than t + kappa bits".into()).into());
        }
        let pk = &keys.paillier;
        let mut counters = WorkCounters::default();
        let offset = match mode {
            CompareMode::Numeric => (BigUint::one() << t) + &secrets.mu,
            CompareMode::Equality => secrets.mu.clone(),
        };
        let enc_offset = pk.encrypt_with(&offset, rng)?;
        let blinded = pk.add(&pk.add(enc_x, enc_neg_threshold)?, &enc_offset)?;
        counters.encryptions += 1;
        counters.hom_adds += 2;

        let session_state = Self { keys, session, mode, secrets, share: None, phase: Phase::AwaitBits, counters };
        Ok((session_state, CompareMessage::BlindedValue { session, value: blinded, mode }))
    }

    pub fn session(&self) -> SessionId {
        self.session
    }

    pub fn mode(&self) -> CompareMode {
        self.mode
    }

    pub fn counters(&self) -> WorkCounters {
        self.counters
    }

    pub fn secrets(&self) -> &SiteSecrets {
        &self.secrets
    }

    fn awaiting(&self) -> &'static str {
        match self.phase {
            Phase::AwaitBits => "BIT_VECTOR",
            Phase::SequenceSent => "no message before SHARE_V is sent",
            Phase::Revealed => "SHARE_W",
            Phase::Done | Phase::Aborted => "no further message",
        }
    }

    fn expect(&mut self, phase: Phase, msg: &CompareMessage) -> Result<(), CompareError> {
        if self.phase == Phase::Aborted {
            return Err(CompareError::Aborted);
        }
        if msg.session() != self.session {
            self.phase = Phase::Aborted;
            return Err(CompareError::SessionMismatch { expected: self.session, got: msg.session() });
        }
        if self.phase != phase || msg.phase() != expected_phase(phase) {
            let expected = self.awaiting();
            self.phase = Phase::Aborted;
            return Err(CompareError::OutOfPhase { expected, got: msg.name() });
        }
        Ok(())
    }

    /// Consumes the client's bit vector and produces the masked, shuffled
    /// sequence of `t + 2` DGK ciphertexts.
    pub fn on_bit_vector<R: RngCore + CryptoRng>(
        &mut self,
        msg: &CompareMessage,
        rng: &mut R,
    ) -> Result<CompareMessage, CompareError> {
        self.expect(Phase::AwaitBits, msg)?;
        let bits = match msg {
            CompareMessage::BitVector { bits, .. } => bits,
            _ => unreachable!("phase check admits only BIT_VECTOR"),
        };
        let t = self.keys.params.t as usize;
        if bits.len() != t + 1 {
            self.phase = Phase::Aborted;
            return Err(CompareError::Length { expected: t + 1, got: bits.len() });
        }
        self.counters.dgk_received += bits.len() as u32;
        if let Some(bad) = bits.iter().find_map(|b| self.keys.dgk.check(b).err()) {
            self.phase = Phase::Aborted;
            return Err(bad.into());
        }
        let built = match self.mode {
            CompareMode::Numeric => self.build_numeric_sequence(bits, rng),
            CompareMode::Equality => self.build_equality_sequence(bits, rng),
        };
        let mut items = match built {
            Ok(items) => items,
            Err(e) => {
                self.phase = Phase::Aborted;
                return Err(e);
            }
        };
        items.shuffle(rng);
        self.counters.dgk_sent += items.len() as u32;
        self.phase = Phase::SequenceSent;
        Ok(CompareMessage::MaskedSequence { session: self.session, items })
    }

    /// Numeric mode over the low `t` bits. With `a` the client's bits,
    /// `b = μ mod 2^t` and `d_i = a_i ⊕ b_i`, item `i` is
    /// `r_i·(s·(a_i − b_i) + 1 + 3·Σ_{j>i} d_j)` with `s = 1 − 2σ`. A zero
    /// appears iff `a < b` (σ = 0) or `b < a` (σ = 1); for σ = 1 the extra
    /// slot `r·Σ d_j` adds the `a = b` case. The last item never decrypts to
    /// zero.
    fn build_numeric_sequence<R: RngCore + CryptoRng>(
        &mut self,
        bits: &[Ciphertext],
        rng: &mut R,
    ) -> Result<Vec<Ciphertext>, CompareError> {
        let keys = self.keys.clone();
        let dgk = &keys.dgk;
        let t = keys.params.t as usize;
        let u = dgk.u();
        let sigma = self.secrets.sigma;
        let b: Vec<u64> = (0..t).map(|i| u64::from(self.secrets.mu.bit(i as u64))).collect();
        let direction = if sigma { u - 1 } else { 1 };

        let xors = self.xor_bits(dgk, &bits[..t], &b)?;

        // suffix[i] = Σ_{j>i} d_j
        let mut acc = self.encrypt(dgk, 0, rng)?;
        let mut suffix = vec![None; t];
        for i in (0..t).rev() {
            suffix[i] = Some(acc.clone());
            acc = self.add(dgk, &acc, &xors[i])?;
        }

        let mut items = Vec::with_capacity(t + 2);
        for i in 0..t {
            let signed = self.scalar(dgk, &bits[i], direction)?;
            let weighted = self.scalar(dgk, suffix[i].as_ref().expect("filled above"), 3)?;
            let sum = self.add(dgk, &signed, &weighted)?;
            // 1 − s·b_i mod u
            let constant = match (sigma, b[i]) {
                (_, 0) => 1,
                (false, _) => 0,
                (true, _) => 2,
            };
            let value = self.add_plain(dgk, &sum, constant)?;
            items.push(self.mask(dgk, &value, rng)?);
        }
        let equality_slot = self.add_plain(dgk, &acc, u64::from(!sigma))?;
        items.push(self.mask(dgk, &equality_slot, rng)?);
        let dummy = self.add_plain(dgk, &acc, t as u64 + 2)?;
        items.push(self.mask(dgk, &dummy, rng)?);

        let parity = self.secrets.mu.bit(t as u64);
        self.share = Some(parity ^ sigma);
        Ok(items)
    }

    /// Equality mode over all `t + 1` bits. `c = Σ d_i` is zero iff `x = T`.
    /// σ = 0 emits `r·(c + k)` for `k = 0..=t+1`; σ = 1 emits `r·(c − k)` for
    /// `k = 1..=t+1` and `r·(c + t + 2)`.
    fn build_equality_sequence<R: RngCore + CryptoRng>(
        &mut self,
        bits: &[Ciphertext],
        rng: &mut R,
    ) -> Result<Vec<Ciphertext>, CompareError> {
        let keys = self.keys.clone();
        let dgk = &keys.dgk;
        let t = keys.params.t as usize;
        let u = dgk.u();
        let sigma = self.secrets.sigma;
        let b: Vec<u64> = (0..=t).map(|i| u64::from(self.secrets.mu.bit(i as u64))).collect();

        let xors = self.xor_bits(dgk, bits, &b)?;
        let mut c = self.encrypt(dgk, 0, rng)?;
        for d in &xors {
            c = self.add(dgk, &c, d)?;
        }

        let offsets: Vec<u64> = if sigma {
            (1..=t as u64 + 1).map(|k| u - k).chain([t as u64 + 2]).collect()
        } else {
            (0..=t as u64 + 1).collect()
        };
        let mut items = Vec::with_capacity(t + 2);
        for offset in offsets {
            let value = self.add_plain(dgk, &c, offset)?;
            items.push(self.mask(dgk, &value, rng)?);
        }
        self.share = Some(sigma);
        Ok(items)
    }

    /// `⟦a_i ⊕ b_i⟧ = ⟦a_i⟧^(1 − 2b_i) · g^(b_i)`, the same two operations for
    /// either value of `b_i`.
    fn xor_bits(
        &mut self,
        dgk: &DgkPublicKey,
        bits: &[Ciphertext],
        b: &[u64],
    ) -> Result<Vec<Ciphertext>, CompareError> {
        let u = dgk.u();
        bits.iter()
            .zip(b)
            .map(|(a, &bi)| {
                let signed = self.scalar(dgk, a, if bi == 1 { u - 1 } else { 1 })?;
                self.add_plain(dgk, &signed, bi)
            })
            .collect()
    }

    /// `r·value` for `r` uniform in `[1, u)`, then rerandomized.
    fn mask<R: RngCore + CryptoRng>(
        &mut self,
        dgk: &DgkPublicKey,
        value: &Ciphertext,
        rng: &mut R,
    ) -> Result<Ciphertext, CompareError> {
        let r = rng.gen_range(1..dgk.u());
        let scaled = self.scalar(dgk, value, r)?;
        self.counters.rerandomizations += 1;
        Ok(dgk.rerandomize_with(&scaled, rng)?)
    }

    fn encrypt<R: RngCore + CryptoRng>(
        &mut self,
        dgk: &DgkPublicKey,
        m: u64,
        rng: &mut R,
    ) -> Result<Ciphertext, CompareError> {
        self.counters.encryptions += 1;
        Ok(dgk.encrypt_with(&BigUint::from(m), rng)?)
    }

    fn add(&mut self, dgk: &DgkPublicKey, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, CompareError> {
        self.counters.hom_adds += 1;
        Ok(dgk.add(a, b)?)
    }

    fn add_plain(&mut self, dgk: &DgkPublicKey, a: &Ciphertext, k: u64) -> Result<Ciphertext, CompareError> {
        self.counters.plain_adds += 1;
        Ok(dgk.add_plain(a, &BigUint::from(k))?)
    }

    fn scalar(&mut self, dgk: &DgkPublicKey, a: &Ciphertext, k: u64) -> Result<Ciphertext, CompareError> {
        self.counters.scalar_muls += 1;
        Ok(dgk.scalar_mul(a, &BigUint::from(k))?)
    }

    /// Sends the level-site share blinded by `r′`:
    /// `v = (share + r′) mod 2^tau`.
    pub fn share_reveal(&mut self) -> Result<CompareMessage, CompareError> {
        match self.phase {
            Phase::SequenceSent => {}
            Phase::Aborted => return Err(CompareError::Aborted),
            _ => {
                self.phase = Phase::Aborted;
                return Err(CompareError::OutOfPhase { expected: "MASKED_SEQUENCE first", got: "SHARE_V" });
            }
        }
        let share = self.share.expect("set with the sequence");
        let v = wrapping_mod(self.secrets.r_prime as u128 + u128::from(share), self.keys.params.tau);
        self.phase = Phase::Revealed;
        Ok(CompareMessage::ShareV { session: self.session, v })
    }

    /// Recovers `β` from the client's reply: the client flipped the low bit
    /// of `v` by its share, so `β = lsb(w) ⊕ lsb(v) ⊕ share`.
    pub fn finish(&mut self, msg: &CompareMessage) -> Result<bool, CompareError> {
        self.expect(Phase::Revealed, msg)?;
        let w = match msg {
            CompareMessage::ShareW { w, .. } => *w,
            _ => unreachable!("phase check admits only SHARE_W"),
        };
        let share = self.share.expect("set with the sequence");
        let v = wrapping_mod(self.secrets.r_prime as u128 + u128::from(share), self.keys.params.tau);
        if (w ^ v) > 1 {
            self.phase = Phase::Aborted;
            return Err(CompareError::BadShare);
        }
        self.phase = Phase::Done;
        Ok(((w ^ v) & 1 == 1) ^ share)
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }
}

fn expected_phase(phase: Phase) -> u8 {
    match phase {
        Phase::AwaitBits => 1,
        Phase::Revealed => 4,
        _ => u8::MAX,
    }
}

fn wrapping_mod(value: u128, bits: u32) -> u64 {
    if bits >= 64 {
        value as u64
    } else {
        (value % (1u128 << bits)) as u64
    }
}

impl SiteSession {
    /// Runs the level-site side against locally generated client traffic.
    /// Bogus traversals use this so that every hop does a full comparison's
    /// worth of work without contacting the client.
    pub fn dummy_round<R: RngCore + CryptoRng>(
        keys: Arc<PublicKeys>,
        mode: CompareMode,
        rng: &mut R,
    ) -> Result<WorkCounters, CompareError> {
        let pk = &keys.paillier;
        let x = pk.encrypt_with(&BigUint::zero(), rng)?;
        let neg_t = pk.encrypt_with(&BigUint::zero(), rng)?;
        let session = SessionId::random();
        let (mut site, _) = Self::begin(keys.clone(), session, &x, &neg_t, mode, rng)?;
        let t = keys.params.t as usize;
        let bits = (0..=t)
            .map(|_| keys.dgk.encrypt_with(&BigUint::from(rng.gen::<bool>() as u8), rng))
            .collect::<Result<Vec<_>, _>>()?;
        site.on_bit_vector(&CompareMessage::BitVector { session, bits }, rng)?;
        site.share_reveal()?;
        Ok(site.counters())
    }
}
