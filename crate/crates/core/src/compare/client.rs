use std::sync::Arc;

use num_bigint::BigUint;
use rand::{CryptoRng, RngCore};

use super::{CompareError, CompareMessage, CompareMode, SessionId, WorkCounters};
use crate::he::{ClientKeys, HomomorphicKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    AwaitBlinded,
    AwaitSequence,
    AwaitShare,
    Done,
    Aborted,
}

/// Client side of one comparison.
#[derive(Debug)]
pub struct ClientSession {
    keys: Arc<ClientKeys>,
    session: SessionId,
    mode: Option<CompareMode>,
    /// Bit `t` of the decrypted blinded value.
    high_bit: bool,
    delta: Option<bool>,
    phase: Phase,
    counters: WorkCounters,
}

impl ClientSession {
    pub fn new(keys: Arc<ClientKeys>, session: SessionId) -> Self {
        Self {
            keys,
            session,
            mode: None,
            high_bit: false,
            delta: None,
            phase: Phase::AwaitBlinded,
            counters: WorkCounters::default(),
        }
    }

    pub fn session(&self) -> SessionId {
        self.session
    }

    pub fn counters(&self) -> WorkCounters {
        self.counters
    }

    pub fn mode(&self) -> Option<CompareMode> {
        self.mode
    }

    /// The client's comparison share once the masked sequence was scanned.
    pub fn delta(&self) -> Option<bool> {
        self.delta
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    fn expect(&mut self, phase: Phase, msg: &CompareMessage) -> Result<(), CompareError> {
        if self.phase == Phase::Aborted {
            return Err(CompareError::Aborted);
        }
        if msg.session() != self.session {
            self.phase = Phase::Aborted;
            return Err(CompareError::SessionMismatch { expected: self.session, got: msg.session() });
        }
        let wanted = match phase {
            Phase::AwaitBlinded => 0,
            Phase::AwaitSequence => 2,
            Phase::AwaitShare => 3,
            Phase::Done | Phase::Aborted => u8::MAX,
        };
        if self.phase != phase || msg.phase() != wanted {
            let expected = match self.phase {
                Phase::AwaitBlinded => "BLINDED_VALUE",
                Phase::AwaitSequence => "MASKED_SEQUENCE",
                Phase::AwaitShare => "SHARE_V",
                Phase::Done | Phase::Aborted => "no further message",
            };
            self.phase = Phase::Aborted;
            return Err(CompareError::OutOfPhase { expected, got: msg.name() });
        }
        Ok(())
    }

    fn abort<T>(&mut self, e: impl Into<CompareError>) -> Result<T, CompareError> {
        self.phase = Phase::Aborted;
        Err(e.into())
    }

    /// Decrypts `M` and answers with DGK encryptions of the `t + 1` low bits,
    /// least significant first.
    pub fn on_blinded_value<R: RngCore + CryptoRng>(
        &mut self,
        msg: &CompareMessage,
        rng: &mut R,
    ) -> Result<CompareMessage, CompareError> {
        self.expect(Phase::AwaitBlinded, msg)?;
        let (value, mode) = match msg {
            CompareMessage::BlindedValue { value, mode, .. } => (value, *mode),
            _ => unreachable!("phase check admits only BLINDED_VALUE"),
        };
        let keys = self.keys.clone();
        let m = match keys.paillier.private.decrypt(value) {
            Ok(m) => m,
            Err(e) => return self.abort(e),
        };
        self.counters.decryptions += 1;
        let t = keys.params.t as u64;
        self.high_bit = m.bit(t);
        let mut bits = Vec::with_capacity(t as usize + 1);
        for i in 0..=t {
            let bit = BigUint::from(m.bit(i) as u8);
            match keys.dgk.public.encrypt_with(&bit, rng) {
                Ok(c) => bits.push(c),
                Err(e) => return self.abort(e),
            }
            self.counters.encryptions += 1;
        }
        self.counters.dgk_sent += bits.len() as u32;
        self.mode = Some(mode);
        self.phase = Phase::AwaitSequence;
        Ok(CompareMessage::BitVector { session: self.session, bits })
    }

    /// Zero-checks every item of the masked sequence; the share is 1 iff any
    /// item encrypts zero. All items are checked.
    pub fn scan_sequence(&mut self, msg: &CompareMessage) -> Result<(), CompareError> {
        self.expect(Phase::AwaitSequence, msg)?;
        let items = match msg {
            CompareMessage::MaskedSequence { items, .. } => items,
            _ => unreachable!("phase check admits only MASKED_SEQUENCE"),
        };
        let expected = self.keys.params.t as usize + 2;
        if items.len() != expected {
            return self.abort(CompareError::Length { expected, got: items.len() });
        }
        self.counters.dgk_received += items.len() as u32;
        let keys = self.keys.clone();
        let mut found = false;
        for item in items {
            let zero = match keys.dgk.private.is_zero(item) {
                Ok(z) => z,
                Err(e) => return self.abort(e),
            };
            self.counters.zero_checks += 1;
            found |= zero;
        }
        self.delta = Some(found);
        self.phase = Phase::AwaitShare;
        Ok(())
    }

    /// Flips the low bit of `v` by the client share.
    pub fn share_reply(&mut self, msg: &CompareMessage) -> Result<CompareMessage, CompareError> {
        self.expect(Phase::AwaitShare, msg)?;
        let v = match msg {
            CompareMessage::ShareV { v, .. } => *v,
            _ => unreachable!("phase check admits only SHARE_V"),
        };
        let tau = self.keys.params.tau;
        if tau < 64 && v >> tau != 0 {
            return self.abort(CompareError::BadShare);
        }
        let delta = self.delta.expect("set by scan");
        let share = match self.mode.expect("set by blinded value") {
            CompareMode::Numeric => self.high_bit ^ delta,
            CompareMode::Equality => delta,
        };
        self.phase = Phase::Done;
        Ok(CompareMessage::ShareW { session: self.session, w: v ^ u64::from(share) })
    }

    /// Dispatches a site message to the matching step. Returns the reply, if
    /// the step has one.
    pub fn handle<R: RngCore + CryptoRng>(
        &mut self,
        msg: &CompareMessage,
        rng: &mut R,
    ) -> Result<Option<CompareMessage>, CompareError> {
        match self.phase {
            Phase::AwaitBlinded => self.on_blinded_value(msg, rng).map(Some),
            Phase::AwaitSequence => self.scan_sequence(msg).map(|_| None),
            Phase::AwaitShare => self.share_reply(msg).map(Some),
            Phase::Done | Phase::Aborted => {
                let got = msg.name();
                self.phase = Phase::Aborted;
                Err(CompareError::OutOfPhase { expected: "no further message", got })
            }
        }
    }
}
