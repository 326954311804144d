//! The round-dependent protocol: register derivation, the running parity
//! `f_Q`, prover/verifier round logic and the noiseless decision.
//!
//! In round `i` the prover answers `r_i = R_i^{c_i} xor f_Q(c_1..c_i)` where
//! `f_Q(C) = xor_j (c_j and q_j)` and `f_Q` of the empty sequence is `0`.
//! Rounds are numbered from 1 in every public signature.

use alloc::vec::Vec;

use rand::RngCore;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::prf::Prf;

pub const MIN_KEY_BYTES: usize = 16;

#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey(Vec<u8>);

impl SecretKey {
    pub fn new(bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() < MIN_KEY_BYTES {
            return Err(Error::KeyTooShort {
                min: MIN_KEY_BYTES,
                found: bytes.len(),
            });
        }
        Ok(Self(bytes))
    }

    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Result<Self> {
        let mut bytes = alloc::vec![0u8; len];
        rng.fill_bytes(&mut bytes);
        Self::new(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl core::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "SecretKey({} bytes)", self.0.len())
    }
}

/// Session nonce; `n` bits drawn by each party in the slow phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nonce(Bits);

impl Nonce {
    pub fn new(bits: Bits) -> Self {
        Self(bits)
    }

    pub fn random<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self(Bits::random(n, rng))
    }

    pub fn bits(&self) -> &Bits {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The three `n`-bit registers `Q`, `R^0`, `R^1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterSet {
    q: Bits,
    r0: Bits,
    r1: Bits,
}

impl RegisterSet {
    pub fn new(q: Bits, r0: Bits, r1: Bits) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::ZeroRounds);
        }
        for other in [&r0, &r1] {
            if other.len() != q.len() {
                return Err(Error::LengthMismatch {
                    expected: q.len(),
                    found: other.len(),
                });
            }
        }
        Ok(Self { q, r0, r1 })
    }

    /// Registers drawn uniformly, i.e. the output of an ideal PRF.
    pub fn random<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        Self::new(
            Bits::random(n, rng),
            Bits::random(n, rng),
            Bits::random(n, rng),
        )
    }

    pub fn rounds(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &Bits {
        &self.q
    }

    pub fn r0(&self) -> &Bits {
        &self.r0
    }

    pub fn r1(&self) -> &Bits {
        &self.r1
    }

    pub fn register(&self, challenge: bool) -> &Bits {
        if challenge {
            &self.r1
        } else {
            &self.r0
        }
    }
}

/// `f_Q(prefix)`.
pub fn f_q(q: &Bits, prefix: &Bits) -> Result<bool> {
    if prefix.len() > q.len() {
        return Err(Error::PrefixTooLong {
            prefix: prefix.len(),
            register: q.len(),
        });
    }
    Ok(q.and_parity(prefix, prefix.len()))
}

/// Splits `PRF(key, N_P, N_V)` into `Q`, then `R^0`, then `R^1`.
pub fn derive_registers<P: Prf + ?Sized>(
    prf: &P,
    key: &SecretKey,
    prover_nonce: &Nonce,
    verifier_nonce: &Nonce,
    n: usize,
) -> Result<RegisterSet> {
    if n == 0 {
        return Err(Error::ZeroRounds);
    }
    for nonce in [prover_nonce, verifier_nonce] {
        if nonce.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: nonce.len(),
            });
        }
    }
    let stream = prf.expand(key, prover_nonce, verifier_nonce, 3 * n);
    RegisterSet::new(
        stream.slice(0, n),
        stream.slice(n, 2 * n),
        stream.slice(2 * n, 3 * n),
    )
}

/// Anything that answers fast-phase challenges from a challenge history.
///
/// The same function is the prover's answer (evaluated on the challenges it
/// received) and the verifier's expectation (evaluated on the challenges it sent).
pub trait Responder {
    fn rounds(&self) -> usize;

    /// Answer for 1-based `round`, computed from `challenges[..round]`.
    ///
    /// Callers guarantee `1 <= round <= rounds()` and `challenges.len() >= round`.
    fn answer(&self, challenges: &Bits, round: usize) -> bool;

    /// Bits of secret state held during the fast phase.
    fn state_bits(&self) -> usize;
}

impl Responder for RegisterSet {
    fn rounds(&self) -> usize {
        self.q.len()
    }

    #[inline]
    fn answer(&self, challenges: &Bits, round: usize) -> bool {
        let idx = round - 1;
        let c = challenges.get(idx);
        self.register(c).get(idx) ^ self.q.and_parity(challenges, round)
    }

    fn state_bits(&self) -> usize {
        3 * self.q.len()
    }
}

fn respond_checked(regs: &RegisterSet, prefix: &Bits) -> Result<bool> {
    if prefix.is_empty() {
        return Err(Error::EmptyPrefix);
    }
    if prefix.len() > regs.rounds() {
        return Err(Error::PrefixTooLong {
            prefix: prefix.len(),
            register: regs.rounds(),
        });
    }
    Ok(regs.answer(prefix, prefix.len()))
}

/// The prover's answer to the last challenge of `received_prefix`.
pub fn prover_respond(regs: &RegisterSet, received_prefix: &Bits) -> Result<bool> {
    respond_checked(regs, received_prefix)
}

/// The answer the verifier expects after sending `sent_prefix`.
pub fn verifier_expected(regs: &RegisterSet, sent_prefix: &Bits) -> Result<bool> {
    respond_checked(regs, sent_prefix)
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    n: usize,
    key: SecretKey,
}

impl SessionConfig {
    pub fn new(n: usize, key: SecretKey) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroRounds);
        }
        Ok(Self { n, key })
    }

    pub fn rounds(&self) -> usize {
        self.n
    }

    pub fn key(&self) -> &SecretKey {
        &self.key
    }
}

/// Per-round record of both directions of the fast phase.
///
/// `sent_*` is what the sender put on the wire, `received_*` what arrived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub sent_challenges: Bits,
    pub received_challenges: Bits,
    pub sent_responses: Bits,
    pub received_responses: Bits,
}

impl Transcript {
    pub fn rounds(&self) -> usize {
        self.sent_challenges.len()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for v in [
            &self.sent_challenges,
            &self.received_challenges,
            &self.sent_responses,
            &self.received_responses,
        ] {
            if v.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn is_accept(self) -> bool {
        self == Decision::Accept
    }

    pub(crate) fn from_accept(accept: bool) -> Self {
        if accept {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    pub prover_nonce: Nonce,
    pub verifier_nonce: Nonce,
    pub registers: RegisterSet,
    pub transcript: Transcript,
}

/// A full noiseless run: nonces, register derivation and `n` fast rounds.
pub fn run_honest_session<P: Prf + ?Sized, R: RngCore + ?Sized>(
    cfg: &SessionConfig,
    prf: &P,
    rng: &mut R,
) -> Session {
    let n = cfg.rounds();
    let prover_nonce = Nonce::random(n, rng);
    let verifier_nonce = Nonce::random(n, rng);
    let registers = derive_registers(prf, cfg.key(), &prover_nonce, &verifier_nonce, n)
        .expect("nonces are generated with the session length");
    let challenges = Bits::random(n, rng);
    let responses: Bits = (1..=n).map(|i| registers.answer(&challenges, i)).collect();
    Session {
        prover_nonce,
        verifier_nonce,
        registers,
        transcript: Transcript {
            sent_challenges: challenges.clone(),
            received_challenges: challenges,
            sent_responses: responses.clone(),
            received_responses: responses,
        },
    }
}

/// Accept iff every received response equals the verifier's expectation.
pub fn decide_noiseless(regs: &RegisterSet, t: &Transcript) -> Result<Decision> {
    t.validate(regs.rounds())?;
    let accept = (1..=regs.rounds())
        .all(|i| t.received_responses.get(i - 1) == regs.answer(&t.sent_challenges, i));
    Ok(Decision::from_accept(accept))
}
