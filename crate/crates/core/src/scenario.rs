//! One simulated session per call: who answers, over which channels, and what
//! the verifier ends up seeing.

use core::fmt;
use core::str::FromStr;

use rand::RngCore;

use crate::adversaries::{
    distance_earlyreply_answer_hk, naive_answer, AtEarlyReply, DistanceState, MafiaState, Strategy,
};
use crate::baselines::{
    AtTreeState, HkRegisters, LazyAtTree, ProtocolId, ResponderSpec, TreeLabels,
    MAX_MATERIALIZED_DEPTH,
};
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::noise::{count_errors, error_profile, switched_rounds, NoiseModel};
use crate::prf::HmacSha256Prf;
use crate::protocol::{derive_registers, Nonce, RegisterSet, Responder, SecretKey};

/// Prover secrets for one session.
#[derive(Debug, Clone)]
pub enum Prover {
    Ours(RegisterSet),
    Hk(HkRegisters),
    At(AtTreeState),
    AtLazy(LazyAtTree),
}

impl Responder for Prover {
    fn rounds(&self) -> usize {
        match self {
            Prover::Ours(r) => r.rounds(),
            Prover::Hk(r) => r.rounds(),
            Prover::At(t) => t.rounds(),
            Prover::AtLazy(t) => t.rounds(),
        }
    }

    #[inline]
    fn answer(&self, challenges: &Bits, round: usize) -> bool {
        match self {
            Prover::Ours(r) => r.answer(challenges, round),
            Prover::Hk(r) => r.answer(challenges, round),
            Prover::At(t) => t.answer(challenges, round),
            Prover::AtLazy(t) => t.answer(challenges, round),
        }
    }

    fn state_bits(&self) -> usize {
        match self {
            Prover::Ours(r) => r.state_bits(),
            Prover::Hk(r) => r.state_bits(),
            Prover::At(t) => t.state_bits(),
            Prover::AtLazy(t) => t.state_bits(),
        }
    }
}

/// Where register material comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegisterSource {
    /// Uniform bits straight from the trial generator.
    #[default]
    Ideal,
    /// A fresh key and nonces per trial, expanded with HMAC-SHA256.
    Hmac,
}

impl Prover {
    pub fn draw<R: RngCore + ?Sized>(
        spec: &ResponderSpec,
        source: RegisterSource,
        rng: &mut R,
    ) -> Result<Self> {
        let n = spec.rounds();
        let material = |rng: &mut R| -> Result<(SecretKey, Nonce, Nonce)> {
            let key = SecretKey::random(16, rng)?;
            Ok((key, Nonce::random(n, rng), Nonce::random(n, rng)))
        };
        let prf = HmacSha256Prf;
        Ok(match (spec.protocol(), source) {
            (ProtocolId::Ours, RegisterSource::Ideal) => Prover::Ours(RegisterSet::random(n, rng)?),
            (ProtocolId::Ours, RegisterSource::Hmac) => {
                let (k, np, nv) = material(rng)?;
                Prover::Ours(derive_registers(&prf, &k, &np, &nv, n)?)
            }
            (ProtocolId::Hk, RegisterSource::Ideal) => Prover::Hk(HkRegisters::random(n, rng)?),
            (ProtocolId::Hk, RegisterSource::Hmac) => {
                let (k, np, nv) = material(rng)?;
                Prover::Hk(HkRegisters::derive(&prf, &k, &np, &nv, n)?)
            }
            (ProtocolId::At { .. }, source) => {
                let (d, l) = spec.tree_shape().expect("tree protocol");
                match source {
                    _ if d > MAX_MATERIALIZED_DEPTH && source == RegisterSource::Hmac => {
                        return Err(Error::TreeTooDeep(d));
                    }
                    _ if d > MAX_MATERIALIZED_DEPTH => {
                        Prover::AtLazy(LazyAtTree::random(d, l, rng)?)
                    }
                    RegisterSource::Ideal => Prover::At(AtTreeState::random(d, l, rng)?),
                    RegisterSource::Hmac => {
                        let (k, np, nv) = material(rng)?;
                        Prover::At(AtTreeState::derive(&prf, &k, &np, &nv, d, l)?)
                    }
                }
            }
        })
    }

    /// The `Q` register for protocols that carry one.
    pub fn q(&self) -> Option<&Bits> {
        match self {
            Prover::Ours(r) => Some(r.q()),
            _ => None,
        }
    }
}

impl fmt::Display for RegisterSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegisterSource::Ideal => "ideal",
            RegisterSource::Hmac => "hmac",
        })
    }
}

impl FromStr for RegisterSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(RegisterSource::Ideal),
            "hmac" => Ok(RegisterSource::Hmac),
            _ => Err(Error::UnknownName {
                kind: "register source",
                name: s.into(),
            }),
        }
    }
}

/// Which links of a relay attack are noisy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseLegs {
    /// Adversary to prover and adversary to verifier, independently.
    #[default]
    Both,
    /// Only the adversary to verifier link.
    VerifierOnly,
}

impl fmt::Display for NoiseLegs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseLegs::Both => "both",
            NoiseLegs::VerifierOnly => "verifier",
        })
    }
}

impl FromStr for NoiseLegs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(NoiseLegs::Both),
            "verifier" => Ok(NoiseLegs::VerifierOnly),
            _ => Err(Error::UnknownName {
                kind: "noise legs",
                name: s.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Honest,
    Adversary(Strategy),
}

/// Everything the verifier needs to decide, for any `(x, dl)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    /// Mismatch between received responses and the expected ones.
    pub d: Bits,
    /// Present when the protocol runs the switch detector.
    pub q: Option<Bits>,
}

impl TrialOutcome {
    pub fn errors(&self, dl: usize) -> Result<usize> {
        match &self.q {
            Some(q) => Ok(count_errors(&self.d, &switched_rounds(&self.d, q, dl)?)),
            None => Ok(self.d.count_ones()),
        }
    }

    pub fn accepted(&self, x: usize, dl: usize) -> Result<bool> {
        Ok(self.errors(dl)? <= x)
    }

    /// Error counts for thresholds `1..=dl_max`.
    pub fn error_profile(&self, dl_max: usize) -> Result<alloc::vec::Vec<usize>> {
        match &self.q {
            Some(q) => error_profile(&self.d, q, dl_max),
            None => Ok(alloc::vec![self.d.count_ones(); dl_max]),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Scenario {
    spec: ResponderSpec,
    role: Role,
    noise: NoiseModel,
    legs: NoiseLegs,
    source: RegisterSource,
}

impl Scenario {
    pub fn new(spec: ResponderSpec, role: Role, noise: NoiseModel) -> Result<Self> {
        if let (Role::Adversary(Strategy::DistanceEarlyReply), Some((d, _))) =
            (role, spec.tree_shape())
        {
            if d > MAX_MATERIALIZED_DEPTH {
                return Err(Error::Unsupported {
                    strategy: "distance-earlyreply",
                    protocol: alloc::format!("{} with depth {d}", spec.protocol()),
                });
            }
        }
        Ok(Self {
            spec,
            role,
            noise,
            legs: NoiseLegs::default(),
            source: RegisterSource::default(),
        })
    }

    pub fn with_legs(mut self, legs: NoiseLegs) -> Self {
        self.legs = legs;
        self
    }

    pub fn with_source(mut self, source: RegisterSource) -> Self {
        self.source = source;
        self
    }

    pub fn spec(&self) -> &ResponderSpec {
        &self.spec
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn run<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<TrialOutcome> {
        let prover = Prover::draw(&self.spec, self.source, rng)?;
        let n = self.spec.rounds();
        let received = match self.role {
            Role::Honest => self.honest(&prover, rng),
            Role::Adversary(Strategy::MafiaPreAsk) => self.mafia(&prover, rng)?,
            Role::Adversary(Strategy::DistanceEarlyReply) => self.distance(&prover, rng)?,
            Role::Adversary(Strategy::NaiveRandom) => {
                let sent = Bits::random(n, rng);
                let answers: Bits = (0..n)
                    .map(|_| {
                        let a = naive_answer(rng);
                        self.noise.backward(a, rng)
                    })
                    .collect();
                (sent, answers)
            }
        };
        let (sent, responses) = received;
        let d = (1..=n)
            .map(|i| responses.get(i - 1) ^ prover.answer(&sent, i))
            .collect();
        Ok(TrialOutcome {
            d,
            q: prover.q().cloned(),
        })
    }

    /// Returns the verifier's challenges and the responses it received.
    fn honest<R: RngCore + ?Sized>(&self, prover: &Prover, rng: &mut R) -> (Bits, Bits) {
        let n = prover.rounds();
        let sent = Bits::random(n, rng);
        let mut rx = Bits::with_capacity(n);
        let mut responses = Bits::with_capacity(n);
        for i in 1..=n {
            rx.push(self.noise.forward(sent.get(i - 1), rng));
            let r = prover.answer(&rx, i);
            responses.push(self.noise.backward(r, rng));
        }
        (sent, responses)
    }

    fn mafia<R: RngCore + ?Sized>(&self, prover: &Prover, rng: &mut R) -> Result<(Bits, Bits)> {
        let n = prover.rounds();
        let prover_link = match self.legs {
            NoiseLegs::Both => self.noise,
            NoiseLegs::VerifierOnly => NoiseModel::NONE,
        };
        // pre-ask phase against the prover
        let asked = Bits::random(n, rng);
        let mut at_prover = Bits::with_capacity(n);
        let mut learned = Bits::with_capacity(n);
        for i in 1..=n {
            at_prover.push(prover_link.forward(asked.get(i - 1), rng));
            let r = prover.answer(&at_prover, i);
            learned.push(prover_link.backward(r, rng));
        }
        let mut state = MafiaState::new(asked, learned)?;
        // fast phase against the verifier
        let sent = Bits::random(n, rng);
        let mut responses = Bits::with_capacity(n);
        for i in 1..=n {
            let c = self.noise.forward(sent.get(i - 1), rng);
            let a = match (prover, self.spec.tree_shape()) {
                (Prover::Hk(_), _) => state.mafia_preask_answer_hk(i, c, rng)?,
                (_, Some((d, _))) => state.mafia_preask_answer_at(d, i, c, rng)?,
                _ => state.mafia_preask_answer(i, c, rng)?,
            };
            responses.push(self.noise.backward(a, rng));
        }
        Ok((sent, responses))
    }

    fn distance<R: RngCore + ?Sized>(&self, prover: &Prover, rng: &mut R) -> Result<(Bits, Bits)> {
        let n = prover.rounds();
        let sent = Bits::random(n, rng);
        let mut committed = Bits::with_capacity(n);
        match prover {
            Prover::Ours(regs) => {
                let mut st = DistanceState::new(regs.clone());
                for i in 1..=n {
                    committed.push(st.distance_earlyreply_answer(i, rng)?.0);
                }
            }
            Prover::Hk(regs) => {
                for i in 1..=n {
                    committed.push(distance_earlyreply_answer_hk(regs, i, rng)?);
                }
            }
            Prover::At(state) => {
                let mut st = AtEarlyReply::new(state);
                for i in 1..=n {
                    committed.push(st.commit(rng)?);
                    st.observe(sent.get(i - 1));
                }
            }
            Prover::AtLazy(t) => {
                return Err(Error::Unsupported {
                    strategy: "distance-earlyreply",
                    protocol: alloc::format!("at with depth {}", t.depth()),
                })
            }
        }
        let responses = committed
            .iter()
            .map(|r| self.noise.backward(r, rng))
            .collect();
        Ok((sent, responses))
    }
}
