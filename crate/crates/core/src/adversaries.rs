//! Executable fraud strategies.
//!
//! * Mafia fraud with the pre-ask strategy: the adversary first queries the
//!   prover with her own uniformly random challenges, then faces the verifier.
//! * Distance fraud with the early-reply strategy: a dishonest prover commits
//!   every response before the challenge of that round is revealed. The commit
//!   functions take no challenge argument, so they cannot peek.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, RngCore};

use crate::baselines::{AtTreeState, HkRegisters, TreeLabels};
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::protocol::RegisterSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    MafiaPreAsk,
    DistanceEarlyReply,
    NaiveRandom,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::MafiaPreAsk => "mafia-preask",
            Strategy::DistanceEarlyReply => "distance-earlyreply",
            Strategy::NaiveRandom => "naive-random",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mafia-preask" => Ok(Strategy::MafiaPreAsk),
            "distance-earlyreply" => Ok(Strategy::DistanceEarlyReply),
            "naive-random" => Ok(Strategy::NaiveRandom),
            _ => Err(Error::UnknownStrategy(s.into())),
        }
    }
}

fn check_round(round: usize, rounds: usize) -> Result<usize> {
    if round == 0 || round > rounds {
        Err(Error::RoundOutOfRange { round, rounds })
    } else {
        Ok(round - 1)
    }
}

/// What the pre-ask adversary knows after querying the prover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MafiaState {
    preask_challenges: Bits,
    preask_responses: Bits,
    /// Current guess of `f_Q(C_i) xor f_Q(C~_i)`.
    xor_guess: bool,
    prefixes_equal: bool,
}

impl MafiaState {
    pub fn new(preask_challenges: Bits, preask_responses: Bits) -> Result<Self> {
        if preask_challenges.len() != preask_responses.len() {
            return Err(Error::LengthMismatch {
                expected: preask_challenges.len(),
                found: preask_responses.len(),
            });
        }
        Ok(Self {
            preask_challenges,
            preask_responses,
            xor_guess: false,
            prefixes_equal: true,
        })
    }

    pub fn rounds(&self) -> usize {
        self.preask_challenges.len()
    }

    pub fn preask_challenges(&self) -> &Bits {
        &self.preask_challenges
    }

    pub fn preask_responses(&self) -> &Bits {
        &self.preask_responses
    }

    pub fn xor_guess(&self) -> bool {
        self.xor_guess
    }

    pub fn prefixes_equal(&self) -> bool {
        self.prefixes_equal
    }

    /// Best pre-ask behavior against the round-dependent protocol.
    ///
    /// On a matching challenge the adversary answers `guess xor r~_i`. On a
    /// mismatch she answers at random and, since the true XOR then moves by the
    /// unknown `q_i`, re-guesses it by XOR-ing a fresh coin into her guess.
    pub fn mafia_preask_answer<R: RngCore + ?Sized>(
        &mut self,
        round: usize,
        challenge: bool,
        rng: &mut R,
    ) -> Result<bool> {
        let idx = check_round(round, self.rounds())?;
        if challenge == self.preask_challenges.get(idx) {
            Ok(self.xor_guess ^ self.preask_responses.get(idx))
        } else {
            self.prefixes_equal = false;
            let answer = rng.random::<bool>();
            self.xor_guess ^= rng.random::<bool>();
            Ok(answer)
        }
    }

    /// Pre-ask against the two-register protocol: relay on a match, guess otherwise.
    pub fn mafia_preask_answer_hk<R: RngCore + ?Sized>(
        &self,
        round: usize,
        challenge: bool,
        rng: &mut R,
    ) -> Result<bool> {
        let idx = check_round(round, self.rounds())?;
        if challenge == self.preask_challenges.get(idx) {
            Ok(self.preask_responses.get(idx))
        } else {
            Ok(rng.random::<bool>())
        }
    }

    /// Pre-ask against trees of depth `depth`: the relayed answer is valid while
    /// the verifier's path inside the current tree follows the pre-asked path.
    pub fn mafia_preask_answer_at<R: RngCore + ?Sized>(
        &mut self,
        depth: usize,
        round: usize,
        challenge: bool,
        rng: &mut R,
    ) -> Result<bool> {
        let idx = check_round(round, self.rounds())?;
        if depth == 0 || !self.rounds().is_multiple_of(depth) {
            return Err(Error::TreeShape {
                depth,
                rounds: self.rounds(),
            });
        }
        if idx % depth == 0 {
            self.prefixes_equal = true;
        }
        if self.prefixes_equal && challenge == self.preask_challenges.get(idx) {
            Ok(self.preask_responses.get(idx))
        } else {
            self.prefixes_equal = false;
            Ok(rng.random::<bool>())
        }
    }
}

/// The dishonest prover's view for the early-reply strategy.
#[derive(Debug, Clone)]
pub struct DistanceState {
    regs: RegisterSet,
    /// Current guess of `f_Q(C_{i-1})`.
    f_estimate: bool,
    assumed_challenges: Bits,
}

impl DistanceState {
    pub fn new(regs: RegisterSet) -> Self {
        let n = regs.rounds();
        Self {
            regs,
            f_estimate: false,
            assumed_challenges: Bits::with_capacity(n),
        }
    }

    pub fn f_estimate(&self) -> bool {
        self.f_estimate
    }

    pub fn assumed_challenges(&self) -> &Bits {
        &self.assumed_challenges
    }

    /// Commits the response for `round` and returns `(committed, assumed_c)`.
    ///
    /// Both candidate answers are computed under the current estimate. When
    /// they agree the commit is challenge-free; otherwise the adversary bets on
    /// a branch `b` and that bet is also her assumed challenge. The estimate
    /// only moves when `q_i = 1`.
    pub fn distance_earlyreply_answer<R: RngCore + ?Sized>(
        &mut self,
        round: usize,
        rng: &mut R,
    ) -> Result<(bool, bool)> {
        let idx = check_round(round, self.regs.rounds())?;
        let q = self.regs.q().get(idx);
        let a0 = self.regs.r0().get(idx) ^ self.f_estimate;
        let a1 = self.regs.r1().get(idx) ^ self.f_estimate ^ q;
        let (committed, assumed) = if a0 == a1 {
            (a0, rng.random::<bool>())
        } else {
            let b = rng.random::<bool>();
            (if b { a1 } else { a0 }, b)
        };
        if q {
            self.f_estimate ^= assumed;
        }
        self.assumed_challenges.push(assumed);
        Ok((committed, assumed))
    }
}

/// Early reply against the two-register protocol.
pub fn distance_earlyreply_answer_hk<R: RngCore + ?Sized>(
    regs: &HkRegisters,
    round: usize,
    rng: &mut R,
) -> Result<bool> {
    let idx = check_round(round, regs.r0().len())?;
    let (a0, a1) = (regs.r0().get(idx), regs.r1().get(idx));
    Ok(if a0 == a1 { a0 } else { rng.random::<bool>() })
}

/// Node values `V` of one tree, heap-indexed.
///
/// `V(leaf) = 1`, `V(v) = max_b sum_c 1/2 [b = label(child_c)] V(child_c)`.
fn tree_values(state: &AtTreeState, tree: usize) -> Vec<f64> {
    let d = state.depth();
    let total = (1usize << (d + 1)) - 1;
    let first_leaf = (1usize << d) - 1;
    let mut v = alloc::vec![1.0f64; total];
    for node in (0..first_leaf).rev() {
        let (l, r) = (2 * node + 1, 2 * node + 2);
        let (ll, rl) = (state.label(tree, l as u64), state.label(tree, r as u64));
        v[node] = if ll == rl {
            0.5 * (v[l] + v[r])
        } else {
            0.5 * v[l].max(v[r])
        };
    }
    v
}

/// Exact early-reply success probability against a labeled forest: the
/// product over trees of the root value.
pub fn distance_at_optimal(state: &AtTreeState) -> f64 {
    (0..state.trees())
        .map(|t| tree_values(state, t)[0])
        .product()
}

/// Early reply against a labeled forest, committing to the branch with the
/// larger continuation value at every node.
#[derive(Debug, Clone)]
pub struct AtEarlyReply<'a> {
    state: &'a AtTreeState,
    values: Vec<Vec<f64>>,
    node: usize,
    round: usize,
}

impl<'a> AtEarlyReply<'a> {
    pub fn new(state: &'a AtTreeState) -> Self {
        let values = (0..state.trees()).map(|t| tree_values(state, t)).collect();
        Self {
            state,
            values,
            node: 0,
            round: 0,
        }
    }

    fn tree(&self) -> usize {
        self.round / self.state.depth()
    }

    /// The response for the next round.
    pub fn commit<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<bool> {
        let n = self.state.depth() * self.state.trees();
        if self.round >= n {
            return Err(Error::RoundOutOfRange {
                round: self.round + 1,
                rounds: n,
            });
        }
        let t = self.tree();
        let (l, r) = (2 * self.node + 1, 2 * self.node + 2);
        let (ll, rl) = (self.state.label(t, l as u64), self.state.label(t, r as u64));
        if ll == rl {
            return Ok(ll);
        }
        let (vl, vr) = (self.values[t][l], self.values[t][r]);
        let left = match vl.partial_cmp(&vr) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Less) => false,
            _ => !rng.random::<bool>(),
        };
        Ok(if left { ll } else { rl })
    }

    /// Learns the verifier's challenge once the round is over.
    pub fn observe(&mut self, challenge: bool) {
        self.node = 2 * self.node + 1 + usize::from(challenge);
        self.round += 1;
        if self.round.is_multiple_of(self.state.depth()) {
            self.node = 0;
        }
    }
}

pub fn naive_answer<R: RngCore + ?Sized>(rng: &mut R) -> bool {
    rng.random::<bool>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Responder;
    use rand::rngs::SmallRng;
    use rand::SeedableRng;
    use std::string::ToString;

    fn b(s: &str) -> Bits {
        s.parse().unwrap()
    }

    #[test]
    fn strategy_ids() {
        for s in ["mafia-preask", "distance-earlyreply", "naive-random"] {
            assert_eq!(s.parse::<Strategy>().unwrap().to_string(), s);
        }
        assert!("post-ask".parse::<Strategy>().is_err());
    }

    #[test]
    fn matching_challenges_always_win() {
        let mut rng = SmallRng::seed_from_u64(8);
        for _ in 0..200 {
            let regs = RegisterSet::random(12, &mut rng).unwrap();
            let c = Bits::random(12, &mut rng);
            let r: Bits = (1..=12).map(|i| regs.answer(&c, i)).collect();
            let mut m = MafiaState::new(c.clone(), r).unwrap();
            for i in 1..=12 {
                let a = m.mafia_preask_answer(i, c.get(i - 1), &mut rng).unwrap();
                assert_eq!(a, regs.answer(&c, i));
            }
            assert!(m.prefixes_equal());
            assert!(!m.xor_guess());
        }
    }

    #[test]
    fn mafia_round_range_checked() {
        let mut m = MafiaState::new(b("01"), b("11")).unwrap();
        let mut rng = SmallRng::seed_from_u64(0);
        assert!(m.mafia_preask_answer(0, true, &mut rng).is_err());
        assert!(m.mafia_preask_answer(3, true, &mut rng).is_err());
        assert!(m.mafia_preask_answer_hk(3, true, &mut rng).is_err());
        assert!(MafiaState::new(b("01"), b("1")).is_err());
    }

    #[test]
    fn hk_relay_on_match() {
        let m = MafiaState::new(b("0110"), b("1010")).unwrap();
        let mut rng = SmallRng::seed_from_u64(0);
        for i in 1..=4 {
            let c = m.preask_challenges().get(i - 1);
            assert_eq!(
                m.mafia_preask_answer_hk(i, c, &mut rng).unwrap(),
                m.preask_responses().get(i - 1)
            );
        }
    }

    #[test]
    fn zero_q_keeps_estimate_exact() {
        let mut rng = SmallRng::seed_from_u64(5);
        let n = 16;
        let regs = RegisterSet::new(
            Bits::zeros(n),
            Bits::random(n, &mut rng),
            Bits::random(n, &mut rng),
        )
        .unwrap();
        let mut d = DistanceState::new(regs);
        for i in 1..=n {
            d.distance_earlyreply_answer(i, &mut rng).unwrap();
            assert!(!d.f_estimate());
        }
        assert_eq!(d.assumed_challenges().len(), n);
        assert!(d.distance_earlyreply_answer(n + 1, &mut rng).is_err());
    }

    #[test]
    fn hk_early_reply_certain_on_equal_registers() {
        let mut rng = SmallRng::seed_from_u64(6);
        let r = Bits::random(20, &mut rng);
        let hk = HkRegisters::new(r.clone(), r.clone()).unwrap();
        for i in 1..=20 {
            assert_eq!(
                distance_earlyreply_answer_hk(&hk, i, &mut rng).unwrap(),
                r.get(i - 1)
            );
        }
    }

    #[test]
    fn depth_one_tree_factors() {
        let equal = AtTreeState::from_stream(1, 1, &b("11")).unwrap();
        assert_eq!(distance_at_optimal(&equal), 1.0);
        let differ = AtTreeState::from_stream(1, 1, &b("01")).unwrap();
        assert_eq!(distance_at_optimal(&differ), 0.5);
        let both = AtTreeState::from_stream(1, 2, &b("0100")).unwrap();
        assert_eq!(distance_at_optimal(&both), 0.5);
    }

    #[test]
    fn depth_two_hand_value() {
        // labels: L=0 R=1 | LL=0 LR=0 | RL=1 RR=0
        // V(L) = 1 (children agree), V(R) = 1/2, root children differ: max(1, 1/2)/2.
        let at = AtTreeState::from_stream(2, 1, &b("010010")).unwrap();
        assert_eq!(distance_at_optimal(&at), 0.5);
    }
}
