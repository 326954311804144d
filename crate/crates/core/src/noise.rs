//! Memoryless bit-flip channels, the switch detector and the tolerant decision.

use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::bits::Bits;
use crate::error::{check_probability, Error, Result};
use crate::protocol::{Decision, Responder, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseModel {
    p_f: f64,
    p_b: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel { p_f: 0.0, p_b: 0.0 };

    pub fn new(p_f: f64, p_b: f64) -> Result<Self> {
        Ok(Self {
            p_f: check_probability(p_f)?,
            p_b: check_probability(p_b)?,
        })
    }

    pub fn p_f(&self) -> f64 {
        self.p_f
    }

    pub fn p_b(&self) -> f64 {
        self.p_b
    }

    pub fn is_noiseless(&self) -> bool {
        self.p_f == 0.0 && self.p_b == 0.0
    }

    /// Sends a challenge bit over the forward channel.
    #[inline]
    pub fn forward<R: RngCore + ?Sized>(&self, bit: bool, rng: &mut R) -> bool {
        bit ^ flip(self.p_f, rng)
    }

    /// Sends a response bit over the backward channel.
    #[inline]
    pub fn backward<R: RngCore + ?Sized>(&self, bit: bool, rng: &mut R) -> bool {
        bit ^ flip(self.p_b, rng)
    }
}

/// No randomness is drawn for a silent channel.
#[inline]
fn flip<R: RngCore + ?Sized>(p: f64, rng: &mut R) -> bool {
    p > 0.0 && (p >= 1.0 || rng.random::<f64>() < p)
}

/// `d_i = r~_i xor (expected answer on the verifier's own challenges)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MismatchVector(Bits);

impl MismatchVector {
    pub fn compute<T: Responder + ?Sized>(
        responder: &T,
        sent_challenges: &Bits,
        received_responses: &Bits,
    ) -> Result<Self> {
        let n = responder.rounds();
        for len in [sent_challenges.len(), received_responses.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        Ok(Self(
            (1..=n)
                .map(|i| received_responses.get(i - 1) ^ responder.answer(sent_challenges, i))
                .collect(),
        ))
    }

    pub fn from_bits(d: Bits) -> Self {
        Self(d)
    }

    pub fn bits(&self) -> &Bits {
        &self.0
    }

    pub fn into_bits(self) -> Bits {
        self.0
    }
}

/// Honest run over noisy channels on the given verifier challenges.
///
/// The prover answers from the prefix it actually received.
pub fn apply_noise_to<T: Responder + ?Sized, R: RngCore + ?Sized>(
    responder: &T,
    sent_challenges: &Bits,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Transcript> {
    let n = responder.rounds();
    if sent_challenges.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: sent_challenges.len(),
        });
    }
    let mut received_challenges = Bits::with_capacity(n);
    let mut sent_responses = Bits::with_capacity(n);
    let mut received_responses = Bits::with_capacity(n);
    for i in 1..=n {
        received_challenges.push(noise.forward(sent_challenges.get(i - 1), rng));
        let r = responder.answer(&received_challenges, i);
        sent_responses.push(r);
        received_responses.push(noise.backward(r, rng));
    }
    Ok(Transcript {
        sent_challenges: sent_challenges.clone(),
        received_challenges,
        sent_responses,
        received_responses,
    })
}

/// Honest run over noisy channels with uniformly drawn verifier challenges.
pub fn apply_noise<T: Responder + ?Sized, R: RngCore + ?Sized>(
    responder: &T,
    noise: &NoiseModel,
    rng: &mut R,
) -> Transcript {
    let sent = Bits::random(responder.rounds(), rng);
    apply_noise_to(responder, &sent, noise, rng).expect("challenge length matches")
}

/// Per round, whether `f_Q` on the sent prefix differs from `f_Q` on the received one.
pub fn desync_vector(q: &Bits, sent: &Bits, received: &Bits) -> Bits {
    let mut out = Bits::with_capacity(q.len());
    let mut parity = false;
    for i in 0..q.len() {
        if q.get(i) {
            parity ^= sent.get(i) ^ received.get(i);
        }
        out.push(parity);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SwitchEvent {
    /// 1-based round with `q_round = 1`.
    pub round: usize,
    /// `true` when the switch is into the desynchronized state.
    pub desync: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Match {
    /// Absolute positions of the first and last matched symbol, sentinels included.
    i: usize,
    j: usize,
    /// Absolute position of the first symbol of the run.
    anchor: usize,
    desync: bool,
}

/// Longest match of `^(1+)0 | ^(1+)$ | 0(1+)0 | 0(1+)$ | 1(0+)1 | 1(0+)$` in
/// `d[lo..hi]`, anchors taken at the subrange boundaries. Leftmost wins ties.
fn longest_match(d: &Bits, lo: usize, hi: usize) -> Option<Match> {
    let mut best: Option<Match> = None;
    let mut a = lo;
    while a < hi {
        let v = d.get(a);
        let mut b = a;
        while b + 1 < hi && d.get(b + 1) == v {
            b += 1;
        }
        let at_start = a == lo;
        let at_end = b + 1 == hi;
        let cand = match (v, at_start) {
            (false, true) => None,
            (_, true) => Some((a, if at_end { b } else { b + 1 })),
            (_, false) => Some((a - 1, if at_end { b } else { b + 1 })),
        };
        if let Some((i, j)) = cand {
            if best.is_none_or(|m| j - i > m.j - m.i) {
                best = Some(Match {
                    i,
                    j,
                    anchor: a,
                    desync: v,
                });
            }
        }
        a = b + 1;
    }
    best
}

/// Position of the one in `q` nearest to `pos`, the lower one on ties.
fn nearest_one(q: &Bits, pos: usize) -> Option<usize> {
    let n = q.len();
    for dist in 0..n {
        if dist <= pos && q.get(pos - dist) {
            return Some(pos - dist);
        }
        if pos + dist < n && q.get(pos + dist) {
            return Some(pos + dist);
        }
        if dist > pos && pos + dist >= n {
            break;
        }
    }
    None
}

/// Detected switches of the synchronization state, in increasing round order
/// with alternating directions.
///
/// The longest pattern spanning at least `dl` positions becomes a switch at
/// the nearest round with `q = 1`; the parts left and right of the match are
/// searched the same way. Overlapping results keep the earliest of any pair
/// that would break the ordering or the alternation.
pub fn switched_rounds(d: &Bits, q: &Bits, dl: usize) -> Result<Vec<SwitchEvent>> {
    if d.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: d.len(),
            found: q.len(),
        });
    }
    if dl == 0 {
        return Err(Error::ZeroThreshold);
    }
    let mut raw = Vec::new();
    if q.any() {
        let mut stack = alloc::vec![(0usize, d.len())];
        while let Some((lo, hi)) = stack.pop() {
            let Some(m) = longest_match(d, lo, hi) else {
                continue;
            };
            if m.j - m.i < dl {
                continue;
            }
            let r = nearest_one(q, m.anchor).expect("q has a one");
            raw.push(SwitchEvent {
                round: r + 1,
                desync: m.desync,
            });
            stack.push((lo, m.i));
            stack.push((m.j + 1, hi));
        }
    }
    Ok(merge_events(raw))
}

fn merge_events(mut raw: Vec<SwitchEvent>) -> Vec<SwitchEvent> {
    // the stack pops the left part first, so discovery order is close to
    // positional order; a stable sort by round settles the rest
    raw.sort_by_key(|e| e.round);
    let mut out: Vec<SwitchEvent> = Vec::with_capacity(raw.len());
    for e in raw {
        match out.last() {
            Some(last) if e.round <= last.round || e.desync == last.desync => {}
            _ => out.push(e),
        }
    }
    out
}

/// Error count of the sweep: a switch round costs one error and sets the
/// state; any other round costs one error when `d_i` differs from the state.
pub fn count_errors(d: &Bits, events: &[SwitchEvent]) -> usize {
    let mut errors = 0;
    let mut state = false;
    let mut next = events.iter().peekable();
    for i in 0..d.len() {
        match next.peek() {
            Some(e) if e.round == i + 1 => {
                state = e.desync;
                errors += 1;
                next.next();
            }
            _ => errors += usize::from(d.get(i) != state),
        }
    }
    errors
}

/// Errors seen by the decision for each threshold `1..=dl_max` (index `dl - 1`).
///
/// No match can span more than `n + 1` positions, so every larger threshold
/// degenerates to counting the ones of `d`.
pub fn error_profile(d: &Bits, q: &Bits, dl_max: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(dl_max);
    let longest = longest_match(d, 0, d.len()).map_or(0, |m| m.j - m.i);
    let plain = d.count_ones();
    for dl in 1..=dl_max {
        if dl > longest {
            out.push(plain);
        } else {
            out.push(count_errors(d, &switched_rounds(d, q, dl)?));
        }
    }
    Ok(out)
}

/// Accepts when the detector-corrected error count is at most `x`.
pub fn decide_noisy<T: Responder + ?Sized>(
    responder: &T,
    q: &Bits,
    sent_challenges: &Bits,
    received_responses: &Bits,
    x: usize,
    dl: usize,
) -> Result<Decision> {
    let n = responder.rounds();
    if x > n {
        return Err(Error::ToleranceOutOfRange { x, n });
    }
    let d = MismatchVector::compute(responder, sent_challenges, received_responses)?;
    let events = switched_rounds(d.bits(), q, dl)?;
    Ok(Decision::from_accept(count_errors(d.bits(), &events) <= x))
}

/// Plain threshold decision for protocols without a detector.
pub fn decide_threshold<T: Responder + ?Sized>(
    responder: &T,
    sent_challenges: &Bits,
    received_responses: &Bits,
    x: usize,
) -> Result<Decision> {
    let n = responder.rounds();
    if x > n {
        return Err(Error::ToleranceOutOfRange { x, n });
    }
    let d = MismatchVector::compute(responder, sent_challenges, received_responses)?;
    Ok(Decision::from_accept(d.bits().count_ones() <= x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::RegisterSet;
    use rand::rngs::SmallRng;
    use rand::SeedableRng;

    fn b(s: &str) -> Bits {
        s.parse().unwrap()
    }

    fn ev(round: usize, desync: bool) -> SwitchEvent {
        SwitchEvent { round, desync }
    }

    #[test]
    fn leading_zeros_never_match() {
        for dl in 1..8 {
            assert!(switched_rounds(&b("000000"), &b("111111"), dl)
                .unwrap()
                .is_empty());
        }
    }

    #[test]
    fn ones_between_zeros() {
        let got = switched_rounds(&b("000111111000"), &b("000100000000"), 3).unwrap();
        assert_eq!(got, [ev(4, true)]);
    }

    #[test]
    fn leading_ones() {
        let got = switched_rounds(&b("111000"), &b("100000"), 2).unwrap();
        assert_eq!(got, [ev(1, true)]);
    }

    #[test]
    fn span_convention() {
        // 0110: span 3 with both sentinels
        assert_eq!(
            switched_rounds(&b("0110"), &b("0100"), 3).unwrap(),
            [ev(2, true)]
        );
        assert!(switched_rounds(&b("0110"), &b("0100"), 4)
            .unwrap()
            .is_empty());
        // ^11$: span 1
        assert_eq!(
            switched_rounds(&b("11"), &b("01"), 1).unwrap(),
            [ev(2, true)]
        );
        assert!(switched_rounds(&b("11"), &b("01"), 2).unwrap().is_empty());
    }

    #[test]
    fn back_to_sync() {
        // the trailing zeros outspan the ones, so the resync is found first
        let d = b("0011000000");
        let q = b("0010100000");
        let events = switched_rounds(&d, &q, 1).unwrap();
        assert_eq!(events, [ev(3, true), ev(5, false)]);
        assert_eq!(count_errors(&d, &events), 2);
        let events = switched_rounds(&d, &q, 3).unwrap();
        assert_eq!(events, [ev(5, false)]);
        assert_eq!(count_errors(&d, &events), 3);
    }

    #[test]
    fn right_part_loses_its_sentinel() {
        // after 0(1+)0 the remaining zeros start the subrange and cannot match
        let d = b("0011110000");
        let q = b("0010001000");
        assert_eq!(switched_rounds(&d, &q, 3).unwrap(), [ev(3, true)]);
    }

    #[test]
    fn nearest_one_prefers_lower_index() {
        assert_eq!(nearest_one(&b("10001"), 2), Some(0));
        assert_eq!(nearest_one(&b("00011"), 0), Some(3));
        assert_eq!(nearest_one(&b("00000"), 2), None);
    }

    #[test]
    fn no_switch_without_q_ones() {
        assert!(switched_rounds(&b("0111111"), &b("0000000"), 1)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn detector_errors() {
        assert!(switched_rounds(&b("01"), &b("1"), 1).is_err());
        assert_eq!(
            switched_rounds(&b("01"), &b("11"), 0),
            Err(Error::ZeroThreshold)
        );
    }

    #[test]
    fn alternating_mismatch_counts_every_one() {
        let d: Bits = (0..48).map(|i| i % 2 == 1).collect();
        let q = Bits::ones(48);
        for dl in 3..=49 {
            let events = switched_rounds(&d, &q, dl).unwrap();
            assert!(events.is_empty());
            assert_eq!(count_errors(&d, &events), 24);
        }
        // 0(1)0 has span 2, so a threshold of 2 already fires
        assert!(!switched_rounds(&d, &q, 2).unwrap().is_empty());
    }

    #[test]
    fn noiseless_run_matches_honest_answers() {
        let mut rng = SmallRng::seed_from_u64(3);
        let regs = RegisterSet::random(32, &mut rng).unwrap();
        let t = apply_noise(&regs, &NoiseModel::NONE, &mut rng);
        assert_eq!(t.sent_challenges, t.received_challenges);
        assert_eq!(t.sent_responses, t.received_responses);
        let d = MismatchVector::compute(&regs, &t.sent_challenges, &t.received_responses).unwrap();
        assert!(!d.bits().any());
        for dl in 1..5 {
            let dec = decide_noisy(
                &regs,
                regs.q(),
                &t.sent_challenges,
                &t.received_responses,
                0,
                dl,
            );
            assert!(dec.unwrap().is_accept());
        }
    }

    #[test]
    fn full_forward_flip_uses_other_register() {
        let regs = RegisterSet::new(b("1"), b("0"), b("1")).unwrap();
        let mut rng = SmallRng::seed_from_u64(0);
        let noise = NoiseModel::new(1.0, 0.0).unwrap();
        let t = apply_noise_to(&regs, &b("0"), &noise, &mut rng).unwrap();
        assert_eq!(t.received_challenges, b("1"));
        // R^1 xor f_Q(1) = 1 xor 1
        assert_eq!(t.sent_responses, b("0"));
    }

    #[test]
    fn noise_model_validation() {
        assert!(NoiseModel::new(-0.1, 0.0).is_err());
        assert!(NoiseModel::new(0.0, 1.1).is_err());
        assert!(NoiseModel::new(0.0, 0.0).unwrap().is_noiseless());
    }

    #[test]
    fn tolerance_bounds() {
        let regs = RegisterSet::new(b("1"), b("0"), b("1")).unwrap();
        assert!(decide_noisy(&regs, regs.q(), &b("0"), &b("0"), 2, 1).is_err());
        assert!(decide_threshold(&regs, &b("0"), &b("1"), 1)
            .unwrap()
            .is_accept());
        assert!(!decide_threshold(&regs, &b("0"), &b("1"), 0)
            .unwrap()
            .is_accept());
    }

    #[test]
    fn profile_matches_direct_calls() {
        let mut rng = SmallRng::seed_from_u64(12);
        for _ in 0..500 {
            let n = rng.random_range(1..40);
            let d = Bits::bernoulli(n, 0.3, &mut rng);
            let q = Bits::random(n, &mut rng);
            let prof = error_profile(&d, &q, n + 2).unwrap();
            for dl in 1..=n + 2 {
                let direct = count_errors(&d, &switched_rounds(&d, &q, dl).unwrap());
                assert_eq!(prof[dl - 1], direct);
            }
        }
    }
}
