//! Baseline responders (two-register and tree-based) and per-protocol
//! memory accounting.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::RngCore;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::prf::Prf;
use crate::protocol::{Nonce, Responder, SecretKey};

/// Largest tree depth [`AtTreeState`] will allocate.
pub const MAX_MATERIALIZED_DEPTH: usize = 24;

/// Protocol identifiers as used on the command line.
///
/// `at` without a depth is a single tree spanning all rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolId {
    Ours,
    Hk,
    At { depth: Option<usize> },
}

impl ProtocolId {
    pub const AT3: ProtocolId = ProtocolId::At { depth: Some(3) };
    pub const AT_FULL: ProtocolId = ProtocolId::At { depth: None };

    pub fn has_detector(self) -> bool {
        self == ProtocolId::Ours
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolId::Ours => f.write_str("ours"),
            ProtocolId::Hk => f.write_str("hk"),
            ProtocolId::At { depth: None } => f.write_str("at"),
            ProtocolId::At { depth: Some(3) } => f.write_str("at3"),
            ProtocolId::At { depth: Some(d) } => write!(f, "at:d={d}"),
        }
    }
}

impl FromStr for ProtocolId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownProtocol(s.to_string());
        match s {
            "ours" => Ok(ProtocolId::Ours),
            "hk" => Ok(ProtocolId::Hk),
            "at" => Ok(ProtocolId::AT_FULL),
            "at3" => Ok(ProtocolId::AT3),
            _ => {
                let d = s.strip_prefix("at:d=").ok_or_else(unknown)?;
                let depth: usize = d.parse().map_err(|_| unknown())?;
                if depth == 0 {
                    return Err(unknown());
                }
                Ok(ProtocolId::At { depth: Some(depth) })
            }
        }
    }
}

/// A protocol instantiated for `n` rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResponderSpec {
    protocol: ProtocolId,
    n: usize,
}

impl ResponderSpec {
    pub fn new(protocol: ProtocolId, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroRounds);
        }
        if let ProtocolId::At { depth: Some(d) } = protocol {
            if !n.is_multiple_of(d) {
                return Err(Error::TreeShape {
                    depth: d,
                    rounds: n,
                });
            }
        }
        Ok(Self { protocol, n })
    }

    pub fn protocol(&self) -> ProtocolId {
        self.protocol
    }

    pub fn rounds(&self) -> usize {
        self.n
    }

    /// `(depth, trees)` for tree protocols.
    pub fn tree_shape(&self) -> Option<(usize, usize)> {
        match self.protocol {
            ProtocolId::At { depth } => {
                let d = depth.unwrap_or(self.n);
                Some((d, self.n / d))
            }
            _ => None,
        }
    }
}

/// Fast-phase state size in bits: `3n`, `2n`, or `l (2^{d+1} - 1)`.
///
/// Saturates at `u128::MAX` for absurd depths.
pub fn memory_bits(spec: &ResponderSpec) -> u128 {
    let n = spec.n as u128;
    match spec.protocol {
        ProtocolId::Ours => 3 * n,
        ProtocolId::Hk => 2 * n,
        ProtocolId::At { .. } => {
            let (d, l) = spec.tree_shape().expect("tree protocol");
            tree_nodes(d).saturating_mul(l as u128)
        }
    }
}

fn tree_nodes(depth: usize) -> u128 {
    if depth + 1 >= 128 {
        u128::MAX
    } else {
        (1u128 << (depth + 1)) - 1
    }
}

/// The two answer registers of the two-register protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HkRegisters {
    r0: Bits,
    r1: Bits,
}

impl HkRegisters {
    pub fn new(r0: Bits, r1: Bits) -> Result<Self> {
        if r0.is_empty() {
            return Err(Error::ZeroRounds);
        }
        if r0.len() != r1.len() {
            return Err(Error::LengthMismatch {
                expected: r0.len(),
                found: r1.len(),
            });
        }
        Ok(Self { r0, r1 })
    }

    pub fn random<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        Self::new(Bits::random(n, rng), Bits::random(n, rng))
    }

    pub fn derive<P: Prf + ?Sized>(
        prf: &P,
        key: &SecretKey,
        np: &Nonce,
        nv: &Nonce,
        n: usize,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroRounds);
        }
        let stream = prf.expand(key, np, nv, 2 * n);
        Self::new(stream.slice(0, n), stream.slice(n, 2 * n))
    }

    pub fn r0(&self) -> &Bits {
        &self.r0
    }

    pub fn r1(&self) -> &Bits {
        &self.r1
    }
}

impl Responder for HkRegisters {
    fn rounds(&self) -> usize {
        self.r0.len()
    }

    #[inline]
    fn answer(&self, challenges: &Bits, round: usize) -> bool {
        let idx = round - 1;
        if challenges.get(idx) {
            self.r1.get(idx)
        } else {
            self.r0.get(idx)
        }
    }

    fn state_bits(&self) -> usize {
        2 * self.r0.len()
    }
}

/// `R_i^{c_i}`.
pub fn hk_respond(r0: &Bits, r1: &Bits, round: usize, challenge: bool) -> Result<bool> {
    if r0.len() != r1.len() {
        return Err(Error::LengthMismatch {
            expected: r0.len(),
            found: r1.len(),
        });
    }
    if round == 0 || round > r0.len() {
        return Err(Error::RoundOutOfRange {
            round,
            rounds: r0.len(),
        });
    }
    Ok(if challenge { r1 } else { r0 }.get(round - 1))
}

/// Label source for a forest of `trees` complete binary trees of depth `depth`.
///
/// Nodes use heap numbering: root `0`, children of `v` at `2v + 1` (challenge 0)
/// and `2v + 2` (challenge 1). Only non-root nodes carry labels.
pub trait TreeLabels {
    fn depth(&self) -> usize;
    fn trees(&self) -> usize;
    fn label(&self, tree: usize, node: u64) -> bool;
}

/// Heap index reached from the root by `path`.
#[inline]
pub fn walk(path: impl IntoIterator<Item = bool>) -> u64 {
    path.into_iter()
        .fold(0u64, |node, c| 2 * node + 1 + u64::from(c))
}

/// Tree answer for 1-based `round`: the label at the end of the path spelled by
/// the challenges of the current block of `depth` rounds.
#[inline]
pub(crate) fn tree_answer<T: TreeLabels + ?Sized>(
    labels: &T,
    challenges: &Bits,
    round: usize,
) -> bool {
    let d = labels.depth();
    let tree = (round - 1) / d;
    let start = tree * d;
    let node = walk((start..round).map(|j| challenges.get(j)));
    labels.label(tree, node)
}

/// Fully materialized tree labels, filled breadth-first from a bit stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtTreeState {
    depth: usize,
    labels: Vec<Bits>,
}

impl AtTreeState {
    /// Non-root labels per tree.
    pub fn labels_per_tree(depth: usize) -> usize {
        (1usize << (depth + 1)) - 2
    }

    fn check_shape(depth: usize, trees: usize) -> Result<()> {
        if depth == 0 || trees == 0 {
            return Err(Error::ZeroRounds);
        }
        if depth > MAX_MATERIALIZED_DEPTH {
            return Err(Error::TreeTooDeep(depth));
        }
        Ok(())
    }

    /// Tree `t` takes bits `t * L .. (t + 1) * L` of `stream`, `L` non-root
    /// labels per tree in breadth-first order.
    pub fn from_stream(depth: usize, trees: usize, stream: &Bits) -> Result<Self> {
        Self::check_shape(depth, trees)?;
        let per = Self::labels_per_tree(depth);
        if stream.len() != per * trees {
            return Err(Error::LengthMismatch {
                expected: per * trees,
                found: stream.len(),
            });
        }
        let labels = (0..trees)
            .map(|t| stream.slice(t * per, (t + 1) * per))
            .collect();
        Ok(Self { depth, labels })
    }

    pub fn random<R: RngCore + ?Sized>(depth: usize, trees: usize, rng: &mut R) -> Result<Self> {
        Self::check_shape(depth, trees)?;
        let stream = Bits::random(Self::labels_per_tree(depth) * trees, rng);
        Self::from_stream(depth, trees, &stream)
    }

    pub fn derive<P: Prf + ?Sized>(
        prf: &P,
        key: &SecretKey,
        np: &Nonce,
        nv: &Nonce,
        depth: usize,
        trees: usize,
    ) -> Result<Self> {
        Self::check_shape(depth, trees)?;
        let stream = prf.expand(key, np, nv, Self::labels_per_tree(depth) * trees);
        Self::from_stream(depth, trees, &stream)
    }

    pub fn tree_labels(&self, tree: usize) -> &Bits {
        &self.labels[tree]
    }
}

impl TreeLabels for AtTreeState {
    fn depth(&self) -> usize {
        self.depth
    }

    fn trees(&self) -> usize {
        self.labels.len()
    }

    fn label(&self, tree: usize, node: u64) -> bool {
        assert!(node >= 1, "the root carries no label");
        self.labels[tree].get(node as usize - 1)
    }
}

impl Responder for AtTreeState {
    fn rounds(&self) -> usize {
        self.depth * self.labels.len()
    }

    fn answer(&self, challenges: &Bits, round: usize) -> bool {
        tree_answer(self, challenges, round)
    }

    fn state_bits(&self) -> usize {
        usize::try_from(tree_nodes(self.depth).saturating_mul(self.labels.len() as u128))
            .unwrap_or(usize::MAX)
    }
}

/// Tree answer for 1-based `round` given exactly `round` challenges.
pub fn at_respond(state: &AtTreeState, round: usize, challenges: &Bits) -> Result<bool> {
    let n = state.rounds();
    if round == 0 || round > n {
        return Err(Error::RoundOutOfRange { round, rounds: n });
    }
    if challenges.len() != round {
        return Err(Error::LengthMismatch {
            expected: round,
            found: challenges.len(),
        });
    }
    Ok(tree_answer(state, challenges, round))
}

/// Trees whose labels are evaluated on demand from a per-session key, so that
/// deep trees can be simulated without allocating `2^d` labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LazyAtTree {
    depth: usize,
    trees: usize,
    key: u64,
}

impl LazyAtTree {
    pub fn new(depth: usize, trees: usize, key: u64) -> Result<Self> {
        if depth == 0 || trees == 0 {
            return Err(Error::ZeroRounds);
        }
        if depth > 62 {
            return Err(Error::TreeTooDeep(depth));
        }
        Ok(Self { depth, trees, key })
    }

    pub fn random<R: RngCore + ?Sized>(depth: usize, trees: usize, rng: &mut R) -> Result<Self> {
        Self::new(depth, trees, rng.next_u64())
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl TreeLabels for LazyAtTree {
    fn depth(&self) -> usize {
        self.depth
    }

    fn trees(&self) -> usize {
        self.trees
    }

    #[inline]
    fn label(&self, tree: usize, node: u64) -> bool {
        let h = splitmix64(self.key ^ splitmix64((tree as u64) << 1 | 1) ^ node);
        splitmix64(h) & 1 == 1
    }
}

impl Responder for LazyAtTree {
    fn rounds(&self) -> usize {
        self.depth * self.trees
    }

    fn answer(&self, challenges: &Bits, round: usize) -> bool {
        tree_answer(self, challenges, round)
    }

    fn state_bits(&self) -> usize {
        usize::try_from(tree_nodes(self.depth).saturating_mul(self.trees as u128))
            .unwrap_or(usize::MAX)
    }
}

/// Human-readable description used in diagnostics.
pub fn describe(spec: &ResponderSpec) -> String {
    match spec.tree_shape() {
        Some((d, l)) => format!("{} (n={}, {l} trees of depth {d})", spec.protocol, spec.n),
        None => format!("{} (n={})", spec.protocol, spec.n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::SmallRng;
    use rand::SeedableRng;

    fn b(s: &str) -> Bits {
        s.parse().unwrap()
    }

    #[test]
    fn protocol_ids_parse_and_print() {
        for s in ["ours", "hk", "at", "at3", "at:d=4"] {
            assert_eq!(s.parse::<ProtocolId>().unwrap().to_string(), s);
        }
        assert_eq!("at:d=3".parse::<ProtocolId>().unwrap(), ProtocolId::AT3);
        for bad in ["", "ka2", "at:d=0", "at:d=x", "poulidor"] {
            assert!(matches!(
                bad.parse::<ProtocolId>(),
                Err(Error::UnknownProtocol(_))
            ));
        }
    }

    #[test]
    fn memory_examples() {
        for n in 1..=20usize {
            let full = ResponderSpec::new(ProtocolId::AT_FULL, n).unwrap();
            assert_eq!(memory_bits(&full), (1u128 << (n + 1)) - 1);
        }
        let at3 = ResponderSpec::new(ProtocolId::AT3, 48).unwrap();
        assert_eq!(memory_bits(&at3), 240);
        assert_eq!(240, 5 * 48);
        let ours = ResponderSpec::new(ProtocolId::Ours, 64).unwrap();
        assert_eq!(memory_bits(&ours), 192);
        assert_eq!(
            memory_bits(&ResponderSpec::new(ProtocolId::Hk, 10).unwrap()),
            20
        );
        assert_eq!(
            ResponderSpec::new(ProtocolId::AT3, 10),
            Err(Error::TreeShape {
                depth: 3,
                rounds: 10
            })
        );
    }

    #[test]
    fn memory_linear_variants_stay_under_five_n() {
        for n in (3..=64).step_by(3) {
            let at3 = memory_bits(&ResponderSpec::new(ProtocolId::AT3, n).unwrap());
            let ours = memory_bits(&ResponderSpec::new(ProtocolId::Ours, n).unwrap());
            assert!(at3 <= 5 * n as u128);
            assert_eq!(ours, 3 * n as u128);
        }
    }

    #[test]
    fn hk_lookup() {
        assert!(hk_respond(&b("0110"), &b("1001"), 2, false).unwrap());
        let r = b("1011");
        for i in 1..=4 {
            assert_eq!(
                hk_respond(&r, &r, i, false).unwrap(),
                hk_respond(&r, &r, i, true).unwrap()
            );
        }
        assert_eq!(
            hk_respond(&r, &r, 5, true),
            Err(Error::RoundOutOfRange {
                round: 5,
                rounds: 4
            })
        );
        assert!(hk_respond(&r, &r, 0, true).is_err());
    }

    #[test]
    fn hk_answer_ignores_earlier_challenges() {
        let mut rng = SmallRng::seed_from_u64(1);
        let hk = HkRegisters::random(6, &mut rng).unwrap();
        for c in 0u32..64 {
            let ch: Bits = (0..6).map(|k| (c >> k) & 1 == 1).collect();
            for i in 1..=6 {
                let mut flipped = ch.clone();
                for j in 0..i - 1 {
                    flipped.flip(j);
                }
                assert_eq!(hk.answer(&ch, i), hk.answer(&flipped, i));
            }
        }
    }

    #[test]
    fn depth_one_trees_match_register_pair() {
        let mut rng = SmallRng::seed_from_u64(2);
        let at = AtTreeState::random(1, 8, &mut rng).unwrap();
        // Each depth-1 tree stores labels [left, right] = [R^0_i, R^1_i].
        let r0: Bits = (0..8).map(|t| at.tree_labels(t).get(0)).collect();
        let r1: Bits = (0..8).map(|t| at.tree_labels(t).get(1)).collect();
        let hk = HkRegisters::new(r0, r1).unwrap();
        for _ in 0..50 {
            let ch = Bits::random(8, &mut rng);
            for i in 1..=8 {
                assert_eq!(at.answer(&ch, i), hk.answer(&ch, i));
            }
        }
    }

    #[test]
    fn depth_two_hand_walk() {
        // Non-root nodes in breadth-first order: 1=L, 2=R, 3=LL, 4=LR, 5=RL, 6=RR.
        let at = AtTreeState::from_stream(2, 1, &b("010110")).unwrap();
        // prefix "10": root -> child 1 (node 2, label 1) -> child 0 (node 5, label 1)
        assert!(at_respond(&at, 1, &b("1")).unwrap());
        assert!(at_respond(&at, 2, &b("10")).unwrap());
        // prefix "01": node 1 (label 0) -> node 4 (label 1)
        assert!(!at_respond(&at, 1, &b("0")).unwrap());
        assert!(at_respond(&at, 2, &b("01")).unwrap());
        // prefix "00": node 3 (label 0)
        assert!(!at_respond(&at, 2, &b("00")).unwrap());
        assert!(at_respond(&at, 3, &b("000")).is_err());
        assert!(at_respond(&at, 2, &b("1")).is_err());
    }

    #[test]
    fn tree_answers_depend_only_on_current_block() {
        let mut rng = SmallRng::seed_from_u64(3);
        let at = AtTreeState::random(2, 2, &mut rng).unwrap();
        for c in 0u32..16 {
            let ch: Bits = (0..4).map(|k| (c >> k) & 1 == 1).collect();
            for flip in 0..2 {
                let mut other = ch.clone();
                other.flip(flip);
                for round in 3..=4 {
                    assert_eq!(at.answer(&ch, round), at.answer(&other, round));
                }
            }
        }
    }

    #[test]
    fn lazy_tree_is_deterministic_and_balanced() {
        let t = LazyAtTree::new(48, 1, 99).unwrap();
        let mut rng = SmallRng::seed_from_u64(4);
        let ch = Bits::random(48, &mut rng);
        let a: Bits = (1..=48).map(|i| t.answer(&ch, i)).collect();
        let b: Bits = (1..=48).map(|i| t.answer(&ch, i)).collect();
        assert_eq!(a, b);
        let ones: usize = (1..5000u64).filter(|&v| t.label(0, v)).count();
        assert!((2300..2700).contains(&ones), "{ones}");
    }
}
