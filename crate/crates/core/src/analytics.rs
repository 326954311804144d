//! Closed forms and recursions for the attack success probabilities.
//!
//! Two families live here. `mafia_success` and `distance_success` evaluate
//! the recursive formulas for the round-dependent protocol term by term. `mafia_strategy_success` and `distance_strategy_success` are
//! exact Markov-chain evaluations of the executable strategies in
//! [`crate::adversaries`]; the two families disagree from three rounds on
//! (mafia) and two rounds on (distance), see the `conflict_*` tests.

use alloc::vec::Vec;

use num_traits::Num;

use crate::error::{check_probability, Error, Result};

/// One step of the mafia recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MafiaRecursionRow {
    pub i: usize,
    /// Probability of winning round `i` given diverged prefixes and rounds `1..i` won.
    pub p_step: f64,
    /// Probability of winning rounds `1..=i` given diverged prefixes.
    pub p_m_given_neq: f64,
    /// Probability that the XOR guess is right after round `i`, given divergence and success.
    pub p_s_given: f64,
    pub p_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceRow {
    pub i: usize,
    pub p_d: f64,
    /// Joint probability of surviving round `i` with a correct parity estimate.
    pub p_df: f64,
}

fn check_rounds(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::ZeroRounds)
    } else {
        Ok(())
    }
}

fn from_u64<T: Num + Clone>(mut k: u64) -> T {
    // binary expansion keeps this exact for rationals
    let two = T::one() + T::one();
    let mut acc = T::zero();
    let mut place = T::one();
    while k > 0 {
        if k & 1 == 1 {
            acc = acc + place.clone();
        }
        place = place * two.clone();
        k >>= 1;
    }
    acc
}

fn pow2<T: Num + Clone>(i: usize) -> T {
    let two = T::one() + T::one();
    (0..i).fold(T::one(), |acc, _| acc * two.clone())
}

/// Rows `(i, step, P(M|≠), P(S|·), P(M))` for `i = 1..=n`, generic over the field.
fn mafia_rows_in<T: Num + Clone>(n: usize) -> Vec<[T; 4]> {
    let one = T::one();
    let half = one.clone() / (one.clone() + one.clone());
    let mut rows = Vec::with_capacity(n);
    // stopping conditions
    let mut p_neq = half.clone();
    let mut s = half.clone();
    let p1 = half.clone() + half.clone() * half.clone();
    rows.push([half.clone(), p_neq.clone(), s.clone(), p1]);
    for i in 2..=n {
        let two_i: T = pow2(i);
        let two_im1: T = pow2(i - 1);
        let denom = two_i.clone() - one.clone();
        let frac = two_im1 / denom.clone();
        let step = s.clone() * (one.clone() - frac.clone()) + half.clone() * frac;
        let inv = one.clone() / denom;
        let new_p = step.clone() * (inv.clone() + p_neq.clone() * (one.clone() - inv));
        let miss_i = one.clone() - one.clone() / two_i.clone();
        let miss_im1 = one.clone() - one.clone() / pow2::<T>(i - 1);
        let new_s = half.clone()
            + half.clone() * s.clone() * p_neq.clone() * miss_im1 * half.clone()
                / (new_p.clone() * miss_i.clone());
        let p_m = one.clone() / two_i + new_p.clone() * miss_i;
        p_neq = new_p;
        s = new_s;
        rows.push([step, p_neq.clone(), s.clone(), p_m]);
    }
    rows
}

pub fn mafia_table(n: usize) -> Result<Vec<MafiaRecursionRow>> {
    check_rounds(n)?;
    Ok(mafia_rows_in::<f64>(n)
        .into_iter()
        .enumerate()
        .map(
            |(k, [p_step, p_m_given_neq, p_s_given, p_m])| MafiaRecursionRow {
                i: k + 1,
                p_step,
                p_m_given_neq,
                p_s_given,
                p_m,
            },
        )
        .collect())
}

/// Mafia-fraud success of the pre-ask adversary after `n` rounds, by the
/// four coupled recurrences (step, conditional success, guess quality, total).
pub fn mafia_success(n: usize) -> Result<f64> {
    Ok(mafia_table(n)?[n - 1].p_m)
}

/// `(P(D_i), P(D_i, F_i))` for `i = 1..=n`.
///
/// `P(D_i) = P(D_{i-1})/4 + 2^-i + T_i/8` with `T_i = sum_{j<i} P(D_j) 2^{j-i}`
/// carried as `T_i = T_{i-1}/2 + P(D_{i-1})/2`, and
/// `P(D_i, F_i) = 2^-i + (T_i + P(D_i))/8`.
fn distance_rows_in<T: Num + Clone>(n: usize) -> Vec<[T; 2]> {
    let one = T::one();
    let two = one.clone() + one.clone();
    let four = two.clone() + two.clone();
    let eight = four.clone() + four.clone();
    let mut rows = Vec::with_capacity(n);
    let mut d_prev = one.clone();
    let mut t = T::zero();
    for i in 1..=n {
        if i > 1 {
            t = t / two.clone() + d_prev.clone() / two.clone();
        }
        let inv = one.clone() / pow2::<T>(i);
        let d = d_prev.clone() / four.clone() + inv.clone() + t.clone() / eight.clone();
        let df = inv + (t.clone() + d.clone()) / eight.clone();
        rows.push([d.clone(), df]);
        d_prev = d;
    }
    rows
}

pub fn distance_table(n: usize) -> Result<Vec<DistanceRow>> {
    check_rounds(n)?;
    Ok(distance_rows_in::<f64>(n)
        .into_iter()
        .enumerate()
        .map(|(k, [p_d, p_df])| DistanceRow {
            i: k + 1,
            p_d,
            p_df,
        })
        .collect())
}

/// Distance-fraud success of the early-reply prover after `n` rounds.
pub fn distance_success(n: usize) -> Result<f64> {
    Ok(distance_table(n)?[n - 1].p_d)
}

/// Success after each round of the pre-ask strategy, tracked over three states:
/// prefixes still equal (`e`), diverged with a correct guess (`g`) and diverged
/// with a wrong guess (`b`).
fn mafia_chain_in<T: Num + Clone>(n: usize) -> Vec<T> {
    let one = T::one();
    let two = one.clone() + one.clone();
    let eight = from_u64::<T>(8);
    let five = from_u64::<T>(5);
    let (mut e, mut g, mut b) = (one.clone(), T::zero(), T::zero());
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let ne = e.clone() / two.clone();
        let ng = (e.clone() + five.clone() * g.clone() + b.clone()) / eight.clone();
        let nb = (e + g + b) / eight.clone();
        e = ne;
        g = ng;
        b = nb;
        out.push(e.clone() + g.clone() + b.clone());
    }
    out
}

/// Success after each round of the early-reply strategy over two states:
/// estimate of `f_Q` correct (`f`) or wrong (`w`).
fn distance_chain_in<T: Num + Clone>(n: usize) -> Vec<T> {
    let eight = from_u64::<T>(8);
    let five = from_u64::<T>(5);
    let (mut f, mut w) = (T::one(), T::zero());
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let nf = (five.clone() * f.clone() + w.clone()) / eight.clone();
        let nw = (f + w) / eight.clone();
        f = nf;
        w = nw;
        out.push(f.clone() + w.clone());
    }
    out
}

/// Exact success probability of [`crate::adversaries::MafiaState::mafia_preask_answer`].
pub fn mafia_strategy_success(n: usize) -> Result<f64> {
    check_rounds(n)?;
    Ok(mafia_chain_in::<f64>(n)[n - 1])
}

/// Exact success probability of [`crate::adversaries::DistanceState::distance_earlyreply_answer`].
pub fn distance_strategy_success(n: usize) -> Result<f64> {
    check_rounds(n)?;
    Ok(distance_chain_in::<f64>(n)[n - 1])
}

pub fn naive_bound(n: usize) -> f64 {
    libm::pow(0.5, n as f64)
}

pub fn hk_mafia(n: usize) -> f64 {
    libm::pow(0.75, n as f64)
}

pub fn hk_distance(n: usize) -> f64 {
    libm::pow(0.75, n as f64)
}

/// Probability that one honest round of the two-register protocol arrives correct.
pub fn hk_round_success(p_f: f64, p_b: f64) -> Result<f64> {
    let (p_f, p_b) = (check_probability(p_f)?, check_probability(p_b)?);
    Ok(1.0 - p_f / 2.0 - p_b + p_f * p_b)
}

/// `P(Binomial(n, p) >= k)`.
pub fn binomial_at_least(n: usize, k: usize, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let nf = n as f64;
    let ln_fact_n = libm::lgamma(nf + 1.0);
    let (lp, lq) = (libm::log(p), libm::log1p(-p));
    let mut sum = 0.0;
    for i in k..=n {
        let fi = i as f64;
        let ln_c = ln_fact_n - libm::lgamma(fi + 1.0) - libm::lgamma(nf - fi + 1.0);
        sum += libm::exp(ln_c + fi * lp + (nf - fi) * lq);
    }
    sum.min(1.0)
}

/// Honest acceptance under noise with tolerance `x`: at least `n - x` correct rounds.
pub fn hk_acceptance(n: usize, x: usize, p_f: f64, p_b: f64) -> Result<f64> {
    if x > n {
        return Err(Error::ToleranceOutOfRange { x, n });
    }
    let w = hk_round_success(p_f, p_b)?;
    Ok(binomial_at_least(n, n - x, w))
}

/// False rejection ratio, the complement of [`hk_acceptance`].
pub fn hk_frr(n: usize, x: usize, p_f: f64, p_b: f64) -> Result<f64> {
    if x > n {
        return Err(Error::ToleranceOutOfRange { x, n });
    }
    let w = hk_round_success(p_f, p_b)?;
    if w >= 1.0 {
        return Ok(0.0);
    }
    // lower tail summed directly to keep precision when the FRR is tiny
    Ok((1.0 - binomial_at_least(n, n - x, w)).max(0.0))
}

/// Pre-ask mafia success against the two-register protocol under noise with
/// tolerance `x`. With `both_legs` the prover link is noisy too; otherwise only
/// the verifier link is.
pub fn hk_mafia_noisy(n: usize, x: usize, p_f: f64, p_b: f64, both_legs: bool) -> Result<f64> {
    if x > n {
        return Err(Error::ToleranceOutOfRange { x, n });
    }
    let (p_f, p_b) = (check_probability(p_f)?, check_probability(p_b)?);
    // a: the relayed challenge reaches the prover intact (or flipped twice),
    // b: the prover's answer survives both backward hops.
    let (a, b) = if both_legs {
        (
            p_f * p_f + (1.0 - p_f) * (1.0 - p_f),
            p_b * p_b + (1.0 - p_b) * (1.0 - p_b),
        )
    } else {
        (1.0 - p_f, 1.0 - p_b)
    };
    let w = 0.25 + 0.5 * (a * b + (1.0 - a) / 2.0);
    Ok(binomial_at_least(n, n - x, w))
}

/// Pre-ask success against one tree of depth `d`: either the whole path
/// matches, or the first divergence at level `k` leaves `d - k + 1` coin flips.
pub fn at_tree_mafia(d: usize) -> f64 {
    naive_bound(d) * (1.0 + d as f64 / 2.0)
}

pub fn at_mafia(d: usize, trees: usize) -> f64 {
    libm::pow(at_tree_mafia(d), trees as f64)
}

const EXACT_ATOMS: usize = 2048;
/// 32 bins per octave: the top five mantissa bits join the exponent.
const BIN_SHIFT: u32 = 47;

fn merge_sorted(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (v, w) in atoms {
        match merged.last_mut() {
            Some(last) if last.0 == v => last.1 += w,
            _ => merged.push((v, w)),
        }
    }
    merged
}

/// Pools atoms with values in (0, 1] by the leading bits of their encoding,
/// which orders like the values themselves.
fn pool(atoms: impl Iterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let max_key = 1f64.to_bits() >> BIN_SHIFT;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    for (v, w) in atoms {
        let back = (max_key - (v.to_bits() >> BIN_SHIFT)) as usize;
        if back >= bins.len() {
            bins.resize(back + 1, (0.0, 0.0));
        }
        bins[back].0 += v * w;
        bins[back].1 += w;
    }
    bins.into_iter()
        .rev()
        .filter(|b| b.1 > 0.0)
        .map(|(vw, w)| (vw / w, w))
        .collect()
}

/// Expected optimal early-reply value of a random tree for depths `1..=d_max`.
///
/// The root value of a depth-`h` tree is a function of two independent
/// depth-`h-1` subtree values and two fair labels:
/// `(V0 + V1)/2` when the labels agree and `max(V0, V1)/2` otherwise. The
/// value distribution is carried as atoms. It is exact while the support stays
/// below `EXACT_ATOMS`; past that, atoms are pooled into narrow log-spaced bins
/// that keep each bin's mass and mean.
pub fn at_tree_distance_table(d_max: usize) -> Vec<f64> {
    let mut atoms: Vec<(f64, f64)> = alloc::vec![(1.0, 1.0)];
    let mut out = Vec::with_capacity(d_max);
    for _ in 0..d_max {
        let pairs = atoms.iter().enumerate().flat_map(|(i, &(va, wa))| {
            atoms[i..].iter().enumerate().map(move |(k, &(vb, wb))| {
                let w = if k == 0 { wa * wb } else { 2.0 * wa * wb };
                (va, vb, w / 2.0)
            })
        });
        atoms = if atoms.len() <= EXACT_ATOMS / 2 {
            let mut next = Vec::with_capacity(atoms.len() * (atoms.len() + 1));
            for (va, vb, w) in pairs {
                next.push(((va + vb) / 2.0, w));
                next.push((va.max(vb) / 2.0, w));
            }
            let merged = merge_sorted(next);
            if merged.len() > EXACT_ATOMS {
                pool(merged.into_iter())
            } else {
                merged
            }
        } else {
            pool(pairs.flat_map(|(va, vb, w)| [((va + vb) / 2.0, w), (va.max(vb) / 2.0, w)]))
        };
        out.push(atoms.iter().map(|&(v, w)| v * w).sum());
    }
    out
}

pub fn at_tree_distance(d: usize) -> f64 {
    if d == 0 {
        return 1.0;
    }
    at_tree_distance_table(d)[d - 1]
}

pub fn at_distance(d: usize, trees: usize) -> f64 {
    libm::pow(at_tree_distance(d), trees as f64)
}

/// Exact rational evaluation of the same recursions, for cross-checking.
pub mod exact {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::ToPrimitive;

    /// Numerator and denominator roughly double in length every round, so
    /// this is practical up to about 18 rounds.
    pub fn mafia_success(n: usize) -> Result<BigRational> {
        check_rounds(n)?;
        Ok(mafia_rows_in::<BigRational>(n).pop().unwrap()[3].clone())
    }

    pub fn distance_success(n: usize) -> Result<BigRational> {
        check_rounds(n)?;
        Ok(distance_rows_in::<BigRational>(n).pop().unwrap()[0].clone())
    }

    pub fn mafia_strategy_success(n: usize) -> Result<BigRational> {
        check_rounds(n)?;
        Ok(mafia_chain_in::<BigRational>(n).pop().unwrap())
    }

    pub fn distance_strategy_success(n: usize) -> Result<BigRational> {
        check_rounds(n)?;
        Ok(distance_chain_in::<BigRational>(n).pop().unwrap())
    }

    /// All intermediate mafia quantities, as exact rationals.
    pub fn mafia_rows(n: usize) -> Result<Vec<[BigRational; 4]>> {
        check_rounds(n)?;
        Ok(mafia_rows_in::<BigRational>(n))
    }

    pub fn ratio(num: i64, den: i64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    pub fn to_f64(r: &BigRational) -> f64 {
        r.to_f64().unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::exact::{ratio, to_f64};
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mafia_small_values() {
        assert!(close(mafia_success(1).unwrap(), 0.75, 1e-12));
        assert!(close(mafia_success(2).unwrap(), 0.5, 1e-12));
        assert_eq!(exact::mafia_success(1).unwrap(), ratio(3, 4));
        assert_eq!(exact::mafia_success(2).unwrap(), ratio(1, 2));
        let t = mafia_table(2).unwrap();
        assert!(close(t[1].p_step, 0.5, 1e-15));
        assert!(close(t[1].p_m_given_neq, 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn distance_small_values() {
        assert!(close(distance_success(1).unwrap(), 0.75, 1e-12));
        assert!(close(distance_success(2).unwrap(), 31.0 / 64.0, 1e-12));
        assert_eq!(exact::distance_success(2).unwrap(), ratio(31, 64));
    }

    #[test]
    fn zero_rounds_rejected() {
        assert_eq!(mafia_success(0), Err(Error::ZeroRounds));
        assert_eq!(distance_success(0), Err(Error::ZeroRounds));
        assert!(mafia_strategy_success(0).is_err());
    }

    #[test]
    fn strategy_chains_match_enumeration() {
        // frozen from brute-force enumeration over registers, challenges and coins
        assert_eq!(exact::mafia_strategy_success(1).unwrap(), ratio(3, 4));
        assert_eq!(exact::mafia_strategy_success(2).unwrap(), ratio(1, 2));
        assert_eq!(exact::mafia_strategy_success(3).unwrap(), ratio(21, 64));
        assert_eq!(exact::distance_strategy_success(1).unwrap(), ratio(3, 4));
        assert_eq!(exact::distance_strategy_success(2).unwrap(), ratio(1, 2));
        assert_eq!(exact::distance_strategy_success(3).unwrap(), ratio(21, 64));
    }

    #[test]
    fn conflict_mafia_recursion_departs_at_three_rounds() {
        assert_eq!(exact::mafia_success(3).unwrap(), ratio(149, 448));
        assert_ne!(
            exact::mafia_success(3).unwrap(),
            exact::mafia_strategy_success(3).unwrap()
        );
    }

    #[test]
    fn conflict_distance_recursion_departs_at_two_rounds() {
        assert_ne!(
            exact::distance_success(2).unwrap(),
            exact::distance_strategy_success(2).unwrap()
        );
    }

    #[test]
    fn rational_cross_check() {
        for n in 1..=24 {
            let mut pairs = std::vec![
                (
                    distance_success(n).unwrap(),
                    to_f64(&exact::distance_success(n).unwrap())
                ),
                (
                    mafia_strategy_success(n).unwrap(),
                    to_f64(&exact::mafia_strategy_success(n).unwrap()),
                ),
            ];
            if n <= 16 {
                pairs.push((
                    mafia_success(n).unwrap(),
                    to_f64(&exact::mafia_success(n).unwrap()),
                ));
            }
            for (float, rational) in pairs {
                assert!(((float - rational) / rational).abs() < 1e-9, "n={n}");
            }
        }
    }

    #[test]
    fn intermediate_probabilities_stay_in_unit_interval() {
        for row in mafia_table(64).unwrap() {
            for p in [row.p_step, row.p_m_given_neq, row.p_s_given, row.p_m] {
                assert!((0.0..=1.0).contains(&p), "row {row:?}");
            }
        }
        for row in distance_table(64).unwrap() {
            assert!((0.0..=1.0).contains(&row.p_d) && (0.0..=1.0).contains(&row.p_df));
        }
    }

    #[test]
    fn curves_between_naive_bound_and_one_and_decreasing() {
        let m = mafia_table(64).unwrap();
        let d = distance_table(64).unwrap();
        for n in 1..=64 {
            let lo = naive_bound(n);
            assert!(lo <= m[n - 1].p_m && m[n - 1].p_m <= 1.0);
            assert!(lo <= d[n - 1].p_d && d[n - 1].p_d <= 1.0);
            if n > 1 {
                assert!(m[n - 1].p_m < m[n - 2].p_m);
                assert!(d[n - 1].p_d < d[n - 2].p_d);
            }
        }
    }

    #[test]
    fn distance_below_hk_from_two_rounds() {
        for n in 2..=64 {
            assert!(distance_success(n).unwrap() < hk_distance(n));
        }
    }

    #[test]
    fn hk_closed_forms() {
        assert_eq!(hk_mafia(1), 0.75);
        assert!(close(hk_distance(64), 1.00907e-8, 1e-13));
        assert_eq!(naive_bound(0), 1.0);
        assert_eq!(naive_bound(64), 1.0 / 18446744073709551616.0);
    }

    #[test]
    fn hk_acceptance_examples() {
        for x in 0..=10 {
            assert_eq!(hk_acceptance(10, x, 0.0, 0.0).unwrap(), 1.0);
            assert_eq!(hk_frr(10, x, 0.0, 0.0).unwrap(), 0.0);
        }
        let w: f64 = 0.9851;
        assert!(close(hk_round_success(0.01, 0.01).unwrap(), w, 1e-15));
        let a = hk_acceptance(48, 0, 0.01, 0.01).unwrap();
        assert!(((a - w.powi(48)) / a).abs() < 1e-12);
        assert_eq!(hk_acceptance(48, 48, 0.3, 0.2).unwrap(), 1.0);
        assert!(hk_acceptance(4, 5, 0.1, 0.1).is_err());
        assert!(hk_acceptance(4, 1, 1.5, 0.1).is_err());
    }

    #[test]
    fn hk_acceptance_non_decreasing_in_x() {
        let mut last = 0.0;
        for x in 0..=48 {
            let a = hk_acceptance(48, x, 0.02, 0.03).unwrap();
            assert!(a >= last - 1e-15);
            last = a;
        }
        assert!(close(last, 1.0, 1e-12));
    }

    #[test]
    fn binomial_tail_against_direct_sum() {
        let (n, p) = (12usize, 0.3f64);
        let mut c = 1.0f64;
        let mut pmf = Vec::new();
        for i in 0..=n {
            pmf.push(c * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32));
            c = c * (n - i) as f64 / (i + 1) as f64;
        }
        for k in 0..=n {
            let direct: f64 = pmf[k..].iter().sum();
            assert!(close(binomial_at_least(n, k, p), direct, 1e-12));
        }
    }

    #[test]
    fn hk_noisy_mafia_reduces_to_noiseless() {
        let s = hk_mafia_noisy(20, 0, 0.0, 0.0, true).unwrap();
        assert!(close(s, hk_mafia(20), 1e-15));
    }

    #[test]
    fn at_closed_forms() {
        assert_eq!(at_tree_mafia(1), 0.75);
        assert_eq!(at_mafia(1, 5), hk_mafia(5));
        let t = at_tree_distance_table(3);
        assert_eq!(t[0], 0.75);
        assert_eq!(t[1], 0.59375);
        assert!(close(t[2], 0.4736328125, 1e-12));
        assert!(close(at_distance(1, 7), hk_distance(7), 1e-15));
    }

    #[test]
    fn at_tree_distance_deep() {
        let t = at_tree_distance_table(64);
        assert!(close(t[11], 0.06501, 5e-5));
        for d in 1..64 {
            assert!(t[d] < t[d - 1]);
            assert!(t[d] >= libm::pow(0.75, (d + 1) as f64));
        }
    }
}
