//! Farey dissection of the circle at level Lambda with mediant endpoints.
//!
//! Intervals are half-open `[left_end, right_end)`; the interval of 0/1
//! straddles 0 == 1 and is stored with a negative left end.

use crate::arithmetic::{gcd, mod_inverse, units};
use crate::error::{LabError, Result};
use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FareyFraction {
    pub a: u64,
    pub q: u64,
}

impl FareyFraction {
    pub fn value(&self) -> Rational {
        Rational::new(self.a as i64, self.q as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FareyInterval {
    pub center: FareyFraction,
    pub left_end: Rational,
    pub right_end: Rational,
}

// Ratio's own Ord avoids overflow by long division; these endpoints are
// small enough for a single i128 cross product.
fn cmp_q(x: &Rational, y: &Rational) -> Ordering {
    (*x.numer() as i128 * *y.denom() as i128).cmp(&(*y.numer() as i128 * *x.denom() as i128))
}

/// tau reduced into [0, 1).
pub fn circle_point(tau: Rational) -> Rational {
    tau - tau.floor()
}

impl FareyInterval {
    /// Half-open membership of a point of the circle.
    pub fn contains(&self, tau: Rational) -> bool {
        let t = circle_point(tau);
        let inside = |t: &Rational| cmp_q(&self.left_end, t) != Ordering::Greater && cmp_q(t, &self.right_end) == Ordering::Less;
        inside(&t) || inside(&(t - Rational::one()))
    }

    pub fn left_width(&self) -> Rational {
        self.center.value() - self.left_end
    }

    pub fn right_width(&self) -> Rational {
        self.right_end - self.center.value()
    }

    /// Half-open membership of an offset from the center.
    pub fn contains_offset(&self, offset: Rational) -> bool {
        cmp_q(&-self.left_width(), &offset) != Ordering::Greater && cmp_q(&offset, &self.right_width()) == Ordering::Less
    }
}

/// Set of units a with N1 <= a^{-1} <= N2 (integer representatives in [1, q)).
///
/// When `n1 > n2` the range runs through q == 0, i.e. it is
/// `[n1, q) u [1, n2]`; this only arises for offsets, see `inverse_range_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InverseRange {
    pub n1: u64,
    pub n2: u64,
    pub q: u64,
}

impl InverseRange {
    pub fn wraps(&self) -> bool {
        self.n1 > self.n2
    }

    /// Does the residue `s` (an inverse) lie in the range?
    pub fn contains_inverse(&self, s: u64) -> bool {
        if self.wraps() {
            s >= self.n1 || s <= self.n2
        } else {
            self.n1 <= s && s <= self.n2
        }
    }

    /// Numerators a whose inverse lies in the range.
    pub fn members(&self) -> Vec<u64> {
        let mut out: Vec<u64> = units(self.q)
            .into_iter()
            .filter(|&a| self.contains_inverse(mod_inverse(a as i64, self.q).unwrap()))
            .collect();
        out.sort_unstable();
        out
    }
}

fn check_fraction(a: u64, q: u64, level: u64) -> Result<()> {
    if level == 0 || q == 0 || q > level || a >= q || (q > 1 && gcd(a, q) != 1) {
        return Err(LabError::InvalidArgument(format!(
            "{a}/{q} is not a reduced fraction of level {level}"
        )));
    }
    Ok(())
}

/// Reduced fractions in [0, 1) with denominator <= level, ascending,
/// from the next-term recurrence.
pub fn farey_sequence(level: u64) -> Vec<FareyFraction> {
    assert!(level >= 1, "level must be positive");
    let n = level as i64;
    let mut out = vec![FareyFraction { a: 0, q: 1 }];
    let (mut a, mut b, mut c, mut d) = (0i64, 1i64, 1i64, n);
    while c < d {
        out.push(FareyFraction { a: c as u64, q: d as u64 });
        let k = (n + b) / d;
        let (nc, nd) = (k * c - a, k * d - b);
        a = c;
        b = d;
        c = nc;
        d = nd;
    }
    out
}

/// (q_left, q_right): the largest denominators <= level congruent to
/// +a^{-1} and -a^{-1} modulo q.
pub fn neighbor_denominators(a: u64, q: u64, level: u64) -> Result<(u64, u64)> {
    check_fraction(a, q, level)?;
    if q == 1 {
        return Ok((level, level));
    }
    let s = mod_inverse(a as i64, q)?;
    let largest = |c: u64| level - (level + q - c % q) % q;
    Ok((largest(s), largest((q - s) % q)))
}

/// Interval around a/q with mediant endpoints from the neighbor formula.
pub fn farey_interval(a: u64, q: u64, level: u64) -> Result<FareyInterval> {
    let (ql, qr) = neighbor_denominators(a, q, level)?;
    let (ai, qi, qli, qri) = (a as i64, q as i64, ql as i64, qr as i64);
    // determinant identities: a ql - al q = 1 and ar q - a qr = 1
    let al = (ai * qli - 1) / qi;
    let ar = (ai * qri + 1) / qi;
    Ok(FareyInterval {
        center: FareyFraction { a, q },
        left_end: Rational::new(ai + al, qi + qli),
        right_end: Rational::new(ai + ar, qi + qri),
    })
}

/// The whole dissection at one level, built from positional neighbors.
#[derive(Debug, Clone)]
pub struct FareyLevel {
    pub level: u64,
    pub intervals: Vec<FareyInterval>,
    // indices into `intervals` per denominator, ascending numerator
    by_q: Vec<Vec<usize>>,
}

impl FareyLevel {
    pub fn new(level: u64) -> Self {
        let seq = farey_sequence(level);
        let m = seq.len();
        let mut intervals = Vec::with_capacity(m);
        for i in 0..m {
            let f = seq[i];
            // the predecessor of 0/1 is the last fraction shifted down by one
            let (pa, pq) = if i == 0 {
                let p = seq[m - 1];
                (p.a as i64 - p.q as i64, p.q as i64)
            } else {
                (seq[i - 1].a as i64, seq[i - 1].q as i64)
            };
            let (na, nq) = if i + 1 == m {
                (1, 1)
            } else {
                (seq[i + 1].a as i64, seq[i + 1].q as i64)
            };
            let (a, q) = (f.a as i64, f.q as i64);
            intervals.push(FareyInterval {
                center: f,
                left_end: Rational::new(a + pa, q + pq),
                right_end: Rational::new(a + na, q + nq),
            });
        }
        let mut by_q = vec![Vec::new(); level as usize + 1];
        for (i, iv) in intervals.iter().enumerate() {
            by_q[iv.center.q as usize].push(i);
        }
        Self { level, intervals, by_q }
    }

    pub fn fractions(&self) -> impl Iterator<Item = FareyFraction> + '_ {
        self.intervals.iter().map(|iv| iv.center)
    }

    /// Positional neighbors of the i-th fraction (wrapping around the circle).
    pub fn neighbors(&self, i: usize) -> (FareyFraction, FareyFraction) {
        let m = self.intervals.len();
        (self.intervals[(i + m - 1) % m].center, self.intervals[(i + 1) % m].center)
    }

    pub fn intervals_of(&self, q: u64) -> impl Iterator<Item = &FareyInterval> + '_ {
        self.by_q[q as usize].iter().map(move |&i| &self.intervals[i])
    }

    /// Numerators a with tau in I(a, q); at most one since the intervals tile.
    pub fn covering(&self, tau: Rational, q: u64) -> Vec<u64> {
        let ids = &self.by_q[q as usize];
        if q == 1 {
            let iv = &self.intervals[ids[0]];
            return if iv.contains(tau) { vec![0] } else { vec![] };
        }
        // for q >= 2 every interval sits inside (0, 1), ordered by numerator
        let t = circle_point(tau);
        let pos = ids.partition_point(|&i| cmp_q(&self.intervals[i].left_end, &t) != Ordering::Greater);
        if pos == 0 {
            return vec![];
        }
        let iv = &self.intervals[ids[pos - 1]];
        if cmp_q(&t, &iv.right_end) == Ordering::Less {
            vec![iv.center.a]
        } else {
            vec![]
        }
    }

    /// Numerators a with a/q + offset in I(a, q).
    pub fn covering_offset(&self, offset: Rational, q: u64) -> Vec<u64> {
        let off = centered(offset);
        self.intervals_of(q)
            .filter(|iv| iv.contains_offset(off))
            .map(|iv| iv.center.a)
            .collect()
    }
}

// offset reduced into [-1/2, 1/2)
fn centered(offset: Rational) -> Rational {
    let half = Rational::new(1, 2);
    let t = circle_point(offset + half);
    t - half
}

fn check_level(q: u64, level: u64) -> Result<()> {
    if level == 0 || q == 0 || q > level {
        return Err(LabError::InvalidArgument(format!("need 1 <= q <= level, got q={q}, level={level}")));
    }
    Ok(())
}

/// { a in Z_q^x : tau in I(a, q) }, tau a point of the circle.
pub fn covering_fractions(tau: Rational, q: u64, level: u64) -> Result<Vec<u64>> {
    check_level(q, level)?;
    Ok(FareyLevel::new(level).covering(tau, q))
}

/// { a in Z_q^x : a/q + tau in I(a, q) }, tau an offset from each center.
pub fn covering_offsets(tau: Rational, q: u64, level: u64) -> Result<Vec<u64>> {
    check_level(q, level)?;
    Ok(FareyLevel::new(level).covering_offset(tau, q))
}

/// Describe a set of numerators as a range of inverses.
///
/// Returns `Ok(None)` for the empty set. A set whose inverses form a block
/// only cyclically (through 0) is returned with `n1 > n2`; anything else is
/// a `PropositionViolation`.
pub fn inverse_range_of(set: &[u64], q: u64, tau: Rational, level: u64) -> Result<Option<InverseRange>> {
    if set.is_empty() {
        return Ok(None);
    }
    let violation = |detail: String| LabError::PropositionViolation {
        tau: tau.to_string(),
        q,
        level,
        detail,
    };
    let mut inv: Vec<u64> = Vec::with_capacity(set.len());
    for &a in set {
        if q > 1 && gcd(a, q) != 1 {
            return Err(violation(format!("{a} is not a unit")));
        }
        inv.push(mod_inverse(a as i64, q).unwrap());
    }
    inv.sort_unstable();
    inv.dedup();
    let us = units(q);
    let lo = inv[0];
    let hi = *inv.last().unwrap();
    let inside = us.iter().filter(|&&s| lo <= s && s <= hi).count();
    if inside == inv.len() {
        return Ok(Some(InverseRange { n1: lo, n2: hi, q }));
    }
    // try the complement as one linear block
    let comp: Vec<u64> = us.iter().copied().filter(|s| inv.binary_search(s).is_err()).collect();
    let (clo, chi) = (comp[0], *comp.last().unwrap());
    let comp_inside = us.iter().filter(|&&s| clo <= s && s <= chi).count();
    if comp_inside == comp.len() {
        let n1 = *us.iter().find(|&&s| s > chi).unwrap();
        let n2 = *us.iter().rev().find(|&&s| s < clo).unwrap();
        return Ok(Some(InverseRange { n1, n2, q }));
    }
    Err(violation(format!("inverses {inv:?} are not a block of units")))
}

/// Inverse range of the covering set of a circle point tau.
pub fn inverse_range(tau: Rational, q: u64, level: u64) -> Result<Option<InverseRange>> {
    let set = covering_fractions(tau, q, level)?;
    inverse_range_of(&set, q, tau, level)
}

/// Inverse range of the set of centers whose interval reaches offset tau.
pub fn inverse_range_offset(tau: Rational, q: u64, level: u64) -> Result<Option<InverseRange>> {
    let set = covering_offsets(tau, q, level)?;
    inverse_range_of(&set, q, tau, level)
}

/// Exact tiling check: positive widths, consecutive intervals share
/// endpoints, and the last right end is the first left end plus one.
pub fn partition_check(level: u64) -> Result<()> {
    let fl = FareyLevel::new(level);
    let iv = &fl.intervals;
    for (i, x) in iv.iter().enumerate() {
        if x.left_end >= x.right_end {
            return Err(LabError::InvalidPartition(format!("empty interval at {:?}", x.center)));
        }
        if i + 1 < iv.len() && x.right_end != iv[i + 1].left_end {
            return Err(LabError::InvalidPartition(format!("gap or overlap after {:?}", x.center)));
        }
    }
    let total = iv.last().unwrap().right_end - iv[0].left_end;
    if total != Rational::one() {
        return Err(LabError::InvalidPartition(format!("total length {total}")));
    }
    Ok(())
}

/// Total length of the dissection, summed interval by interval.
pub fn total_length(level: u64) -> num_rational::BigRational {
    use num_bigint::BigInt;
    FareyLevel::new(level)
        .intervals
        .iter()
        .map(|iv| {
            let w = iv.right_end - iv.left_end;
            num_rational::BigRational::new(BigInt::from(*w.numer()), BigInt::from(*w.denom()))
        })
        .fold(num_rational::BigRational::zero(), |a, b| a + b)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FareyCheckReport {
    pub level_max: u64,
    pub point_cases: u64,
    pub offset_cases: u64,
    pub violations: u64,
    /// offset cases whose inverse range only closes up through 0
    pub wrapped_offset_cases: u64,
    pub first_wrap: Option<String>,
    pub first_violation: Option<String>,
    pub neighbor_mismatches: u64,
    pub partition_failures: u64,
}

/// Exhaustive covering sweep over levels 1..=level_max.
///
/// Circle points: every interval endpoint, the endpoint +- a step smaller
/// than any gap between endpoints, plus `random` points per level. Offsets:
/// every half-width with both signs +- a step below the gap between distinct
/// half-widths, plus `random` offsets scaled to 1/(q level). Between
/// consecutive endpoints the covering set is constant, so both sweeps visit
/// every possible covering set.
pub fn farey_check(level_max: u64, random: usize, seed: u64) -> FareyCheckReport {
    let mut rep = FareyCheckReport {
        level_max,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let den = 1i64 << 40;
    for level in 1..=level_max {
        let fl = FareyLevel::new(level);
        let l = level as i64;
        if partition_check(level).is_err() {
            rep.partition_failures += 1;
        }
        for (i, iv) in fl.intervals.iter().enumerate() {
            let f = iv.center;
            let (pl, pr) = fl.neighbors(i);
            if neighbor_denominators(f.a, f.q, level) != Ok((pl.q, pr.q)) {
                rep.neighbor_mismatches += 1;
            }
        }

        let record =
            |rep: &mut FareyCheckReport, res: Result<Option<InverseRange>>, set: &[u64], offset: bool, tau: Rational, q: u64| match res {
                Ok(r) => {
                    let members = r.map(|r| r.members()).unwrap_or_default();
                    let mut s = set.to_vec();
                    s.sort_unstable();
                    if members != s {
                        rep.violations += 1;
                        rep.first_violation
                            .get_or_insert(format!("round trip failed: tau={tau} q={q} level={level}"));
                    }
                    if let Some(r) = r {
                        if offset && r.wraps() {
                            rep.wrapped_offset_cases += 1;
                            rep.first_wrap.get_or_insert(format!(
                                "offset tau={tau} q={q} level={level}: covering {s:?}, inverses in [{}, q) u [1, {}]",
                                r.n1, r.n2
                            ));
                        }
                    }
                }
                Err(e) => {
                    rep.violations += 1;
                    rep.first_violation.get_or_insert(e.to_string());
                }
            };

        // circle points
        let step = Rational::new(1, 8 * l * l);
        let mut taus: Vec<Rational> = Vec::new();
        for iv in &fl.intervals {
            let e = circle_point(iv.left_end);
            taus.extend([e, circle_point(e - step), circle_point(e + step)]);
        }
        for _ in 0..random {
            taus.push(Rational::new(rng.gen_range(0..den), den));
        }
        for &tau in &taus {
            for q in 1..=level {
                let set = fl.covering(tau, q);
                rep.point_cases += 1;
                let res = inverse_range_of(&set, q, tau, level);
                record(&mut rep, res, &set, false, tau, q);
            }
        }

        // offsets
        let ostep = Rational::new(1, 8 * (2 * l + 1) * (2 * l + 1) * l);
        let scales: Vec<i64> = (0..random).map(|_| rng.gen_range(-(11 * den / 10)..=(11 * den / 10))).collect();
        for q in 1..=level {
            let mut offs: Vec<Rational> = Vec::new();
            for iv in fl.intervals_of(q) {
                for w in [iv.right_width(), -iv.left_width()] {
                    offs.extend([w, w - ostep, w + ostep]);
                }
            }
            offs.push(Rational::zero());
            for &s in &scales {
                offs.push(Rational::new(s, den * q as i64 * l));
            }
            for &tau in &offs {
                let set = fl.covering_offset(tau, q);
                rep.offset_cases += 1;
                let res = inverse_range_of(&set, q, tau, level);
                record(&mut rep, res, &set, true, tau, q);
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_offsets() {
        assert_eq!(centered(Rational::new(3, 4)), Rational::new(-1, 4));
        assert_eq!(centered(Rational::new(1, 2)), Rational::new(-1, 2));
        assert_eq!(centered(Rational::new(-1, 8)), Rational::new(-1, 8));
    }
}
