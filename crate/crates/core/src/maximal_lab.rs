//! Restricted-input norm ratios for the dyadic spherical maximal function and
//! their growth in the scale. Every ratio is a lower bound for the operator
//! norm on the tested sets; slopes are consistency checks only.

use crate::error::{LabError, Result};
use crate::lattice::{dyadic_maximal, LatticeFunction, RdTable};
use crate::numerics::{fit_loglog, LineFit};
use crate::regions::{improving_exponent, ExponentPoint};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

/// Work limit for the generic evaluator: |E| times the number of offsets.
pub const DEFAULT_WORK_BUDGET: u64 = 1 << 28;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormEstimate {
    pub family: String,
    pub d: usize,
    pub big_l: u64,
    pub point: ExponentPoint,
    /// ||sup_{L <= lambda < 2L} A_lambda 1_E||_{r'}
    pub norm: f64,
    pub set_size: u64,
    /// norm / |E|^{1/p}
    pub ratio: f64,
    pub witness: String,
}

/// Test-set families adapted to a dyadic scale L.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// |z|^2 <= R^2 for R in {L/2, L}
    Ball,
    /// |z_j| <= h for h in {L/2, L}
    Box,
    /// ceil(R/2)^2 <= |z|^2 <= R^2 for R in {L/2, L}
    Shell,
    /// each point of |z_j| <= L/2 kept with probability 1/2
    RandomDensity,
    /// the origin alone
    Point,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Ball, Family::Box, Family::Shell, Family::RandomDensity, Family::Point];
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Ball => "ball",
            Family::Box => "box",
            Family::Shell => "shell",
            Family::RandomDensity => "random_density",
            Family::Point => "point",
        })
    }
}

impl FromStr for Family {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.to_string() == s.replace('-', "_"))
            .ok_or_else(|| LabError::InvalidArgument(format!("unknown family {s:?}")))
    }
}

// 1/r' as f64; r' = infinity when 1/r = 1
fn dual_exponent(point: &ExponentPoint) -> Option<f64> {
    let inv = 1.0 - point.inv_r.to_f64().unwrap();
    if inv <= 0.0 {
        None
    } else {
        Some(1.0 / inv)
    }
}

fn check_scale(big_l: u64) -> Result<()> {
    if big_l == 0 || !big_l.is_power_of_two() {
        return Err(LabError::InvalidArgument(format!("scale must be a power of two, got {big_l}")));
    }
    Ok(())
}

fn check_point(point: &ExponentPoint) -> Result<()> {
    if !point.in_unit_square() {
        return Err(LabError::InvalidArgument(format!("exponent point {point} outside [0,1]^2")));
    }
    Ok(())
}

// ||h||_{r'} from values and multiplicities
struct NormAcc {
    r_dual: Option<f64>,
    acc: f64,
}

impl NormAcc {
    fn new(point: &ExponentPoint) -> Self {
        Self {
            r_dual: dual_exponent(point),
            acc: 0.0,
        }
    }

    fn add(&mut self, v: f64, weight: f64) {
        match self.r_dual {
            Some(r) => self.acc += weight * v.powf(r),
            None => self.acc = self.acc.max(v),
        }
    }

    fn finish(&self) -> f64 {
        match self.r_dual {
            Some(r) => self.acc.powf(1.0 / r),
            None => self.acc,
        }
    }
}

fn ratio_of(norm: f64, size: u64, point: &ExponentPoint) -> f64 {
    norm / (size as f64).powf(point.inv_p.to_f64().unwrap())
}

/// Ratio for an arbitrary finite set, through the sparse lattice evaluator.
pub fn restricted_ratio(set: &[Vec<i64>], point: &ExponentPoint, big_l: u64) -> Result<NormEstimate> {
    restricted_ratio_budget(set, point, big_l, DEFAULT_WORK_BUDGET)
}

pub fn restricted_ratio_budget(set: &[Vec<i64>], point: &ExponentPoint, big_l: u64, budget: u64) -> Result<NormEstimate> {
    check_scale(big_l)?;
    check_point(point)?;
    let d = set.first().ok_or_else(|| LabError::InvalidArgument("empty test set".into()))?.len();
    if d == 0 || set.iter().any(|x| x.len() != d) {
        return Err(LabError::InvalidArgument("test set points must share a positive dimension".into()));
    }
    let f: LatticeFunction<f64> = LatticeFunction::indicator(d, set);
    let size = f.support_len() as u64;
    let offsets: u64 = RdTable::new(d, 4 * big_l * big_l)
        .row(d)
        .iter()
        .take((4 * big_l * big_l) as usize)
        .sum::<u128>() as u64;
    if size.saturating_mul(offsets) > budget {
        return Err(LabError::BudgetExceeded(format!(
            "{size} points times {offsets} offsets exceeds {budget}"
        )));
    }
    let m = dyadic_maximal(&f, big_l)?;
    let mut acc = NormAcc::new(point);
    for (_, v) in m.iter() {
        acc.add(*v, 1.0);
    }
    let norm = acc.finish();
    Ok(NormEstimate {
        family: "explicit".into(),
        d,
        big_l,
        point: point.clone(),
        norm,
        set_size: size,
        ratio: ratio_of(norm, size, point),
        witness: format!("{size} explicit points"),
    })
}

// Sets invariant under coordinate permutations and sign changes, evaluated one
// orbit at a time by counting sphere points coordinate by coordinate.
#[derive(Debug, Clone)]
enum Member {
    // lo <= |z|^2 <= hi
    Radial { lo: u64, hi: u64 },
    // |z_j| <= h
    Cube { h: i64 },
}

impl Member {
    fn describe(&self) -> String {
        match self {
            Member::Radial { lo: 0, hi } => format!("ball |z|^2 <= {hi}"),
            Member::Radial { lo, hi } => format!("shell {lo} <= |z|^2 <= {hi}"),
            Member::Cube { h } => format!("box |z_j| <= {h}"),
        }
    }

    fn size(&self, d: usize) -> u64 {
        match *self {
            Member::Radial { lo, hi } => {
                let t = RdTable::new(d, hi);
                t.row(d)[lo as usize..=hi as usize].iter().sum::<u128>() as u64
            }
            Member::Cube { h } => ((2 * h + 1) as u64).pow(d as u32),
        }
    }

    // largest coordinate of a member point
    fn extent(&self) -> i64 {
        match *self {
            Member::Radial { hi, .. } => (hi as f64).sqrt().floor() as i64,
            Member::Cube { h } => h,
        }
    }

    // largest coordinate of an output point with a nonzero value
    fn reach(&self, big_l: u64) -> i64 {
        self.extent() + 2 * big_l as i64 - 1
    }
}

fn members(family: Family, big_l: u64) -> Vec<Member> {
    let l = big_l as i64;
    let mut radii = vec![l];
    if l >= 2 {
        radii.insert(0, l / 2);
    }
    match family {
        Family::Ball => radii.iter().map(|&r| Member::Radial { lo: 0, hi: (r * r) as u64 }).collect(),
        Family::Shell => radii
            .iter()
            .map(|&r| {
                let inner = (r + 1) / 2;
                Member::Radial {
                    lo: (inner * inner) as u64,
                    hi: (r * r) as u64,
                }
            })
            .collect(),
        Family::Box => vec![Member::Cube { h: l / 2 }, Member::Cube { h: l }],
        Family::Point => vec![Member::Radial { lo: 0, hi: 0 }],
        Family::RandomDensity => vec![],
    }
}

// Counting state after some coordinates: counts[n * width + b] = number of
// partial offsets with sum y_j^2 = n and sum (x_j + y_j)^2 = b.
#[derive(Clone)]
struct Counts {
    n_len: usize,
    width: usize,
    counts: Vec<u32>,
}

impl Counts {
    // prefix sums along b, rows of width + 1
    fn prefix(&self) -> Vec<u64> {
        let w = self.width;
        let mut pre = vec![0u64; self.n_len * (w + 1)];
        for n in 0..self.n_len {
            for b in 0..w {
                pre[n * (w + 1) + b + 1] = pre[n * (w + 1) + b] + self.counts[n * w + b] as u64;
            }
        }
        pre
    }

    fn unit(n_len: usize, width: usize) -> Self {
        let mut counts = vec![0; n_len * width];
        counts[0] = 1;
        Self { n_len, width, counts }
    }

    fn step(&self, x: i64, y_max: i64) -> Self {
        let mut out = vec![0u32; self.counts.len()];
        let w = self.width;
        for y in -y_max..=y_max {
            let dn = (y * y) as usize;
            let db = ((x + y) * (x + y)) as usize;
            if dn >= self.n_len || db >= w {
                continue;
            }
            for n in 0..self.n_len - dn {
                let src = &self.counts[n * w..n * w + w - db];
                let dst = &mut out[(n + dn) * w + db..(n + dn) * w + w];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += s;
                }
            }
        }
        Self {
            n_len: self.n_len,
            width: w,
            counts: out,
        }
    }
}

struct OrbitEval<'a> {
    big_l: u64,
    members: &'a [Member],
    r_table: Vec<u128>,
}

impl OrbitEval<'_> {
    fn n_lo(&self) -> usize {
        (self.big_l * self.big_l) as usize
    }

    fn n_len(&self) -> usize {
        (4 * self.big_l * self.big_l) as usize
    }

    fn y_max(&self) -> i64 {
        2 * self.big_l as i64 - 1
    }

    // counts c_n(x) = #{|y|^2 = n : x + y in member} for the last coordinate x_last
    fn finish_radial(&self, state: &Counts, pre: &[u64], x: i64, lo: u64, hi: u64) -> Vec<u64> {
        let w = state.width;
        let mut c = vec![0u64; state.n_len];
        let ym = self.y_max();
        for y in -ym..=ym {
            let dn = (y * y) as usize;
            let db = ((x + y) * (x + y)) as u64;
            if dn >= state.n_len || db > hi {
                continue;
            }
            let b_hi = (hi - db) as usize;
            let b_lo = lo.saturating_sub(db) as usize;
            if b_lo > b_hi {
                continue;
            }
            let b_hi = b_hi.min(w - 1);
            for n in 0..state.n_len - dn {
                let row = n * (w + 1);
                c[n + dn] += pre[row + b_hi + 1] - pre[row + b_lo.min(b_hi + 1)];
            }
        }
        c
    }

    fn maximal_from_counts(&self, c: &[u64]) -> f64 {
        let lo = self.n_lo();
        c[lo..self.n_len()]
            .iter()
            .zip(&self.r_table[lo..])
            .filter(|(&k, _)| k > 0)
            .map(|(&k, &r)| k as f64 / r as f64)
            .fold(0.0, f64::max)
    }

    fn cube_counts(&self, xs: &[i64], h: i64) -> Vec<u64> {
        let n_len = self.n_len();
        let mut c = vec![0u64; n_len];
        c[0] = 1;
        let ym = self.y_max();
        for &x in xs {
            let mut next = vec![0u64; n_len];
            for y in -ym..=ym {
                if (x + y).abs() > h {
                    continue;
                }
                let dn = (y * y) as usize;
                for n in 0..n_len.saturating_sub(dn) {
                    next[n + dn] += c[n];
                }
            }
            c = next;
        }
        c
    }
}

// d!/prod(mult!) * 2^(nonzero) signed permutations of a sorted tuple
fn orbit_size(x: &[i64]) -> f64 {
    let d = x.len();
    let mut size: f64 = (1..=d).map(|k| k as f64).product();
    let mut i = 0;
    while i < d {
        let mut j = i;
        while j < d && x[j] == x[i] {
            j += 1;
        }
        size /= (1..=j - i).map(|k| k as f64).product::<f64>();
        i = j;
    }
    size * 2f64.powi(x.iter().filter(|&&v| v != 0).count() as i32)
}

// all nondecreasing tuples first = a_1 <= ... <= a_d <= bound with |a|^2 < norm_cap
fn sorted_tuples(d: usize, bound: i64, first: i64, norm_cap: u64) -> Vec<Vec<i64>> {
    fn rec(d: usize, bound: i64, cap: u64, sum: u64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        let start = *cur.last().unwrap();
        let left = (d - cur.len()) as u64;
        for v in start..=bound {
            // the remaining coordinates are all at least v
            if sum + left * (v * v) as u64 >= cap {
                break;
            }
            cur.push(v);
            rec(d, bound, cap, sum + (v * v) as u64, cur, out);
            cur.pop();
        }
    }
    let mut out = vec![];
    let s0 = (first * first) as u64;
    if s0 + (d as u64 - 1) * s0 >= norm_cap {
        return out;
    }
    rec(d, bound, norm_cap, s0, &mut vec![first], &mut out);
    out
}

// Maximal values per member over one family, summed orbit by orbit.
fn symmetric_norms(d: usize, big_l: u64, mems: &[Member], point: &ExponentPoint) -> Vec<f64> {
    let n_len = (4 * big_l * big_l) as usize;
    let eval = OrbitEval {
        big_l,
        members: mems,
        r_table: RdTable::new(d, n_len as u64).row(d).to_vec(),
    };
    let bound = mems.iter().map(|m| m.reach(big_l)).max().unwrap();
    let radial_hi = mems
        .iter()
        .filter_map(|m| match m {
            Member::Radial { hi, .. } => Some(*hi),
            _ => None,
        })
        .max();
    // outputs with a nonzero value lie within reach of the set, in norm too
    let norm_cap = if mems.iter().all(|m| matches!(m, Member::Radial { .. })) {
        let r = (radial_hi.unwrap() as f64).sqrt().floor() as u64 + 2 * big_l;
        r * r
    } else {
        u64::MAX
    };
    // per first coordinate: the orbit values in a fixed order
    let per_first: Vec<Vec<(f64, Vec<f64>)>> = (0..=bound)
        .into_par_iter()
        .map(|a1| {
            let mut rows = vec![];
            let tuples = sorted_tuples(d, bound, a1, norm_cap);
            let mut cache: Vec<(Vec<i64>, Counts)> = vec![];
            let mut pre: Option<(Vec<i64>, Vec<u64>)> = None;
            for x in tuples {
                let w = orbit_size(&x);
                let mut vals = vec![0.0; eval.members.len()];
                if let Some(hi) = radial_hi {
                    // reuse the counting state of the longest shared prefix
                    let prefix = &x[..d - 1];
                    let mut keep = 0;
                    while keep < cache.len() && keep < prefix.len() && cache[keep].0[keep] == prefix[keep] {
                        keep += 1;
                    }
                    cache.truncate(keep);
                    let mut state = cache
                        .last()
                        .map(|c| c.1.clone())
                        .unwrap_or_else(|| Counts::unit(n_len, hi as usize + 1));
                    for j in keep..d - 1 {
                        state = state.step(x[j], eval.y_max());
                        cache.push((x[..=j].to_vec(), state.clone()));
                    }
                    if pre.as_ref().map(|p| p.0.as_slice()) != Some(prefix) {
                        pre = Some((prefix.to_vec(), state.prefix()));
                    }
                    let sums = &pre.as_ref().unwrap().1;
                    for (k, m) in eval.members.iter().enumerate() {
                        if let Member::Radial { lo, hi } = *m {
                            let c = eval.finish_radial(&state, sums, x[d - 1], lo, hi);
                            vals[k] = eval.maximal_from_counts(&c);
                        }
                    }
                }
                for (k, m) in eval.members.iter().enumerate() {
                    if let Member::Cube { h } = *m {
                        if x[d - 1] <= m.reach(big_l) {
                            let c = eval.cube_counts(&x, h);
                            vals[k] = eval.maximal_from_counts(&c);
                        }
                    }
                }
                if vals.iter().any(|&v| v > 0.0) {
                    rows.push((w, vals));
                }
            }
            rows
        })
        .collect();
    let mut accs: Vec<NormAcc> = mems.iter().map(|_| NormAcc::new(point)).collect();
    for rows in &per_first {
        for (w, vals) in rows {
            for (acc, &v) in accs.iter_mut().zip(vals) {
                if v > 0.0 {
                    acc.add(v, *w);
                }
            }
        }
    }
    accs.iter().map(NormAcc::finish).collect()
}

fn random_density_set(d: usize, big_l: u64, seed: u64) -> Vec<Vec<i64>> {
    let h = (big_l / 2) as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ big_l.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let side = 2 * h + 1;
    let total = side.pow(d as u32);
    let mut out = vec![];
    for idx in 0..total {
        let keep: bool = rng.gen();
        if !keep {
            continue;
        }
        let mut k = idx;
        out.push(
            (0..d)
                .map(|_| {
                    let c = k % side - h;
                    k /= side;
                    c
                })
                .collect(),
        );
    }
    if out.is_empty() {
        out.push(vec![0; d]);
    }
    out
}

/// All member ratios of one family at one scale.
pub fn family_ratios(family: Family, point: &ExponentPoint, d: usize, big_l: u64, seed: u64, budget: u64) -> Result<Vec<NormEstimate>> {
    check_scale(big_l)?;
    check_point(point)?;
    if d == 0 {
        return Err(LabError::InvalidArgument("dimension must be positive".into()));
    }
    if family == Family::RandomDensity {
        let set = random_density_set(d, big_l, seed);
        let mut e = restricted_ratio_budget(&set, point, big_l, budget)?;
        e.family = family.to_string();
        e.witness = format!("random half of |z_j| <= {}, seed {seed}, {} points", big_l / 2, set.len());
        return Ok(vec![e]);
    }
    let mems = members(family, big_l);
    let norms = symmetric_norms(d, big_l, &mems, point);
    Ok(mems
        .iter()
        .zip(norms)
        .map(|(m, norm)| {
            let size = m.size(d);
            NormEstimate {
                family: family.to_string(),
                d,
                big_l,
                point: point.clone(),
                norm,
                set_size: size,
                ratio: ratio_of(norm, size, point),
                witness: m.describe(),
            }
        })
        .collect())
}

/// Explicit point list of a symmetric family member, for cross-checks.
pub fn family_sets(family: Family, d: usize, big_l: u64, seed: u64) -> Vec<(String, Vec<Vec<i64>>)> {
    if family == Family::RandomDensity {
        return vec![("random".into(), random_density_set(d, big_l, seed))];
    }
    members(family, big_l)
        .into_iter()
        .map(|m| {
            let b = m.extent();
            let side = 2 * b + 1;
            let mut pts = vec![];
            for idx in 0..side.pow(d as u32) {
                let mut k = idx;
                let x: Vec<i64> = (0..d)
                    .map(|_| {
                        let c = k % side - b;
                        k /= side;
                        c
                    })
                    .collect();
                let inside = match m {
                    Member::Radial { lo, hi } => {
                        let n: u64 = x.iter().map(|v| (v * v) as u64).sum();
                        n >= lo && n <= hi
                    }
                    Member::Cube { h } => x.iter().all(|v| v.abs() <= h),
                };
                if inside {
                    pts.push(x);
                }
            }
            (m.describe(), pts)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub family: String,
    pub d: usize,
    pub point: ExponentPoint,
    pub lambdas: Vec<u64>,
    /// max ratio over the family members at each scale
    pub ratios: Vec<f64>,
    pub witnesses: Vec<String>,
    pub fit: LineFit,
    pub constant: f64,
    pub theoretical: f64,
    pub excess: f64,
    pub estimates: Vec<NormEstimate>,
    pub note: &'static str,
}

/// Fit log(max ratio) against log L over the given dyadic scales.
pub fn scaling_fit(family: Family, point: &ExponentPoint, d: usize, lambdas: &[u64], seed: u64, budget: u64) -> Result<ScalingReport> {
    if lambdas.len() < 2 || lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::InvalidArgument("need at least two ascending scales".into()));
    }
    let mut ratios = vec![];
    let mut witnesses = vec![];
    let mut estimates = vec![];
    for &l in lambdas {
        let est = family_ratios(family, point, d, l, seed, budget)?;
        let best = est
            .iter()
            .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
            .expect("families are nonempty");
        ratios.push(best.ratio);
        witnesses.push(best.witness.clone());
        estimates.extend(est);
    }
    let xs: Vec<f64> = lambdas.iter().map(|&l| l as f64).collect();
    let fit = fit_loglog(&xs, &ratios);
    let theoretical = improving_exponent(point, d as u32).to_f64().unwrap();
    Ok(ScalingReport {
        family: family.to_string(),
        d,
        point: point.clone(),
        lambdas: lambdas.to_vec(),
        ratios,
        witnesses,
        fit,
        constant: fit.intercept.exp(),
        theoretical,
        excess: fit.slope - theoretical,
        estimates,
        note: "ratios are lower bounds for the operator norm on these sets; the slope is a consistency check",
    })
}
