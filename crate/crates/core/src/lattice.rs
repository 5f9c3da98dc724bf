//! Lattice points on spheres, r_d(n), discrete spherical averages and
//! maximal operators on finitely supported functions.

use crate::error::{LabError, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Display;
use std::ops::{Add, AddAssign, Mul};
use std::str::FromStr;

/// Values a lattice function can take: exact rationals for oracles, f64 for
/// throughput.
pub trait Scalar:
    Clone + PartialOrd + Zero + Add<Output = Self> + AddAssign + Mul<Output = Self> + Display + FromStr + Send + Sync
{
    fn from_i64(v: i64) -> Self;
    fn div_count(&self, r: u128) -> Self;
    fn abs_val(&self) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn div_count(&self, r: u128) -> Self {
        self / r as f64
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn div_count(&self, r: u128) -> Self {
        self / BigRational::from_integer(BigInt::from(r))
    }
    fn abs_val(&self) -> Self {
        self.abs()
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Table of r_j(n) for j <= d, n <= n_max, built as repeated convolution
/// with r_1.
#[derive(Debug, Clone)]
pub struct RdTable {
    rows: Vec<Vec<u128>>,
}

impl RdTable {
    pub fn new(d: usize, n_max: u64) -> Self {
        let len = n_max as usize + 1;
        let mut r1 = vec![0u128; len];
        let mut j = 0usize;
        while j * j < len {
            r1[j * j] = if j == 0 { 1 } else { 2 };
            j += 1;
        }
        let mut rows = vec![vec![0u128; len]];
        rows[0][0] = 1;
        for k in 1..=d {
            let prev = &rows[k - 1];
            let mut next = vec![0u128; len];
            for (n, out) in next.iter_mut().enumerate() {
                let mut s = 0u128;
                let mut j = 0usize;
                while j * j <= n {
                    s += prev[n - j * j] * r1[j * j];
                    j += 1;
                }
                *out = s;
            }
            rows.push(next);
        }
        Self { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn n_max(&self) -> u64 {
        self.rows[0].len() as u64 - 1
    }

    pub fn get(&self, d: usize, n: u64) -> u128 {
        self.rows[d][n as usize]
    }

    pub fn row(&self, d: usize) -> &[u128] {
        &self.rows[d]
    }
}

/// r_d(n) = #{ y in Z^d : |y|^2 = n }.
pub fn sphere_count(d: usize, n: u64) -> u128 {
    RdTable::new(d, n).get(d, n)
}

/// Radii squared n in [lo, hi] with r_d(n) > 0, ascending.
pub fn radius_set(d: usize, lo: u64, hi: u64) -> Vec<u64> {
    let t = RdTable::new(d, hi);
    (lo..=hi).filter(|&n| t.get(d, n) > 0).collect()
}

/// All y in Z^d with |y|^2 = n, lexicographic.
pub fn sphere_points(d: usize, n: u64) -> Vec<Vec<i64>> {
    let t = RdTable::new(d, n);
    sphere_points_with(&t, d, n)
}

/// Same as `sphere_points` with a prebuilt table covering (d, n).
pub fn sphere_points_with(t: &RdTable, d: usize, n: u64) -> Vec<Vec<i64>> {
    let mut out = Vec::with_capacity(t.get(d, n) as usize);
    let mut cur = vec![0i64; d];
    fn rec(t: &RdTable, d: usize, j: usize, rem: u64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if j == d {
            if rem == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let m = rem.isqrt() as i64;
        for x in -m..=m {
            let left = rem - (x * x) as u64;
            // prune branches whose remaining coordinates cannot finish
            if t.get(d - j - 1, left) > 0 {
                cur[j] = x;
                rec(t, d, j + 1, left, cur, out);
            }
        }
    }
    rec(t, d, 0, n, &mut cur, &mut out);
    out
}

/// All y in Z^d with |y|^2 <= n.
pub fn ball_points(d: usize, n: u64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; d];
    fn rec(d: usize, j: usize, rem: u64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if j == d {
            out.push(cur.clone());
            return;
        }
        let m = rem.isqrt() as i64;
        for x in -m..=m {
            cur[j] = x;
            rec(d, j + 1, rem - (x * x) as u64, cur, out);
        }
    }
    rec(d, 0, n, &mut cur, &mut out);
    out
}

pub fn norm2(x: &[i64]) -> u64 {
    x.iter().map(|&v| (v * v) as u64).sum()
}

fn dist2(x: &[i64], y: &[i64]) -> u64 {
    x.iter().zip(y).map(|(a, b)| ((a - b) * (a - b)) as u64).sum()
}

/// Finitely supported f : Z^d -> T.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFunction<T> {
    d: usize,
    values: BTreeMap<Vec<i64>, T>,
}

impl<T: Scalar> LatticeFunction<T> {
    pub fn new(d: usize) -> Self {
        assert!(d >= 1, "dimension must be positive");
        Self {
            d,
            values: BTreeMap::new(),
        }
    }

    pub fn delta(d: usize) -> Self {
        let mut f = Self::new(d);
        f.set(vec![0; d], T::from_i64(1));
        f
    }

    /// Indicator of a finite set.
    pub fn indicator<'a>(d: usize, pts: impl IntoIterator<Item = &'a Vec<i64>>) -> Self {
        let mut f = Self::new(d);
        for p in pts {
            f.set(p.clone(), T::from_i64(1));
        }
        f
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Sets f(x); zero values are removed from the support.
    pub fn set(&mut self, x: Vec<i64>, v: T) {
        assert_eq!(x.len(), self.d, "point has wrong dimension");
        if v.is_zero() {
            self.values.remove(&x);
        } else {
            self.values.insert(x, v);
        }
    }

    pub fn get(&self, x: &[i64]) -> T {
        self.values.get(x).cloned().unwrap_or_else(T::zero)
    }

    pub fn support_len(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, &T)> {
        self.values.iter()
    }

    pub fn sum(&self) -> T {
        self.values.values().fold(T::zero(), |a, b| a + b.clone())
    }

    pub fn l1_norm(&self) -> T {
        self.values.values().fold(T::zero(), |a, b| a + b.abs_val())
    }

    pub fn sup_norm(&self) -> T {
        self.values
            .values()
            .map(|v| v.abs_val())
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Sum of |f|^p as f64.
    pub fn lp_power(&self, p: f64) -> f64 {
        self.values.values().map(|v| v.to_f64().abs().powf(p)).sum()
    }

    pub fn inner(&self, other: &Self) -> T {
        let mut s = T::zero();
        for (x, v) in &self.values {
            if let Some(w) = other.values.get(x) {
                s += v.clone() * w.clone();
            }
        }
        s
    }

    /// Componentwise (min, max) over the support, if nonempty.
    pub fn bounding_box(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        let mut it = self.values.keys();
        let first = it.next()?;
        let (mut lo, mut hi) = (first.clone(), first.clone());
        for x in it {
            for j in 0..self.d {
                lo[j] = lo[j].min(x[j]);
                hi[j] = hi[j].max(x[j]);
            }
        }
        Some((lo, hi))
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> LatticeFunction<U> {
        let mut out = LatticeFunction::new(self.d);
        for (x, v) in &self.values {
            out.set(x.clone(), f(v));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("d={}\n", self.d);
        for (x, v) in &self.values {
            for c in x {
                s.push_str(&c.to_string());
                s.push(' ');
            }
            s.push_str(&v.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let head = lines.next().ok_or_else(|| LabError::Parse("empty input".into()))?;
        let d: usize = head
            .strip_prefix("d=")
            .and_then(|s| s.trim().parse().ok())
            .filter(|&d| d >= 1)
            .ok_or_else(|| LabError::Parse(format!("bad header {head:?}")))?;
        let mut f = Self::new(d);
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != d + 1 {
                return Err(LabError::Parse(format!("expected {} fields: {line:?}", d + 1)));
            }
            let x = parts[..d]
                .iter()
                .map(|p| p.parse::<i64>().map_err(|e| LabError::Parse(format!("{p:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let v = parts[d]
                .parse::<T>()
                .map_err(|_| LabError::Parse(format!("bad value {:?}", parts[d])))?;
            f.set(x, v);
        }
        Ok(f)
    }
}

/// A_n f: average of f over the sphere |y|^2 = n.
pub fn spherical_average<T: Scalar>(f: &LatticeFunction<T>, n: u64) -> Result<LatticeFunction<T>> {
    let d = f.dim();
    let pts = sphere_points(d, n);
    if pts.is_empty() {
        return Err(LabError::EmptySphere { d, n });
    }
    let r = pts.len() as u128;
    let mut acc: HashMap<Vec<i64>, T> = HashMap::new();
    for (x, v) in f.iter() {
        for y in &pts {
            let z: Vec<i64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
            *acc.entry(z).or_insert_with(T::zero) += v.clone();
        }
    }
    let mut out = LatticeFunction::new(d);
    for (z, s) in acc {
        out.set(z, s.div_count(r));
    }
    Ok(out)
}

// Points within squared distance n_hi of the support.
fn reach<T: Scalar>(f: &LatticeFunction<T>, n_hi: u64) -> Vec<Vec<i64>> {
    let ball = ball_points(f.dim(), n_hi);
    let mut set: HashSet<Vec<i64>> = HashSet::new();
    for (x, _) in f.iter() {
        for y in &ball {
            set.insert(x.iter().zip(y).map(|(a, b)| a + b).collect());
        }
    }
    let mut v: Vec<Vec<i64>> = set.into_iter().collect();
    v.sort();
    v
}

// For each output point: max over n in [lo, hi] with r_d(n) > 0 of |A_n f(x)|.
fn sup_over_range<T: Scalar>(f: &LatticeFunction<T>, lo: u64, hi: u64) -> LatticeFunction<T> {
    let d = f.dim();
    let table = RdTable::new(d, hi);
    let outs = reach(f, hi);
    let supp: Vec<(&Vec<i64>, &T)> = f.iter().collect();
    let vals: Vec<(Vec<i64>, T)> = outs
        .into_par_iter()
        .map(|x| {
            let mut sums: BTreeMap<u64, T> = BTreeMap::new();
            for (s, v) in &supp {
                let n = dist2(&x, s);
                if n >= lo && n <= hi {
                    *sums.entry(n).or_insert_with(T::zero) += (*v).clone();
                }
            }
            let mut best = T::zero();
            for (n, s) in sums {
                let a = s.div_count(table.get(d, n)).abs_val();
                if a > best {
                    best = a;
                }
            }
            (x, best)
        })
        .collect();
    let mut out = LatticeFunction::new(d);
    for (x, v) in vals {
        out.set(x, v);
    }
    out
}

/// sup over n in [L^2, 4L^2) of |A_n f|.
pub fn dyadic_maximal<T: Scalar>(f: &LatticeFunction<T>, big_l: u64) -> Result<LatticeFunction<T>> {
    if big_l == 0 {
        return Err(LabError::InvalidArgument("dyadic scale must be positive".into()));
    }
    Ok(sup_over_range(f, big_l * big_l, 4 * big_l * big_l - 1))
}

#[derive(Debug, Clone)]
pub struct FullMaximal<T> {
    pub values: LatticeFunction<T>,
    pub n_max: u64,
    pub computed_max: f64,
    /// bound on sup_{n > n_max} |A_n f| from ||f||_1 / min r_d(n) over (n_max, 2 n_max]
    pub tail_bound: f64,
    pub certified: bool,
}

/// sup over 1 <= n <= n_max of |A_n f|, with a tail bound for larger radii.
pub fn full_maximal<T: Scalar>(f: &LatticeFunction<T>, n_max: u64) -> Result<FullMaximal<T>> {
    if n_max == 0 {
        return Err(LabError::InvalidArgument("n_max must be positive".into()));
    }
    let d = f.dim();
    let values = sup_over_range(f, 1, n_max);
    let computed_max = values.sup_norm().to_f64();
    let t = RdTable::new(d, 2 * n_max);
    let min_r = (n_max + 1..=2 * n_max).map(|n| t.get(d, n)).filter(|&r| r > 0).min();
    let tail_bound = match min_r {
        Some(r) => f.l1_norm().to_f64() / r as f64,
        None => f64::INFINITY,
    };
    Ok(FullMaximal {
        values,
        n_max,
        computed_max,
        tail_bound,
        certified: tail_bound < computed_max,
    })
}
