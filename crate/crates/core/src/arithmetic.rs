//! Exponential sums and elementary arithmetic functions.

use crate::error::{LabError, Result};
use crate::numerics::CompensatedSum;
use num_bigint::BigUint;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Zero};
use rustfft::FftPlanner;
use std::f64::consts::TAU;

/// Trial-division factorization, primes ascending.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn mobius(n: u64) -> i64 {
    assert!(n >= 1, "mobius needs n >= 1");
    let f = factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

pub fn euler_phi(n: u64) -> u64 {
    assert!(n >= 1, "euler_phi needs n >= 1");
    factorize(n).into_iter().fold(n, |acc, (p, _)| acc / p * (p - 1))
}

pub fn gcd(a: u64, b: u64) -> u64 {
    a.gcd(&b)
}

/// Units of Z/q in ascending order; Z_1^x is {0}.
pub fn units(q: u64) -> Vec<u64> {
    if q == 1 {
        return vec![0];
    }
    (1..q).filter(|&a| gcd(a, q) == 1).collect()
}

/// Residue of `n` in [0, q).
pub fn reduce(n: i64, q: u64) -> u64 {
    (n as i128).rem_euclid(q as i128) as u64
}

pub fn mod_inverse(a: i64, q: u64) -> Result<u64> {
    if q == 0 {
        return Err(LabError::InvalidArgument("modulus must be positive".into()));
    }
    if q == 1 {
        return Ok(0);
    }
    let a0 = reduce(a, q);
    let e = (a0 as i64).extended_gcd(&(q as i64));
    if e.gcd != 1 {
        return Err(LabError::NotCoprime { a, q });
    }
    Ok(reduce(e.x, q))
}

/// Table of inverses: `inv[a]` for units a, 0 elsewhere.
pub fn inverse_table(q: u64) -> Vec<u64> {
    let mut inv = vec![0u64; q as usize];
    for a in units(q) {
        inv[a as usize] = mod_inverse(a as i64, q).unwrap();
    }
    inv
}

/// Closed form c_q(n) = mu(q/g) phi(q) / phi(q/g), g = gcd(q, n).
pub fn ramanujan_sum(q: u64, n: i64) -> i64 {
    assert!(q >= 1);
    let r = reduce(n, q);
    let g = gcd(q, r);
    let m = q / g;
    mobius(m) * (euler_phi(q) / euler_phi(m)) as i64
}

/// e^{2 pi i k / q} for k in [0, q).
#[derive(Debug, Clone)]
pub struct RootsOfUnity {
    q: u64,
    table: Vec<Complex64>,
}

impl RootsOfUnity {
    pub fn new(q: u64) -> Self {
        assert!(q >= 1);
        let table = (0..q).map(|k| Complex64::from_polar(1.0, TAU * k as f64 / q as f64)).collect();
        Self { q, table }
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    /// e^{2 pi i k / q} for any integer k.
    pub fn at(&self, k: i128) -> Complex64 {
        self.table[k.rem_euclid(self.q as i128) as usize]
    }
}

/// The literal sum over units of e^{2 pi i a n / q}.
pub fn ramanujan_sum_direct(q: u64, n: i64) -> Complex64 {
    let w = RootsOfUnity::new(q);
    units(q)
        .into_iter()
        .map(|a| w.at(a as i128 * n as i128))
        .collect::<CompensatedSum>()
        .value()
}

/// (1/q) sum_{n mod q} e^{2 pi i (a n^2 - b n) / q}.
pub fn gauss_sum_1d(a: i64, b: i64, q: u64) -> Complex64 {
    let w = RootsOfUnity::new(q);
    gauss_sum_1d_with(&w, a, b)
}

fn gauss_sum_1d_with(w: &RootsOfUnity, a: i64, b: i64) -> Complex64 {
    let q = w.modulus();
    let (a, b) = (reduce(a, q) as i128, reduce(b, q) as i128);
    let s: CompensatedSum = (0..q as i128).map(|n| w.at(a * n * n - b * n)).collect();
    s.value() / q as f64
}

fn check_unit(a: i64, q: u64) -> Result<()> {
    if q == 0 {
        return Err(LabError::InvalidArgument("modulus must be positive".into()));
    }
    if q > 1 && gcd(reduce(a, q), q) != 1 {
        return Err(LabError::NotCoprime { a, q });
    }
    Ok(())
}

/// G(a/q, l) = q^{-d} sum_{n in (Z/q)^d} e^{2 pi i (a|n|^2 - n.l)/q}, as a product of 1-D sums.
pub fn gauss_sum(a: i64, q: u64, ell: &[i64]) -> Result<Complex64> {
    check_unit(a, q)?;
    let w = RootsOfUnity::new(q);
    Ok(ell
        .iter()
        .map(|&l| gauss_sum_1d_with(&w, a, l))
        .fold(Complex64::new(1.0, 0.0), |acc, g| acc * g))
}

/// All 1-D Gauss sums g(a, b), b in [0, q), for one unit a. Built with one FFT.
#[derive(Debug, Clone)]
pub struct GaussTable {
    pub a: i64,
    pub q: u64,
    values: Vec<Complex64>,
}

impl GaussTable {
    pub fn new(a: i64, q: u64) -> Result<Self> {
        check_unit(a, q)?;
        let w = RootsOfUnity::new(q);
        let ar = reduce(a, q) as i128;
        let mut buf: Vec<Complex64> = (0..q as i128).map(|n| w.at(ar * n * n)).collect();
        let fft = FftPlanner::new().plan_fft_forward(q as usize);
        fft.process(&mut buf);
        for v in &mut buf {
            *v /= q as f64;
        }
        Ok(Self { a, q, values: buf })
    }

    pub fn get(&self, b: i64) -> Complex64 {
        self.values[reduce(b, self.q) as usize]
    }

    /// Product over coordinates.
    pub fn eval(&self, ell: &[i64]) -> Complex64 {
        ell.iter().fold(Complex64::new(1.0, 0.0), |acc, &l| acc * self.get(l))
    }

    /// sum_{l mod q} g(a, l) e^{2 pi i l x / q} for each x in [0, q).
    pub fn inversion_row(&self) -> Vec<Complex64> {
        let w = RootsOfUnity::new(self.q);
        (0..self.q as i128)
            .map(|x| {
                (0..self.q as i128)
                    .map(|l| self.values[l as usize] * w.at(l * x))
                    .collect::<CompensatedSum>()
                    .value()
            })
            .collect()
    }
}

/// Returns (sum_l G(a/q, l) e^{2 pi i l.x/q}, e^{2 pi i a|x|^2/q}).
///
/// The left side factors over coordinates, so it is evaluated one axis at a time.
pub fn gauss_inversion_check(a: i64, q: u64, x: &[i64]) -> Result<(Complex64, Complex64)> {
    let table = GaussTable::new(a, q)?;
    let w = RootsOfUnity::new(q);
    let mut lhs = Complex64::new(1.0, 0.0);
    for &xj in x {
        let s: CompensatedSum = (0..q as i128).map(|l| table.get(l as i64) * w.at(l * xj as i128)).collect();
        lhs *= s.value();
    }
    let norm: i128 = x.iter().map(|&v| v as i128 * v as i128).sum();
    let rhs = w.at(reduce(a, q) as i128 * norm);
    Ok((lhs, rhs))
}

/// sum over units a with x <= a^{-1} <= y of e^{2 pi i a b / q}.
pub fn kloosterman_restricted(b: i64, q: u64, x: u64, y: u64) -> Result<Complex64> {
    if q < 2 || x < 1 || x > y || y >= q {
        return Err(LabError::BadRange { x, y, q });
    }
    let w = RootsOfUnity::new(q);
    let inv = inverse_table(q);
    let s: CompensatedSum = (x..=y)
        .filter(|&s| gcd(s, q) == 1)
        .map(|s| w.at(inv[s as usize] as i128 * b as i128))
        .collect();
    Ok(s.value())
}

/// max over b and 1 <= x <= y < q of |K(b; x, y)| / sqrt(gcd(b,q) q).
///
/// Interval sums are differences of prefix sums, so each b costs O(q^2).
pub fn kloosterman_scan(q: u64) -> f64 {
    assert!(q >= 2);
    let w = RootsOfUnity::new(q);
    let inv = inverse_table(q);
    let mut best = 0.0f64;
    for b in 0..q {
        let mut prefix = vec![Complex64::new(0.0, 0.0)];
        let mut acc = CompensatedSum::new();
        for s in 1..q {
            if gcd(s, q) == 1 {
                acc.add(w.at(inv[s as usize] as i128 * b as i128));
            }
            prefix.push(acc.value());
        }
        let mut diam = 0.0f64;
        for i in 0..prefix.len() {
            for j in i + 1..prefix.len() {
                diam = diam.max((prefix[j] - prefix[i]).norm());
            }
        }
        let g = gcd(b, q) as f64;
        best = best.max(diam / (g * q as f64).sqrt());
    }
    best
}

pub fn lcm_vec(qs: &[u64]) -> BigUint {
    qs.iter().fold(BigUint::one(), |acc, &q| acc.lcm(&BigUint::from(q)))
}

/// sum_{n=1}^{L} prod_j gcd(q_j, n), term by term.
pub fn gcd_product_sum(qs: &[u64], l: u64) -> BigUint {
    let mut total = BigUint::zero();
    for n in 1..=l {
        let mut term = BigUint::one();
        for &q in qs {
            term *= gcd(q, n);
        }
        total += term;
    }
    total
}

/// gcd_product_sum over one full period L = lcm(qs), by multiplicativity.
///
/// n -> prod_j gcd(q_j, n) is multiplicative and L-periodic, so the period
/// sum factors over the prime powers p^e || L.
pub fn gcd_product_period_sum(qs: &[u64]) -> BigUint {
    let mut primes: Vec<u64> = qs.iter().flat_map(|&q| factorize(q).into_iter().map(|(p, _)| p)).collect();
    primes.sort_unstable();
    primes.dedup();
    let mut total = BigUint::one();
    for p in primes {
        let vals: Vec<u32> = qs.iter().map(|&q| valuation(q, p)).collect();
        let e = *vals.iter().max().unwrap();
        let pb = BigUint::from(p);
        let mut local = BigUint::zero();
        for t in 0..e {
            // residues mod p^e with valuation exactly t
            let count = pb.pow(e - t) - pb.pow(e - t - 1);
            let weight: u32 = vals.iter().map(|&v| v.min(t)).sum();
            local += count * pb.pow(weight);
        }
        let weight: u32 = vals.iter().sum();
        local += pb.pow(weight);
        total *= local;
    }
    total
}

fn valuation(mut q: u64, p: u64) -> u32 {
    let mut e = 0;
    while q.is_multiple_of(p) {
        q /= p;
        e += 1;
    }
    e
}

/// Mobius and totient tables up to `n` inclusive.
#[derive(Debug, Clone)]
pub struct Sieve {
    pub mu: Vec<i8>,
    pub phi: Vec<u64>,
}

impl Sieve {
    pub fn new(n: usize) -> Self {
        let mut mu = vec![1i8; n + 1];
        let mut phi: Vec<u64> = (0..=n as u64).collect();
        let mut composite = vec![false; n + 1];
        for p in 2..=n {
            if composite[p] {
                continue;
            }
            for m in (p..=n).step_by(p) {
                if m > p {
                    composite[m] = true;
                }
                phi[m] -= phi[m] / p as u64;
                mu[m] = -mu[m];
            }
            let pp = p.saturating_mul(p);
            if pp <= n {
                for m in (pp..=n).step_by(pp) {
                    mu[m] = 0;
                }
            }
        }
        if n >= 1 {
            mu[1] = 1;
        }
        Self { mu, phi }
    }

    /// c_q(n) from the tables; q must be within range.
    pub fn ramanujan(&self, q: u64, n: i64) -> i64 {
        let g = gcd(q, reduce(n, q));
        let m = (q / g) as usize;
        self.mu[m] as i64 * (self.phi[q as usize] / self.phi[m]) as i64
    }
}
