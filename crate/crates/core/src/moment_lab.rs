//! Empirical checks of the arithmetic estimates: Ramanujan moments over
//! dyadic blocks, lcm-reciprocal sums, gcd-product sums, Gauss sum
//! magnitudes and Kloosterman sums with restricted inverses.

use crate::arithmetic::{gcd, gcd_product_period_sum, kloosterman_scan, ramanujan_sum, units, GaussTable};
use crate::error::{LabError, Result};
use crate::numerics::{fit_loglog, LineFit};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Exponent 1 + delta used when reporting measured constants.
pub const REPORT_DELTA: f64 = 0.2;

/// Largest number of terms any single sweep may touch.
pub const DEFAULT_BUDGET: u64 = 1 << 28;

// keeps the per-n accumulator within 2 GiB
const MAX_WINDOW: u64 = 1 << 28;

/// One JSON record of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub op: String,
    pub params: serde_json::Value,
    pub value: f64,
    pub slope: Option<f64>,
    pub r2: Option<f64>,
    pub runtime_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub big_q: u64,
    pub k: u32,
    pub n_start: u64,
    pub m: u64,
    /// sum over n in [N, N+M) of (sum_{Q <= q < 2Q} |c_q(n)|)^k, exact
    pub power_sum: u128,
    pub value: f64,
    pub bound_ratio: f64,
}

/// [ (1/M) sum_{n=N}^{N+M-1} ( sum_{Q <= q < 2Q} |c_q(n)| )^k ]^{1/k}.
pub fn ramanujan_moment(big_q: u64, k: u32, n_start: u64, m: u64) -> Result<MomentReport> {
    ramanujan_moment_budget(big_q, k, n_start, m, DEFAULT_BUDGET)
}

pub fn ramanujan_moment_budget(big_q: u64, k: u32, n_start: u64, m: u64, budget: u64) -> Result<MomentReport> {
    if big_q == 0 || k == 0 {
        return Err(LabError::InvalidArgument("need Q >= 1 and k >= 1".into()));
    }
    let need = big_q.checked_pow(k).unwrap_or(u64::MAX);
    if m < need {
        return Err(LabError::HypothesisViolated(format!("M = {m} < Q^k = {need}")));
    }
    if m > MAX_WINDOW || m.saturating_mul(big_q) > budget {
        return Err(LabError::BudgetExceeded(format!("{m} terms x {big_q} moduli")));
    }
    let len = m as usize;
    let mut acc = vec![0u64; len];
    for q in big_q..2 * big_q {
        let table: Vec<u64> = (0..q).map(|r| ramanujan_sum(q, r as i64).unsigned_abs()).collect();
        let mut r = (n_start % q) as usize;
        for a in acc.iter_mut() {
            *a += table[r];
            r += 1;
            if r == q as usize {
                r = 0;
            }
        }
    }
    let mut power_sum: u128 = 0;
    for &a in &acc {
        let p = (a as u128)
            .checked_pow(k)
            .ok_or_else(|| LabError::BudgetExceeded("moment power overflows u128".into()))?;
        power_sum = power_sum
            .checked_add(p)
            .ok_or_else(|| LabError::BudgetExceeded("moment sum overflows u128".into()))?;
    }
    let value = (power_sum as f64 / m as f64).powf(1.0 / k as f64);
    Ok(MomentReport {
        big_q,
        k,
        n_start,
        m,
        power_sum,
        value,
        bound_ratio: value / big_q as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub fit: LineFit,
    pub points: Vec<(u64, f64)>,
    /// max over the sweep of value / Q^{1 + REPORT_DELTA}
    pub measured_a: f64,
}

fn slope_report(points: Vec<(u64, f64)>, exponent: f64) -> SlopeReport {
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let measured_a = points.iter().map(|&(q, v)| v / (q as f64).powf(exponent)).fold(0.0, f64::max);
    SlopeReport {
        fit: fit_loglog(&xs, &ys),
        points,
        measured_a,
    }
}

/// Log-log slope of the moment against Q, with M = Q^k and N fixed.
pub fn moment_slope(k: u32, qs: &[u64], n_start: u64) -> Result<SlopeReport> {
    moment_slope_budget(k, qs, n_start, DEFAULT_BUDGET)
}

pub fn moment_slope_budget(k: u32, qs: &[u64], n_start: u64, budget: u64) -> Result<SlopeReport> {
    let mut points = vec![];
    for &q in qs {
        let m = q.checked_pow(k).ok_or_else(|| LabError::BudgetExceeded(format!("Q^k for Q={q}")))?;
        points.push((q, ramanujan_moment_budget(q, k, n_start, m, budget)?.value));
    }
    Ok(slope_report(points, 1.0 + REPORT_DELTA))
}

fn tuple_count(big_q: u64, k: u32, budget: u64) -> Result<()> {
    match big_q.checked_pow(k) {
        Some(c) if c <= budget => Ok(()),
        _ => Err(LabError::BudgetExceeded(format!("{big_q}^{k} tuples"))),
    }
}

fn lcm_u128(a: u128, b: u128) -> u128 {
    let (mut x, mut y) = (a, b);
    while y != 0 {
        (x, y) = (y, x % y);
    }
    a / x * b
}

/// sum over q in [Q, 2Q)^k of 1/lcm(q), in double precision.
pub fn lcm_reciprocal_sum(big_q: u64, k: u32) -> Result<f64> {
    lcm_reciprocal_sum_budget(big_q, k, DEFAULT_BUDGET)
}

pub fn lcm_reciprocal_sum_budget(big_q: u64, k: u32, budget: u64) -> Result<f64> {
    if big_q == 0 || k == 0 {
        return Err(LabError::InvalidArgument("need Q >= 1 and k >= 1".into()));
    }
    tuple_count(big_q, k, budget)?;
    fn rec(big_q: u64, left: u32, l: u128) -> f64 {
        if left == 0 {
            return 1.0 / l as f64;
        }
        (big_q..2 * big_q).map(|q| rec(big_q, left - 1, lcm_u128(l, q as u128))).sum()
    }
    if k == 2 {
        // 1/lcm(a, b) = gcd(a, b) / (a b)
        let mut s = 0.0;
        for a in big_q..2 * big_q {
            let mut row = 0.0;
            for b in big_q..2 * big_q {
                row += gcd(a, b) as f64 / b as f64;
            }
            s += row / a as f64;
        }
        return Ok(s);
    }
    Ok(rec(big_q, k, 1))
}

/// Exact version of `lcm_reciprocal_sum` for small enumerations.
pub fn lcm_reciprocal_sum_exact(big_q: u64, k: u32, budget: u64) -> Result<BigRational> {
    if big_q == 0 || k == 0 {
        return Err(LabError::InvalidArgument("need Q >= 1 and k >= 1".into()));
    }
    tuple_count(big_q, k, budget)?;
    fn rec(big_q: u64, left: u32, l: u128, out: &mut BigRational) {
        if left == 0 {
            *out += BigRational::new(BigInt::from(1), BigInt::from(l));
            return;
        }
        for q in big_q..2 * big_q {
            rec(big_q, left - 1, lcm_u128(l, q as u128), out);
        }
    }
    let mut out = BigRational::zero();
    rec(big_q, k, 1, &mut out);
    Ok(out)
}

/// Log-log slope of the lcm-reciprocal sum against Q.
pub fn lcm_slope(k: u32, qs: &[u64]) -> Result<SlopeReport> {
    let mut points = vec![];
    for &q in qs {
        points.push((q, lcm_reciprocal_sum(q, k)?));
    }
    Ok(slope_report(points, REPORT_DELTA * k as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcdBoundReport {
    pub big_q: u64,
    pub k: u32,
    pub trials: usize,
    pub max_ratio: f64,
    pub worst: Vec<u64>,
}

/// max over sampled q in [Q, 2Q)^k of sum_{n <= lcm(q)} prod_j (q_j, n) / Q^{k(1 + delta)}.
pub fn gcd_product_bound_check(big_q: u64, k: u32, trials: usize, seed: u64) -> Result<GcdBoundReport> {
    if big_q == 0 || k == 0 {
        return Err(LabError::InvalidArgument("need Q >= 1 and k >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (big_q as f64).powf(k as f64 * (1.0 + REPORT_DELTA));
    let mut best = (0.0, vec![]);
    for _ in 0..trials {
        let qs: Vec<u64> = (0..k).map(|_| rng.gen_range(big_q..2 * big_q)).collect();
        let s = gcd_product_period_sum(&qs).to_f64().unwrap_or(f64::INFINITY);
        let r = s / scale;
        if r > best.0 {
            best = (r, qs);
        }
    }
    Ok(GcdBoundReport {
        big_q,
        k,
        trials,
        max_ratio: best.0,
        worst: best.1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussScan {
    pub q_max: u64,
    pub d_max: usize,
    pub samples: usize,
    pub checked: u64,
    /// max of q^{d/2} |G| / 2^{d/2}; at most 1 when the bound holds
    pub max_ratio: f64,
    pub violations: u64,
    /// q^{1/2} |G| at q = 4, d = 1, maximized over units and l
    pub q4_peak: f64,
}

/// Checks q^{d/2}|G(a/q, l)| <= 2^{d/2} for q <= q_max, d <= d_max, every
/// unit a and `samples` random l per (q, d) (all l when there are fewer).
pub fn gauss_bound_sweep(q_max: u64, d_max: usize, samples: usize, seed: u64) -> GaussScan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scan = GaussScan {
        q_max,
        d_max,
        samples,
        checked: 0,
        max_ratio: 0.0,
        violations: 0,
        q4_peak: 0.0,
    };
    for q in 1..=q_max {
        let tables: Vec<Vec<f64>> = units(q)
            .into_iter()
            .map(|a| {
                let t = GaussTable::new(a as i64, q).unwrap();
                (0..q as i64).map(|b| t.get(b).norm()).collect()
            })
            .collect();
        for d in 1..=d_max {
            let full = (q as u128).pow(d as u32);
            let ells: Vec<Vec<u64>> = if full <= samples as u128 {
                (0..full as u64)
                    .map(|mut i| {
                        (0..d)
                            .map(|_| {
                                let c = i % q;
                                i /= q;
                                c
                            })
                            .collect()
                    })
                    .collect()
            } else {
                (0..samples).map(|_| (0..d).map(|_| rng.gen_range(0..q)).collect()).collect()
            };
            let scale = (q as f64).powf(d as f64 / 2.0) / 2f64.powf(d as f64 / 2.0);
            for t in &tables {
                for ell in &ells {
                    let g: f64 = ell.iter().map(|&l| t[l as usize]).product();
                    let ratio = g * scale;
                    scan.checked += 1;
                    scan.max_ratio = scan.max_ratio.max(ratio);
                    if ratio > 1.0 + 1e-9 {
                        scan.violations += 1;
                    }
                    if q == 4 && d == 1 {
                        scan.q4_peak = scan.q4_peak.max(g * 2.0);
                    }
                }
            }
        }
    }
    scan
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KloostermanReport {
    pub primes: Vec<u64>,
    pub normalized_max: Vec<f64>,
    pub fit: LineFit,
}

pub fn primes_up_to(n: u64) -> Vec<u64> {
    (2..=n).filter(|&p| (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)).collect()
}

/// For each prime q <= q_max: max over b, x, y of |K(b; x, y)| / sqrt(gcd(b,q) q),
/// and the log-log slope of that maximum against q.
pub fn kloosterman_slope(q_max: u64) -> KloostermanReport {
    let primes: Vec<u64> = primes_up_to(q_max).into_iter().filter(|&p| p >= 3).collect();
    let normalized_max: Vec<f64> = primes.iter().map(|&p| kloosterman_scan(p)).collect();
    let xs: Vec<f64> = primes.iter().map(|&p| p as f64).collect();
    let fit = fit_loglog(&xs, &normalized_max);
    KloostermanReport {
        primes,
        normalized_max,
        fit,
    }
}

/// Times a closure and wraps its scalar output as a record.
pub fn timed<T>(
    op: &str,
    params: serde_json::Value,
    f: impl FnOnce() -> Result<T>,
    summarize: impl Fn(&T) -> (f64, Option<LineFit>),
) -> Result<(T, Record)> {
    let t0 = Instant::now();
    let out = f()?;
    let (value, fit) = summarize(&out);
    let rec = Record {
        op: op.to_string(),
        params,
        value,
        slope: fit.map(|f| f.slope),
        r2: fit.map(|f| f.r2),
        runtime_ms: t0.elapsed().as_millis() as u64,
    };
    Ok((out, rec))
}
