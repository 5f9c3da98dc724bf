//! Frequency-side decomposition of the discrete spherical average: the exact
//! symbol, the Gauss-sum main term, the smooth cutoff and the sphere Fourier
//! transform, plus the spatial kernel of one dyadic block of denominators.

use crate::arithmetic::{euler_phi, ramanujan_sum, units, GaussTable, RootsOfUnity};
use crate::error::{LabError, Result};
use crate::lattice::{norm2, sphere_count, sphere_points};
use crate::numerics::integrate;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};
use std::sync::OnceLock;

/// Smooth plateau: 1 on [-1/8, 1/8], 0 outside (-1/4, 1/4).
pub fn phi(t: f64) -> f64 {
    let s = (0.25 - t.abs()) * 8.0;
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let psi = |u: f64| if u <= 0.0 { 0.0 } else { (-1.0 / u).exp() };
    let a = psi(s);
    a / (a + psi(1.0 - s))
}

/// Phi(xi) = prod_j phi(xi_j).
pub fn big_phi(xi: &[f64]) -> f64 {
    xi.iter().map(|&t| phi(t)).product()
}

const QUAD_NODES: usize = 2048;
const TABLE_STEP: f64 = 1.0 / 128.0;
const TABLE_MAX: f64 = 128.0;
const ENV_STEP: f64 = 1.0 / 16.0;
const ENV_MAX: f64 = 1024.0;

/// phi and its inverse Fourier transform, tabulated for interpolation.
#[derive(Debug, Clone)]
pub struct BumpProfile {
    nodes: Vec<(f64, f64)>,
    values: Vec<f64>,
    derivs: Vec<f64>,
    envelope: Vec<f64>,
}

impl BumpProfile {
    /// The shared profile; the tables take a fraction of a second to build.
    pub fn standard() -> &'static BumpProfile {
        static CELL: OnceLock<BumpProfile> = OnceLock::new();
        CELL.get_or_init(BumpProfile::build)
    }

    fn build() -> Self {
        // phi is even, so the transform is 2 * int_0^{1/4} phi(s) cos(2 pi s t) ds;
        // the even extension is flat at +-1/4 and the midpoint rule converges fast
        let ds = 0.25 / QUAD_NODES as f64;
        let nodes: Vec<(f64, f64)> = (0..QUAD_NODES)
            .map(|k| {
                let s = (k as f64 + 0.5) * ds;
                (s, 2.0 * ds * phi(s))
            })
            .collect();
        let mut p = Self {
            nodes,
            values: vec![],
            derivs: vec![],
            envelope: vec![],
        };
        let m = (TABLE_MAX / TABLE_STEP) as usize + 1;
        let (values, derivs): (Vec<f64>, Vec<f64>) = (0..m).into_par_iter().map(|i| p.direct_pair(i as f64 * TABLE_STEP)).unzip();
        p.values = values;
        p.derivs = derivs;
        let me = (ENV_MAX / ENV_STEP) as usize + 1;
        let samples: Vec<(f64, f64)> = (0..me).into_par_iter().map(|i| p.direct_pair(i as f64 * ENV_STEP)).collect();
        // local sup over each cell: endpoint values plus half a step of slope
        let mut cell: Vec<f64> = (0..me)
            .map(|i| {
                let j = (i + 1).min(me - 1);
                let v = samples[i].0.abs().max(samples[j].0.abs());
                let d = samples[i].1.abs().max(samples[j].1.abs());
                1.05 * (v + 0.5 * ENV_STEP * d)
            })
            .collect();
        for i in (0..me - 1).rev() {
            cell[i] = cell[i].max(cell[i + 1]);
        }
        p.envelope = cell;
        p
    }

    /// (phi_check(t), phi_check'(t)) by quadrature.
    fn direct_pair(&self, t: f64) -> (f64, f64) {
        let mut v = 0.0;
        let mut d = 0.0;
        // rotate instead of calling cos/sin per node
        let step = Complex64::from_polar(1.0, TAU * t * 0.25 / QUAD_NODES as f64);
        let mut z = Complex64::from_polar(1.0, TAU * t * self.nodes[0].0);
        for (k, &(s, w)) in self.nodes.iter().enumerate() {
            if k % 256 == 0 {
                z = Complex64::from_polar(1.0, TAU * t * s);
            }
            v += w * z.re;
            d -= w * TAU * s * z.im;
            z *= step;
        }
        (v, d)
    }

    /// phi_check(t) = int phi(s) e^{2 pi i s t} ds by quadrature, any t.
    pub fn phi_check_direct(&self, t: f64) -> f64 {
        self.direct_pair(t).0
    }

    /// phi_check(t), cubic Hermite from the table for |t| <= 128.
    pub fn phi_check(&self, t: f64) -> f64 {
        let t = t.abs();
        if t >= TABLE_MAX {
            return self.phi_check_direct(t);
        }
        let x = t / TABLE_STEP;
        let i = x as usize;
        let u = x - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.derivs[i] * TABLE_STEP, self.derivs[i + 1] * TABLE_STEP);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y0 + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * y1 + (u3 - u2) * m1
    }

    /// Nonincreasing majorant of |phi_check| on [t, inf); zero past 1024,
    /// where the transform is below double precision resolution.
    pub fn envelope(&self, t: f64) -> f64 {
        let t = t.abs();
        if t > ENV_MAX {
            return 0.0;
        }
        self.envelope[(t / ENV_STEP) as usize]
    }

    /// Phi_check_q(z) = q^{-d} prod_j phi_check(z_j / q).
    pub fn big_phi_check_q(&self, q: u64, z: &[f64]) -> f64 {
        let qf = q as f64;
        z.iter().map(|&v| self.phi_check(v / qf) / qf).product()
    }
}

fn sphere_weight_norm(d: usize) -> f64 {
    // int_0^pi sin^{d-2}
    let mut w = if d.is_multiple_of(2) { PI } else { 2.0 };
    let mut k = if d.is_multiple_of(2) { 2 } else { 3 };
    while k < d {
        k += 2;
        w *= (k - 3) as f64 / (k - 2) as f64;
    }
    w
}

/// Fourier transform of the unit-mass surface measure on the radius-lambda
/// sphere in R^d at a frequency of length r (so the value at 0 is 1).
pub fn sphere_ft(d: usize, lambda: f64, r: f64) -> f64 {
    assert!(d >= 1 && lambda > 0.0);
    let k = TAU * lambda * r;
    if k == 0.0 {
        return 1.0;
    }
    if d == 1 {
        return k.cos();
    }
    let p = (d - 2) as i32;
    let (v, _) = integrate(|th: f64| (k * th.cos()).cos() * th.sin().powi(p), 0.0, PI, 1e-13);
    v / sphere_weight_norm(d)
}

/// Parameters of one radius: dimension, n = lambda^2 and the dyadic level.
#[derive(Debug, Clone)]
pub struct SymbolContext {
    pub d: usize,
    pub n: u64,
    pub big_l: u64,
    pub lambda: f64,
    points: Vec<Vec<i64>>,
    // per q <= big_l: (e^{-2 pi i n a/q}, 1-D Gauss table of a)
    blocks: Vec<Vec<(Complex64, GaussTable)>>,
}

impl SymbolContext {
    pub fn new(d: usize, n: u64, big_l: u64) -> Result<Self> {
        if d == 0 || big_l == 0 {
            return Err(LabError::InvalidArgument("need d >= 1 and level >= 1".into()));
        }
        if n < big_l * big_l || n >= 4 * big_l * big_l {
            return Err(LabError::HypothesisViolated(format!(
                "need level^2 <= n < 4 level^2, got n={n}, level={big_l}"
            )));
        }
        if sphere_count(d, n) == 0 {
            return Err(LabError::EmptySphere { d, n });
        }
        let points = sphere_points(d, n);
        let mut blocks = vec![vec![]];
        for q in 1..=big_l {
            let w = RootsOfUnity::new(q);
            let row = units(q)
                .into_iter()
                .map(|a| {
                    let phase = w.at(-(n as i128) * a as i128);
                    (phase, GaussTable::new(a as i64, q).unwrap())
                })
                .collect();
            blocks.push(row);
        }
        Ok(Self {
            d,
            n,
            big_l,
            lambda: (n as f64).sqrt(),
            points,
            blocks,
        })
    }

    pub fn sphere(&self) -> &[Vec<i64>] {
        &self.points
    }

    fn q_range(&self, q_lo: u64, q_hi: u64) -> std::ops::RangeInclusive<u64> {
        q_lo.max(1)..=q_hi.min(self.big_l)
    }

    // sum over units a of e^{-2 pi i n a/q} G(a/q, l)
    fn arithmetic_factor(&self, q: u64, ell: &[i64]) -> Complex64 {
        self.blocks[q as usize].iter().map(|(phase, g)| phase * g.eval(ell)).sum()
    }
}

/// (1/r_d(n)) sum_{|y|^2 = n} e^{-2 pi i y.xi}.
pub fn exact_symbol(ctx: &SymbolContext, xi: &[f64]) -> Complex64 {
    let mut s = Complex64::new(0.0, 0.0);
    for y in &ctx.points {
        let dot: f64 = y.iter().zip(xi).map(|(&a, &b)| a as f64 * b).sum();
        s += Complex64::from_polar(1.0, -TAU * dot);
    }
    s / ctx.points.len() as f64
}

// nearest l/q to xi per coordinate, and xi - l/q
fn nearest_center(q: u64, xi: &[f64]) -> (Vec<i64>, Vec<f64>) {
    let qf = q as f64;
    let ell: Vec<i64> = xi.iter().map(|&x| (x * qf).round() as i64).collect();
    let eta = xi.iter().zip(&ell).map(|(&x, &l)| x - l as f64 / qf).collect();
    (ell, eta)
}

/// Main-term symbol restricted to q in [q_lo, q_hi] (and q <= level).
pub fn block_symbol(ctx: &SymbolContext, xi: &[f64], q_lo: u64, q_hi: u64) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for q in ctx.q_range(q_lo, q_hi) {
        let (ell, eta) = nearest_center(q, xi);
        let cut: f64 = eta.iter().map(|&e| phi(q as f64 * e)).product();
        if cut == 0.0 {
            continue;
        }
        let r = eta.iter().map(|e| e * e).sum::<f64>().sqrt();
        total += ctx.arithmetic_factor(q, &ell) * cut * sphere_ft(ctx.d, ctx.lambda, r);
    }
    total
}

/// c_lambda(xi): the full main term, q = 1..=level.
pub fn main_symbol(ctx: &SymbolContext, xi: &[f64]) -> Complex64 {
    block_symbol(ctx, xi, 1, ctx.big_l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSup {
    pub sup: f64,
    pub argmax: Vec<f64>,
    pub samples: usize,
}

/// max |exact - main| over the grid xi = k/res - 1/2, k in [0, res)^d.
pub fn residual_symbol_sup(ctx: &SymbolContext, res: usize) -> ResidualSup {
    let d = ctx.d;
    let total = res.pow(d as u32);
    let best = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut k = idx;
            let xi: Vec<f64> = (0..d)
                .map(|_| {
                    let c = k % res;
                    k /= res;
                    c as f64 / res as f64 - 0.5
                })
                .collect();
            let v = (exact_symbol(ctx, &xi) - main_symbol(ctx, &xi)).norm();
            (v, idx)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    let mut k = best.1;
    let argmax = (0..d)
        .map(|_| {
            let c = k % res;
            k /= res;
            c as f64 / res as f64 - 0.5
        })
        .collect();
    ResidualSup {
        sup: best.0,
        argmax,
        samples: total,
    }
}

/// Sample budget and accuracy target for sphere quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QmcConfig {
    pub rel_target: f64,
    pub abs_floor: f64,
    pub max_samples: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for QmcConfig {
    fn default() -> Self {
        Self {
            rel_target: 1e-6,
            abs_floor: 1e-14,
            max_samples: 1 << 16,
            replicates: 8,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub converged: bool,
}

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

// Unit vector from a shifted Halton point through normalized Gaussians.
fn sphere_direction(index: u64, shift: &[f64], d: usize, out: &mut [f64]) {
    let pairs = d.div_ceil(2);
    for p in 0..pairs {
        let mut u1 = (radical_inverse(index, PRIMES[2 * p]) + shift[2 * p]).fract();
        let u2 = (radical_inverse(index, PRIMES[2 * p + 1]) + shift[2 * p + 1]).fract();
        if u1 <= 0.0 {
            u1 = f64::MIN_POSITIVE;
        }
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        out[2 * p] = r * c;
        if 2 * p + 1 < d {
            out[2 * p + 1] = r * s;
        }
    }
    let norm = out[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut out[..d] {
        *v /= norm;
    }
}

/// Randomized QMC mean of g over the unit sphere, with antithetic pairs.
pub fn sphere_mean(d: usize, cfg: &QmcConfig, g: impl Fn(&[f64]) -> f64) -> KernelEstimate {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let reps = cfg.replicates.max(2);
    let shifts: Vec<Vec<f64>> = (0..reps).map(|_| (0..8).map(|_| rng.gen::<f64>()).collect()).collect();
    let mut sums = vec![0.0; reps];
    let mut per = 0usize;
    let mut next = 64usize;
    let mut w = vec![0.0; d + 1];
    let mut neg = vec![0.0; d];
    loop {
        for (r, shift) in shifts.iter().enumerate() {
            for i in per..next {
                sphere_direction(i as u64 + 1, shift, d, &mut w);
                for j in 0..d {
                    neg[j] = -w[j];
                }
                sums[r] += 0.5 * (g(&w[..d]) + g(&neg));
            }
        }
        per = next;
        let means: Vec<f64> = sums.iter().map(|s| s / per as f64).collect();
        let mean = means.iter().sum::<f64>() / reps as f64;
        let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (reps - 1) as f64;
        let stderr = (var / reps as f64).sqrt();
        let target = (cfg.rel_target * mean.abs()).max(cfg.abs_floor);
        let samples = 2 * per * reps;
        let converged = stderr <= target;
        if converged || 2 * samples > cfg.max_samples {
            return KernelEstimate {
                value: mean,
                stderr,
                samples,
                converged,
            };
        }
        next = 2 * per;
    }
}

/// Denominators of the dyadic block [Q, 2Q) that enter the level-L main term.
pub fn block_denominators(ctx: &SymbolContext, big_q: u64) -> Vec<u64> {
    ctx.q_range(big_q, 2 * big_q - 1).collect()
}

/// Block kernel at x: sum_{Q <= q < 2Q} c_q(|x|^2 - n) (d sigma_lambda * Phi_check_q)(x),
/// with the sphere convolution estimated by randomized QMC.
pub fn block_kernel_estimate(big_q: u64, ctx: &SymbolContext, x: &[i64], cfg: &QmcConfig) -> Result<KernelEstimate> {
    if big_q == 0 || big_q > ctx.big_l {
        return Err(LabError::HypothesisViolated(format!("need 1 <= Q <= level, got Q={big_q}")));
    }
    if x.len() != ctx.d {
        return Err(LabError::InvalidArgument("point has wrong dimension".into()));
    }
    let m = norm2(x) as i64 - ctx.n as i64;
    let terms: Vec<(f64, u64)> = block_denominators(ctx, big_q)
        .into_iter()
        .map(|q| (ramanujan_sum(q, m) as f64, q))
        .filter(|(c, _)| *c != 0.0)
        .collect();
    if terms.is_empty() {
        return Ok(KernelEstimate {
            value: 0.0,
            stderr: 0.0,
            samples: 0,
            converged: true,
        });
    }
    let bump = BumpProfile::standard();
    let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let lambda = ctx.lambda;
    let d = ctx.d;
    Ok(sphere_mean(d, cfg, |w| {
        let mut z = [0.0f64; 16];
        for j in 0..d {
            z[j] = xf[j] - lambda * w[j];
        }
        terms.iter().map(|&(c, q)| c * bump.big_phi_check_q(q, &z[..d])).sum()
    }))
}

/// As `block_kernel_estimate`, failing when the accuracy target is missed.
pub fn block_kernel_direct(big_q: u64, ctx: &SymbolContext, x: &[i64], cfg: &QmcConfig) -> Result<KernelEstimate> {
    let e = block_kernel_estimate(big_q, ctx, x, cfg)?;
    if !e.converged {
        return Err(LabError::QuadratureNotConverged {
            stderr: e.stderr,
            target: (cfg.rel_target * e.value.abs()).max(cfg.abs_floor),
        });
    }
    Ok(e)
}

/// Real values on the torus (Z/N)^d, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub d: usize,
    pub n: usize,
    pub data: Vec<f64>,
}

const GRID_MAGIC: &[u8; 4] = b"SLGR";
const GRID_MAX_POINTS: usize = 1 << 24;

fn check_grid(d: usize, n: usize) -> Result<usize> {
    let total = (n as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if d == 0 || n == 0 || !n.is_power_of_two() || total > GRID_MAX_POINTS as u128 {
        return Err(LabError::GridTooLarge { n, d });
    }
    Ok(total as usize)
}

impl Grid {
    pub fn index(&self, x: &[i64]) -> usize {
        x.iter().fold(0, |acc, &c| acc * self.n + c.rem_euclid(self.n as i64) as usize)
    }

    pub fn get(&self, x: &[i64]) -> f64 {
        self.data[self.index(x)]
    }

    /// Grid coordinates of a flat index, centered into [-N/2, N/2).
    pub fn point(&self, mut idx: usize) -> Vec<i64> {
        let mut x = vec![0i64; self.d];
        for j in (0..self.d).rev() {
            let c = (idx % self.n) as i64;
            idx /= self.n;
            x[j] = if c >= self.n as i64 / 2 { c - self.n as i64 } else { c };
        }
        x
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// 16-byte header (magic, d as u32, N as u64, little endian) then f64 LE data.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(GRID_MAGIC)?;
        w.write_all(&(self.d as u32).to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut head = [0u8; 16];
        r.read_exact(&mut head)?;
        if &head[..4] != GRID_MAGIC {
            return Err(LabError::Parse("not a grid file".into()));
        }
        let d = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
        let n = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
        let total = check_grid(d, n)?;
        let mut bytes = vec![0u8; total * 8];
        r.read_exact(&mut bytes)?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { d, n, data })
    }
}

/// In-place d-dimensional FFT, one axis at a time. The inverse is normalized by N^d.
pub fn fft_nd(data: &mut [Complex64], d: usize, n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let total = data.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        for base in 0..total {
            // visit each line once, from its first element
            if !(base / stride).is_multiple_of(n) {
                continue;
            }
            for k in 0..n {
                buf[k] = data[base + k * stride];
            }
            fft.process(&mut buf);
            for k in 0..n {
                data[base + k * stride] = buf[k];
            }
        }
    }
    if inverse {
        let s = 1.0 / total as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

/// Block symbol sampled on xi = k/N, then inverse transformed: the kernel
/// periodized over N Z^d.
pub fn block_kernel_spectral(big_q: u64, ctx: &SymbolContext, n_grid: usize) -> Result<Grid> {
    let samples = block_symbol_grid(big_q, ctx, n_grid)?;
    let mut data = samples;
    fft_nd(&mut data, ctx.d, n_grid, true);
    Ok(Grid {
        d: ctx.d,
        n: n_grid,
        data: data.into_iter().map(|z| z.re).collect(),
    })
}

/// Block symbol on the frequency grid k/N (k centered into [-N/2, N/2)).
pub fn block_symbol_grid(big_q: u64, ctx: &SymbolContext, n_grid: usize) -> Result<Vec<Complex64>> {
    if big_q == 0 || big_q > ctx.big_l {
        return Err(LabError::HypothesisViolated(format!("need 1 <= Q <= level, got Q={big_q}")));
    }
    let total = check_grid(ctx.d, n_grid)?;
    let d = ctx.d;
    let shape = Grid {
        d,
        n: n_grid,
        data: vec![],
    };
    let mut out = vec![Complex64::new(0.0, 0.0); total];
    for q in block_denominators(ctx, big_q) {
        // sphere_ft depends only on |k q - l N|^2, an integer
        let mut memo: HashMap<u64, f64> = HashMap::new();
        let nq = (n_grid as u64 * q) as f64;
        for (idx, slot) in out.iter_mut().enumerate() {
            let k = shape.point(idx);
            let xi: Vec<f64> = k.iter().map(|&c| c as f64 / n_grid as f64).collect();
            let (ell, eta) = nearest_center(q, &xi);
            let cut: f64 = eta.iter().map(|&e| phi(q as f64 * e)).product();
            if cut == 0.0 {
                continue;
            }
            let key: u64 = k
                .iter()
                .zip(&ell)
                .map(|(&c, &l)| {
                    let v = c * q as i64 - l * n_grid as i64;
                    (v * v) as u64
                })
                .sum();
            let ft = *memo
                .entry(key)
                .or_insert_with(|| sphere_ft(d, ctx.lambda, (key as f64).sqrt() / nq));
            *slot += ctx.arithmetic_factor(q, &ell) * cut * ft;
        }
    }
    Ok(out)
}

/// DFT over (Z/N)^d of the normalized sphere measure; equals exact_symbol(k/N).
pub fn sphere_measure_dft(ctx: &SymbolContext, n_grid: usize) -> Result<Vec<Complex64>> {
    let total = check_grid(ctx.d, n_grid)?;
    let shape = Grid {
        d: ctx.d,
        n: n_grid,
        data: vec![],
    };
    let mut data = vec![Complex64::new(0.0, 0.0); total];
    let w = 1.0 / ctx.points.len() as f64;
    for y in &ctx.points {
        data[shape.index(y)] += w;
    }
    fft_nd(&mut data, ctx.d, n_grid, false);
    Ok(data)
}

/// One spot comparison of the quadrature kernel against the spectral one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelComparison {
    pub x: Vec<i64>,
    pub spectral: f64,
    pub direct: f64,
    pub stderr: f64,
    /// bound on the images N w not evaluated by quadrature
    pub alias_bound: f64,
    pub images: usize,
    pub tolerance: f64,
    pub ok: bool,
}

/// Compares `block_kernel_spectral` at each x with the periodization
/// sum_w K(x + N w) of the quadrature kernel. Images whose majorant exceeds
/// `image_threshold` are evaluated; the rest are bounded with the envelope of
/// |phi_check| and |c_q| <= phi(q). Tolerance is 4 standard errors plus the
/// alias bound plus a small allowance for table interpolation.
pub fn compare_kernels(
    big_q: u64,
    ctx: &SymbolContext,
    grid: &Grid,
    xs: &[Vec<i64>],
    cfg: &QmcConfig,
    image_threshold: f64,
) -> Result<Vec<KernelComparison>> {
    let bump = BumpProfile::standard();
    let d = ctx.d;
    let n = grid.n as i64;
    let qs = block_denominators(ctx, big_q);
    let e0 = bump.envelope(0.0);
    let mut out = vec![];
    for x in xs {
        // per coordinate and q: envelope value for every image offset w_j
        let reach = (ENV_MAX * *qs.last().unwrap() as f64 + ctx.lambda) as i64 / n + 2;
        let env = |q: u64, j: usize, wj: i64| -> f64 {
            let t = ((x[j] + n * wj).abs() as f64 - ctx.lambda).max(0.0);
            bump.envelope(t / q as f64)
        };
        let weight = |q: u64| euler_phi(q) as f64 / (q as f64).powi(d as i32);
        // candidate offsets per coordinate: those that can reach the threshold
        let mut cand: Vec<Vec<i64>> = vec![];
        for j in 0..d {
            let c: Vec<i64> = (-reach..=reach)
                .filter(|&wj| {
                    qs.iter()
                        .any(|&q| weight(q) * e0.powi(d as i32 - 1) * env(q, j, wj) >= image_threshold)
                })
                .collect();
            cand.push(c);
        }
        let mut explicit: Vec<Vec<i64>> = vec![vec![]];
        for c in &cand {
            explicit = explicit
                .into_iter()
                .flat_map(|p| {
                    c.iter().map(move |&v| {
                        let mut p = p.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        let image_bound = |q: u64, w: &[i64]| -> f64 { (0..d).map(|j| env(q, j, w[j])).product::<f64>() };
        explicit.retain(|w| w.iter().all(|&v| v == 0) || qs.iter().any(|&q| weight(q) * image_bound(q, w) >= image_threshold));
        let mut alias = 0.0;
        for &q in &qs {
            let full: f64 = (0..d).map(|j| (-reach..=reach).map(|wj| env(q, j, wj)).sum::<f64>()).product();
            let inside: f64 = explicit.iter().map(|w| image_bound(q, w)).sum();
            alias += weight(q) * (full - inside).max(0.0);
        }
        let e0 = block_kernel_estimate(big_q, ctx, x, cfg)?;
        // far images only need absolute accuracy on the scale of the center
        // value or the alias bound, whichever is looser
        let scale = (cfg.rel_target * e0.value.abs()).max(0.25 * alias);
        let far = QmcConfig {
            abs_floor: cfg.abs_floor.max(scale / (explicit.len() as f64).sqrt()),
            ..*cfg
        };
        let mut direct = e0.value;
        let mut var = e0.stderr * e0.stderr;
        let mut mag = e0.value.abs();
        for w in explicit.iter().filter(|w| w.iter().any(|&v| v != 0)) {
            let y: Vec<i64> = (0..d).map(|j| x[j] + n * w[j]).collect();
            let e = block_kernel_estimate(big_q, ctx, &y, &far)?;
            direct += e.value;
            mag += e.value.abs();
            var += e.stderr * e.stderr;
        }
        let stderr = var.sqrt();
        let spectral = grid.get(x);
        let tolerance = 4.0 * stderr + alias + 1e-9 * mag + 1e-12;
        out.push(KernelComparison {
            x: x.clone(),
            spectral,
            direct,
            stderr,
            alias_bound: alias,
            images: explicit.len(),
            tolerance,
            ok: (spectral - direct).abs() <= tolerance,
        });
    }
    Ok(out)
}

/// max over 1 <= m <= m_max of |sum_{Q <= q < 2Q} c_q(m)| / Q.
pub fn ramanujan_block_max(big_q: u64, m_max: u64) -> f64 {
    let mut best = 0i64;
    for m in 1..=m_max as i64 {
        let s: i64 = (big_q..2 * big_q).map(|q| ramanujan_sum(q, m)).sum();
        best = best.max(s.abs());
    }
    best as f64 / big_q as f64
}
