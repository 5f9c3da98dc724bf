//! Sparse collections of cubes, sparse (p, r)-forms, and a stopping-time
//! decomposition of a pair of finite sets into a sparse collection.
//!
//! The decomposition uses only the three local-average stopping conditions;
//! termination and packing come from doubling C0 until every node packs.

use crate::error::{LabError, Result};
use crate::lattice::{full_maximal, LatticeFunction};
use crate::regions::{region_vertices, ExponentPoint, RegionName};
use num_rational::Ratio;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

/// corner + [0, side)^d
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Cube {
    pub corner: Vec<i64>,
    pub side: u64,
}

impl Cube {
    pub fn new(corner: Vec<i64>, side: u64) -> Self {
        assert!(side >= 1 && !corner.is_empty());
        Self { corner, side }
    }

    /// A cube of the dyadic grid: side a power of two, corner a multiple of it.
    pub fn dyadic(corner: Vec<i64>, side: u64) -> Result<Self> {
        let c = Self::new(corner, side);
        if !c.is_dyadic() {
            return Err(LabError::InvalidArgument(format!("{c:?} is not dyadic")));
        }
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    pub fn is_dyadic(&self) -> bool {
        self.side.is_power_of_two() && self.corner.iter().all(|&c| c.rem_euclid(self.side as i64) == 0)
    }

    pub fn volume(&self) -> u128 {
        (self.side as u128).pow(self.dim() as u32)
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        let s = self.side as i64;
        x.iter().zip(&self.corner).all(|(&v, &c)| v >= c && v < c + s)
    }

    /// Concentric k-fold dilate on the grid of this cube's side (k odd).
    pub fn dilate(&self, k: u64) -> Cube {
        assert!(k % 2 == 1);
        let shift = ((k - 1) / 2 * self.side) as i64;
        Cube::new(self.corner.iter().map(|c| c - shift).collect(), self.side * k)
    }

    pub fn children(&self) -> Vec<Cube> {
        assert!(self.side >= 2);
        let h = self.side / 2;
        let d = self.dim();
        (0..1usize << d)
            .map(|m| {
                let corner = (0..d)
                    .map(|j| self.corner[j] + if m >> j & 1 == 1 { h as i64 } else { 0 })
                    .collect();
                Cube::new(corner, h)
            })
            .collect()
    }

    fn rect(&self) -> Rect {
        Rect {
            lo: self.corner.clone(),
            hi: self.corner.iter().map(|c| c + self.side as i64).collect(),
        }
    }
}

// half-open integer box
#[derive(Debug, Clone, PartialEq)]
struct Rect {
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl Rect {
    fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(a, b)| a >= b)
    }

    fn volume(&self) -> u128 {
        if self.is_empty() {
            return 0;
        }
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a) as u128).product()
    }

    fn meet(&self, o: &Rect) -> Rect {
        Rect {
            lo: self.lo.iter().zip(&o.lo).map(|(a, b)| *a.max(b)).collect(),
            hi: self.hi.iter().zip(&o.hi).map(|(a, b)| *a.min(b)).collect(),
        }
    }

    fn within(&self, o: &Rect) -> bool {
        (0..self.lo.len()).all(|j| self.lo[j] >= o.lo[j] && self.hi[j] <= o.hi[j])
    }

    fn intersects(&self, o: &Rect) -> bool {
        !self.meet(o).is_empty()
    }

    // halves along the longest axis, or None for a unit cell
    fn split(&self) -> Option<(Rect, Rect)> {
        let j = (0..self.lo.len()).max_by_key(|&j| (self.hi[j] - self.lo[j], usize::MAX - j))?;
        if self.hi[j] - self.lo[j] <= 1 {
            return None;
        }
        let mid = self.lo[j] + (self.hi[j] - self.lo[j]) / 2;
        let mut a = self.clone();
        let mut b = self.clone();
        a.hi[j] = mid;
        b.lo[j] = mid;
        Some((a, b))
    }
}

// |region ∩ union(holes)|
fn covered_volume(region: &Rect, holes: &[&Rect]) -> u128 {
    let live: Vec<&Rect> = holes.iter().copied().filter(|h| h.intersects(region)).collect();
    if live.is_empty() {
        return 0;
    }
    if live.iter().any(|h| region.within(h)) {
        return region.volume();
    }
    match region.split() {
        Some((a, b)) => covered_volume(&a, &live) + covered_volume(&b, &live),
        None => region.volume(),
    }
}

/// base minus the union of holes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub base: Cube,
    pub holes: Vec<Cube>,
}

impl Witness {
    pub fn whole(base: Cube) -> Self {
        Self { base, holes: vec![] }
    }

    pub fn size(&self) -> u128 {
        let r = self.base.rect();
        let holes: Vec<Rect> = self.holes.iter().map(Cube::rect).collect();
        let refs: Vec<&Rect> = holes.iter().collect();
        r.volume() - covered_volume(&r, &refs)
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        self.base.contains(x) && !self.holes.iter().any(|h| h.contains(x))
    }

    fn intersects(&self, other: &Witness) -> bool {
        let region = self.base.rect().meet(&other.base.rect());
        if region.is_empty() {
            return false;
        }
        let holes: Vec<Rect> = self.holes.iter().chain(&other.holes).map(Cube::rect).collect();
        let refs: Vec<&Rect> = holes.iter().collect();
        covered_volume(&region, &refs) < region.volume()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseEntry {
    pub cube: Cube,
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseCollection {
    pub entries: Vec<SparseEntry>,
    pub rho: Ratio<u64>,
}

/// <h>_{Q,t} = (|Q|^{-1} sum_{x in Q} |h(x)|^t)^{1/t}
pub fn local_average(h: &LatticeFunction<f64>, q: &Cube, t: f64) -> f64 {
    let s: f64 = h.iter().filter(|(x, _)| q.contains(x)).map(|(_, v)| v.abs().powf(t)).sum();
    (s / q.volume() as f64).powf(1.0 / t)
}

/// sum_Q <f>_{Q,p} <g>_{Q,r} |Q|
pub fn sparse_form(s: &SparseCollection, f: &LatticeFunction<f64>, g: &LatticeFunction<f64>, p: f64, r: f64) -> Result<f64> {
    if !(p >= 1.0 && r >= 1.0) {
        return Err(LabError::InvalidArgument(format!("need p, r >= 1, got {p}, {r}")));
    }
    Ok(s.entries
        .iter()
        .map(|e| local_average(f, &e.cube, p) * local_average(g, &e.cube, r) * e.cube.volume() as f64)
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityReport {
    pub ok: bool,
    pub rho: Ratio<u64>,
    /// entries with |E_Q| <= rho |Q|
    pub density_failures: Vec<usize>,
    /// entries whose witness leaves the cube
    pub witness_outside: Vec<usize>,
    pub min_density: f64,
    pub max_overlap: u64,
}

// max over x of the number of witnesses containing x
fn max_overlap(region: &Rect, items: &[(Rect, Vec<Rect>)], live: &[usize], full: u64, best: &mut u64) {
    let mut full = full;
    let mut partial = vec![];
    for &i in live {
        let (base, holes) = &items[i];
        if !base.intersects(region) || holes.iter().any(|h| region.within(h)) {
            continue;
        }
        if region.within(base) && !holes.iter().any(|h| h.intersects(region)) {
            full += 1;
        } else {
            partial.push(i);
        }
    }
    if full + partial.len() as u64 <= *best {
        return;
    }
    if partial.is_empty() {
        *best = full;
        return;
    }
    match region.split() {
        Some((a, b)) => {
            max_overlap(&a, items, &partial, full, best);
            max_overlap(&b, items, &partial, full, best);
        }
        // a unit cell is either inside or outside each witness
        None => unreachable!("unit cell left undecided"),
    }
}

/// Checks |E_Q| > rho |Q| for every entry and sum_Q 1_{E_Q} <= 1/rho, exactly.
pub fn sparsity_check(s: &SparseCollection, rho: Ratio<u64>) -> SparsityReport {
    let mut density_failures = vec![];
    let mut witness_outside = vec![];
    let mut min_density = f64::INFINITY;
    for (i, e) in s.entries.iter().enumerate() {
        let size = e.witness.size();
        let vol = e.cube.volume();
        min_density = min_density.min(size as f64 / vol as f64);
        if size * (*rho.denom() as u128) <= (*rho.numer() as u128) * vol {
            density_failures.push(i);
        }
        if !e.witness.base.rect().within(&e.cube.rect()) {
            witness_outside.push(i);
        }
    }
    let items: Vec<(Rect, Vec<Rect>)> = s
        .entries
        .iter()
        .map(|e| (e.witness.base.rect(), e.witness.holes.iter().map(Cube::rect).collect()))
        .collect();
    let mut best = 0;
    if let Some(first) = items.first() {
        let d = first.0.lo.len();
        let mut region = first.0.clone();
        for (b, _) in &items {
            for j in 0..d {
                region.lo[j] = region.lo[j].min(b.lo[j]);
                region.hi[j] = region.hi[j].max(b.hi[j]);
            }
        }
        let live: Vec<usize> = (0..items.len()).collect();
        max_overlap(&region, &items, &live, 0, &mut best);
    }
    let overlap_ok = (best as u128) * (*rho.numer() as u128) <= *rho.denom() as u128;
    SparsityReport {
        ok: density_failures.is_empty() && witness_outside.is_empty() && overlap_ok,
        rho,
        density_failures,
        witness_outside,
        min_density: if s.entries.is_empty() { 1.0 } else { min_density },
        max_overlap: best,
    }
}

fn check_set(set: &[Vec<i64>], what: &str) -> Result<usize> {
    let d = set
        .first()
        .ok_or_else(|| LabError::InvalidArgument(format!("{what} is empty")))?
        .len();
    if d == 0 || set.iter().any(|x| x.len() != d) {
        return Err(LabError::InvalidArgument(format!("{what} points must share a positive dimension")));
    }
    Ok(d)
}

/// Points of each class S_L: the smallest dyadic L attaining
/// max_L sup_{L <= lambda < 2L} A_lambda 1_E(x).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArgmaxPartition {
    pub scales: Vec<u64>,
    pub classes: BTreeMap<u64, Vec<Vec<i64>>>,
    /// points of the evaluation box where every scale vanishes
    pub unassigned: u128,
    pub box_lo: Vec<i64>,
    pub box_hi: Vec<i64>,
}

pub fn argmax_partition(set: &[Vec<i64>], big_l_max: u64) -> Result<ArgmaxPartition> {
    let d = check_set(set, "set")?;
    if big_l_max == 0 || !big_l_max.is_power_of_two() {
        return Err(LabError::InvalidArgument(format!("scale must be a power of two, got {big_l_max}")));
    }
    let f: LatticeFunction<f64> = LatticeFunction::indicator(d, set);
    let scales: Vec<u64> = (0..=big_l_max.trailing_zeros()).map(|k| 1u64 << k).collect();
    let mut best: BTreeMap<Vec<i64>, (f64, u64)> = BTreeMap::new();
    for &l in &scales {
        let m = crate::lattice::dyadic_maximal(&f, l)?;
        for (x, &v) in m.iter() {
            let e = best.entry(x.clone()).or_insert((0.0, l));
            // strict: ties keep the smaller scale
            if v > e.0 {
                *e = (v, l);
            }
        }
    }
    let mut classes: BTreeMap<u64, Vec<Vec<i64>>> = scales.iter().map(|&l| (l, vec![])).collect();
    for (x, (_, l)) in best {
        classes.get_mut(&l).unwrap().push(x);
    }
    let (mut lo, mut hi) = f.bounding_box().unwrap();
    let reach = 2 * big_l_max as i64 - 1;
    for j in 0..d {
        lo[j] -= reach;
        hi[j] += reach;
    }
    let volume: u128 = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as u128).product();
    let assigned: usize = classes.values().map(Vec::len).sum();
    Ok(ArgmaxPartition {
        scales,
        classes,
        unassigned: volume - assigned as u128,
        box_lo: lo,
        box_hi: hi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StoppingConfig {
    pub c0: f64,
    /// radii n <= n_max enter the maximal function
    pub n_max: u64,
    pub max_depth: usize,
    pub max_doublings: u32,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        Self {
            c0: 1.0,
            n_max: 15,
            max_depth: 32,
            max_doublings: 64,
        }
    }
}

/// A stopping cube and the decomposition below it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingNode {
    pub cube: Cube,
    pub depth: usize,
    /// which of the three conditions selected this cube (all false at the root)
    pub triggers: [bool; 3],
    /// sum of |Q| over the stopping children, divided by |cube|
    pub packing: f64,
    pub children: Vec<StoppingNode>,
}

impl StoppingNode {
    pub fn count(&self) -> usize {
        1 + self.children.iter().map(StoppingNode::count).sum::<usize>()
    }

    pub fn depth_max(&self) -> usize {
        self.children.iter().map(StoppingNode::depth_max).max().unwrap_or(self.depth)
    }

    /// Worst packing ratio in the subtree.
    pub fn packing_max(&self) -> f64 {
        self.children.iter().map(StoppingNode::packing_max).fold(self.packing, f64::max)
    }

    pub fn walk<'a>(&'a self, out: &mut Vec<&'a StoppingNode>) {
        out.push(self);
        for c in &self.children {
            c.walk(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingTree {
    pub root: StoppingNode,
    /// truncation of the maximal function used by the first condition
    pub n_max: u64,
    pub initial_c0: f64,
    pub c0: f64,
    pub doublings: u32,
    pub nodes: usize,
    pub depth: usize,
    pub max_packing: f64,
}

/// Smallest dyadic E (lowest corner on ties) with 3E containing every point.
pub fn root_cube(points: &[&Vec<i64>]) -> Cube {
    let d = points[0].len();
    let lo: Vec<i64> = (0..d).map(|j| points.iter().map(|x| x[j]).min().unwrap()).collect();
    let hi: Vec<i64> = (0..d).map(|j| points.iter().map(|x| x[j]).max().unwrap()).collect();
    let mut s: i64 = 1;
    loop {
        // corner c: multiple of s with c - s <= lo and c + 2s > hi
        let corner: Option<Vec<i64>> = (0..d)
            .map(|j| {
                let c = (hi[j] - 2 * s + 1).div_euclid(s) * s;
                let c = if c < hi[j] - 2 * s + 1 { c + s } else { c };
                (c - s <= lo[j]).then_some(c)
            })
            .collect();
        if let Some(c) = corner {
            return Cube::new(c, s as u64);
        }
        s *= 2;
    }
}

struct PackingFailed;

// (x, M(x)^p) pairs
type Weighted = Arc<Vec<(Vec<i64>, f64)>>;
type Triggered = Vec<(Cube, [bool; 3])>;
type MaximalCache = Mutex<HashMap<Cube, Weighted>>;

struct Decomposer<'a> {
    e1: &'a [Vec<i64>],
    e2: &'a [Vec<i64>],
    p: f64,
    n_max: u64,
    max_depth: usize,
    // (x, M(x)^p) for x in 3E, keyed by E
    cache: MaximalCache,
}

struct Lists {
    m: Vec<(Vec<i64>, f64)>,
    e1: Vec<Vec<i64>>,
    e2: Vec<Vec<i64>>,
}

impl Decomposer<'_> {
    fn maximal_in(&self, e: &Cube, e1_loc: &[Vec<i64>]) -> Result<Weighted> {
        if let Some(v) = self.cache.lock().unwrap().get(e) {
            return Ok(v.clone());
        }
        let region = e.dilate(3);
        let vals: Vec<(Vec<i64>, f64)> = if e1_loc.is_empty() {
            vec![]
        } else {
            let f: LatticeFunction<f64> = LatticeFunction::indicator(e.dim(), e1_loc);
            let m = full_maximal(&f, self.n_max)?;
            m.values
                .iter()
                .filter(|(x, _)| region.contains(x))
                .map(|(x, v)| (x.clone(), v.powf(self.p)))
                .collect()
        };
        let vals = Arc::new(vals);
        self.cache.lock().unwrap().insert(e.clone(), vals.clone());
        Ok(vals)
    }

    // stopping cubes of node e with their triggers, or None once they
    // overflow the packing bound
    fn stops(&self, e: &Cube, c0: f64) -> Result<Option<Triggered>> {
        let region = e.dilate(3);
        let e1_loc: Vec<Vec<i64>> = self.e1.iter().filter(|x| region.contains(x)).cloned().collect();
        let e2_loc: Vec<Vec<i64>> = self.e2.iter().filter(|x| region.contains(x)).cloned().collect();
        let m = self.maximal_in(e, &e1_loc)?;
        let vol3 = region.volume() as f64;
        let refs = [
            c0.powf(self.p) * e1_loc.len() as f64 / vol3,
            c0 * e1_loc.len() as f64 / vol3,
            c0 * e2_loc.len() as f64 / vol3,
        ];
        let mut out = Stops {
            found: vec![],
            volume: 0,
            limit: e.volume(),
        };
        let d = e.dim();
        let s = e.side as i64;
        // bucket M by which of the 3^d cubes of 3E holds each point
        let mut buckets: Vec<Vec<(Vec<i64>, f64)>> = vec![vec![]; 3usize.pow(d as u32)];
        for (x, v) in m.iter() {
            let k = (0..d)
                .rev()
                .fold(0, |acc, j| 3 * acc + ((x[j] - e.corner[j]).div_euclid(s) + 1) as usize);
            buckets[k].push((x.clone(), *v));
        }
        for (k, bucket) in buckets.into_iter().enumerate() {
            let mut kk = k;
            let corner: Vec<i64> = (0..d)
                .map(|j| {
                    let o = (kk % 3) as i64 - 1;
                    kk /= 3;
                    e.corner[j] + o * s
                })
                .collect();
            let q = Cube::new(corner, e.side);
            let five = q.dilate(5);
            let lists = Lists {
                m: bucket,
                e1: e1_loc.iter().filter(|x| five.contains(x)).cloned().collect(),
                e2: e2_loc.iter().filter(|x| five.contains(x)).cloned().collect(),
            };
            if !visit(&q, lists, &refs, &mut out) {
                return Ok(None);
            }
        }
        Ok(Some(out.found))
    }

    fn node(&self, cube: Cube, triggers: [bool; 3], depth: usize, c0: f64) -> Result<std::result::Result<StoppingNode, PackingFailed>> {
        if depth > self.max_depth {
            return Err(LabError::RecursionBudget { depth: self.max_depth });
        }
        let Some(stops) = self.stops(&cube, c0)? else {
            return Ok(Err(PackingFailed));
        };
        let packed: u128 = stops.iter().map(|(q, _)| q.volume()).sum();
        let kids: Vec<Result<std::result::Result<StoppingNode, PackingFailed>>> =
            stops.into_par_iter().map(|(q, t)| self.node(q, t, depth + 1, c0)).collect();
        let mut children = vec![];
        for k in kids {
            match k? {
                Ok(n) => children.push(n),
                Err(f) => return Ok(Err(f)),
            }
        }
        Ok(Ok(StoppingNode {
            packing: packed as f64 / cube.volume() as f64,
            cube,
            depth,
            triggers,
            children,
        }))
    }
}

struct Stops {
    found: Triggered,
    // 100 sum |Q| so far, against |E|
    volume: u128,
    limit: u128,
}

// false once the packing bound is exceeded
fn visit(q: &Cube, lists: Lists, refs: &[f64; 3], out: &mut Stops) -> bool {
    let vol = q.volume() as f64;
    let five = vol * 5f64.powi(q.dim() as i32);
    let sum_m: f64 = lists.m.iter().map(|(_, v)| v).sum();
    let t = [
        !lists.m.is_empty() && sum_m / vol >= refs[0],
        !lists.e1.is_empty() && lists.e1.len() as f64 / five >= refs[1],
        !lists.e2.is_empty() && lists.e2.len() as f64 / five >= refs[2],
    ];
    if t.iter().any(|&b| b) {
        out.volume += 100 * q.volume();
        out.found.push((q.clone(), t));
        return out.volume <= out.limit;
    }
    if q.side == 1 || (lists.m.is_empty() && lists.e1.is_empty() && lists.e2.is_empty()) {
        return true;
    }
    let h = (q.side / 2) as i64;
    let d = q.dim();
    let mut buckets: Vec<Vec<(Vec<i64>, f64)>> = vec![vec![]; 1 << d];
    for (x, v) in lists.m {
        let k = (0..d).fold(0, |acc, j| acc | (((x[j] - q.corner[j]) >= h) as usize) << j);
        buckets[k].push((x, v));
    }
    for (c, m) in q.children().into_iter().zip(buckets) {
        let five = c.dilate(5);
        let sub = Lists {
            m,
            e1: lists.e1.iter().filter(|x| five.contains(x)).cloned().collect(),
            e2: lists.e2.iter().filter(|x| five.contains(x)).cloned().collect(),
        };
        if !visit(&c, sub, refs, out) {
            return false;
        }
    }
    true
}

/// Recursive stopping-time decomposition of (E1, E2); C0 doubles until every
/// node satisfies sum |Q| <= |E| / 100.
pub fn stopping_decomposition(e1: &[Vec<i64>], e2: &[Vec<i64>], point: &ExponentPoint, cfg: &StoppingConfig) -> Result<StoppingTree> {
    let d = check_set(e1, "E1")?;
    if check_set(e2, "E2")? != d {
        return Err(LabError::InvalidArgument("E1 and E2 live in different dimensions".into()));
    }
    let inv_p = point.inv_p.to_f64().unwrap();
    if !(inv_p > 0.0 && inv_p <= 1.0) {
        return Err(LabError::InvalidArgument(format!(
            "need 1 <= p < infinity, got 1/p = {}",
            point.inv_p
        )));
    }
    if cfg.c0.is_nan() || cfg.c0 <= 0.0 {
        return Err(LabError::InvalidArgument("C0 must be positive".into()));
    }
    let mut e1s = e1.to_vec();
    let mut e2s = e2.to_vec();
    e1s.sort();
    e1s.dedup();
    e2s.sort();
    e2s.dedup();
    let all: Vec<&Vec<i64>> = e1s.iter().chain(&e2s).collect();
    let root = root_cube(&all);
    let dec = Decomposer {
        e1: &e1s,
        e2: &e2s,
        p: 1.0 / inv_p,
        n_max: cfg.n_max,
        max_depth: cfg.max_depth,
        cache: Mutex::new(HashMap::new()),
    };
    let mut c0 = cfg.c0;
    for doublings in 0..=cfg.max_doublings {
        if let Ok(root) = dec.node(root.clone(), [false; 3], 0, c0)? {
            return Ok(StoppingTree {
                nodes: root.count(),
                depth: root.depth_max(),
                max_packing: root.packing_max(),
                root,
                n_max: cfg.n_max,
                initial_c0: cfg.c0,
                c0,
                doublings,
            });
        }
        c0 *= 2.0;
    }
    Err(LabError::BudgetExceeded(format!(
        "packing still fails after {} doublings of C0",
        cfg.max_doublings
    )))
}

/// The cubes 3Q over every node of the tree.
pub fn pre_sparse(tree: &StoppingTree) -> Vec<Cube> {
    let mut nodes = vec![];
    tree.root.walk(&mut nodes);
    nodes.iter().map(|n| n.cube.dilate(3)).collect()
}

/// Witness 3Q minus the 3Q' of its stopping children (at least 99% of 3Q by
/// packing), then entries split greedily into classes of pairwise disjoint
/// witnesses.
pub fn to_sparse(tree: &StoppingTree) -> Vec<SparseCollection> {
    let mut nodes = vec![];
    tree.root.walk(&mut nodes);
    let entries: Vec<SparseEntry> = nodes
        .iter()
        .map(|n| SparseEntry {
            cube: n.cube.dilate(3),
            witness: Witness {
                base: n.cube.dilate(3),
                holes: n.children.iter().map(|c| c.cube.dilate(3)).collect(),
            },
        })
        .collect();
    let mut classes: Vec<Vec<SparseEntry>> = vec![];
    for e in entries {
        match classes.iter_mut().find(|c| c.iter().all(|o| !o.witness.intersects(&e.witness))) {
            Some(c) => c.push(e),
            None => classes.push(vec![e]),
        }
    }
    classes
        .into_iter()
        .map(|entries| SparseCollection {
            entries,
            rho: Ratio::new(1, 2),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReport {
    pub point: ExponentPoint,
    pub n_max: u64,
    /// <sup_{n <= n_max} A_n 1_E1, 1_E2>
    pub inner: f64,
    pub form: f64,
    pub ratio: f64,
    pub c0: f64,
    pub nodes: usize,
    pub classes: usize,
    pub inside_region: bool,
}

/// Inner product over the sparse form of the constructed collection.
pub fn domination_constant(
    e1: &[Vec<i64>],
    e2: &[Vec<i64>],
    point: &ExponentPoint,
    big_l_max: u64,
    cfg: &StoppingConfig,
) -> Result<DominationReport> {
    if big_l_max == 0 {
        return Err(LabError::InvalidArgument("scale must be positive".into()));
    }
    let n_max = 4 * big_l_max * big_l_max - 1;
    let cfg = StoppingConfig { n_max, ..*cfg };
    let tree = stopping_decomposition(e1, e2, point, &cfg)?;
    domination_of_tree(&tree, e1, e2, point)
}

/// As `domination_constant`, for a tree already built from (E1, E2).
pub fn domination_of_tree(tree: &StoppingTree, e1: &[Vec<i64>], e2: &[Vec<i64>], point: &ExponentPoint) -> Result<DominationReport> {
    let d = check_set(e1, "E1")?;
    let n_max = tree.n_max;
    let f: LatticeFunction<f64> = LatticeFunction::indicator(d, e1);
    let g: LatticeFunction<f64> = LatticeFunction::indicator(d, e2);
    let m = full_maximal(&f, n_max)?;
    let inner = m.values.inner(&g);
    let classes = to_sparse(tree);
    let all = SparseCollection {
        entries: classes.iter().flat_map(|c| c.entries.clone()).collect(),
        rho: Ratio::new(1, 2),
    };
    let p = 1.0 / point.inv_p.to_f64().unwrap();
    let inv_r = point.inv_r.to_f64().unwrap();
    if inv_r <= 0.0 {
        return Err(LabError::InvalidArgument("need r < infinity".into()));
    }
    let form = sparse_form(&all, &f, &g, p, 1.0 / inv_r)?;
    let inside_region = region_vertices(RegionName::Rstar, d as u32)
        .map(|r| r.contains(point))
        .unwrap_or(false);
    Ok(DominationReport {
        point: point.clone(),
        n_max,
        inner,
        form,
        ratio: inner / form,
        c0: tree.c0,
        nodes: tree.nodes,
        classes: classes.len(),
        inside_region,
    })
}
