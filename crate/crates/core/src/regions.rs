//! Exponent regions in the (1/p, 1/r) square, in exact rational arithmetic.

use crate::error::{LabError, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

pub type Q = BigRational;

pub fn rat(a: i64, b: i64) -> Q {
    Q::new(BigInt::from(a), BigInt::from(b))
}

fn int(a: i64) -> Q {
    Q::from_integer(BigInt::from(a))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExponentPoint {
    pub inv_p: Q,
    pub inv_r: Q,
}

impl ExponentPoint {
    pub fn new(inv_p: Q, inv_r: Q) -> Self {
        Self { inv_p, inv_r }
    }

    pub fn in_unit_square(&self) -> bool {
        let z = Q::zero();
        let o = Q::one();
        self.inv_p >= z && self.inv_p <= o && self.inv_r >= z && self.inv_r <= o
    }

    fn midpoint(&self, other: &Self) -> Self {
        let h = rat(1, 2);
        Self::new((&self.inv_p + &other.inv_p) * &h, (&self.inv_r + &other.inv_r) * &h)
    }
}

impl fmt::Display for ExponentPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.inv_p, self.inv_r)
    }
}

impl Serialize for ExponentPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.inv_p.to_string(), self.inv_r.to_string()].serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionName {
    T,
    Tstar,
    Qstar,
    Rstar,
    Sstar,
    R,
    S,
}

impl RegionName {
    pub const ALL: [RegionName; 7] = [
        RegionName::T,
        RegionName::Tstar,
        RegionName::Qstar,
        RegionName::Rstar,
        RegionName::Sstar,
        RegionName::R,
        RegionName::S,
    ];
}

impl fmt::Display for RegionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegionName::T => "T",
            RegionName::Tstar => "Tstar",
            RegionName::Qstar => "Qstar",
            RegionName::Rstar => "Rstar",
            RegionName::Sstar => "Sstar",
            RegionName::R => "R",
            RegionName::S => "S",
        };
        f.write_str(s)
    }
}

impl FromStr for RegionName {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        RegionName::ALL
            .iter()
            .copied()
            .find(|n| n.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| LabError::UnknownRegion(s.to_string()))
    }
}

/// Open interior of a convex polygon; vertices counterclockwise, no
/// collinear triples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexRegion {
    pub label: String,
    pub d: u32,
    pub vertices: Vec<ExponentPoint>,
}

fn cross(o: &ExponentPoint, a: &ExponentPoint, b: &ExponentPoint) -> Q {
    (&a.inv_p - &o.inv_p) * (&b.inv_r - &o.inv_r) - (&a.inv_r - &o.inv_r) * (&b.inv_p - &o.inv_p)
}

/// Convex hull by monotone chain, counterclockwise, collinear points dropped.
pub fn convex_hull(points: &[ExponentPoint]) -> Vec<ExponentPoint> {
    let mut pts = points.to_vec();
    pts.sort();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<ExponentPoint> = vec![];
    for p in &pts {
        while lower.len() >= 2 && !cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p).is_positive() {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<ExponentPoint> = vec![];
    for p in pts.iter().rev() {
        while upper.len() >= 2 && !cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p).is_positive() {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn pt(a: Q, b: Q) -> ExponentPoint {
    ExponentPoint::new(a, b)
}

fn t_vertices(d: i64) -> Vec<ExponentPoint> {
    let dd = d * d;
    vec![
        pt(int(0), int(1)),
        pt(rat(d - 1, d), rat(1, d)),
        pt(rat(d - 1, d), rat(d - 1, d)),
        pt(rat(dd - d, dd + 1), rat(dd - d + 2, dd + 1)),
    ]
}

// shared fourth vertex of the starred R and S regions
fn rs_fourth(d: i64) -> ExponentPoint {
    let dd = d * d;
    let half = rat(1, 2);
    let scale = rat(d - 4, d - 1);
    let shift = rat(3, 2 * (d - 1));
    let f = |num: i64| (&half * (rat(num, dd + 1) + int(1))) * &scale + &shift;
    pt(f(dd - d), f(dd - d + 2))
}

/// The defining points of a region before hull cleanup.
pub fn raw_vertices(name: RegionName, d: u32) -> Result<Vec<ExponentPoint>> {
    if d < 2 {
        return Err(LabError::InvalidArgument(format!("regions need d >= 2, got {d}")));
    }
    let d = d as i64;
    let dd = d * d;
    let v = match name {
        RegionName::T => t_vertices(d),
        RegionName::Tstar => {
            let boundary = [pt(int(0), int(1)), pt(int(1), int(1)), pt(int(1), int(0))];
            let mut out = vec![];
            for t in t_vertices(d) {
                for b in &boundary {
                    out.push(t.midpoint(b));
                }
            }
            out
        }
        RegionName::Qstar => {
            if d == 2 {
                return Err(LabError::InvalidArgument("Qstar vertex formula needs d >= 3".into()));
            }
            let scale = rat(d - 4, d - 2);
            let shift = rat(1, d - 2);
            vec![
                pt(rat(1, d), rat(d - 1, d)),
                pt(rat(d - 2, d), rat(2, d)),
                pt(rat(d - 2, d), rat(d - 2, d)),
                pt(rat(dd - d, dd + 1) * &scale + &shift, rat(dd - d + 2, dd + 1) * &scale + &shift),
            ]
        }
        RegionName::Rstar => vec![
            pt(int(0), int(1)),
            pt(rat(d - 2, d), rat(2, d)),
            pt(rat(d - 2, d), rat(d - 2, d)),
            rs_fourth(d),
        ],
        RegionName::Sstar => vec![
            pt(rat(3, 2 * (d - 1)), rat(2 * d - 5, 2 * (d - 1))),
            pt(rat(d - 2, d), rat(2, d)),
            pt(rat(d - 2, d), rat(d - 2, d)),
            rs_fourth(d),
        ],
        RegionName::R => vec![pt(int(0), int(1)), pt(rat(d - 2, d), rat(2, d)), pt(rat(d - 2, d), rat(d - 2, d))],
        RegionName::S => vec![
            pt(rat(2, d), rat(d - 2, d)),
            pt(rat(d - 2, d), rat(2, d)),
            pt(rat(d - 2, d), rat(d - 2, d)),
        ],
    };
    Ok(v)
}

/// Region as the interior of the hull of its defining points.
pub fn region_vertices(name: RegionName, d: u32) -> Result<ConvexRegion> {
    let raw = raw_vertices(name, d)?;
    Ok(ConvexRegion {
        label: name.to_string(),
        d,
        vertices: convex_hull(&raw),
    })
}

impl ConvexRegion {
    /// Strict interior membership.
    pub fn contains(&self, p: &ExponentPoint) -> bool {
        let v = &self.vertices;
        if v.len() < 3 {
            return false;
        }
        (0..v.len()).all(|i| cross(&v[i], &v[(i + 1) % v.len()], p).is_positive())
    }

    /// Membership in the closed hull.
    pub fn contains_closed(&self, p: &ExponentPoint) -> bool {
        let v = &self.vertices;
        match v.len() {
            0 => false,
            1 => v[0] == *p,
            2 => {
                cross(&v[0], &v[1], p).is_zero()
                    && p.inv_p >= v[0].inv_p.clone().min(v[1].inv_p.clone())
                    && p.inv_p <= v[0].inv_p.clone().max(v[1].inv_p.clone())
                    && p.inv_r >= v[0].inv_r.clone().min(v[1].inv_r.clone())
                    && p.inv_r <= v[0].inv_r.clone().max(v[1].inv_r.clone())
            }
            _ => (0..v.len()).all(|i| !cross(&v[i], &v[(i + 1) % v.len()], p).is_negative()),
        }
    }

    pub fn area(&self) -> Q {
        let v = &self.vertices;
        if v.len() < 3 {
            return Q::zero();
        }
        let mut s = Q::zero();
        for i in 0..v.len() {
            let j = (i + 1) % v.len();
            s += &v[i].inv_p * &v[j].inv_r - &v[j].inv_p * &v[i].inv_r;
        }
        s / int(2)
    }

    /// One "num/den num/den" line per vertex under a "# label d=.." header.
    pub fn to_text(&self) -> String {
        let mut s = format!("# {} d={}\n", self.label, self.d);
        for v in &self.vertices {
            s.push_str(&format!("{v}\n"));
        }
        s
    }
}

/// closure(B) inside closure(A) and the hulls differ.
pub fn strict_superset(a: &ConvexRegion, b: &ConvexRegion) -> bool {
    b.vertices.iter().all(|v| a.contains_closed(v)) && a.area() > b.area()
}

/// max{1/p + 2/d, 1/r + 2/(p d)} <= 1.
pub fn necessary_condition(p: &ExponentPoint, d: u32) -> bool {
    let two_d = rat(2, d as i64);
    let one = Q::one();
    &p.inv_p + &two_d <= one && &p.inv_r + &two_d * &p.inv_p <= one
}

/// d ((1 - 1/r) - 1/p): the exponent of the level in the scaling law.
pub fn improving_exponent(p: &ExponentPoint, d: u32) -> Q {
    int(d as i64) * (Q::one() - &p.inv_r - &p.inv_p)
}

// keep the side a x + b y <= c
fn clip(poly: &[ExponentPoint], a: &Q, b: &Q, c: &Q) -> Vec<ExponentPoint> {
    let val = |p: &ExponentPoint| a * &p.inv_p + b * &p.inv_r - c;
    let mut out = vec![];
    for i in 0..poly.len() {
        let p = &poly[i];
        let q = &poly[(i + 1) % poly.len()];
        let (vp, vq) = (val(p), val(q));
        let p_in = !vp.is_positive();
        let q_in = !vq.is_positive();
        if p_in {
            out.push(p.clone());
        }
        if p_in != q_in {
            let t = &vp / (&vp - &vq);
            out.push(pt(&p.inv_p + (&q.inv_p - &p.inv_p) * &t, &p.inv_r + (&q.inv_r - &p.inv_r) * &t));
        }
    }
    convex_hull(&out)
}

/// Points of the improving half 1/p + 1/r >= 1 of the unit square that meet
/// the necessary condition.
pub fn necessary_region(d: u32) -> ConvexRegion {
    let mut poly = vec![pt(int(0), int(0)), pt(int(1), int(0)), pt(int(1), int(1)), pt(int(0), int(1))];
    let two_d = rat(2, d as i64);
    poly = clip(&poly, &int(1), &int(0), &(Q::one() - &two_d));
    poly = clip(&poly, &two_d, &int(1), &Q::one());
    poly = clip(&poly, &int(-1), &int(-1), &int(-1));
    ConvexRegion {
        label: "Necessary".into(),
        d,
        vertices: poly,
    }
}

/// Area of the part of the necessary region not covered by Rstar(d).
pub fn open_gap_area(d: u32) -> Result<Q> {
    let n = necessary_region(d);
    let r = region_vertices(RegionName::Rstar, d)?;
    Ok(n.area() - r.area())
}

/// Vertex tables for every region defined at d, plus the necessary region.
pub fn emit_all(d: u32) -> Result<String> {
    let mut s = String::new();
    for name in RegionName::ALL {
        match region_vertices(name, d) {
            Ok(r) => s.push_str(&r.to_text()),
            Err(LabError::InvalidArgument(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    s.push_str(&necessary_region(d).to_text());
    Ok(s)
}
