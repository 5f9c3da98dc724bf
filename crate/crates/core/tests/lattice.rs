// Oracles: brute enumeration of the cube [-m, m]^d and literal per-point sums.

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spherical_lab::lattice::*;
use spherical_lab::LabError;

type Q = BigRational;

fn q(a: i64, b: i64) -> Q {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

fn brute_points(d: usize, n: u64) -> Vec<Vec<i64>> {
    let m = (n as f64).sqrt() as i64 + 1;
    let side = (2 * m + 1) as usize;
    let mut out = vec![];
    for idx in 0..side.pow(d as u32) {
        let mut k = idx;
        let mut x = vec![0i64; d];
        for c in x.iter_mut() {
            *c = (k % side) as i64 - m;
            k /= side;
        }
        if norm2(&x) == n {
            out.push(x);
        }
    }
    out.sort();
    out
}

fn sigma(n: u64) -> u128 {
    (1..=n).filter(|k| n.is_multiple_of(*k)).map(|k| k as u128).sum()
}

fn random_rational_fn(rng: &mut ChaCha8Rng, d: usize, pts: usize, span: i64) -> LatticeFunction<Q> {
    let mut f = LatticeFunction::new(d);
    for _ in 0..pts {
        let x: Vec<i64> = (0..d).map(|_| rng.gen_range(-span..=span)).collect();
        f.set(x, q(rng.gen_range(-20..=20), rng.gen_range(1..=9)));
    }
    f
}

#[test]
fn count_examples() {
    assert_eq!(sphere_count(5, 0), 1);
    assert_eq!(sphere_count(5, 1), 10);
    assert_eq!(sphere_count(4, 3), 32);
    assert_eq!(sphere_count(1, 3), 0);
}

#[test]
fn counts_match_enumeration() {
    for d in 1..=5 {
        let t = RdTable::new(d, 200);
        let nb = if d == 5 { 60 } else { 200 };
        for n in 0..=nb {
            assert_eq!(t.get(d, n) as usize, brute_points(d, n).len(), "r_{d}({n})");
        }
    }
    // d = 5 up to 200 via sphere_points, which is checked against brute force above
    let t = RdTable::new(5, 200);
    for n in 61..=200 {
        assert_eq!(sphere_points(5, n).len() as u128, t.get(5, n));
    }
}

#[test]
fn jacobi_four_squares() {
    let t = RdTable::new(4, 99);
    for n in (1..=99).step_by(2) {
        assert_eq!(t.get(4, n), 8 * sigma(n), "n={n}");
    }
}

#[test]
fn points_examples() {
    let p = sphere_points(2, 2);
    assert_eq!(p, vec![vec![-1, -1], vec![-1, 1], vec![1, -1], vec![1, 1]]);
    for d in 1..=6 {
        assert_eq!(sphere_points(d, 0), vec![vec![0; d]]);
    }
    assert_eq!(sphere_points(5, 2).len(), 40);
    for d in 1..=4 {
        for n in [0, 3, 7, 12, 25] {
            assert_eq!(sphere_points(d, n), brute_points(d, n));
        }
    }
}

#[test]
fn average_examples() {
    let a = spherical_average(&LatticeFunction::<Q>::delta(5), 1).unwrap();
    assert_eq!(a.support_len(), 10);
    for (x, v) in a.iter() {
        assert_eq!(norm2(x), 1);
        assert_eq!(*v, q(1, 10));
    }
    let boxpts: Vec<Vec<i64>> = ball_points(5, 5).into_iter().filter(|x| x.iter().all(|c| c.abs() <= 1)).collect();
    assert_eq!(boxpts.len(), 243);
    let f = LatticeFunction::<Q>::indicator(5, &boxpts);
    let a = spherical_average(&f, 1).unwrap();
    assert_eq!(a.get(&[0, 0, 0, 0, 0]), q(1, 1));
    assert_eq!(
        spherical_average(&LatticeFunction::<Q>::delta(1), 3),
        Err(LabError::EmptySphere { d: 1, n: 3 })
    );
}

#[test]
fn average_matches_literal_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = random_rational_fn(&mut rng, 3, 12, 3);
    for n in [1, 2, 3, 5, 9] {
        let a = spherical_average(&f, n).unwrap();
        let pts = brute_points(3, n);
        let r = pts.len() as i64;
        for x in ball_points(3, 30) {
            let mut s = q(0, 1);
            for y in &pts {
                let z: Vec<i64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                s += f.get(&z);
            }
            assert_eq!(a.get(&x), s / q(r, 1));
        }
    }
}

#[test]
fn mass_conservation_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..100 {
        let d = 1 + i % 5;
        let f = random_rational_fn(&mut rng, d, 1 + i % 7, 4);
        let n = radius_set(d, 1, 12)[i % 3];
        let a = spherical_average(&f, n).unwrap();
        assert_eq!(a.sum(), f.sum());
    }
}

#[test]
fn self_adjoint_and_contractive() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let f = random_rational_fn(&mut rng, 4, 8, 3);
        let g = random_rational_fn(&mut rng, 4, 8, 3);
        for n in [1, 2, 3, 6] {
            let af = spherical_average(&f, n).unwrap();
            let ag = spherical_average(&g, n).unwrap();
            assert_eq!(af.inner(&g), f.inner(&ag));
            assert!(af.sup_norm() <= f.sup_norm());
            assert!(af.l1_norm() <= f.l1_norm());
        }
    }
}

#[test]
fn dyadic_examples() {
    let m = dyadic_maximal(&LatticeFunction::<Q>::delta(5), 1).unwrap();
    assert_eq!(m.get(&[1, 1, 0, 0, 0]), q(1, 40));
    assert_eq!(m.get(&[1, 0, 0, 0, 0]), q(1, 10));
    assert_eq!(m.get(&[0, 0, 0, 0, 0]), q(0, 1));
    let z = dyadic_maximal(&LatticeFunction::<Q>::new(3), 2).unwrap();
    assert_eq!(z.support_len(), 0);
}

#[test]
fn dyadic_dominates_each_sphere() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = random_rational_fn(&mut rng, 3, 6, 2);
    let m = dyadic_maximal(&f, 2).unwrap();
    for n in radius_set(3, 4, 15) {
        let a = spherical_average(&f, n).unwrap();
        for (x, v) in a.iter() {
            let av = if *v < q(0, 1) { -v.clone() } else { v.clone() };
            assert!(m.get(x) >= av, "n={n} x={x:?}");
        }
    }
}

#[test]
fn full_maximal_examples() {
    let d0 = LatticeFunction::<Q>::delta(5);
    let fm = full_maximal(&d0, 100).unwrap();
    let dy = dyadic_maximal(&d0, 1).unwrap();
    for x in sphere_points(5, 1) {
        assert_eq!(fm.values.get(&x), dy.get(&x));
    }
    assert!(fm.certified, "tail {} vs max {}", fm.tail_bound, fm.computed_max);
    let t = RdTable::new(5, 200);
    assert!((101..=200).all(|n| t.get(5, n) >= 100));
    // single point: value at distance^2 n is 1/r(n)
    let e = LatticeFunction::<Q>::indicator(4, &[vec![2, -1, 0, 3]]);
    let fm = full_maximal(&e, 20).unwrap();
    let x = vec![2 + 1, -1 + 1, 1, 3 + 1];
    assert_eq!(t.get(4, 4), 24);
    assert_eq!(fm.values.get(&x), q(1, 24));
}

#[test]
fn text_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = random_rational_fn(&mut rng, 3, 10, 5);
    let g = LatticeFunction::<Q>::from_text(&f.to_text()).unwrap();
    assert_eq!(f, g);
    let h: LatticeFunction<f64> = f.map(|v| v.numer().to_string().parse::<f64>().unwrap() / v.denom().to_string().parse::<f64>().unwrap());
    let h2 = LatticeFunction::<f64>::from_text(&h.to_text()).unwrap();
    assert_eq!(h, h2);
    assert!(LatticeFunction::<f64>::from_text("d=2\n1 2\n").is_err());
    assert!(LatticeFunction::<f64>::from_text("dim 2\n").is_err());
}

proptest! {
    #[test]
    fn sphere_points_have_right_norm(d in 1usize..7, n in 0u64..60) {
        let pts = sphere_points(d, n);
        prop_assert_eq!(pts.len() as u128, sphere_count(d, n));
        prop_assert!(pts.iter().all(|x| norm2(x) == n));
        prop_assert!(pts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn float_and_exact_agree(seed in 0u64..1000, n in 1u64..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_rational_fn(&mut rng, 3, 5, 3);
        prop_assume!(sphere_count(3, n) > 0);
        let ff: LatticeFunction<f64> = f.map(spherical_lab::lattice::Scalar::to_f64);
        let a = spherical_average(&f, n).unwrap();
        let b = spherical_average(&ff, n).unwrap();
        for (x, v) in a.iter() {
            prop_assert!((spherical_lab::lattice::Scalar::to_f64(v) - b.get(x)).abs() < 1e-12);
        }
    }
}
