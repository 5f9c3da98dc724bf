use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spherical_lab::lattice::LatticeFunction;
use spherical_lab::regions::{rat, ExponentPoint};
use spherical_lab::sparse::*;
use spherical_lab::LabError;

fn half() -> ExponentPoint {
    ExponentPoint::new(rat(1, 2), rat(1, 2))
}

fn cube(c: &[i64], s: u64) -> Cube {
    Cube::new(c.to_vec(), s)
}

fn ind(d: usize, pts: &[Vec<i64>]) -> LatticeFunction<f64> {
    LatticeFunction::indicator(d, pts)
}

fn random_set(rng: &mut ChaCha8Rng, d: usize, n: usize, side: i64) -> Vec<Vec<i64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(0..side)).collect()).collect()
}

#[test]
fn cube_geometry() {
    assert!(Cube::dyadic(vec![4, -8], 4).is_ok());
    assert!(matches!(Cube::dyadic(vec![2, 0], 4), Err(LabError::InvalidArgument(_))));
    let q = cube(&[4, 8], 4);
    assert_eq!(q.dilate(3), cube(&[0, 4], 12));
    assert_eq!(q.dilate(5), cube(&[-4, 0], 20));
    assert_eq!(q.children().len(), 4);
    assert!(q.children().iter().all(|c| c.side == 2 && c.is_dyadic()));
    assert_eq!(q.children().iter().map(Cube::volume).sum::<u128>(), q.volume());
    assert!(q.contains(&[7, 11]) && !q.contains(&[8, 11]));
}

#[test]
fn root_cube_is_minimal() {
    let pts = [vec![0, 0], vec![31, 5]];
    let refs: Vec<&Vec<i64>> = pts.iter().collect();
    let r = root_cube(&refs);
    assert!(r.is_dyadic());
    let three = r.dilate(3);
    assert!(pts.iter().all(|x| three.contains(x)));
    assert_eq!(r.side, 16);
    let single = [vec![5, -3]];
    let refs: Vec<&Vec<i64>> = single.iter().collect();
    let r = root_cube(&refs);
    assert!(r.side == 1 && r.dilate(3).contains(&single[0]));
}

#[test]
fn form_examples() {
    let q = cube(&[0, 0], 4);
    let all: Vec<Vec<i64>> = (0..4).flat_map(|a| (0..4).map(move |b| vec![a, b])).collect();
    let s = SparseCollection {
        entries: vec![SparseEntry {
            cube: q.clone(),
            witness: Witness::whole(q.clone()),
        }],
        rho: Ratio::new(1, 2),
    };
    let f = ind(2, &all);
    assert!((sparse_form(&s, &f, &f, 1.0, 1.0).unwrap() - 16.0).abs() < 1e-12);
    // single cube containing both supports
    let f = ind(2, &[vec![0, 0], vec![1, 1]]);
    let g = ind(2, &[vec![3, 3]]);
    let want = (2.0f64 / 16.0).sqrt() * (1.0f64 / 16.0).powf(1.0 / 3.0) * 16.0;
    assert!((sparse_form(&s, &f, &g, 2.0, 3.0).unwrap() - want).abs() < 1e-12);
    // additivity over disjoint cubes
    let q2 = cube(&[8, 0], 4);
    let s2 = SparseCollection {
        entries: vec![SparseEntry {
            cube: q2.clone(),
            witness: Witness::whole(q2.clone()),
        }],
        rho: Ratio::new(1, 2),
    };
    let both = SparseCollection {
        entries: [s.entries.clone(), s2.entries.clone()].concat(),
        rho: Ratio::new(1, 2),
    };
    let f = ind(2, &[vec![0, 0], vec![9, 1]]);
    let g = ind(2, &[vec![1, 0], vec![10, 3], vec![8, 0]]);
    let sum = sparse_form(&s, &f, &g, 2.0, 2.0).unwrap() + sparse_form(&s2, &f, &g, 2.0, 2.0).unwrap();
    assert!((sparse_form(&both, &f, &g, 2.0, 2.0).unwrap() - sum).abs() < 1e-12);
    assert!(matches!(sparse_form(&s, &f, &g, 0.5, 2.0), Err(LabError::InvalidArgument(_))));
}

#[test]
fn sparsity_examples() {
    let rho = Ratio::new(1, 2);
    let disjoint = SparseCollection {
        entries: (0..3)
            .map(|k| {
                let q = cube(&[4 * k, 0], 4);
                SparseEntry {
                    cube: q.clone(),
                    witness: Witness::whole(q),
                }
            })
            .collect(),
        rho,
    };
    let r = sparsity_check(&disjoint, rho);
    assert!(r.ok && r.max_overlap == 1, "{r:?}");

    // witness exactly half of the cube: the density condition is strict
    let q = cube(&[0, 0], 4);
    let halfw = Witness {
        base: q.clone(),
        holes: vec![cube(&[0, 2], 2), cube(&[2, 2], 2)],
    };
    assert_eq!(halfw.size(), 8);
    let s = SparseCollection {
        entries: vec![SparseEntry {
            cube: q.clone(),
            witness: halfw,
        }],
        rho,
    };
    let r = sparsity_check(&s, rho);
    assert!(!r.ok && r.density_failures == vec![0]);

    // nested cubes sharing one witness: overlap 3 exceeds 8/3
    let w = Witness::whole(cube(&[0], 4));
    let nested = SparseCollection {
        entries: vec![
            SparseEntry {
                cube: cube(&[0], 4),
                witness: w.clone(),
            },
            SparseEntry {
                cube: cube(&[0], 4),
                witness: w.clone(),
            },
            SparseEntry {
                cube: cube(&[0], 8),
                witness: w.clone(),
            },
        ],
        rho: Ratio::new(3, 8),
    };
    let r = sparsity_check(&nested, Ratio::new(3, 8));
    assert!(!r.ok && r.density_failures.is_empty() && r.max_overlap == 3, "{r:?}");

    // witness outside its cube
    let s = SparseCollection {
        entries: vec![SparseEntry {
            cube: cube(&[0], 2),
            witness: Witness::whole(cube(&[2], 2)),
        }],
        rho,
    };
    assert_eq!(sparsity_check(&s, rho).witness_outside, vec![0]);
}

#[test]
fn overlap_matches_pointwise_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let entries: Vec<SparseEntry> = (0..6)
            .map(|_| {
                let s = 1u64 << rng.gen_range(0..3);
                let base = cube(&[rng.gen_range(0..4) * s as i64, rng.gen_range(0..4) * s as i64], s);
                let holes = (0..rng.gen_range(0..3))
                    .map(|_| cube(&[rng.gen_range(0..12), rng.gen_range(0..12)], rng.gen_range(1..4)))
                    .collect();
                SparseEntry {
                    cube: base.dilate(3),
                    witness: Witness { base, holes },
                }
            })
            .collect();
        let s = SparseCollection {
            entries,
            rho: Ratio::new(1, 10),
        };
        let r = sparsity_check(&s, Ratio::new(1, 10));
        let mut brute = 0;
        for x in -2..40 {
            for y in -2..40 {
                let c = s.entries.iter().filter(|e| e.witness.contains(&[x, y])).count();
                brute = brute.max(c as u64);
            }
        }
        assert_eq!(r.max_overlap, brute);
        for e in &s.entries {
            let b = &e.witness.base;
            let mut n = 0u128;
            for x in b.corner[0]..b.corner[0] + b.side as i64 {
                for y in b.corner[1]..b.corner[1] + b.side as i64 {
                    n += e.witness.contains(&[x, y]) as u128;
                }
            }
            assert_eq!(e.witness.size(), n);
        }
    }
}

#[test]
fn argmax_examples() {
    let p = argmax_partition(&[vec![0, 0, 0]], 4).unwrap();
    assert_eq!(p.scales, vec![1, 2, 4]);
    for (l, pts) in &p.classes {
        for x in pts {
            let n: i64 = x.iter().map(|v| v * v).sum();
            assert!(n >= (l * l) as i64 && n < (4 * l * l) as i64, "L={l} x={x:?}");
        }
    }
    // every point with 1 <= |x|^2 < 64 lands in exactly one class
    let assigned: usize = p.classes.values().map(Vec::len).sum();
    let brute = (-7i64..=7)
        .flat_map(|a| (-7i64..=7).flat_map(move |b| (-7i64..=7).map(move |c| a * a + b * b + c * c)))
        .filter(|&n| (1..64).contains(&n))
        .count();
    assert_eq!(assigned, brute);
    assert_eq!(p.unassigned, 15u128.pow(3) - brute as u128);
    // deterministic on a ball
    let ball: Vec<Vec<i64>> = (-2i64..=2)
        .flat_map(|a| (-2i64..=2).map(move |b| vec![a, b]))
        .filter(|x| x[0] * x[0] + x[1] * x[1] <= 4)
        .collect();
    assert_eq!(argmax_partition(&ball, 4).unwrap(), argmax_partition(&ball, 4).unwrap());
}

fn check_tree(t: &StoppingTree) {
    let mut nodes = vec![];
    t.root.walk(&mut nodes);
    assert_eq!(nodes.len(), t.nodes);
    for n in nodes {
        let packed: u128 = n.children.iter().map(|c| c.cube.volume()).sum();
        assert!(100 * packed <= n.cube.volume());
        let region = n.cube.dilate(3);
        for c in &n.children {
            assert!(c.cube.is_dyadic() && c.cube.side < n.cube.side);
            let corner_in = region.contains(&c.cube.corner);
            let far: Vec<i64> = c.cube.corner.iter().map(|v| v + c.cube.side as i64 - 1).collect();
            assert!(corner_in && region.contains(&far));
            assert!(c.triggers.iter().any(|&b| b));
        }
    }
}

#[test]
fn single_point_tree_is_root_only() {
    let e = vec![vec![3, 1, 4]];
    let cfg = StoppingConfig {
        c0: 64.0,
        ..Default::default()
    };
    let t = stopping_decomposition(&e, &e, &half(), &cfg).unwrap();
    assert_eq!(t.nodes, 1);
    let dom = domination_constant(&e, &e, &half(), 2, &StoppingConfig::default()).unwrap();
    assert!(dom.ratio <= 1.0);
    assert_eq!(dom.inner, 0.0);
}

#[test]
fn dense_corner_triggers_stops() {
    // E1 fills a small cube, E2 sits far away
    let mut e1 = vec![];
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                e1.push(vec![a, b, c]);
            }
        }
    }
    let e2 = vec![vec![60, 60, 60]];
    let t = stopping_decomposition(&e1, &e2, &half(), &StoppingConfig::default()).unwrap();
    check_tree(&t);
    assert!(t.nodes > 1);
    let e1_cube = cube(&[0, 0, 0], 2);
    let near = t.root.children.iter().any(|c| {
        let r = c.cube.dilate(5);
        r.contains(&e1_cube.corner)
    });
    assert!(near, "{:?}", t.root.children.iter().map(|c| &c.cube).collect::<Vec<_>>());
}

#[test]
fn random_trees_pack_and_are_sparse() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..4 {
        let e1 = random_set(&mut rng, 3, 20, 16);
        let e2 = random_set(&mut rng, 3, 20, 16);
        let t = stopping_decomposition(&e1, &e2, &half(), &StoppingConfig::default()).unwrap();
        check_tree(&t);
        for class in to_sparse(&t) {
            let r = sparsity_check(&class, Ratio::new(1, 2));
            assert!(r.ok, "{r:?}");
        }
        assert_eq!(pre_sparse(&t).len(), t.nodes);
    }
}

#[test]
fn domination_is_translation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let e1 = random_set(&mut rng, 3, 15, 16);
    let e2 = random_set(&mut rng, 3, 15, 16);
    let a = domination_constant(&e1, &e2, &half(), 2, &StoppingConfig::default()).unwrap();
    let shift = |s: &[Vec<i64>]| -> Vec<Vec<i64>> { s.iter().map(|x| x.iter().map(|v| v + 64).collect()).collect() };
    let b = domination_constant(&shift(&e1), &shift(&e2), &half(), 2, &StoppingConfig::default()).unwrap();
    assert_eq!(a.ratio.to_bits(), b.ratio.to_bits());
    assert!(a.ratio.is_finite() && a.form > 0.0);
}

#[test]
fn recursion_budget() {
    let e1: Vec<Vec<i64>> = (0..8).map(|m| vec![m & 1, m >> 1 & 1, m >> 2]).collect();
    let e2 = vec![vec![60, 60, 60]];
    let cfg = StoppingConfig {
        max_depth: 0,
        ..Default::default()
    };
    assert!(matches!(
        stopping_decomposition(&e1, &e2, &half(), &cfg),
        Err(LabError::RecursionBudget { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn local_average_grows_with_exponent(vals in proptest::collection::vec(0.0f64..5.0, 1..16)) {
        let mut f: LatticeFunction<f64> = LatticeFunction::new(1);
        for (i, v) in vals.iter().enumerate() {
            f.set(vec![i as i64], *v);
        }
        let q = Cube::new(vec![0], 16);
        let ts = [1.0, 1.5, 2.0, 3.0, 8.0];
        let avgs: Vec<f64> = ts.iter().map(|&t| local_average(&f, &q, t)).collect();
        prop_assert!(avgs.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-12) + 1e-300));
    }

    #[test]
    fn form_is_monotone_in_f(extra in proptest::collection::vec((0i64..8, 0i64..8), 0..6)) {
        let q = Cube::new(vec![0, 0], 8);
        let s = SparseCollection {
            entries: vec![
                SparseEntry { cube: q.clone(), witness: Witness::whole(q.clone()) },
                SparseEntry { cube: Cube::new(vec![0, 0], 4), witness: Witness::whole(Cube::new(vec![0, 0], 4)) },
            ],
            rho: Ratio::new(1, 2),
        };
        let base = vec![vec![1, 1]];
        let mut more = base.clone();
        more.extend(extra.iter().map(|&(a, b)| vec![a, b]));
        let g = ind(2, &[vec![2, 3], vec![5, 5]]);
        let a = sparse_form(&s, &ind(2, &base), &g, 2.0, 2.0).unwrap();
        let b = sparse_form(&s, &ind(2, &more), &g, 2.0, 2.0).unwrap();
        prop_assert!(b >= a);
    }
}
