use proptest::prelude::*;

use hyptree::analysis::{
    band_sandwich, certificate, certificate_with, coarse_moduli_of_points, distortion, filtration_decompose,
    hamming_metric, james_sum, DistortionConfig, FiniteMetric, JamesModel, ScanMode,
};
use hyptree::embeddings::{Construction, EmbeddingMap, Provenance};
use hyptree::spaces::{
    aus_modulus_estimate, auc_modulus_estimate, lp_modulus_closed_form, norm, BranchField, Grading, Key,
    LinearFunctional, ModulusConfig, ProjectionMode, SpaceModel, Vector,
};
use hyptree::tree::{gca, rho, segment_decompose, HyperbolicTree, TreeNode};
use num_bigint::BigUint;

fn node() -> impl Strategy<Value = TreeNode> {
    prop::collection::vec(1u32..4, 0..8).prop_map(|p| TreeNode::new(p).unwrap())
}

fn vector(keys: usize) -> impl Strategy<Value = Vector<f64>> {
    prop::collection::vec(-5.0f64..5.0, keys)
        .prop_map(|xs| Vector::from_entries(xs.into_iter().enumerate().map(|(i, x)| (Key::index(i), x))))
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(2.0), Just(f64::INFINITY), 1.0f64..8.0]
}

fn space() -> impl Strategy<Value = SpaceModel<f64>> {
    prop_oneof![
        exponent().prop_map(SpaceModel::lp),
        (exponent(), exponent(), exponent()).prop_map(|(o, a, b)| {
            let keys = |r: std::ops::Range<usize>| r.map(Key::index).collect::<Vec<_>>();
            SpaceModel::nested(o, vec![(a, keys(0..3)), (b, keys(3..6))]).unwrap()
        }),
        (prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 6), 1..5), 0.01f64..1.0).prop_map(|(fs, eps)| {
            let fs = fs
                .into_iter()
                .map(|c| LinearFunctional::new(Vector::from_entries(c.into_iter().enumerate().map(|(i, x)| (Key::index(i), x)))))
                .collect();
            SpaceModel::eval(fs, eps).unwrap()
        }),
    ]
}

/// Random map on `T_N^b` with keys graded by path length.
fn random_map(depth: usize, b: u32, seed: u64) -> EmbeddingMap<f64> {
    use rand::{Rng, SeedableRng};
    let tree = HyperbolicTree::integer(depth, b).unwrap();
    let nodes = tree.enumerate();
    let mut r = rand_pcg::Pcg64::seed_from_u64(seed);
    let images = nodes
        .iter()
        .map(|s| {
            if s.is_root() {
                return Vector::zero();
            }
            Vector::from_entries((0..4).map(|_| {
                let t = &nodes[r.gen_range(0..nodes.len())];
                (Key(t.path().to_vec()), r.gen_range(-2.0..2.0))
            }))
        })
        .collect();
    EmbeddingMap::new(tree.clone(), images, SpaceModel::l2(), Provenance::new(Construction::Custom, &tree), true).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn rho_is_a_metric(s in node(), t in node(), u in node()) {
        prop_assert_eq!(rho(&s, &t), rho(&t, &s));
        prop_assert_eq!(rho(&s, &t) == 0, s == t);
        prop_assert!(rho(&s, &u) <= rho(&s, &t) + rho(&t, &u));
    }

    #[test]
    fn gca_is_the_longest_common_prefix(s in node(), t in node()) {
        let g = gca(&s, &t);
        prop_assert!(g.is_ancestor_of(&s) && g.is_ancestor_of(&t));
        if g.len() < s.len().min(t.len()) {
            prop_assert_ne!(s.path()[g.len()], t.path()[g.len()]);
        }
        prop_assert_eq!(rho(&s, &t), s.len() + t.len() - 2 * g.len());
    }

    #[test]
    fn segments_reassemble(s in prop::collection::vec(1u32..4, 1..40).prop_map(|p| TreeNode::new(p).unwrap()), k in 2usize..4) {
        let segs = segment_decompose(&s, k).unwrap();
        let mut joined = TreeNode::root();
        for (j, seg) in segs.iter().enumerate() {
            if j + 1 < segs.len() {
                prop_assert_eq!(seg.len(), k.pow(j as u32));
            } else {
                prop_assert!(seg.len() >= 1 && seg.len() <= k.pow(j as u32));
            }
            joined = joined.concat(seg);
        }
        prop_assert_eq!(joined, s);
    }

    #[test]
    fn norm_axioms(space in space(), x in vector(6), y in vector(6), a in -3.0f64..3.0) {
        let nx = norm(&x, &space).unwrap();
        let ny = norm(&y, &space).unwrap();
        prop_assert!(nx >= 0.0);
        prop_assert!(norm(&x.add(&y), &space).unwrap() <= (nx + ny) * (1.0 + 1e-12) + 1e-12);
        prop_assert!((norm(&x.scale(a), &space).unwrap() - a.abs() * nx).abs() <= 1e-12 * (1.0 + nx * a.abs()));
        if !x.is_zero() {
            prop_assert!(nx > 0.0);
        }
    }

    #[test]
    fn coarse_modulus_is_monotone(seed in any::<u64>()) {
        let f = random_map(3, 2, seed);
        let metric = FiniteMetric::from_tree(f.tree());
        let grid: Vec<f64> = (1..=14).map(|i| i as f64 * 0.5).collect();
        let c = coarse_moduli_of_points(&metric, f.images(), f.target(), &grid, &grid).unwrap();
        prop_assert!(c.omega.windows(2).all(|w| w[0].1 <= w[1].1));
        prop_assert!(c.l_theta.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn james_sums_are_2_lipschitz(
        a in prop::collection::btree_set(1u32..40, 5),
        b in prop::collection::btree_set(1u32..40, 5),
    ) {
        let a: Vec<u32> = a.into_iter().collect();
        let b: Vec<u32> = b.into_iter().collect();
        let h = hamming_metric(&a, &b).unwrap() as f64;
        for model in [JamesModel::L1Basis, JamesModel::SummingBasis] {
            let d = norm(&james_sum::<f64>(model, &a).sub(&james_sum(model, &b)), &model.space()).unwrap();
            prop_assert!(d <= 2.0 * h + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn projection_laws(seed in any::<u64>(), k in -1isize..6, l in -1isize..6, p in exponent()) {
        let f = random_map(4, 2, seed);
        let g = Grading::by_path_length();
        let field = BranchField::from_fn(f.tree(), |b| f.evaluate(b).unwrap().clone());
        for mode in [ProjectionMode::Truncate, ProjectionMode::Average] {
            let ek = field.project(k, mode, &g).unwrap();
            prop_assert!(ek.project(k, mode, &g).unwrap().max_abs_diff(&ek) <= 1e-9);
            let ekl = ek.project(l, mode, &g).unwrap();
            prop_assert!(ekl.max_abs_diff(&field.project(k.min(l), mode, &g).unwrap()) <= 1e-9);
        }
        let space = SpaceModel::lp(p);
        let ek = field.project(k, ProjectionMode::Truncate, &g).unwrap();
        for (a, b) in ek.values().iter().zip(field.values()) {
            prop_assert!(norm(a, &space).unwrap() <= norm(b, &space).unwrap() + 1e-9);
        }
    }

    #[test]
    fn disjoint_bands_meet_the_sandwich_with_equality(
        parts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 1..5), 1..6),
        p in exponent(),
    ) {
        let xs: Vec<Vector<f64>> = parts
            .iter()
            .enumerate()
            .map(|(j, c)| Vector::from_entries(c.iter().enumerate().map(|(i, &x)| (Key(vec![j as u32, i as u32]), x))))
            .collect();
        let s = band_sandwich(&xs, &SpaceModel::lp(p), p, p).unwrap();
        prop_assert!((s.lower - s.norm_of_sum).abs() <= 1e-9 * (1.0 + s.norm_of_sum));
        prop_assert!((s.upper - s.norm_of_sum).abs() <= 1e-9 * (1.0 + s.norm_of_sum));
        let loose = band_sandwich(&xs, &SpaceModel::lp(p), 1.0, f64::INFINITY).unwrap();
        prop_assert!(loose.holds(1e-9 * (1.0 + loose.norm_of_sum)));
    }
}

#[test]
fn eval_norm_axioms_on_many_vectors() {
    use rand::{Rng, SeedableRng};
    let mut r = rand_pcg::Pcg64::seed_from_u64(7);
    let fs = (0..4)
        .map(|_| LinearFunctional::new(Vector::from_entries((0..8).map(|i| (Key::index(i), r.gen_range(-1.0..1.0))))))
        .collect();
    let space = SpaceModel::<f64>::eval(fs, 0.1).unwrap();
    for _ in 0..1000 {
        let x = Vector::from_entries((0..8).map(|i| (Key::index(i), r.gen_range(-3.0..3.0))));
        let y = Vector::from_entries((0..8).map(|i| (Key::index(i), r.gen_range(-3.0..3.0))));
        let (nx, ny) = (norm(&x, &space).unwrap(), norm(&y, &space).unwrap());
        assert!(nx > 0.0);
        assert!(norm(&x.add(&y), &space).unwrap() <= nx + ny + 1e-12);
        assert!((norm(&x.scale(-2.5), &space).unwrap() - 2.5 * nx).abs() <= 1e-12 * nx.max(1.0));
    }
}

#[test]
fn reconstruction_is_exact_on_random_maps() {
    for seed in 0..50u64 {
        let depth = 1 + (seed % 6) as usize;
        let b = 1 + (seed % 3) as u32;
        let f = random_map(depth, b, seed);
        let a = 2 + seed % 3;
        let t = filtration_decompose(&f, a, ProjectionMode::Truncate, Some(&Grading::by_path_length())).unwrap();
        assert_eq!(t.reconstruction_error, 0.0, "seed {seed}");
        let t = filtration_decompose(&f, a, ProjectionMode::Average, None).unwrap();
        assert!(t.reconstruction_error <= 1e-12, "seed {seed}");
    }
}

#[test]
fn sampled_scan_agrees_with_exhaustive() {
    let f = random_map(4, 2, 99);
    let full = distortion(&f, &DistortionConfig::default()).unwrap();
    let sampled = distortion(&f, &DistortionConfig { budget: 100, samples: 20_000, seed: 1 }).unwrap();
    assert_eq!(sampled.mode, ScanMode::Sampled { samples: 20_000, seed: 1 });
    assert_eq!(full.lip, sampled.lip);
    assert_eq!(full.colip_inverse, sampled.colip_inverse);
}

#[test]
fn certificate_flag_matches_the_predicate_on_a_grid() {
    for i in 0..10 {
        for j in 0..10 {
            let c = 1.0 + 0.35 * i as f64;
            let p = 1.2 + 0.4 * j as f64;
            let cert = certificate(c, p).unwrap();
            assert_eq!(cert.contradiction, cert.predicate, "C={c} p={p}");
            assert!(cert.predicate);
            let below: BigUint = cert.m.parse::<BigUint>().unwrap() - 1u32;
            if below >= BigUint::from(1u32) {
                let cert = certificate_with(c, p, None, Some(below)).unwrap();
                assert!(!cert.predicate);
                assert_eq!(cert.contradiction, cert.predicate, "C={c} p={p} below");
            }
        }
    }
}

#[test]
fn lp_moduli_match_the_closed_form() {
    for p in [1.5, 2.0, 3.0] {
        let space = SpaceModel::<f64>::lp(p);
        for tau in [0.25, 0.5, 1.0] {
            let exact: f64 = lp_modulus_closed_form(p, tau);
            let cfg = ModulusConfig::default();
            assert!((aus_modulus_estimate(&space, 64, tau, &cfg).unwrap() - exact).abs() <= 1e-6);
            assert!((auc_modulus_estimate(&space, 64, tau, &cfg).unwrap() - exact).abs() <= 1e-6);
        }
    }
}
