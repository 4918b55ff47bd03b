use hyptree::analysis::{
    certificate, concentration_search, counting_bounds, filtration_decompose, james_sum, kr_inequality,
    ConcentrationConfig, JamesModel,
};
use hyptree::embeddings::embed_l1;
use hyptree::spaces::{Grading, ProjectionMode, SpaceModel};
use hyptree::systems::BiorthSystem;
use hyptree::tree::HyperbolicTree;

/// Smallest integer strictly above `(2C)^q`, by exact search over small integers.
fn least_integer_above(c_num: u128, c_den: u128, p: u32) -> u128 {
    // m > (2C)^{p/(p-1)}  <=>  m^{p-1} > (2C)^p
    let (num, den) = ((2 * c_num).pow(p), c_den.pow(p));
    (1u128..).find(|m| m.pow(p - 1) * den > num).unwrap()
}

#[test]
fn certificate_matches_integer_arithmetic() {
    for (c, p) in [(1u128, 2u32), (2, 2), (3, 3)] {
        let m = least_integer_above(c, 1, p);
        let cert = certificate(c as f64, p as f64).unwrap();
        assert_eq!(cert.a, m.to_string());
        assert_eq!(cert.m, m.to_string());
        if let Some(n) = m.checked_pow(m as u32 + 1) {
            assert_eq!(cert.n.as_deref(), Some(n.to_string().as_str()));
        }
        assert!(cert.contradiction);
    }
    let cert = certificate(1.0, 2.0).unwrap();
    let upper = 5f64.sqrt() * 15625.0;
    assert!((cert.upper.unwrap() - upper).abs() < 1e-9);
    assert!((upper - 34938.6).abs() < 0.05);
    assert_eq!(cert.lower, Some(39062.5));
    assert_eq!(cert.n.as_deref(), Some("15625"));
    assert_eq!(certificate(2.0, 2.0).unwrap().n.unwrap(), 17u128.pow(18).to_string());
}

#[test]
fn counting_sums_of_the_canonical_map() {
    let tree = HyperbolicTree::integer(4, 2).unwrap();
    let f = embed_l1(&BiorthSystem::<f64>::canonical(&tree)).unwrap();
    let table = filtration_decompose(&f, 2, ProjectionMode::Truncate, Some(&Grading::by_path_length())).unwrap();
    // z_j is the unit vector of the level-j node on every branch, so only w_j0 is nonzero.
    let expected: Vec<Vec<f64>> = (0..4).map(|_| vec![1.0, 0.0, 0.0]).collect();
    assert_eq!(table.norms, expected);
    let cb = counting_bounds(&table, 1.0, 2.0).unwrap();
    assert_eq!(cb.upper_measured, 0.0);
    assert!((cb.upper_bound - 2f64.sqrt() * 4.0).abs() < 1e-12);
    assert_eq!(cb.lower_measured, vec![0.0, 0.0]);
    assert_eq!(cb.lower_bound, 2.0);
    assert!(cb.bounds_applicable);
    let csv = table.to_csv().unwrap();
    assert_eq!(csv.lines().count(), 1 + 16 * 4 * 3);
}

#[test]
fn kr_comparison_flips_for_the_l1_model() {
    let theta = JamesModel::L1Basis.theta();
    let f = |a: &[u32]| james_sum::<f64>(JamesModel::L1Basis, a);
    let space = SpaceModel::l1();
    let cfg = ConcentrationConfig { budget: 8, restarts: 2, ..Default::default() };

    let small = kr_inequality(theta, 9, 1.0, 2.0).unwrap();
    assert_eq!((small.lhs, small.rhs), (17.0, 27.0));
    assert!(!small.contradiction);
    let found = concentration_search(&f, &space, 24, 9, 1.0, 2.0, cfg).unwrap();
    assert!(found.best_diameter >= small.lhs);
    assert!(found.met);

    let large = kr_inequality(theta, 100, 1.0, 2.0).unwrap();
    assert!(large.contradiction);
    let found = concentration_search(&f, &space, 210, 100, 1.0, 2.0, cfg).unwrap();
    assert!(found.best_diameter >= large.lhs);
    assert!(!found.met);
    assert!(found.heuristic);
}
