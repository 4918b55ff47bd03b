use hyptree::analysis::FiniteMetric;
use hyptree::optimizer::{growth_experiment, optimize, optimize_tree, DimRule, LpTarget, OptimizeConfig};
use hyptree::tree::HyperbolicTree;

/// Distortion of a planar placement of the 3-leaf star with the root at the origin.
fn star_distortion(leaves: &[(f64, f64); 3]) -> f64 {
    let mut ratios = Vec::new();
    for &(x, y) in leaves {
        ratios.push((x * x + y * y).sqrt());
    }
    for i in 0..3 {
        for j in (i + 1)..3 {
            let (dx, dy) = (leaves[i].0 - leaves[j].0, leaves[i].1 - leaves[j].1);
            ratios.push((dx * dx + dy * dy).sqrt() / 2.0);
        }
    }
    let hi = ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = ratios.iter().cloned().fold(f64::MAX, f64::min);
    hi / lo
}

/// Grid search over placements with the first leaf fixed at `(1, 0)`,
/// refined around the best cell.
fn star_oracle() -> f64 {
    let (mut c2, mut c3) = ((0.0, 2.0), (0.0, 4.0));
    let (mut rw, mut aw) = (0.6, std::f64::consts::PI);
    let mut best = f64::MAX;
    for _ in 0..14 {
        let steps = 24;
        let mut arg = (c2, c3);
        for a in 0..=steps {
            for b in 0..=steps {
                let r2 = c2.0 + 1.0 + rw * (a as f64 / steps as f64 - 0.5) * 2.0;
                for c in 0..=steps {
                    let t2 = c2.1 + aw * (c as f64 / steps as f64 - 0.5) * 2.0;
                    for d in 0..=steps {
                        let r3 = c3.0 + 1.0 + rw * (b as f64 / steps as f64 - 0.5) * 2.0;
                        let t3 = c3.1 + aw * (d as f64 / steps as f64 - 0.5) * 2.0;
                        let v = star_distortion(&[(1.0, 0.0), (r2 * t2.cos(), r2 * t2.sin()), (r3 * t3.cos(), r3 * t3.sin())]);
                        if v < best {
                            best = v;
                            arg = ((r2 - 1.0, t2), (r3 - 1.0, t3));
                        }
                    }
                }
            }
        }
        c2 = arg.0;
        c3 = arg.1;
        rw *= 0.3;
        aw *= 0.3;
    }
    best
}

#[test]
fn grid_oracle_finds_the_symmetric_star() {
    let oracle = star_oracle();
    assert!((oracle - 2.0 / 3f64.sqrt()).abs() < 1e-6, "oracle {oracle}");
}

#[test]
fn star_in_the_plane_matches_the_oracle() {
    let oracle = star_oracle();
    let run = optimize::<f64>(&FiniteMetric::star(3), LpTarget::new(2.0, 2).unwrap(), OptimizeConfig::default(), None)
        .unwrap();
    eprintln!("star {} oracle {oracle}", run.distortion);
    assert!((run.distortion - oracle).abs() < 1e-3, "{} vs {oracle}", run.distortion);
    assert!(run.distortion >= 1.0);
}

#[test]
fn l1_with_node_count_dimensions_is_isometric() {
    for n in [2, 4] {
        let tree = HyperbolicTree::integer(n, 2).unwrap();
        let d = tree.node_count() as usize;
        let cfg = OptimizeConfig { iterations: 100, restarts: 2, ..Default::default() };
        let run = optimize_tree::<f64>(&tree, LpTarget::new(1.0, d).unwrap(), cfg).unwrap();
        assert!(run.distortion <= 1.0 + 1e-6);
        assert!(run.distortion <= run.initial_distortion.unwrap());
    }
}

#[test]
fn growth_in_l2_is_non_decreasing() {
    let cfg = OptimizeConfig { iterations: 1500, restarts: 3, ..Default::default() };
    let table = growth_experiment(2, &[2, 4, 6], 2.0, DimRule::Fixed { d: 8 }, cfg).unwrap();
    let ds: Vec<f64> = table.rows.iter().map(|r| r.distortion).collect();
    eprintln!("growth {ds:?}");
    assert!(table.non_decreasing, "{ds:?}");
    let single = growth_experiment(2, &[3], 1.0, DimRule::NodeCount, OptimizeConfig { iterations: 10, restarts: 1, ..cfg }).unwrap();
    assert_eq!(single.rows.len(), 1);
    assert!(single.rows[0].distortion <= 1.0 + 1e-6);
}
