use hyptree::analysis::{distortion, DistortionConfig, ScanMode};
use hyptree::embeddings::{
    embed_dual, embed_glued, embed_glued_dual, embed_l1, glued_witnesses, segmented_witnesses,
    single_system_witnesses, EmbeddingMap, EtaSchedule, SegmentedCase,
};
use hyptree::systems::{default_schedule, BiorthSystem, LeveledSystems, SystemKind};
use hyptree::tree::{segment_index, HyperbolicTree};

fn exhaustive(map: &EmbeddingMap<f64>) -> hyptree::analysis::DistortionReport {
    let r = distortion(map, &DistortionConfig::default()).unwrap();
    assert_eq!(r.mode, ScanMode::Exhaustive);
    r
}

#[test]
fn canonical_l1_is_an_isometry_on_small_trees() {
    for n in 0..=5 {
        for b in 1..=3u32 {
            let tree = HyperbolicTree::integer(n, b).unwrap();
            let f = embed_l1(&BiorthSystem::<f64>::canonical(&tree)).unwrap();
            if f.nodes().len() < 2 {
                continue;
            }
            let r = exhaustive(&f);
            assert!((r.distortion - 1.0).abs() <= 1e-12, "N={n} b={b}: {}", r.distortion);
        }
    }
}

#[test]
fn perturbed_systems_stay_within_24() {
    for n in 3..=5usize {
        let delta = 0.999 / (24.0 * (n * n) as f64);
        let tree = HyperbolicTree::integer(n, 2).unwrap();
        for seed in 0..20 {
            let sys = BiorthSystem::<f64>::perturbed(&tree, delta, seed).unwrap();
            assert!(sys.check_invariants().unwrap().holds());
            let f = embed_l1(&sys).unwrap();
            let g = embed_dual(&sys).unwrap();
            assert!(exhaustive(&f).distortion <= 24.0);
            assert!(exhaustive(&g).distortion <= 24.0);
            let (pf, pg) = single_system_witnesses(&sys, &f, &g).unwrap();
            assert!(pf.holds() && pg.holds());
            assert!(pf.min_value_over_rho >= 0.125 && pg.min_value_over_rho >= 0.125);
        }
    }
}

#[test]
fn glued_constants_at_depth_8() {
    let depth = 8;
    let levels = 5;
    let sched = default_schedule::<f64>(SystemKind::Gluing, levels + 1);
    let fam = LeveledSystems::generate(levels, SystemKind::Gluing, 2, &sched, Some(depth), 11).unwrap();
    let f = embed_glued(&fam, depth).unwrap();
    let g = embed_glued_dual(&fam, depth).unwrap();
    let rf = exhaustive(&f);
    let rg = exhaustive(&g);
    assert!(rf.lip <= 9.0 && rf.colip_inverse <= 96.0, "{rf:?}");
    assert!(rg.lip <= 27.0 && rg.colip_inverse <= 16.0, "{rg:?}");
    let (fs, gs) = glued_witnesses(&fam, &f, &g).unwrap();
    assert!(fs.iter().chain(&gs).all(|c| c.witness.holds()));
}

#[test]
fn segmented_cases_at_depth_7() {
    let depth = 7;
    let kind = SystemKind::Segmented { k: 2 };
    let levels = segment_index(depth, 2);
    let fam = LeveledSystems::generate(levels, kind, 2, &vec![0.0f64; levels + 1], Some(depth), 0).unwrap();
    let (map, rep) = segmented_witnesses(&fam, depth, &EtaSchedule::Zero, 0).unwrap();
    assert!(rep.lipschitz <= 3.0 + 1e-9);
    assert!(rep.holds(), "{rep:#?}");
    let b1 = rep.case(SegmentedCase::B1).map_or(f64::INFINITY, |c| c.min_norm_over_rho);
    let b2 = rep.case(SegmentedCase::B2).map_or(f64::INFINITY, |c| c.min_norm_over_rho);
    assert!(b1 * 1308.0 >= 1.0 && b2 * 1308.0 >= 1.0);
    let d = rep.case(SegmentedCase::DComparable).expect("comparable pairs exist");
    assert!(d.witness.as_ref().unwrap().holds());
    assert!(exhaustive(&map).lip <= 3.0 + 1e-9);
}
