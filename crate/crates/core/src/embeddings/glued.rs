//! Gluing across dyadic depth windows.
//!
//! For `2^k ≤ |s| < 2^{k+1}` the image is `λ_s F_k(s) + (1 - λ_s) F_{k+1}(s)`
//! with `λ_s = (2^{k+1} - |s|) / 2^k`, where `F_i` is the single-system map
//! built from level `i + 1`. The weight moves linearly from `F_k` to
//! `F_{k+1}` across the window, so neighbouring nodes in different windows
//! stay close.

use serde::{Deserialize, Serialize};

use super::{orient, Construction, EmbeddingMap, Provenance, WitnessStats};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spaces::{norm, pair_vectors, SpaceModel, Vector};
use crate::systems::{LeveledSystems, SystemKind};
use crate::tree::{rho, HyperbolicTree, TreeNode};

/// Window index `k` with `2^k ≤ len < 2^{k+1}`.
pub fn window(len: usize) -> usize {
    debug_assert!(len > 0);
    (usize::BITS - 1 - len.leading_zeros()) as usize
}

/// `λ_s = (2^{k+1} - |s|) / 2^k`.
pub fn lambda<T: Real>(len: usize) -> T {
    let k = window(len);
    let lo = T::lit((1u64 << k) as f64);
    (lo + lo - T::from_usize_lossy(len)) / lo
}

fn check_levels<T: Real>(levels: &LeveledSystems<T>, depth: usize) -> Result<HyperbolicTree> {
    if levels.kind() != SystemKind::Gluing {
        return Err(Error::InvalidParameter("gluing needs a gluing family".into()));
    }
    if depth > 0 {
        let required = window(depth) + 2;
        if required > levels.max_level() {
            return Err(Error::DepthExceedsLevels {
                depth,
                required_level: required,
                available: levels.max_level(),
            });
        }
    }
    let tree = HyperbolicTree::integer(depth, levels.branching())?;
    if depth > 0 {
        for l in 1..=window(depth) + 2 {
            let need = depth.min((1usize << l) - 1);
            let have = levels.level(l)?.tree().depth;
            if have < need {
                return Err(Error::CapacityExhausted {
                    what: format!("depth of level {l}"),
                    required: need as u64,
                    available: have as u64,
                });
            }
        }
    }
    Ok(tree)
}

fn provenance<T: Real>(c: Construction, tree: &HyperbolicTree, levels: &LeveledSystems<T>) -> Provenance {
    let mut p = Provenance::new(c, tree);
    p.schedule = Some(levels.schedule().iter().map(|d| d.to_f64_lossy()).collect());
    p.seed = Some(levels.seed());
    p
}

fn glue<T: Real>(
    levels: &LeveledSystems<T>,
    depth: usize,
    construction: Construction,
    part: impl Fn(usize, &TreeNode) -> Result<Vector<T>>,
    target: SpaceModel<T>,
) -> Result<EmbeddingMap<T>> {
    let tree = check_levels(levels, depth)?;
    let mut images = Vec::new();
    for s in tree.enumerate() {
        if s.is_root() {
            images.push(Vector::zero());
            continue;
        }
        let k = window(s.len());
        let lam: T = lambda(s.len());
        let mut img = part(k, &s)?.scale(lam);
        if lam < T::one() {
            img.axpy(T::one() - lam, &part(k + 1, &s)?);
        }
        images.push(img);
    }
    EmbeddingMap::new(tree.clone(), images, target, provenance(construction, &tree, levels), true)
}

/// Primal glued map into `ℓ1`: `F_i(s) = Σ_{∅<t≤s} x_{i+1,t}`.
pub fn embed_glued<T: Real>(levels: &LeveledSystems<T>, depth: usize) -> Result<EmbeddingMap<T>> {
    glued_part_check(levels)?;
    glue(
        levels,
        depth,
        Construction::Glued,
        |i, s| levels.level(i + 1)?.vector_path_sum(s),
        SpaceModel::l1(),
    )
}

/// Dual glued map into `ℓ∞`: `G_i(s) = Σ_{∅<t≤s} y*_{i+1,t}`.
pub fn embed_glued_dual<T: Real>(levels: &LeveledSystems<T>, depth: usize) -> Result<EmbeddingMap<T>> {
    glued_part_check(levels)?;
    glue(
        levels,
        depth,
        Construction::GluedDual,
        |i, s| {
            let sys = levels.level(i + 1)?;
            let mut g = Vector::zero();
            for t in s.ancestors().filter(|t| !t.is_root()) {
                g.axpy(T::one(), &sys.path_sum(&t)?);
            }
            Ok(g)
        },
        SpaceModel::linf(),
    )
}

fn glued_part_check<T: Real>(levels: &LeveledSystems<T>) -> Result<()> {
    if levels.max_level() == 0 {
        return Err(Error::DepthExceedsLevels { depth: 0, required_level: 1, available: 0 });
    }
    Ok(())
}

/// Window relation of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GluedCase {
    Root,
    SameWindow,
    AdjacentWindows,
    DistantWindows,
}

pub fn classify_glued(s: &TreeNode, t: &TreeNode) -> GluedCase {
    if s.is_root() || t.is_root() {
        return GluedCase::Root;
    }
    match window(s.len()).abs_diff(window(t.len())) {
        0 => GluedCase::SameWindow,
        1 => GluedCase::AdjacentWindows,
        _ => GluedCase::DistantWindows,
    }
}

/// Per-case pairing and norm-ratio summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluedCaseStats {
    pub case: GluedCase,
    pub witness: WitnessStats,
    pub min_norm_over_rho: f64,
}

impl GluedCaseStats {
    fn new(case: GluedCase) -> Self {
        GluedCaseStats { case, witness: WitnessStats::default(), min_norm_over_rho: f64::INFINITY }
    }
}

/// Witness pairings for every pair, with `|s| ≥ |s'|`, `l` the window of
/// `s`, `u` the common ancestor and `d = |s| - |u|`:
///
/// * primal: `⟨Σ_{u<t≤s} (x*_{l+1,t} + x*_{l+2,t}), F(s) - F(s')⟩ ≥ d/4`
/// * dual: `⟨x_{l+1,v} + x_{l+2,v}, G(s) - G(s')⟩ ≥ d/4`, `v` the successor of `u` toward `s`
pub fn glued_witnesses<T: Real>(
    levels: &LeveledSystems<T>,
    primal: &EmbeddingMap<T>,
    dual: &EmbeddingMap<T>,
) -> Result<(Vec<GluedCaseStats>, Vec<GluedCaseStats>)> {
    use std::collections::BTreeMap;
    let mut fs: BTreeMap<GluedCase, GluedCaseStats> = BTreeMap::new();
    let mut gs: BTreeMap<GluedCase, GluedCaseStats> = BTreeMap::new();
    let nodes = primal.nodes();
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let (s, t, u, d, _) = orient(&nodes[i], &nodes[j]);
            let case = classify_glued(s, t);
            let r = rho(s, t);
            let required = d as f64 / 4.0;
            let l = window(s.len());
            let (a, b) = (levels.level(l + 1)?, levels.level(l + 2)?);

            let mut w = Vector::zero();
            for node in s.ancestors().filter(|x| x.len() > u.len()) {
                w.axpy(T::one(), &a.functional(&node)?.entries);
                w.axpy(T::one(), &b.functional(&node)?.entries);
            }
            let df = primal.evaluate(s)?.sub(primal.evaluate(t)?);
            let st = fs.entry(case).or_insert_with(|| GluedCaseStats::new(case));
            st.witness.record(s, t, pair_vectors(&w, &df).to_f64_lossy(), required, r);
            st.min_norm_over_rho = st
                .min_norm_over_rho
                .min(norm(&df, primal.target())?.to_f64_lossy() / r as f64);

            let v = s.prefix(u.len() + 1);
            let wv = a.vector(&v)?.add(b.vector(&v)?);
            let dg = dual.evaluate(s)?.sub(dual.evaluate(t)?);
            let st = gs.entry(case).or_insert_with(|| GluedCaseStats::new(case));
            st.witness.record(s, t, pair_vectors(&wv, &dg).to_f64_lossy(), required, r);
            st.min_norm_over_rho = st
                .min_norm_over_rho
                .min(norm(&dg, dual.target())?.to_f64_lossy() / r as f64);
        }
    }
    Ok((fs.into_values().collect(), gs.into_values().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::default_schedule;

    #[test]
    fn lambda_values() {
        assert_eq!(lambda::<f64>(1), 1.0);
        assert_eq!(lambda::<f64>(2), 1.0);
        assert_eq!(lambda::<f64>(3), 0.5);
        assert_eq!(lambda::<f64>(4), 1.0);
        assert_eq!(lambda::<f64>(7), 0.25);
        assert_eq!(window(8), 3);
    }

    #[test]
    fn window_boundary_uses_single_part() {
        let sched = vec![0.0f64; 5];
        let fam = LeveledSystems::generate(4, SystemKind::Gluing, 2, &sched, None, 0).unwrap();
        let f = embed_glued(&fam, 4).unwrap();
        let s = TreeNode::new(vec![1, 2]).unwrap();
        let expected = fam.level(2).unwrap().vector_path_sum(&s).unwrap();
        assert_eq!(f.evaluate(&s).unwrap(), &expected);
    }

    #[test]
    fn needs_enough_levels() {
        let sched = default_schedule::<f64>(SystemKind::Gluing, 4);
        let fam = LeveledSystems::generate(3, SystemKind::Gluing, 2, &sched, None, 0).unwrap();
        assert!(embed_glued(&fam, 3).is_ok());
        assert!(matches!(
            embed_glued(&fam, 4),
            Err(Error::DepthExceedsLevels { required_level: 4, .. })
        ));
    }

    #[test]
    fn witnesses_hold_at_small_depth() {
        let sched = default_schedule::<f64>(SystemKind::Gluing, 5);
        let fam = LeveledSystems::generate(4, SystemKind::Gluing, 2, &sched, None, 2).unwrap();
        let f = embed_glued(&fam, 5).unwrap();
        let g = embed_glued_dual(&fam, 5).unwrap();
        let (fs, gs) = glued_witnesses(&fam, &f, &g).unwrap();
        for st in fs.iter().chain(&gs) {
            assert!(st.witness.holds(), "{st:?}");
        }
    }
}
