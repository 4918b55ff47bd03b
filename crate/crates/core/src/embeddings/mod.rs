//! Maps from tree nodes to coordinate vectors.
//!
//! * [`embed_l1`]: `F(s) = Σ_{∅<t≤s} x_t`, landing in `ℓ1`.
//! * [`embed_dual`]: `G(s) = Σ_{t≤s} y*_t` with `y*_t = Σ_{u≤t} x*_u`, in `ℓ∞`.
//! * [`glued`]: convex interpolation across dyadic depth windows.
//! * [`segmented`]: the segment-by-segment construction into `c0`-like targets.

pub mod glued;
pub mod segmented;

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spaces::{pair_vectors, Key, KeyIndex, SpaceModel, Vector};
use crate::systems::BiorthSystem;
use crate::tree::{gca, rho, HyperbolicTree, TreeNode};

pub use glued::{embed_glued, embed_glued_dual, glued_witnesses, lambda, GluedCase, GluedCaseStats};
pub use segmented::{
    embed_segmented, segmented_witnesses, EtaSchedule, SegmentedCase, SegmentedCaseStats,
    SegmentedLayout, SegmentedReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Construction {
    L1,
    Dual,
    Glued,
    GluedDual,
    Segmented,
    Custom,
}

impl Construction {
    pub fn name(self) -> &'static str {
        match self {
            Construction::L1 => "l1",
            Construction::Dual => "dual",
            Construction::Glued => "glued",
            Construction::GluedDual => "glued-dual",
            Construction::Segmented => "segmented",
            Construction::Custom => "custom",
        }
    }
}

/// How a map was built; enough to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub construction: Construction,
    pub depth: usize,
    pub branching: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_base: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(construction: Construction, tree: &HyperbolicTree) -> Self {
        Provenance {
            construction,
            depth: tree.depth,
            branching: tree.branching,
            delta: None,
            schedule: None,
            segment_base: None,
            eta: None,
            seed: None,
        }
    }
}

/// Images of every node of a finite tree, in enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMap<T> {
    tree: HyperbolicTree,
    nodes: Vec<TreeNode>,
    images: Vec<Vector<T>>,
    target: SpaceModel<T>,
    provenance: Provenance,
    root_pinned: bool,
    index: HashMap<TreeNode, usize>,
}

impl<T: Real> EmbeddingMap<T> {
    /// `images` must follow [`HyperbolicTree::enumerate`].
    pub fn new(
        tree: HyperbolicTree,
        images: Vec<Vector<T>>,
        target: SpaceModel<T>,
        provenance: Provenance,
        root_pinned: bool,
    ) -> Result<Self> {
        let nodes = tree.enumerate();
        if nodes.len() != images.len() {
            return Err(Error::SizeMismatch { left: nodes.len(), right: images.len() });
        }
        if root_pinned && !images[0].is_zero() {
            return Err(Error::InvalidParameter("root-pinned map with nonzero root image".into()));
        }
        target.validate()?;
        let index = nodes.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        Ok(EmbeddingMap { tree, nodes, images, target, provenance, root_pinned, index })
    }

    pub fn tree(&self) -> &HyperbolicTree {
        &self.tree
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn images(&self) -> &[Vector<T>] {
        &self.images
    }

    pub fn target(&self) -> &SpaceModel<T> {
        &self.target
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn root_pinned(&self) -> bool {
        self.root_pinned
    }

    pub fn evaluate(&self, s: &TreeNode) -> Result<&Vector<T>> {
        self.index
            .get(s)
            .map(|&i| &self.images[i])
            .ok_or_else(|| Error::UnknownNode(s.clone()))
    }

    /// Same map multiplied by a scalar.
    pub fn scaled(&self, alpha: T) -> Self {
        let mut out = self.clone();
        out.images = self.images.iter().map(|v| v.scale(alpha)).collect();
        out
    }

    pub fn key_index(&self) -> KeyIndex {
        KeyIndex::from_vectors(&self.images)
    }

    /// Tree distance table in node order.
    pub fn distance(&self, i: usize, j: usize) -> usize {
        rho(&self.nodes[i], &self.nodes[j])
    }

    /// One row per node: slash path, then alternating key/value cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,key,value\n");
        for (s, v) in self.nodes.iter().zip(&self.images) {
            out.push_str(&s.to_slash());
            for (k, x) in v.iter() {
                let _ = write!(out, ",{},{}", k.to_slash(), x);
            }
            out.push('\n');
        }
        out
    }

    pub fn sidecar(&self) -> Sidecar<T> {
        Sidecar {
            tree: self.tree.clone(),
            target: self.target.clone(),
            root_pinned: self.root_pinned,
            provenance: self.provenance.clone(),
        }
    }

    pub fn from_csv(csv: &str, sidecar: Sidecar<T>) -> Result<Self> {
        let mut lines = csv.lines();
        match lines.next() {
            Some("path,key,value") => {}
            other => return Err(Error::Parse(format!("unexpected header {other:?}"))),
        }
        let expected = sidecar.tree.enumerate();
        let mut images = Vec::with_capacity(expected.len());
        for (row, line) in lines.enumerate() {
            let mut cells = line.split(',');
            let node = TreeNode::from_slash(cells.next().unwrap_or(""))?;
            if expected.get(row) != Some(&node) {
                return Err(Error::Parse(format!("row {row}: node {node} out of order")));
            }
            let rest: Vec<&str> = cells.collect();
            if !rest.len().is_multiple_of(2) {
                return Err(Error::Parse(format!("row {row}: dangling key")));
            }
            let mut v = Vector::zero();
            for kv in rest.chunks(2) {
                let x = kv[1]
                    .parse::<T>()
                    .map_err(|_| Error::Parse(format!("row {row}: bad value {:?}", kv[1])))?;
                v.set(Key::from_slash(kv[0])?, x);
            }
            images.push(v);
        }
        Self::new(sidecar.tree, images, sidecar.target, sidecar.provenance, sidecar.root_pinned)
    }
}

/// JSON companion of the CSV dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Sidecar<T> {
    pub tree: HyperbolicTree,
    pub target: SpaceModel<T>,
    pub root_pinned: bool,
    pub provenance: Provenance,
}

/// `F(s) = Σ_{∅<t≤s} x_t`; `F(∅) = 0`.
pub fn embed_l1<T: Real>(system: &BiorthSystem<T>) -> Result<EmbeddingMap<T>> {
    let nodes = system.nodes();
    let mut images: Vec<Vector<T>> = Vec::with_capacity(nodes.len());
    for (i, s) in nodes.iter().enumerate() {
        let img = match s.parent() {
            None => Vector::zero(),
            Some(p) => {
                let mut v = images[system.position(&p)?].clone();
                v.axpy(T::one(), &system.vectors()[i]);
                v
            }
        };
        images.push(img);
    }
    let mut prov = Provenance::new(Construction::L1, system.tree());
    prov.delta = Some(system.delta().to_f64_lossy());
    prov.seed = system.seed();
    EmbeddingMap::new(system.tree().clone(), images, system.space(), prov, true)
}

/// `G(s) = Σ_{t≤s} y*_t`; `G(∅) = y*_∅ = x*_∅`.
pub fn embed_dual<T: Real>(system: &BiorthSystem<T>) -> Result<EmbeddingMap<T>> {
    let nodes = system.nodes();
    let mut ys: Vec<Vector<T>> = Vec::with_capacity(nodes.len());
    let mut images: Vec<Vector<T>> = Vec::with_capacity(nodes.len());
    for (i, s) in nodes.iter().enumerate() {
        let (mut y, mut g) = match s.parent() {
            None => (Vector::zero(), Vector::zero()),
            Some(p) => {
                let j = system.position(&p)?;
                (ys[j].clone(), images[j].clone())
            }
        };
        y.axpy(T::one(), &system.functionals()[i].entries);
        g.axpy(T::one(), &y);
        ys.push(y);
        images.push(g);
    }
    let mut prov = Provenance::new(Construction::Dual, system.tree());
    prov.delta = Some(system.delta().to_f64_lossy());
    prov.seed = system.seed();
    EmbeddingMap::new(system.tree().clone(), images, system.dual_space(), prov, false)
}

/// Running minimum of `value - required` and of `value / ρ` over pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessStats {
    pub pairs: usize,
    pub failures: usize,
    pub min_margin: f64,
    pub min_value_over_rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst: Option<(String, String)>,
}

impl Default for WitnessStats {
    fn default() -> Self {
        WitnessStats {
            pairs: 0,
            failures: 0,
            min_margin: f64::INFINITY,
            min_value_over_rho: f64::INFINITY,
            worst: None,
        }
    }
}

impl WitnessStats {
    pub fn record(&mut self, s: &TreeNode, t: &TreeNode, value: f64, required: f64, rho: usize) {
        self.pairs += 1;
        let margin = value - required;
        if margin < 0.0 {
            self.failures += 1;
        }
        if margin < self.min_margin {
            self.min_margin = margin;
            self.worst = Some((s.to_string(), t.to_string()));
        }
        self.min_value_over_rho = self.min_value_over_rho.min(value / rho as f64);
    }

    pub fn merge(&mut self, other: &WitnessStats) {
        self.pairs += other.pairs;
        self.failures += other.failures;
        if other.min_margin < self.min_margin {
            self.min_margin = other.min_margin;
            self.worst = other.worst.clone();
        }
        self.min_value_over_rho = self.min_value_over_rho.min(other.min_value_over_rho);
    }

    pub fn holds(&self) -> bool {
        self.failures == 0
    }
}

/// Orders a distinct pair so that the first node is at least as far from
/// the common ancestor as the second; returns `(s, s', u, d, d')`.
pub(crate) fn orient<'a>(
    a: &'a TreeNode,
    b: &'a TreeNode,
) -> (&'a TreeNode, &'a TreeNode, TreeNode, usize, usize) {
    let u = gca(a, b);
    let (da, db) = (a.len() - u.len(), b.len() - u.len());
    if da >= db {
        (a, b, u, da, db)
    } else {
        (b, a, u, db, da)
    }
}

/// Pairing checks for the two single-system maps, over all pairs:
/// `⟨y*_s, F(s) - F(s')⟩ ≥ d/4` and `⟨x_v, G(s) - G(s')⟩ ≥ d/4`, where `s`
/// is the side farther from the common ancestor `u`, `d = |s| - |u|` and
/// `v` is the successor of `u` toward `s`.
pub fn single_system_witnesses<T: Real>(
    system: &BiorthSystem<T>,
    primal: &EmbeddingMap<T>,
    dual: &EmbeddingMap<T>,
) -> Result<(WitnessStats, WitnessStats)> {
    let nodes = system.nodes();
    let mut fs = WitnessStats::default();
    let mut gs = WitnessStats::default();
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let (s, t, u, d, _) = orient(&nodes[i], &nodes[j]);
            let r = rho(s, t);
            let required = d as f64 / 4.0;

            let y = system.path_sum(s)?;
            let df = primal.evaluate(s)?.sub(primal.evaluate(t)?);
            let value = pair_vectors(&y, &df).to_f64_lossy();
            fs.record(s, t, value, required, r);

            let v = s.prefix(u.len() + 1);
            let dg = dual.evaluate(s)?.sub(dual.evaluate(t)?);
            let value = pair_vectors(system.vector(&v)?, &dg).to_f64_lossy();
            gs.record(s, t, value, required, r);
        }
    }
    Ok((fs, gs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::norm;

    fn node(p: &[u32]) -> TreeNode {
        TreeNode::new(p.to_vec()).unwrap()
    }

    #[test]
    fn canonical_l1_is_isometric() {
        let tree = HyperbolicTree::integer(3, 2).unwrap();
        let sys = BiorthSystem::<f64>::canonical(&tree);
        let f = embed_l1(&sys).unwrap();
        assert!(f.evaluate(&TreeNode::root()).unwrap().is_zero());
        for s in f.nodes() {
            for t in f.nodes() {
                let d = norm(&f.evaluate(s).unwrap().sub(f.evaluate(t).unwrap()), f.target()).unwrap();
                assert_eq!(d, rho(s, t) as f64);
            }
        }
    }

    #[test]
    fn canonical_dual_steps() {
        let tree = HyperbolicTree::integer(3, 2).unwrap();
        let sys = BiorthSystem::<f64>::canonical(&tree);
        let g = embed_dual(&sys).unwrap();
        let root = g.evaluate(&TreeNode::root()).unwrap();
        assert_eq!(root, &Vector::unit(Key::node(&TreeNode::root())));
        for s in g.nodes().iter().filter(|s| !s.is_root()) {
            let step = g.evaluate(s).unwrap().sub(g.evaluate(&s.parent().unwrap()).unwrap());
            assert_eq!(norm(&step, g.target()).unwrap(), 1.0);
        }
    }

    #[test]
    fn witnesses_on_perturbed_system() {
        let tree = HyperbolicTree::integer(3, 2).unwrap();
        let sys = BiorthSystem::<f64>::perturbed(&tree, 1.0 / 216.0, 4).unwrap();
        let (fs, gs) =
            single_system_witnesses(&sys, &embed_l1(&sys).unwrap(), &embed_dual(&sys).unwrap()).unwrap();
        assert!(fs.holds() && gs.holds());
        assert!(fs.min_value_over_rho >= 0.125);
        assert!(gs.min_value_over_rho >= 0.125);
    }

    #[test]
    fn csv_round_trip() {
        let tree = HyperbolicTree::integer(2, 3).unwrap();
        let sys = BiorthSystem::<f64>::perturbed(&tree, 0.01, 9).unwrap();
        let g = embed_dual(&sys).unwrap();
        let csv = g.to_csv();
        let side: Sidecar<f64> = serde_json::from_str(&serde_json::to_string(&g.sidecar()).unwrap()).unwrap();
        let back = EmbeddingMap::from_csv(&csv, side).unwrap();
        assert_eq!(back, g);
        assert!(back.evaluate(&node(&[4])).is_err());
    }
}
