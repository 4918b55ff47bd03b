//! Almost-biorthogonal systems `(x_s, x*_s)` indexed by a finite tree, and
//! leveled families of them.
//!
//! Vectors live in `ℓ1` over node keys and functionals in `ℓ∞`, so that
//! `⟨x*_s, x_s⟩` is the coordinate pairing. The canonical system is the unit
//! vector basis; perturbed systems add small seeded off-diagonal entries to
//! both sides while keeping every quantitative requirement:
//!
//! * `‖x_s‖ ≤ 1`
//! * `‖x*_s‖ ≥ 1` for `s ≠ ∅`
//! * `⟨x*_s, x_s⟩ ≥ ‖x*_s‖ / 3`
//! * `|⟨x*_s, x_t⟩| < δ` for `s ≠ t`
//! * `‖Σ_{t≤s} x*_t‖ ≤ 3`

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::{derive_seed, rng, Real};
use crate::spaces::{norm, Key, LinearFunctional, SpaceModel, Vector};
use crate::tree::{segment_end, HyperbolicTree, TreeNode};

/// Off-diagonal entries drawn per vector and per functional.
pub const DEFAULT_FANOUT: usize = 8;

/// Largest level tree a leveled family will build.
pub const MAX_LEVEL_NODES: u64 = 4_000_000;

/// Declared bound on the path-sum functionals `y*_s`.
pub const PATH_SUM_BOUND: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BiorthSystem<T> {
    tree: HyperbolicTree,
    level: Option<usize>,
    nodes: Vec<TreeNode>,
    vectors: Vec<Vector<T>>,
    functionals: Vec<LinearFunctional<T>>,
    delta: T,
    seed: Option<u64>,
    index: HashMap<TreeNode, usize>,
}

impl<T: Real> BiorthSystem<T> {
    /// Unit vectors `e_s` and coordinate functionals `e*_s`.
    pub fn canonical(tree: &HyperbolicTree) -> Self {
        Self::canonical_at(tree, None)
    }

    /// Canonical system whose keys carry a level tag.
    pub fn canonical_at(tree: &HyperbolicTree, level: Option<usize>) -> Self {
        let nodes = tree.enumerate();
        let key = |s: &TreeNode| match level {
            Some(l) => Key::tagged(l, s),
            None => Key::node(s),
        };
        let vectors = nodes.iter().map(|s| Vector::unit(key(s))).collect();
        let functionals = nodes
            .iter()
            .map(|s| LinearFunctional::coordinate(key(s)))
            .collect();
        let index = nodes.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        BiorthSystem {
            tree: tree.clone(),
            level,
            nodes,
            vectors,
            functionals,
            delta: T::zero(),
            seed: None,
            index,
        }
    }

    /// Canonical system with seeded off-diagonal entries of size `O(δ)`.
    pub fn perturbed(tree: &HyperbolicTree, delta: T, seed: u64) -> Result<Self> {
        if !(delta > T::zero() && delta < T::one()) {
            return Err(Error::InvalidDelta(delta.to_f64_lossy()));
        }
        tree.ensure_at_most(MAX_LEVEL_NODES)?;
        let mut systems = vec![Self::canonical(tree)];
        perturb(&mut systems, &[delta], seed, DEFAULT_FANOUT);
        Ok(systems.pop().expect("one system"))
    }

    pub fn tree(&self) -> &HyperbolicTree {
        &self.tree
    }

    pub fn level(&self) -> Option<usize> {
        self.level
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Norm of the `x_s` side.
    pub fn space(&self) -> SpaceModel<T> {
        SpaceModel::l1()
    }

    /// Norm of the functional side.
    pub fn dual_space(&self) -> SpaceModel<T> {
        SpaceModel::linf()
    }

    pub fn dual_bound(&self) -> T {
        T::lit(PATH_SUM_BOUND)
    }

    pub fn key(&self, s: &TreeNode) -> Key {
        match self.level {
            Some(l) => Key::tagged(l, s),
            None => Key::node(s),
        }
    }

    pub fn position(&self, s: &TreeNode) -> Result<usize> {
        self.index
            .get(s)
            .copied()
            .ok_or_else(|| Error::UnknownNode(s.clone()))
    }

    pub fn contains(&self, s: &TreeNode) -> bool {
        self.index.contains_key(s)
    }

    /// `x_s`.
    pub fn vector(&self, s: &TreeNode) -> Result<&Vector<T>> {
        Ok(&self.vectors[self.position(s)?])
    }

    /// `x*_s`.
    pub fn functional(&self, s: &TreeNode) -> Result<&LinearFunctional<T>> {
        Ok(&self.functionals[self.position(s)?])
    }

    pub fn vectors(&self) -> &[Vector<T>] {
        &self.vectors
    }

    pub fn functionals(&self) -> &[LinearFunctional<T>] {
        &self.functionals
    }

    /// `y*_s = Σ_{t≤s} x*_t`, as an entry vector.
    pub fn path_sum(&self, s: &TreeNode) -> Result<Vector<T>> {
        let mut out = Vector::zero();
        for t in s.ancestors() {
            out.axpy(T::one(), &self.functional(&t)?.entries);
        }
        Ok(out)
    }

    /// `Σ_{∅<t≤s} x_t`.
    pub fn vector_path_sum(&self, s: &TreeNode) -> Result<Vector<T>> {
        let mut out = Vector::zero();
        for t in s.ancestors().filter(|t| !t.is_root()) {
            out.axpy(T::one(), self.vector(&t)?);
        }
        Ok(out)
    }

    /// Runs the five checks exhaustively over all nodes and pairs.
    pub fn check_invariants(&self) -> Result<InvariantReport> {
        check_family(std::slice::from_ref(self))
    }
}

/// Outcome of an exhaustive invariant run. Cross-talk is compared against
/// the delta of the functional's level; a zero delta demands exact zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub nodes: usize,
    pub max_vector_norm: f64,
    pub min_functional_norm: f64,
    pub min_diagonal_ratio: f64,
    pub max_cross_talk: f64,
    /// Largest `|⟨x*_{i,s}, x_{j,t}⟩| / δ_i` over levels with positive delta.
    pub max_cross_talk_ratio: f64,
    pub max_path_sum_norm: f64,
    pub tolerance: f64,
    pub violations: Vec<String>,
}

impl InvariantReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_family<T: Real>(levels: &[BiorthSystem<T>]) -> Result<InvariantReport> {
    let tol = T::epsilon() * T::lit(64.0);
    let l1 = SpaceModel::<T>::l1();
    let linf = SpaceModel::<T>::linf();
    let mut report = InvariantReport {
        nodes: 0,
        max_vector_norm: 0.0,
        min_functional_norm: f64::INFINITY,
        min_diagonal_ratio: f64::INFINITY,
        max_cross_talk: 0.0,
        max_cross_talk_ratio: 0.0,
        max_path_sum_norm: 0.0,
        tolerance: tol.to_f64_lossy(),
        violations: Vec::new(),
    };
    let third = T::lit(1.0 / 3.0);
    let bound = T::lit(PATH_SUM_BOUND);

    // Inverted index over vector supports: key -> (level, node position, value).
    let mut support: HashMap<&Key, Vec<(usize, usize, T)>> = HashMap::new();
    for (li, sys) in levels.iter().enumerate() {
        for (pos, v) in sys.vectors.iter().enumerate() {
            for (k, &x) in v.iter() {
                support.entry(k).or_default().push((li, pos, x));
            }
        }
    }

    for (li, sys) in levels.iter().enumerate() {
        report.nodes += sys.nodes.len();
        let tag = |s: &TreeNode| match sys.level {
            Some(l) => format!("level {l} node {s}"),
            None => format!("node {s}"),
        };
        for (pos, s) in sys.nodes.iter().enumerate() {
            let v = &sys.vectors[pos];
            let f = &sys.functionals[pos];
            let vn = norm(v, &l1)?;
            report.max_vector_norm = report.max_vector_norm.max(vn.to_f64_lossy());
            if vn > T::one() + tol {
                report.violations.push(format!("‖x‖ = {vn} > 1 at {}", tag(s)));
            }
            let fnorm = norm(&f.entries, &linf)?;
            if !s.is_root() {
                report.min_functional_norm = report.min_functional_norm.min(fnorm.to_f64_lossy());
                if fnorm < T::one() - tol {
                    report.violations.push(format!("‖x*‖ = {fnorm} < 1 at {}", tag(s)));
                }
            }
            let diag = f.apply(v);
            if fnorm > T::zero() {
                report.min_diagonal_ratio = report.min_diagonal_ratio.min((diag / fnorm).to_f64_lossy());
            }
            if diag < third * fnorm - tol {
                report.violations.push(format!("⟨x*, x⟩ = {diag} < ‖x*‖/3 at {}", tag(s)));
            }
            let ps = norm(&sys.path_sum(s)?, &linf)?;
            report.max_path_sum_norm = report.max_path_sum_norm.max(ps.to_f64_lossy());
            if ps > bound + tol {
                report.violations.push(format!("‖y*‖ = {ps} > 3 at {}", tag(s)));
            }

            // Every pairing not reached through the index is exactly zero.
            let mut cross: HashMap<(usize, usize), T> = HashMap::new();
            for (k, &c) in f.entries.iter() {
                if let Some(list) = support.get(k) {
                    for &(lj, pj, x) in list {
                        if lj == li && pj == pos {
                            continue;
                        }
                        *cross.entry((lj, pj)).or_insert(T::zero()) += c * x;
                    }
                }
            }
            for (&(lj, pj), &val) in &cross {
                let a = val.abs();
                report.max_cross_talk = report.max_cross_talk.max(a.to_f64_lossy());
                let ok = if sys.delta > T::zero() {
                    report.max_cross_talk_ratio =
                        report.max_cross_talk_ratio.max((a / sys.delta).to_f64_lossy());
                    a < sys.delta
                } else {
                    a == T::zero()
                };
                if !ok {
                    report.violations.push(format!(
                        "|⟨x*, x⟩| = {a} not below delta {} between {} and level {:?} node {}",
                        sys.delta,
                        tag(s),
                        levels[lj].level,
                        levels[lj].nodes[pj]
                    ));
                }
            }
        }
    }
    Ok(report)
}

/// Adds seeded off-diagonal entries to every level with positive delta.
///
/// Functionals of level `i` get up to `fanout` entries of size below
/// `δ_i / (2n)` (`n` = total node count). Vectors get up to `fanout` entries
/// of total size below `δ_min / 4`, placed only on keys of perturbed levels,
/// with the diagonal lowered so that `‖x‖₁ = 1`. The random draws do not
/// depend on the deltas, so entries scale linearly as deltas shrink.
fn perturb<T: Real>(levels: &mut [BiorthSystem<T>], deltas: &[T], seed: u64, fanout: usize) {
    let keys: Vec<(usize, Key)> = levels
        .iter()
        .enumerate()
        .flat_map(|(li, sys)| sys.nodes.iter().map(move |s| (li, sys.key(s))))
        .collect();
    let eligible: Vec<&Key> = keys
        .iter()
        .filter(|(li, _)| deltas[*li] > T::zero())
        .map(|(_, k)| k)
        .collect();
    let n_total = T::from_usize_lossy(keys.len());
    let delta_min = deltas
        .iter()
        .copied()
        .filter(|d| *d > T::zero())
        .fold(T::infinity(), T::min);
    if !delta_min.is_finite() {
        return;
    }
    let vector_scale = delta_min / T::lit(4.0 * fanout.max(1) as f64);

    for (li, sys) in levels.iter_mut().enumerate() {
        let delta = deltas[li];
        sys.delta = delta;
        sys.seed = Some(seed);
        let functional_scale = delta / (T::lit(2.0) * n_total);
        for pos in 0..sys.nodes.len() {
            let own = sys.key(&sys.nodes[pos]);
            let stream = ((li as u64) << 40) | pos as u64;
            let mut r = rng(derive_seed(seed, stream));

            let mut f = Vector::unit(own.clone());
            for _ in 0..fanout {
                let (_, k) = &keys[r.gen_range(0..keys.len())];
                let u: f64 = r.gen_range(-1.0..1.0);
                if *k != own && f.get(k) == T::zero() && delta > T::zero() {
                    f.set(k.clone(), T::lit(u) * functional_scale);
                }
            }

            let mut v = Vector::zero();
            let mut mass = T::zero();
            if !eligible.is_empty() {
                for _ in 0..fanout {
                    let k = eligible[r.gen_range(0..eligible.len())];
                    let u: f64 = r.gen_range(-1.0..1.0);
                    if *k != own && v.get(k) == T::zero() {
                        let x = T::lit(u) * vector_scale;
                        mass += x.abs();
                        v.set(k.clone(), x);
                    }
                }
            }
            v.set(own.clone(), T::one() - mass);
            sys.vectors[pos] = v;
            sys.functionals[pos] = LinearFunctional::new(f);
        }
    }
}

/// How level trees are sized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SystemKind {
    /// Level `i` lives on `T_{2^i}`.
    Gluing,
    /// Level `i ≥ 1` lives on `T_{K^i + 1}` with `b^{N_{i-1}}` root children;
    /// level 0 on `T_1`.
    Segmented { k: usize },
}

/// `δ_i = 2^{-2i}/200` (gluing) or `δ_i = K^{-2(i+1)}/200` (segmented).
pub fn default_schedule<T: Real>(kind: SystemKind, levels: usize) -> Vec<T> {
    (0..levels)
        .map(|i| match kind {
            SystemKind::Gluing => T::lit(4f64.powi(-(i as i32)) / 200.0),
            SystemKind::Segmented { k } => {
                T::lit((k as f64).powi(-2 * (i as i32 + 1)) / 200.0)
            }
        })
        .collect()
}

/// Checks a delta schedule.
///
/// The all-zero schedule is exact and always accepted. Otherwise every entry
/// lies in `[0, 1)`, the sequence is non-increasing, and the smallness
/// condition of the kind holds:
///
/// * gluing, window `l`: `2·2^{2l+2}(δ_{l+1} + δ_{l+2}) ≤ 1/12`
/// * segmented, window `n ≥ 1`:
///   `δ_{n-1}(K^{n-1} + K^n + K^{2n-2} + K^n(K^n+1)) ≤ K^{n-1}/12`
pub fn validate_schedule<T: Real>(kind: SystemKind, schedule: &[T]) -> Result<()> {
    if schedule.iter().all(|d| *d == T::zero()) {
        return Ok(());
    }
    for (i, d) in schedule.iter().enumerate() {
        if !(*d >= T::zero() && *d < T::one()) {
            return Err(Error::InvalidSchedule(format!("delta_{i} = {d} outside [0, 1)")));
        }
    }
    let at = |i: usize| schedule.get(i).map_or(0.0, |d| d.to_f64_lossy());
    match kind {
        SystemKind::Gluing => {
            for l in 0..schedule.len().saturating_sub(1) {
                let lhs = 2.0 * 4f64.powi(l as i32 + 1) * (at(l + 1) + at(l + 2));
                let rhs = 1.0 / 12.0;
                if lhs > rhs {
                    return Err(Error::ScheduleRejected { window: l, levels: (l + 1, l + 2), lhs, rhs });
                }
            }
        }
        SystemKind::Segmented { k } => {
            if k < 2 {
                return Err(Error::InvalidParameter(format!("segment base K = {k} < 2")));
            }
            let k = k as f64;
            for n in 1..=schedule.len() {
                let kn1 = k.powi(n as i32 - 1);
                let kn = k.powi(n as i32);
                let lhs = at(n - 1) * (kn1 + kn + kn1 * kn1 + kn * (kn + 1.0));
                let rhs = kn1 / 12.0;
                if lhs > rhs {
                    return Err(Error::ScheduleRejected { window: n, levels: (n - 1, n), lhs, rhs });
                }
            }
        }
    }
    for i in 1..schedule.len() {
        if schedule[i] > schedule[i - 1] {
            return Err(Error::InvalidSchedule(format!(
                "delta_{i} = {} exceeds delta_{} = {}",
                schedule[i],
                i - 1,
                schedule[i - 1]
            )));
        }
    }
    Ok(())
}

/// One system per level with keys tagged by level; cross-talk between any
/// two distinct `(i, s)`, `(j, t)` stays below `δ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeveledSystems<T> {
    kind: SystemKind,
    branching: u32,
    depth_cap: Option<usize>,
    schedule: Vec<T>,
    seed: u64,
    levels: Vec<BiorthSystem<T>>,
}

/// Shape of the level-`i` tree for a family of the given kind, optionally
/// trimmed to what nodes of length `≤ cap` in the base tree can reach.
pub fn level_tree(kind: SystemKind, level: usize, branching: u32, cap: Option<usize>) -> Result<HyperbolicTree> {
    match kind {
        SystemKind::Gluing => {
            let full = 1usize.checked_shl(level as u32).filter(|d| *d > 0).ok_or_else(|| {
                Error::CapacityExhausted {
                    what: format!("depth of level {level}"),
                    required: level as u64,
                    available: 63,
                }
            })?;
            HyperbolicTree::integer(cap.map_or(full, |c| c.min(full)), branching)
        }
        SystemKind::Segmented { k } => {
            if k < 2 {
                return Err(Error::InvalidParameter(format!("segment base K = {k} < 2")));
            }
            if level == 0 {
                return HyperbolicTree::integer(1, branching);
            }
            let width = k.checked_pow(level as u32).ok_or_else(|| Error::CapacityExhausted {
                what: format!("segment width at level {level}"),
                required: u64::MAX,
                available: usize::MAX as u64,
            })?;
            let prev_end = segment_end(k, level - 1);
            let roots = branching.checked_pow(prev_end as u32).ok_or_else(|| Error::CapacityExhausted {
                what: format!("root branching b^{prev_end} at level {level}"),
                required: u64::MAX,
                available: u32::MAX as u64,
            })?;
            let full = width + 1;
            let depth = match cap {
                Some(c) if c > prev_end => full.min(c - prev_end + 1),
                Some(_) => 1,
                None => full,
            };
            HyperbolicTree::integer(depth, branching)?.with_root_branching(roots)
        }
    }
}

impl<T: Real> LeveledSystems<T> {
    /// Builds levels `0..=max_level`. A schedule of all zeros gives exact
    /// canonical levels.
    pub fn generate(
        max_level: usize,
        kind: SystemKind,
        branching: u32,
        schedule: &[T],
        depth_cap: Option<usize>,
        seed: u64,
    ) -> Result<Self> {
        if schedule.len() < max_level + 1 {
            return Err(Error::InvalidSchedule(format!(
                "{} deltas for {} levels",
                schedule.len(),
                max_level + 1
            )));
        }
        let schedule = schedule[..=max_level].to_vec();
        validate_schedule(kind, &schedule)?;
        let mut levels = Vec::with_capacity(max_level + 1);
        for i in 0..=max_level {
            let tree = level_tree(kind, i, branching, depth_cap)?;
            tree.ensure_at_most(MAX_LEVEL_NODES)?;
            levels.push(BiorthSystem::canonical_at(&tree, Some(i)));
        }
        perturb(&mut levels, &schedule, seed, DEFAULT_FANOUT);
        for sys in &mut levels {
            sys.seed = Some(seed);
        }
        Ok(LeveledSystems {
            kind,
            branching,
            depth_cap,
            schedule,
            seed,
            levels,
        })
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn branching(&self) -> u32 {
        self.branching
    }

    pub fn depth_cap(&self) -> Option<usize> {
        self.depth_cap
    }

    pub fn schedule(&self) -> &[T] {
        &self.schedule
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[BiorthSystem<T>] {
        &self.levels
    }

    pub fn level(&self, i: usize) -> Result<&BiorthSystem<T>> {
        self.levels.get(i).ok_or(Error::DepthExceedsLevels {
            depth: 0,
            required_level: i,
            available: self.max_level(),
        })
    }

    /// Per-level checks plus cross-level cross-talk, exhaustively.
    pub fn check_invariants(&self) -> Result<InvariantReport> {
        check_family(&self.levels)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct NodeEntry<T> {
    node: TreeNode,
    vector: Vector<T>,
    functional: Vector<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct SystemDump<T> {
    tree: HyperbolicTree,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    level: Option<usize>,
    delta: T,
    seed: Option<u64>,
    dual_bound: T,
    nodes: Vec<NodeEntry<T>>,
}

impl<T: Real> Serialize for BiorthSystem<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SystemDump {
            tree: self.tree.clone(),
            level: self.level,
            delta: self.delta,
            seed: self.seed,
            dual_bound: self.dual_bound(),
            nodes: self
                .nodes
                .iter()
                .zip(&self.vectors)
                .zip(&self.functionals)
                .map(|((s, v), f)| NodeEntry {
                    node: s.clone(),
                    vector: v.clone(),
                    functional: f.entries.clone(),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: Real> Deserialize<'de> for BiorthSystem<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let dump = SystemDump::<T>::deserialize(deserializer)?;
        let expected = dump.tree.enumerate();
        let nodes: Vec<TreeNode> = dump.nodes.iter().map(|e| e.node.clone()).collect();
        if nodes != expected {
            return Err(serde::de::Error::custom("node list does not match the declared tree"));
        }
        let index = nodes.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let (vectors, functionals) = dump
            .nodes
            .into_iter()
            .map(|e| (e.vector, LinearFunctional::new(e.functional)))
            .unzip();
        Ok(BiorthSystem {
            tree: dump.tree,
            level: dump.level,
            nodes,
            vectors,
            functionals,
            delta: dump.delta,
            seed: dump.seed,
            index,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct LeveledDump<T> {
    #[serde(flatten)]
    kind: SystemKind,
    branching: u32,
    depth_cap: Option<usize>,
    schedule: Vec<T>,
    seed: u64,
    levels: Vec<BiorthSystem<T>>,
}

impl<T: Real> Serialize for LeveledSystems<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        LeveledDump {
            kind: self.kind,
            branching: self.branching,
            depth_cap: self.depth_cap,
            schedule: self.schedule.clone(),
            seed: self.seed,
            levels: self.levels.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: Real> Deserialize<'de> for LeveledSystems<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let d = LeveledDump::<T>::deserialize(deserializer)?;
        if d.levels.is_empty() || d.levels.len() != d.schedule.len() {
            return Err(serde::de::Error::custom("schedule and level count disagree"));
        }
        Ok(LeveledSystems {
            kind: d.kind,
            branching: d.branching,
            depth_cap: d.depth_cap,
            schedule: d.schedule,
            seed: d.seed,
            levels: d.levels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::pair;

    fn node(p: &[u32]) -> TreeNode {
        TreeNode::new(p.to_vec()).unwrap()
    }

    #[test]
    fn canonical_pairings() {
        let tree = HyperbolicTree::integer(1, 2).unwrap();
        let sys = BiorthSystem::<f64>::canonical(&tree);
        let f = sys.functional(&node(&[1])).unwrap();
        assert_eq!(pair(f, sys.vector(&node(&[1])).unwrap()), 1.0);
        assert_eq!(pair(f, sys.vector(&node(&[2])).unwrap()), 0.0);
        let tree = HyperbolicTree::integer(2, 2).unwrap();
        let sys = BiorthSystem::<f64>::canonical(&tree);
        let y = sys.path_sum(&node(&[1, 1])).unwrap();
        assert_eq!(y.max_abs(), 1.0);
        assert_eq!(y.support_len(), 3);
        let r = sys.check_invariants().unwrap();
        assert!(r.holds());
        assert_eq!(r.min_diagonal_ratio, 1.0);
    }

    #[test]
    fn perturbed_is_valid_and_reproducible() {
        let tree = HyperbolicTree::integer(3, 2).unwrap();
        let a = BiorthSystem::<f64>::perturbed(&tree, 1.0 / 216.0, 7).unwrap();
        let b = BiorthSystem::<f64>::perturbed(&tree, 1.0 / 216.0, 7).unwrap();
        assert_eq!(a, b);
        let r = a.check_invariants().unwrap();
        assert!(r.holds(), "{:?}", r.violations);
        assert!(r.max_cross_talk > 0.0);
        assert!(BiorthSystem::<f64>::perturbed(&tree, 0.0, 7).is_err());
        assert!(BiorthSystem::<f64>::perturbed(&tree, 1.0, 7).is_err());
    }

    #[test]
    fn perturbation_scales_with_delta() {
        let tree = HyperbolicTree::integer(2, 3).unwrap();
        let canon = BiorthSystem::<f64>::canonical(&tree);
        let mut last = f64::INFINITY;
        for d in [1e-2, 1e-4, 1e-6, 1e-8] {
            let p = BiorthSystem::<f64>::perturbed(&tree, d, 3).unwrap();
            let gap = p
                .vectors()
                .iter()
                .zip(canon.vectors())
                .map(|(a, b)| a.sub(b).max_abs())
                .fold(0.0, f64::max);
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 1e-8);
    }

    #[test]
    fn schedules() {
        let d = default_schedule::<f64>(SystemKind::Gluing, 12);
        assert!(validate_schedule(SystemKind::Gluing, &d).is_ok());
        let flat = vec![0.1f64; 6];
        match validate_schedule(SystemKind::Gluing, &flat) {
            Err(Error::ScheduleRejected { window, levels, .. }) => {
                assert_eq!(window, 0);
                assert_eq!(levels, (1, 2));
            }
            other => panic!("{other:?}"),
        }
        assert!(validate_schedule(SystemKind::Gluing, &[0.0f64; 6]).is_ok());
        let seg = SystemKind::Segmented { k: 2 };
        assert!(validate_schedule(seg, &default_schedule::<f64>(seg, 8)).is_ok());
        assert!(validate_schedule(seg, &[0.1f64, 0.01]).is_err());
        assert!(validate_schedule(SystemKind::Gluing, &[1e-4f64, 1e-3]).is_err());
    }

    #[test]
    fn leveled_cross_talk() {
        let d = default_schedule::<f64>(SystemKind::Gluing, 4);
        let fam = LeveledSystems::generate(3, SystemKind::Gluing, 2, &d, None, 11).unwrap();
        assert_eq!(fam.level(3).unwrap().tree().depth, 8);
        let r = fam.check_invariants().unwrap();
        assert!(r.holds(), "{:?}", r.violations);
        assert!(r.max_cross_talk_ratio < 1.0);
    }

    #[test]
    fn segmented_level_shapes() {
        let seg = SystemKind::Segmented { k: 2 };
        let t1 = level_tree(seg, 1, 2, None).unwrap();
        assert_eq!((t1.depth, t1.branching_at(0)), (3, 2));
        let t2 = level_tree(seg, 2, 2, Some(7)).unwrap();
        assert_eq!((t2.depth, t2.branching_at(0)), (5, 8));
        let t3 = level_tree(seg, 3, 2, None).unwrap();
        assert_eq!((t3.depth, t3.branching_at(0)), (9, 128));
    }

    #[test]
    fn dumps_round_trip() {
        let tree = HyperbolicTree::integer(2, 2).unwrap();
        let sys = BiorthSystem::<f64>::perturbed(&tree, 0.01, 5).unwrap();
        let text = serde_json::to_string(&sys).unwrap();
        let back: BiorthSystem<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, sys);
        let d = default_schedule::<f64>(SystemKind::Gluing, 3);
        let fam = LeveledSystems::generate(2, SystemKind::Gluing, 2, &d, None, 1).unwrap();
        let text = serde_json::to_string(&fam).unwrap();
        let back: LeveledSystems<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, fam);
    }
}
