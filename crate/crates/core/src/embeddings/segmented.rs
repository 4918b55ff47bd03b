//! The segmented construction into `c0`-like targets.
//!
//! A node `s = s_0 ⌢ … ⌢ s_n` with `|s_j| = K^j` (`j < n`) is mapped to
//!
//! ```text
//! G(s) = y_{s_0,0} + Σ_{j=1}^{n} Σ_{(r_{j-1}) ≤ t ≤ (r_{j-1}) ⌢ s_j} y_{t,j}
//! ```
//!
//! where `r_{j-1}` is the one-based rank of `s_0 ⌢ … ⌢ s_{j-1}` among the
//! terminal nodes of `T_{N_{j-1}}`, and `y_{t,j}` is the level-`j` path sum
//! `y**_{t,j} = Σ_{u≤t} x**_{j,u}` plus a seeded perturbation. The
//! perturbation only touches coordinates `(j', t')` with `j' ≤ j` whose first
//! branch comes no later than the branch pinned by `t`, and its pairing with
//! any such `x*_{t',j'}` stays below `η_j`.
//!
//! In this coordinate model the functional side of each level system plays
//! `x**` and the vector side plays `x*`.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Construction, EmbeddingMap, Provenance, WitnessStats};
use crate::error::{Error, Result};
use crate::scalar::{derive_seed, rng, Real};
use crate::spaces::{norm, pair_vectors, Key, SpaceModel, Vector};
use crate::systems::{level_tree, LeveledSystems, SystemKind, DEFAULT_FANOUT};
use crate::tree::{gca, rho, segment_decompose, segment_end, segment_index, HyperbolicTree, TreeNode};

/// Inverse constant asserted for every pair regardless of case.
pub const ENVELOPE: f64 = 2000.0;

/// Perturbation sizes `η_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "eta", rename_all = "lowercase")]
pub enum EtaSchedule {
    /// `η_j = δ_j`.
    Delta,
    Zero,
    Explicit { values: Vec<f64> },
}

impl EtaSchedule {
    fn resolve<T: Real>(&self, levels: &LeveledSystems<T>) -> Result<Vec<T>> {
        let n = levels.max_level() + 1;
        let out: Vec<T> = match self {
            EtaSchedule::Delta => levels.schedule().to_vec(),
            EtaSchedule::Zero => vec![T::zero(); n],
            EtaSchedule::Explicit { values } => {
                if values.len() < n {
                    return Err(Error::InvalidSchedule(format!("{} etas for {n} levels", values.len())));
                }
                values[..n].iter().map(|&x| T::lit(x)).collect()
            }
        };
        if out.iter().any(|x| !(*x >= T::zero() && *x < T::one())) {
            return Err(Error::InvalidSchedule("eta outside [0, 1)".into()));
        }
        Ok(out)
    }
}

fn segment_start(k: usize, j: usize) -> usize {
    if j == 0 {
        0
    } else {
        segment_end(k, j - 1)
    }
}

/// Rank bookkeeping shared by the map and the pair analysis.
pub struct SegmentedLayout<'a, T> {
    levels: &'a LeveledSystems<T>,
    k: usize,
    full: Vec<HyperbolicTree>,
    prefix: Vec<HyperbolicTree>,
    /// Per level: nodes sorted by first-branch rank.
    by_rank: Vec<Vec<(u64, Key)>>,
}

impl<'a, T: Real> SegmentedLayout<'a, T> {
    pub fn new(levels: &'a LeveledSystems<T>) -> Result<Self> {
        let k = match levels.kind() {
            SystemKind::Segmented { k } => k,
            SystemKind::Gluing => {
                return Err(Error::InvalidParameter("segmented map needs a segmented family".into()))
            }
        };
        let b = levels.branching();
        let mut full = Vec::new();
        let mut prefix = Vec::new();
        let mut by_rank = Vec::new();
        for j in 0..=levels.max_level() {
            let tree = level_tree(levels.kind(), j, b, None)?;
            let sys = levels.level(j)?;
            let mut ranks = Vec::with_capacity(sys.nodes().len());
            for s in sys.nodes() {
                let r = tree.first_branch_index(s).ok_or_else(|| overflow(j))?;
                ranks.push((r, sys.key(s)));
            }
            ranks.sort();
            by_rank.push(ranks);
            full.push(tree);
            prefix.push(HyperbolicTree::integer(segment_end(k, j), b)?);
        }
        Ok(SegmentedLayout { levels, k, full, prefix, by_rank })
    }

    pub fn segment_base(&self) -> usize {
        self.k
    }

    /// One-based rank `r_j` of `s_0 ⌢ … ⌢ s_j` (a prefix of length `N_j`).
    fn r(&self, j: usize, s: &TreeNode) -> Result<u32> {
        let head = s.prefix(segment_end(self.k, j));
        let idx = self.prefix[j].terminal_index(&head).ok_or_else(|| overflow(j))?;
        u32::try_from(idx + 1).map_err(|_| overflow(j))
    }

    /// Level-`j` tree node for the part of `s` in segment `j` up to length `upto`.
    fn level_node(&self, j: usize, s: &TreeNode, upto: usize) -> Result<TreeNode> {
        let lo = segment_start(self.k, j);
        let part = &s.path()[lo..upto];
        if j == 0 {
            return TreeNode::new(part.to_vec());
        }
        let mut path = Vec::with_capacity(part.len() + 1);
        path.push(self.r(j - 1, s)?);
        path.extend_from_slice(part);
        TreeNode::new(path)
    }

    fn rank(&self, j: usize, t: &TreeNode) -> Result<u64> {
        self.full[j].first_branch_index(t).ok_or_else(|| overflow(j))
    }

    /// `(level, node)` terms of `G(s)` in order.
    pub fn terms(&self, s: &TreeNode) -> Result<Vec<(usize, TreeNode)>> {
        if s.is_root() {
            return Ok(Vec::new());
        }
        let segs = segment_decompose(s, self.k)?;
        let mut out = vec![(0, segs[0].clone())];
        for j in 1..segs.len() {
            let lo = segment_start(self.k, j);
            for upto in lo..=lo + segs[j].len() {
                out.push((j, self.level_node(j, s, upto)?));
            }
        }
        Ok(out)
    }

    /// Per level `j' ≤ j`, the largest first-branch rank the approximation
    /// condition covers for the level-`j` node `t`.
    fn pinned_ranks(&self, j: usize, t: &TreeNode) -> Result<Vec<u64>> {
        let mut out = Vec::with_capacity(j + 1);
        if j > 0 {
            let r = *t.path().first().ok_or_else(|| {
                Error::InvalidParameter("level root never appears as a term".into())
            })?;
            let base = self.prefix[j - 1]
                .terminal_at(r as u64 - 1)
                .ok_or_else(|| overflow(j - 1))?;
            for jp in 0..j {
                let hi = segment_end(self.k, jp);
                out.push(self.rank(jp, &self.level_node(jp, &base, hi)?)?);
            }
        }
        out.push(self.rank(j, t)?);
        Ok(out)
    }

    /// Keys `(j', t')` covered by the approximation condition for `(t, j)`.
    fn covered(&self, j: usize, t: &TreeNode) -> Result<Vec<&[(u64, Key)]>> {
        let ranks = self.pinned_ranks(j, t)?;
        Ok(ranks
            .iter()
            .enumerate()
            .map(|(jp, &kmax)| {
                let list = &self.by_rank[jp];
                &list[..list.partition_point(|(r, _)| *r <= kmax)]
            })
            .collect())
    }
}

fn overflow(level: usize) -> Error {
    Error::CapacityExhausted {
        what: format!("branch enumeration at level {level}"),
        required: u64::MAX,
        available: u64::MAX,
    }
}

struct Terms<T> {
    y: HashMap<(usize, TreeNode), Vector<T>>,
    /// Largest `|⟨y** - y, x*_{t',j'}⟩| / η_j` over covered keys.
    max_defect_ratio: f64,
}

fn build_terms<T: Real>(
    layout: &SegmentedLayout<'_, T>,
    nodes: &[TreeNode],
    eta: &[T],
    seed: u64,
) -> Result<Terms<T>> {
    let levels = layout.levels;
    let mut y: HashMap<(usize, TreeNode), Vector<T>> = HashMap::new();
    let mut max_defect_ratio: f64 = 0.0;
    for s in nodes {
        for (j, t) in layout.terms(s)? {
            if y.contains_key(&(j, t.clone())) {
                continue;
            }
            let sys = levels.level(j)?;
            let mut v = sys.path_sum(&t)?;
            if eta[j] > T::zero() {
                let covered = layout.covered(j, &t)?;
                let stream = ((j as u64) << 40) | sys.position(&t)? as u64;
                let mut r = rng(derive_seed(seed, stream));
                let mut p = Vector::zero();
                for _ in 0..DEFAULT_FANOUT {
                    let jp = r.gen_range(0..covered.len());
                    let list = covered[jp];
                    let pick = r.gen_range(0..list.len());
                    let u: f64 = r.gen_range(-1.0..1.0);
                    let key = &list[pick].1;
                    if p.get(key) == T::zero() {
                        p.set(key.clone(), T::lit(0.8 * u) * eta[j]);
                    }
                }
                for list in &covered {
                    for (_, key) in list.iter() {
                        let node = TreeNode::new(key.0[1..].to_vec())?;
                        let x = levels.level(key.0[0] as usize)?.vector(&node)?;
                        let defect = pair_vectors(&p, x).abs() / eta[j];
                        max_defect_ratio = max_defect_ratio.max(defect.to_f64_lossy());
                    }
                }
                v.axpy(T::one(), &p);
            }
            y.insert((j, t), v);
        }
    }
    Ok(Terms { y, max_defect_ratio })
}

/// Builds `G` on `T_D` with `G(∅) = 0`, into `ℓ∞` over level-tagged keys.
pub fn embed_segmented<T: Real>(
    levels: &LeveledSystems<T>,
    depth: usize,
    eta: &EtaSchedule,
    seed: u64,
) -> Result<EmbeddingMap<T>> {
    Ok(segmented_with_defect(levels, depth, eta, seed)?.0)
}

fn segmented_with_defect<T: Real>(
    levels: &LeveledSystems<T>,
    depth: usize,
    eta: &EtaSchedule,
    seed: u64,
) -> Result<(EmbeddingMap<T>, f64)> {
    let layout = SegmentedLayout::new(levels)?;
    let k = layout.k;
    if depth > 0 {
        let need = segment_index(depth, k);
        if need > levels.max_level() {
            return Err(Error::DepthExceedsLevels {
                depth,
                required_level: need,
                available: levels.max_level(),
            });
        }
        for j in 1..=need {
            let want = (k.pow(j as u32) + 1).min(depth - segment_end(k, j - 1) + 1);
            let have = levels.level(j)?.tree().depth;
            if have < want {
                return Err(Error::CapacityExhausted {
                    what: format!("depth of level {j}"),
                    required: want as u64,
                    available: have as u64,
                });
            }
        }
    }
    let eta_values = eta.resolve(levels)?;
    let tree = HyperbolicTree::integer(depth, levels.branching())?;
    let nodes = tree.enumerate();
    let terms = build_terms(&layout, &nodes, &eta_values, seed)?;
    let mut images = Vec::with_capacity(nodes.len());
    for s in &nodes {
        let mut g = Vector::zero();
        for term in layout.terms(s)? {
            g.axpy(T::one(), &terms.y[&term]);
        }
        images.push(g);
    }
    let mut prov = Provenance::new(Construction::Segmented, &tree);
    prov.schedule = Some(levels.schedule().iter().map(|d| d.to_f64_lossy()).collect());
    prov.segment_base = Some(k);
    prov.eta = Some(eta_values.iter().map(|d| d.to_f64_lossy()).collect());
    prov.seed = Some(seed);
    let map = EmbeddingMap::new(tree, images, SpaceModel::linf(), prov, true)?;
    Ok((map, terms.max_defect_ratio))
}

/// Proof case of a pair, by the segment indices `n ≥ m` of the two nodes and
/// `p` of their common ancestor (`p = 0` when the ancestor is the root).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentedCase {
    /// One side is the root.
    Root,
    /// `n ≥ m + 2`.
    A,
    /// `n = m + 1 = p + 1` (or the split is at the start of segment `m`),
    /// the longer side's branch comes first.
    B1,
    /// As `B1`, the shorter side's branch comes first.
    B2,
    /// `n = m + 1`, `p ≤ m - 1`, the longer side's branch comes first.
    C1,
    C2,
    /// `n = m = p`, comparable.
    DComparable,
    /// `n = m = p`, incomparable, `d' ≥ 24 d`.
    DFar,
    /// `n = m = p`, incomparable, `d' < 24 d`.
    DNear,
    /// `n = m`, `p ≤ n - 2`.
    E,
    /// `n = m = p + 1`.
    F,
}

impl SegmentedCase {
    /// Inverse constant `c` in `‖G(s) - G(s')‖ ≥ ρ(s, s') / c`; case F
    /// depends on the measured case-B constant and is filled in later.
    fn inverse_constant(self) -> f64 {
        match self {
            SegmentedCase::B1 => 208.0,
            SegmentedCase::B2 => 1308.0,
            SegmentedCase::C1 => 520.0,
            SegmentedCase::DComparable => 4.0,
            SegmentedCase::DFar => 16.0,
            SegmentedCase::DNear => 100.0,
            _ => ENVELOPE,
        }
    }
}

/// A pair in the orientation its case uses, with the witness functional
/// (a combination of level vectors) and the pairing it must reach.
struct PairPlan<T> {
    case: SegmentedCase,
    s: TreeNode,
    t: TreeNode,
    witness: Option<(Vector<T>, f64)>,
}

impl<'a, T: Real> SegmentedLayout<'a, T> {
    fn x(&self, j: usize, node: &TreeNode) -> Result<&Vector<T>> {
        self.levels.level(j)?.vector(node)
    }

    fn combo(&self, parts: &[(f64, usize, &TreeNode)]) -> Result<Vector<T>> {
        let mut w = Vector::zero();
        for &(c, j, node) in parts {
            w.axpy(T::lit(c), self.x(j, node)?);
        }
        Ok(w)
    }

    /// Classifies a distinct pair.
    pub fn classify(&self, a: &TreeNode, b: &TreeNode) -> Result<SegmentedCase> {
        Ok(self.plan(a, b)?.case)
    }

    fn plan(&self, a: &TreeNode, b: &TreeNode) -> Result<PairPlan<T>> {
        let k = self.k;
        if a.is_root() || b.is_root() {
            return Ok(PairPlan { case: SegmentedCase::Root, s: a.clone(), t: b.clone(), witness: None });
        }
        let (na, nb) = (segment_index(a.len(), k), segment_index(b.len(), k));
        let (s, t) = if na >= nb { (a, b) } else { (b, a) };
        let (n, m) = (na.max(nb), na.min(nb));
        let u = gca(s, t);
        let p = if u.is_root() { 0 } else { segment_index(u.len(), k) };
        let d = s.len() - u.len();
        let dp = t.len() - u.len();
        let kp = |e: usize| k.pow(e as u32) as f64;
        let plan = |case, s: &TreeNode, t: &TreeNode, witness| PairPlan {
            case,
            s: s.clone(),
            t: t.clone(),
            witness,
        };

        if n >= m + 2 {
            let w = self.combo(&[(1.0, n - 1, &self.level_node(n - 1, s, segment_start(k, n - 1))?)])?;
            return Ok(plan(SegmentedCase::A, s, t, Some((w, kp(n - 1) / 4.0))));
        }
        // With `|u| = N_{n-2}` both sides share `r_{n-2}` and split at the
        // first entry of segment `n - 1`, which is the situation of case B.
        let shared_root = n >= 2 && u.len() == segment_end(k, n - 2);
        if n == m + 1 && (p == m || shared_root) {
            let a_len = s.len() - segment_start(k, n);
            let b_len = segment_end(k, n - 1) - u.len();
            let xs = self.level_node(n, s, segment_start(k, n))?;
            let v = (u.len() < segment_end(k, n - 1))
                .then(|| self.level_node(n - 1, s, u.len() + 1))
                .transpose()?;
            let w = (t.len() > u.len())
                .then(|| self.level_node(n - 1, t, u.len() + 1))
                .transpose()?;
            let first = match (&v, &w) {
                (Some(v), Some(w)) => self.rank(n - 1, v)? < self.rank(n - 1, w)?,
                _ => true,
            };
            let mut parts = vec![(1.0, n, &xs)];
            if let Some(v) = &v {
                parts.push((25.0, n - 1, v));
            }
            return Ok(if first {
                let wv = self.combo(&parts)?;
                plan(SegmentedCase::B1, s, t, Some((wv, (a_len + b_len) as f64 / 4.0)))
            } else {
                let w = w.expect("incomparable");
                parts.push((-301.0, n - 1, &w));
                let wv = self.combo(&parts)?;
                plan(SegmentedCase::B2, s, t, Some((wv, (d + dp) as f64 / 4.0)))
            });
        }
        if n == m + 1 {
            let a_len = (s.len() - segment_start(k, n)) as f64;
            let c = (segment_end(k, n - 2) - u.len()) as f64;
            let xs = self.level_node(n, s, segment_start(k, n))?;
            let ys = self.level_node(n - 1, s, segment_start(k, n - 1))?;
            let zs = self.level_node(n - 1, t, segment_start(k, n - 1))?;
            let b = kp(n - 1);
            return Ok(if self.rank(n - 1, &ys)? < self.rank(n - 1, &zs)? {
                let wv = self.combo(&[(1.0, n, &xs), (25.0, n - 1, &ys)])?;
                plan(SegmentedCase::C1, s, t, Some((wv, (a_len + b) / 4.0 - 156.0 * c)))
            } else {
                let wv = self.combo(&[(1.0, n, &xs), (25.0, n - 1, &ys), (-300.0, n - 1, &zs)])?;
                plan(SegmentedCase::C2, s, t, Some((wv, (a_len + b) / 4.0 - 1956.0 * c)))
            });
        }
        // n == m from here on.
        if p == n && u == *t {
            let v = self.level_node(n, s, u.len() + 1)?;
            let wv = self.combo(&[(1.0, n, &v)])?;
            return Ok(plan(SegmentedCase::DComparable, s, t, Some((wv, d as f64 / 4.0))));
        }
        if p == n && u == *s {
            let v = self.level_node(n, t, u.len() + 1)?;
            let wv = self.combo(&[(1.0, n, &v)])?;
            return Ok(plan(SegmentedCase::DComparable, t, s, Some((wv, dp as f64 / 4.0))));
        }
        if p == n {
            let (vs, vt) = (self.level_node(n, s, u.len() + 1)?, self.level_node(n, t, u.len() + 1)?);
            let (s, t, v, d, dp) = if self.rank(n, &vs)? < self.rank(n, &vt)? {
                (s, t, vs, d, dp)
            } else {
                (t, s, vt, dp, d)
            };
            if dp >= 24 * d {
                return Ok(plan(SegmentedCase::DFar, s, t, None));
            }
            let wv = self.combo(&[(1.0, n, &v)])?;
            return Ok(plan(SegmentedCase::DNear, s, t, Some((wv, d as f64 / 4.0))));
        }
        if p + 2 <= n {
            return Ok(plan(SegmentedCase::E, s, t, None));
        }
        Ok(plan(SegmentedCase::F, s, t, None))
    }
}

/// Per-case outcome of the pair analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedCaseStats {
    pub case: SegmentedCase,
    pub pairs: usize,
    pub min_norm_over_rho: f64,
    pub inverse_constant: f64,
    pub norm_failures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessStats>,
}

impl SegmentedCaseStats {
    pub fn holds(&self) -> bool {
        self.norm_failures == 0 && self.witness.as_ref().is_none_or(WitnessStats::holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedReport {
    pub segment_base: usize,
    pub depth: usize,
    pub pairs: usize,
    pub lipschitz: f64,
    pub min_norm_over_rho: f64,
    pub envelope: f64,
    /// Measured case-B constant, clamped to `(0, 1]`.
    pub alpha: Option<f64>,
    /// `M = 6 / α`.
    pub m_constant: Option<f64>,
    pub max_approximation_ratio: f64,
    pub cases: Vec<SegmentedCaseStats>,
}

impl SegmentedReport {
    pub fn holds(&self) -> bool {
        self.lipschitz <= 3.0 + 1e-9
            && self.min_norm_over_rho * self.envelope >= 1.0
            && self.max_approximation_ratio <= 1.0
            && self.cases.iter().all(SegmentedCaseStats::holds)
    }

    pub fn case(&self, case: SegmentedCase) -> Option<&SegmentedCaseStats> {
        self.cases.iter().find(|c| c.case == case)
    }
}

/// Builds the map and checks every pair against its case.
pub fn segmented_witnesses<T: Real>(
    levels: &LeveledSystems<T>,
    depth: usize,
    eta: &EtaSchedule,
    seed: u64,
) -> Result<(EmbeddingMap<T>, SegmentedReport)> {
    let (map, defect) = segmented_with_defect(levels, depth, eta, seed)?;
    let layout = SegmentedLayout::new(levels)?;
    let nodes = map.nodes();
    let target = map.target().clone();

    struct Row {
        case: SegmentedCase,
        ratio: f64,
        witness: Option<(f64, f64)>,
        s: TreeNode,
        t: TreeNode,
        rho: usize,
    }
    let mut rows = Vec::new();
    let mut lip: f64 = 0.0;
    let mut min_ratio = f64::INFINITY;
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let plan = layout.plan(&nodes[i], &nodes[j])?;
            let r = rho(&plan.s, &plan.t);
            let dg = map.evaluate(&plan.s)?.sub(map.evaluate(&plan.t)?);
            let ratio = norm(&dg, &target)?.to_f64_lossy() / r as f64;
            lip = lip.max(ratio);
            min_ratio = min_ratio.min(ratio);
            let witness = plan
                .witness
                .map(|(w, required)| (pair_vectors(&w, &dg).to_f64_lossy(), required));
            rows.push(Row { case: plan.case, ratio, witness, s: plan.s, t: plan.t, rho: r });
        }
    }

    let alpha = rows
        .iter()
        .filter(|r| matches!(r.case, SegmentedCase::B1 | SegmentedCase::B2))
        .map(|r| r.ratio)
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))))
        .map(|a| a.min(1.0));
    let m_constant = alpha.map(|a| 6.0 / a);
    let f_constant = match (alpha, m_constant) {
        (Some(a), Some(m)) => 1.0 / (a / 4.0).min(1.0 / (104.0 * (m + 1.0))),
        _ => ENVELOPE,
    };

    let mut cases: BTreeMap<SegmentedCase, SegmentedCaseStats> = BTreeMap::new();
    for row in &rows {
        let c = if row.case == SegmentedCase::F { f_constant } else { row.case.inverse_constant() };
        let st = cases.entry(row.case).or_insert_with(|| SegmentedCaseStats {
            case: row.case,
            pairs: 0,
            min_norm_over_rho: f64::INFINITY,
            inverse_constant: c,
            norm_failures: 0,
            witness: None,
        });
        st.pairs += 1;
        st.min_norm_over_rho = st.min_norm_over_rho.min(row.ratio);
        // Case B pairs also answer to the weaker of the two subcase constants.
        let limit = match row.case {
            SegmentedCase::B1 | SegmentedCase::B2 => c.min(1308.0),
            _ => c,
        };
        if row.ratio * limit < 1.0 {
            st.norm_failures += 1;
        }
        if let Some((value, required)) = row.witness {
            st.witness
                .get_or_insert_with(WitnessStats::default)
                .record(&row.s, &row.t, value, required, row.rho);
        }
    }

    let report = SegmentedReport {
        segment_base: layout.k,
        depth,
        pairs: rows.len(),
        lipschitz: if rows.is_empty() { 0.0 } else { lip },
        min_norm_over_rho: min_ratio,
        envelope: ENVELOPE,
        alpha,
        m_constant,
        max_approximation_ratio: defect,
        cases: cases.into_values().collect(),
    };
    Ok((map, report))
}
