//! Finite truncations of the integer tree with the hyperbolic path metric.
//!
//! A node is a finite sequence of positive integers; the root is the empty
//! sequence. The distance between two nodes is the length of the tree path
//! joining them, `|s| + |t| - 2|gca(s, t)|`.
//!
//! Dyadic trees store the alphabet `{-1, 1}` as `{1, 2}` (`-1 -> 1`,
//! `1 -> 2`); see [`TreeNode::from_signs`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A node of the integer tree, stored as its path from the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TreeNode(Vec<u32>);

impl TreeNode {
    pub fn root() -> Self {
        TreeNode(Vec::new())
    }

    /// Builds a node from its path; every entry must be at least 1.
    pub fn new(path: Vec<u32>) -> Result<Self> {
        if path.contains(&0) {
            return Err(Error::InvalidTree(format!(
                "node entries must be positive: {path:?}"
            )));
        }
        Ok(TreeNode(path))
    }

    /// Maps a dyadic sign sequence into the stored alphabet (`-1 -> 1`, `1 -> 2`).
    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        signs
            .iter()
            .map(|&s| match s {
                -1 => Ok(1),
                1 => Ok(2),
                other => Err(Error::InvalidTree(format!("dyadic entry {other} not in {{-1, 1}}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(TreeNode)
    }

    /// Inverse of [`TreeNode::from_signs`]; `None` if an entry exceeds 2.
    pub fn to_signs(&self) -> Option<Vec<i8>> {
        self.0
            .iter()
            .map(|&e| match e {
                1 => Some(-1),
                2 => Some(1),
                _ => None,
            })
            .collect()
    }

    pub fn path(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// Predecessor `s⁻`; `None` for the root.
    pub fn parent(&self) -> Option<TreeNode> {
        if self.is_root() {
            None
        } else {
            Some(TreeNode(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, n: u32) -> TreeNode {
        assert!(n > 0, "child index must be positive");
        let mut p = self.0.clone();
        p.push(n);
        TreeNode(p)
    }

    /// The ancestor of length `k` (`t|_k`). Panics if `k > |self|`.
    pub fn prefix(&self, k: usize) -> TreeNode {
        TreeNode(self.0[..k].to_vec())
    }

    /// Concatenation `self ⌢ other`.
    pub fn concat(&self, other: &TreeNode) -> TreeNode {
        let mut p = self.0.clone();
        p.extend_from_slice(&other.0);
        TreeNode(p)
    }

    /// `self <= other` in the tree order (self is an ancestor of, or equal to, other).
    pub fn is_ancestor_of(&self, other: &TreeNode) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// All ancestors from the root down to and including `self`.
    pub fn ancestors(&self) -> impl Iterator<Item = TreeNode> + '_ {
        (0..=self.len()).map(move |k| self.prefix(k))
    }

    /// Slash-joined path, `""` for the root.
    pub fn to_slash(&self) -> String {
        self.0
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join("/")
    }

    pub fn from_slash(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Ok(TreeNode::root());
        }
        let path = s
            .split('/')
            .map(|x| {
                x.parse::<u32>()
                    .map_err(|e| Error::Parse(format!("bad node entry {x:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        TreeNode::new(path)
    }
}

impl fmt::Display for TreeNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_root() {
            return write!(f, "∅");
        }
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Greatest common ancestor: the longest common prefix.
pub fn gca(s: &TreeNode, t: &TreeNode) -> TreeNode {
    TreeNode(s.0[..common_prefix_len(s, t)].to_vec())
}

fn common_prefix_len(s: &TreeNode, t: &TreeNode) -> usize {
    s.0.iter().zip(t.0.iter()).take_while(|(a, b)| a == b).count()
}

/// Hyperbolic tree distance `|s| + |t| - 2|gca(s, t)|`.
pub fn rho(s: &TreeNode, t: &TreeNode) -> usize {
    s.len() + t.len() - 2 * common_prefix_len(s, t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeKind {
    Integer,
    Dyadic,
}

/// The truncation `{1..b}^{<=N}`; optionally the root has a different number
/// of children (`root_branching`), which the segmented construction uses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperbolicTree {
    pub kind: TreeKind,
    pub depth: usize,
    pub branching: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_branching: Option<u32>,
}

impl HyperbolicTree {
    pub fn integer(depth: usize, branching: u32) -> Result<Self> {
        let t = HyperbolicTree {
            kind: TreeKind::Integer,
            depth,
            branching,
            root_branching: None,
        };
        t.validate()?;
        Ok(t)
    }

    /// Bourgain's dyadic tree of height `depth`.
    pub fn dyadic(depth: usize) -> Self {
        HyperbolicTree {
            kind: TreeKind::Dyadic,
            depth,
            branching: 2,
            root_branching: None,
        }
    }

    pub fn with_root_branching(mut self, root_branching: u32) -> Result<Self> {
        self.root_branching = Some(root_branching);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.branching == 0 {
            return Err(Error::InvalidTree("branching must be positive".into()));
        }
        if self.root_branching == Some(0) {
            return Err(Error::InvalidTree("root branching must be positive".into()));
        }
        if self.kind == TreeKind::Dyadic && (self.branching != 2 || self.root_branching.is_some()) {
            return Err(Error::InvalidTree("dyadic trees have branching 2".into()));
        }
        Ok(())
    }

    /// Number of children of a node at the given level.
    pub fn branching_at(&self, level: usize) -> u32 {
        match (level, self.root_branching) {
            (0, Some(rb)) => rb,
            _ => self.branching,
        }
    }

    /// Number of nodes at exactly `level`.
    pub fn level_size(&self, level: usize) -> u128 {
        if level > self.depth {
            return 0;
        }
        (0..level).fold(1u128, |acc, l| {
            acc.saturating_mul(self.branching_at(l) as u128)
        })
    }

    /// Total node count; `(b^{N+1} - 1) / (b - 1)` for a uniform integer tree.
    pub fn node_count(&self) -> u128 {
        (0..=self.depth).fold(0u128, |acc, l| acc.saturating_add(self.level_size(l)))
    }

    pub fn terminal_count(&self) -> u128 {
        self.level_size(self.depth)
    }

    /// Fails with [`Error::CapacityExhausted`] when the tree has more than `limit` nodes.
    pub fn ensure_at_most(&self, limit: u64) -> Result<()> {
        let n = self.node_count();
        if n > limit as u128 {
            return Err(Error::CapacityExhausted {
                what: format!("tree of depth {} and branching {}", self.depth, self.branching),
                required: n.min(u64::MAX as u128) as u64,
                available: limit,
            });
        }
        Ok(())
    }

    pub fn contains(&self, s: &TreeNode) -> bool {
        s.len() <= self.depth
            && s.path()
                .iter()
                .enumerate()
                .all(|(l, &e)| e >= 1 && e <= self.branching_at(l))
    }

    /// Level order with siblings by increasing last entry; ancestors precede
    /// descendants and the root comes first.
    pub fn enumerate(&self) -> Vec<TreeNode> {
        let mut out = Vec::with_capacity(self.node_count().min(1 << 24) as usize);
        out.push(TreeNode::root());
        let mut start = 0;
        for level in 0..self.depth {
            let end = out.len();
            let b = self.branching_at(level);
            for i in start..end {
                for n in 1..=b {
                    let c = out[i].child(n);
                    out.push(c);
                }
            }
            start = end;
        }
        out
    }

    /// Terminal nodes (length `depth`) in enumeration order, i.e. lexicographic.
    pub fn terminal_nodes(&self) -> Vec<TreeNode> {
        let all = self.enumerate();
        let skip = all.len() - self.terminal_count() as usize;
        all.into_iter().skip(skip).collect()
    }

    /// One maximal chain `∅ < … < terminal` per terminal node, in terminal order.
    pub fn branches(&self) -> Vec<Vec<TreeNode>> {
        self.terminal_nodes()
            .into_iter()
            .map(|t| t.ancestors().collect())
            .collect()
    }

    /// Zero-based rank of a terminal node among [`Self::terminal_nodes`].
    pub fn terminal_index(&self, terminal: &TreeNode) -> Option<u64> {
        if terminal.len() != self.depth || !self.contains(terminal) {
            return None;
        }
        let mut idx: u128 = 0;
        for (l, &e) in terminal.path().iter().enumerate() {
            idx = idx * self.branching_at(l) as u128 + (e - 1) as u128;
        }
        u64::try_from(idx).ok()
    }

    /// Terminal node with the given zero-based rank.
    pub fn terminal_at(&self, mut index: u64) -> Option<TreeNode> {
        if index as u128 >= self.terminal_count() {
            return None;
        }
        let mut path = vec![0u32; self.depth];
        for l in (0..self.depth).rev() {
            let b = self.branching_at(l) as u64;
            path[l] = (index % b) as u32 + 1;
            index /= b;
        }
        Some(TreeNode(path))
    }

    /// Zero-based rank of the first branch (in terminal order) that contains `s`.
    pub fn first_branch_index(&self, s: &TreeNode) -> Option<u64> {
        if !self.contains(s) {
            return None;
        }
        let mut path = s.path().to_vec();
        path.resize(self.depth, 1);
        self.terminal_index(&TreeNode(path))
    }
}

/// A tree isomorphism of `source` onto a full subtree of `target` that skips
/// the first `skip` successors of every node ("large enough" successor
/// choice). Finite branching may not supply enough successors; that is
/// reported instead of silently shrinking the source.
pub fn tree_isomorphism(
    source: &HyperbolicTree,
    target: &HyperbolicTree,
    skip: u32,
) -> Result<BTreeMap<TreeNode, TreeNode>> {
    if source.depth > target.depth {
        return Err(Error::CapacityExhausted {
            what: "tree isomorphism depth".into(),
            required: source.depth as u64,
            available: target.depth as u64,
        });
    }
    for level in 0..source.depth {
        let need = source.branching_at(level) as u64 + skip as u64;
        let have = target.branching_at(level) as u64;
        if need > have {
            return Err(Error::CapacityExhausted {
                what: format!("successors at level {level}"),
                required: need,
                available: have,
            });
        }
    }
    Ok(source
        .enumerate()
        .into_iter()
        .map(|s| {
            let image = TreeNode(s.path().iter().map(|&e| e + skip).collect());
            (s, image)
        })
        .collect())
}

/// `N_i = sum_{k=0}^{i} K^k`: the depth at which the `i`-th segment ends.
pub fn segment_end(k: usize, i: usize) -> usize {
    (0..=i).map(|j| k.pow(j as u32)).sum()
}

/// Index `n` of the segment that contains position `len`, i.e. the `n`
/// with `N_{n-1} < len <= N_n` (`N_{-1} = 0`). `len = 0` maps to segment 0.
pub fn segment_index(len: usize, k: usize) -> usize {
    let mut n = 0;
    let mut end = 1;
    let mut width = 1;
    while len > end {
        n += 1;
        width *= k;
        end += width;
    }
    n
}

/// Splits a non-root node into `s_0 ⌢ … ⌢ s_n` with `|s_j| = K^j` for
/// `j < n` and `1 <= |s_n| <= K^n`.
pub fn segment_decompose(s: &TreeNode, k: usize) -> Result<Vec<TreeNode>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("segment base K = {k} < 2")));
    }
    if s.is_root() {
        return Err(Error::RootHasNoSegments);
    }
    let mut out = Vec::new();
    let mut pos = 0;
    let mut width = 1;
    while pos < s.len() {
        let end = (pos + width).min(s.len());
        out.push(TreeNode(s.path()[pos..end].to_vec()));
        pos = end;
        width *= k;
    }
    Ok(out)
}
