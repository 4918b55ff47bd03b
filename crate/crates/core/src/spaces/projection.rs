//! Level projections `E_k` and their complements `F_k = I - E_k`.
//!
//! Two realizations share the algebra `E_k E_l = E_min(k,l)`:
//!
//! * `Truncate` zeroes every coordinate whose grading level exceeds `k`;
//!   it acts pointwise on the values of a branch field.
//! * `Average` replaces the value on a branch by the mean over all branches
//!   that agree with it on the first `k` entries.
//!
//! `E_k` for negative `k` is the zero map.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{norm, SpaceModel, Vector};
use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, Real};
use crate::spaces::Key;
use crate::tree::{HyperbolicTree, TreeNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    Truncate,
    Average,
}

/// Assigns each coordinate key a level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "grading", rename_all = "snake_case")]
pub enum Grading {
    /// Level = key length minus `offset` (offset 1 skips a level tag).
    PathLength { offset: usize },
    Explicit { levels: BTreeMap<Key, usize> },
}

impl Grading {
    pub fn by_path_length() -> Self {
        Grading::PathLength { offset: 0 }
    }

    pub fn level_of(&self, key: &Key) -> Result<usize> {
        match self {
            Grading::PathLength { offset } => key
                .0
                .len()
                .checked_sub(*offset)
                .ok_or_else(|| Error::UngradedKey(key.clone())),
            Grading::Explicit { levels } => {
                levels.get(key).copied().ok_or_else(|| Error::UngradedKey(key.clone()))
            }
        }
    }
}

/// Truncating projection of a single vector: keeps coordinates of level `<= k`.
pub fn level_projection<T: Real>(v: &Vector<T>, k: isize, grading: &Grading) -> Result<Vector<T>> {
    if k < 0 {
        return Ok(Vector::zero());
    }
    let mut out = Vector::zero();
    for (key, &x) in v.iter() {
        if grading.level_of(key)? <= k as usize {
            out.set(key.clone(), x);
        }
    }
    Ok(out)
}

/// A vector-valued function on the branches (terminal nodes) of a finite
/// tree: the finite stand-in for `ℓ∞(ℕ^N, X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchField<T> {
    tree: HyperbolicTree,
    values: Vec<Vector<T>>,
}

impl<T: Real> BranchField<T> {
    pub fn new(tree: HyperbolicTree, values: Vec<Vector<T>>) -> Result<Self> {
        let n = tree.terminal_count();
        if values.len() as u128 != n {
            return Err(Error::ShapeMismatch(format!(
                "branch field has {} values for {} branches",
                values.len(),
                n
            )));
        }
        Ok(BranchField { tree, values })
    }

    /// Builds a field by evaluating `f` on each terminal node.
    pub fn from_fn(tree: &HyperbolicTree, mut f: impl FnMut(&TreeNode) -> Vector<T>) -> Self {
        let values = tree.terminal_nodes().iter().map(&mut f).collect();
        BranchField { tree: tree.clone(), values }
    }

    pub fn zero(tree: &HyperbolicTree) -> Self {
        Self::from_fn(tree, |_| Vector::zero())
    }

    pub fn tree(&self) -> &HyperbolicTree {
        &self.tree
    }

    pub fn values(&self) -> &[Vector<T>] {
        &self.values
    }

    pub fn depth(&self) -> usize {
        self.tree.depth
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.tree != other.tree {
            return Err(Error::ShapeMismatch("branch fields over different trees".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(BranchField {
            tree: self.tree.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a.add(b)).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(BranchField {
            tree: self.tree.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a.sub(b)).collect(),
        })
    }

    /// `E_k` in the given mode. `k >= depth` is the identity (on graded
    /// support, for truncation); `k < 0` is zero.
    pub fn project(&self, k: isize, mode: ProjectionMode, grading: &Grading) -> Result<Self> {
        if k < 0 {
            return Ok(Self::zero(&self.tree));
        }
        let k = k as usize;
        let values = match mode {
            ProjectionMode::Truncate => self
                .values
                .iter()
                .map(|v| level_projection(v, k as isize, grading))
                .collect::<Result<Vec<_>>>()?,
            ProjectionMode::Average => {
                if k >= self.depth() {
                    self.values.clone()
                } else {
                    let group = (k..self.depth())
                        .map(|l| self.tree.branching_at(l) as usize)
                        .product::<usize>();
                    let weight = T::from_usize_lossy(group).recip();
                    let mut out = Vec::with_capacity(self.values.len());
                    for chunk in self.values.chunks(group) {
                        let mut mean = Vector::zero();
                        for v in chunk {
                            mean.axpy(weight, v);
                        }
                        out.extend(std::iter::repeat_n(mean, chunk.len()));
                    }
                    out
                }
            }
        };
        Ok(BranchField { tree: self.tree.clone(), values })
    }

    /// `F_k = I - E_k`.
    pub fn complement(&self, k: isize, mode: ProjectionMode, grading: &Grading) -> Result<Self> {
        self.sub(&self.project(k, mode, grading)?)
    }

    /// Field norm: the mean over branches of the pointwise norm.
    pub fn norm(&self, space: &SpaceModel<T>) -> Result<T> {
        let parts = self
            .values
            .iter()
            .map(|v| norm(v, space))
            .collect::<Result<Vec<_>>>()?;
        Ok(compensated_sum(parts) / T::from_usize_lossy(self.values.len()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (a, b)| m.max(a.sub(b).max_abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(p: &[u32]) -> TreeNode {
        TreeNode::new(p.to_vec()).unwrap()
    }

    #[test]
    fn truncate_keeps_low_levels() {
        let v = Vector::from_entries([(Key(vec![1]), 2.0), (Key(vec![1, 1, 1]), 5.0)]);
        let g = Grading::by_path_length();
        let p = level_projection(&v, 2, &g).unwrap();
        assert_eq!(p, Vector::unit(Key(vec![1])).scale(2.0));
        assert_eq!(level_projection(&v, 3, &g).unwrap(), v);
        assert!(level_projection(&v, -1, &g).unwrap().is_zero());
    }

    #[test]
    fn ungraded_key_is_an_error() {
        let g = Grading::Explicit { levels: BTreeMap::new() };
        let v = Vector::<f64>::unit(Key(vec![4]));
        assert_eq!(level_projection(&v, 1, &g), Err(Error::UngradedKey(Key(vec![4]))));
        let g = Grading::PathLength { offset: 1 };
        assert!(g.level_of(&Key(vec![])).is_err());
    }

    #[test]
    fn average_mode_means_over_extensions() {
        let tree = HyperbolicTree::integer(2, 2).unwrap();
        let f = BranchField::from_fn(&tree, |t| Vector::<f64>::unit(Key::node(t)));
        let g = Grading::by_path_length();
        let e1 = f.project(1, ProjectionMode::Average, &g).unwrap();
        let first = &e1.values()[0];
        assert_eq!(first.get(&Key::node(&node(&[1, 1]))), 0.5);
        assert_eq!(first.get(&Key::node(&node(&[1, 2]))), 0.5);
        assert_eq!(e1.values()[0], e1.values()[1]);
        assert_eq!(f.project(2, ProjectionMode::Average, &g).unwrap(), f);
        let e0 = f.project(0, ProjectionMode::Average, &g).unwrap();
        assert_eq!(e0.values()[3].get(&Key::node(&node(&[1, 1]))), 0.25);
    }
}
