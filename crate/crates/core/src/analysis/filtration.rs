//! Branch increments `z_j`, their banded differences `w_jk` and the two
//! counting sums built from them.
//!
//! For a map `u` on `T_N^b` and a branch `β`, `z_j(β) = u(β|j) - u(β|j-1)`.
//! With `m` the least integer such that `a^m ≥ N`:
//!
//! * `w_j0 = z_j - E_{j-1} z_j`
//! * `w_jk = E_{j-a^{k-1}} z_j - E_{j-a^k} z_j` for `1 ≤ k < m`
//! * `w_jm = E_{j-a^{m-1}} z_j`
//!
//! so that `Σ_k w_jk = z_j` holds term by term.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embeddings::EmbeddingMap;
use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, Real};
use crate::spaces::{norm, BranchField, Grading, ProjectionMode, SpaceModel, Vector};
use crate::tree::{rho, HyperbolicTree};

/// One CSV row of the per-branch table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WRow {
    pub branch: usize,
    pub j: usize,
    pub k: usize,
    pub norm: f64,
}

#[derive(Debug, Clone)]
pub struct WTable<T> {
    pub depth: usize,
    pub branching: u32,
    pub a: u64,
    pub m: usize,
    pub mode: ProjectionMode,
    pub grading: Option<Grading>,
    /// `true` when `u(∅)` was nonzero and subtracted.
    pub recentred: bool,
    /// `z[j - 1]` is `z_j`.
    pub z: Vec<BranchField<T>>,
    /// `w[j - 1][k]` is `w_jk`, `k = 0..=m`.
    pub w: Vec<Vec<BranchField<T>>>,
    /// Field norms of `w_jk`, same indexing as `w`.
    pub norms: Vec<Vec<f64>>,
    /// Largest coordinate of `Σ_k w_jk - z_j` over all `j` and branches.
    pub reconstruction_error: f64,
    pub target: SpaceModel<T>,
    map: EmbeddingMap<T>,
}

impl<T: Real> WTable<T> {
    /// Per-branch norms of every `w_jk`.
    pub fn rows(&self) -> Result<Vec<WRow>> {
        let mut out = Vec::new();
        for (ji, row) in self.w.iter().enumerate() {
            for (k, field) in row.iter().enumerate() {
                for (branch, v) in field.values().iter().enumerate() {
                    out.push(WRow { branch, j: ji + 1, k, norm: norm(v, &self.target)?.to_f64_lossy() });
                }
            }
        }
        out.sort_by_key(|r| (r.branch, r.j, r.k));
        Ok(out)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut s = String::from("branch,j,k,norm\n");
        for r in self.rows()? {
            s.push_str(&format!("{},{},{},{:?}\n", r.branch, r.j, r.k, r.norm));
        }
        Ok(s)
    }

    /// The recentred map the table was built from.
    pub fn map(&self) -> &EmbeddingMap<T> {
        &self.map
    }
}

fn band_count(a: u64, n: usize) -> usize {
    let mut m = 1;
    let mut pow = a as u128;
    while pow < n as u128 {
        pow *= a as u128;
        m += 1;
    }
    m
}

fn shift(j: usize, a: u64, k: usize) -> isize {
    let p = (a as u128).saturating_pow(k as u32);
    if p > j as u128 {
        -1
    } else {
        j as isize - p as isize
    }
}

/// Builds the `w` table of `map` on its full tree.
pub fn filtration_decompose<T: Real>(
    map: &EmbeddingMap<T>,
    a: u64,
    mode: ProjectionMode,
    grading: Option<&Grading>,
) -> Result<WTable<T>> {
    let tree = map.tree().clone();
    if a < 2 {
        return Err(Error::InvalidParameter(format!("band base a = {a} must be at least 2")));
    }
    if tree.depth == 0 {
        return Err(Error::ShapeMismatch("filtration needs depth at least 1".into()));
    }
    if map.nodes().len() as u128 != tree.node_count() {
        return Err(Error::ShapeMismatch("map is not defined on every node".into()));
    }
    let fallback = Grading::by_path_length();
    let grading_used = match (mode, grading) {
        (ProjectionMode::Truncate, None) => {
            return Err(Error::InvalidParameter("truncate mode needs a graded target".into()))
        }
        (_, Some(g)) => g,
        (ProjectionMode::Average, None) => &fallback,
    };
    if mode == ProjectionMode::Truncate {
        for v in map.images() {
            for key in v.keys() {
                grading_used.level_of(key)?;
            }
        }
    }
    let origin = map.evaluate(&crate::tree::TreeNode::root())?.clone();
    let recentred = !origin.is_zero();
    let images: Vec<Vector<T>> = map.images().iter().map(|v| v.sub(&origin)).collect();
    let u = EmbeddingMap::new(
        tree.clone(),
        images,
        map.target().clone(),
        map.provenance().clone(),
        map.root_pinned(),
    )?;

    let n = tree.depth;
    let m = band_count(a, n);
    let terminals = tree.terminal_nodes();
    let z: Vec<BranchField<T>> = (1..=n)
        .map(|j| {
            let values = terminals
                .iter()
                .map(|b| Ok(u.evaluate(&b.prefix(j))?.sub(u.evaluate(&b.prefix(j - 1))?)))
                .collect::<Result<Vec<_>>>()?;
            BranchField::new(tree.clone(), values)
        })
        .collect::<Result<_>>()?;

    let rows: Vec<(Vec<BranchField<T>>, f64)> = z
        .par_iter()
        .enumerate()
        .map(|(ji, zj)| {
            let j = ji + 1;
            let e = |k: isize| zj.project(k, mode, grading_used);
            let mut row = vec![zj.sub(&e(j as isize - 1)?)?];
            for k in 1..m {
                row.push(e(shift(j, a, k - 1))?.sub(&e(shift(j, a, k))?)?);
            }
            row.push(e(shift(j, a, m - 1))?);
            let mut sum = BranchField::zero(zj.tree());
            for w in &row {
                sum = sum.add(w)?;
            }
            Ok((row, sum.max_abs_diff(zj).to_f64_lossy()))
        })
        .collect::<Result<_>>()?;

    let mut w = Vec::with_capacity(n);
    let mut err = 0.0f64;
    for (row, e) in rows {
        err = err.max(e);
        w.push(row);
    }
    let norms = w
        .iter()
        .map(|row| row.iter().map(|f| Ok(f.norm(map.target())?.to_f64_lossy())).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(WTable {
        depth: n,
        branching: tree.branching,
        a,
        m,
        mode,
        grading: grading.cloned(),
        recentred,
        z,
        w,
        norms,
        reconstruction_error: err,
        target: map.target().clone(),
        map: u,
    })
}

/// `‖F_r(Σ_{j=r+1}^{r+s} z_j)‖` for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MidpointWindow {
    pub r: usize,
    pub s: usize,
    pub value: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingBounds {
    pub depth: usize,
    pub a: u64,
    pub m: usize,
    pub c: f64,
    pub p: f64,
    /// `Σ_j Σ_{k=1}^m ‖w_jk‖`.
    pub upper_measured: f64,
    /// `C m^{1/p} N`.
    pub upper_bound: f64,
    pub upper_margin: f64,
    /// `Σ_j ‖w_jk‖` for `k = 1..=m`.
    pub lower_measured: Vec<f64>,
    /// `N / 2`.
    pub lower_bound: f64,
    pub lower_margins: Vec<f64>,
    /// `ρ - 1 ≤ ‖u(s) - u(t)‖` on every pair.
    pub coarse_lower_ok: bool,
    /// `‖u(s) - u(t)‖ ≤ Cρ + 1` on every pair.
    pub coarse_upper_ok: bool,
    /// Which side of the coarse contract failed, if any.
    pub failed_side: Option<String>,
    pub bounds_applicable: bool,
    pub midpoints: Vec<MidpointWindow>,
    pub min_midpoint_ratio: f64,
    pub reconstruction_error: f64,
    pub tolerance: f64,
}

/// Measures both counting sums of a table against their bounds.
pub fn counting_bounds<T: Real>(table: &WTable<T>, c: f64, p: f64) -> Result<CountingBounds> {
    if !(c.is_finite() && c >= 1.0) {
        return Err(Error::InvalidParameter(format!("C = {c} must be at least 1")));
    }
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    let n = table.depth;
    if table.w.len() != n || table.w.iter().any(|r| r.len() != table.m + 1) || table.norms.len() != n {
        return Err(Error::ShapeMismatch("w table does not match its depth and band count".into()));
    }
    let nf = n as f64;
    let upper_measured = compensated_sum(table.norms.iter().flat_map(|r| r[1..].iter().copied()));
    let upper_bound = c * (table.m as f64).powf(1.0 / p) * nf;
    let lower_measured: Vec<f64> = (1..=table.m)
        .map(|k| compensated_sum(table.norms.iter().map(|r| r[k])))
        .collect();
    let lower_bound = nf / 2.0;

    let u = table.map();
    let nodes = u.nodes();
    let tol = 64.0 * T::epsilon().to_f64_lossy();
    let (lo_ok, hi_ok) = (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let mut ok = (true, true);
            for j in (i + 1)..nodes.len() {
                let r = rho(&nodes[i], &nodes[j]) as f64;
                let d = norm(&u.images()[i].sub(&u.images()[j]), u.target())?.to_f64_lossy();
                ok.0 &= r - 1.0 <= d * (1.0 + tol);
                ok.1 &= d <= (c * r + 1.0) * (1.0 + tol);
            }
            Ok(ok)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((true, true), |a, b| (a.0 && b.0, a.1 && b.1));
    let failed_side = match (lo_ok, hi_ok) {
        (true, true) => None,
        (false, true) => Some("lower".to_string()),
        (true, false) => Some("upper".to_string()),
        (false, false) => Some("both".to_string()),
    };

    let tree: &HyperbolicTree = u.tree();
    let grading = table.grading.clone().unwrap_or_else(Grading::by_path_length);
    let terminals = tree.terminal_nodes();
    let mut midpoints = Vec::new();
    for r in 0..n {
        for s in 1..=(n - r) {
            let values = terminals
                .iter()
                .map(|b| Ok(u.evaluate(&b.prefix(r + s))?.sub(u.evaluate(&b.prefix(r))?)))
                .collect::<Result<Vec<_>>>()?;
            let field = BranchField::new(tree.clone(), values)?;
            let value = field.complement(r as isize, table.mode, &grading)?.norm(u.target())?.to_f64_lossy();
            midpoints.push(MidpointWindow { r, s, value, ratio: value / s as f64 });
        }
    }
    let min_mid = midpoints.iter().map(|w| w.ratio).fold(f64::INFINITY, f64::min);
    Ok(CountingBounds {
        depth: n,
        a: table.a,
        m: table.m,
        c,
        p,
        upper_measured,
        upper_bound,
        upper_margin: upper_bound - upper_measured,
        lower_margins: lower_measured.iter().map(|x| x - lower_bound).collect(),
        lower_measured,
        lower_bound,
        coarse_lower_ok: lo_ok,
        coarse_upper_ok: hi_ok,
        bounds_applicable: failed_side.is_none(),
        failed_side,
        midpoints,
        min_midpoint_ratio: min_mid,
        reconstruction_error: table.reconstruction_error,
        tolerance: tol,
    })
}

/// `(Σ‖x_j‖^q)^{1/q} ≤ ‖Σ x_j‖ ≤ (Σ‖x_j‖^p)^{1/p}` evaluated on explicit parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub lower: f64,
    pub norm_of_sum: f64,
    pub upper: f64,
}

impl Sandwich {
    pub fn holds(&self, tol: f64) -> bool {
        self.lower <= self.norm_of_sum + tol && self.norm_of_sum <= self.upper + tol
    }
}

pub fn band_sandwich<T: Real>(parts: &[Vector<T>], space: &SpaceModel<T>, p: f64, q: f64) -> Result<Sandwich> {
    let norms = parts
        .iter()
        .map(|x| Ok(norm(x, space)?.to_f64_lossy()))
        .collect::<Result<Vec<f64>>>()?;
    let power_mean = |e: f64| {
        if e.is_infinite() {
            norms.iter().copied().fold(0.0, f64::max)
        } else {
            compensated_sum(norms.iter().map(|x| x.powf(e))).powf(1.0 / e)
        }
    };
    let mut sum = Vector::zero();
    for x in parts {
        sum.axpy(T::one(), x);
    }
    Ok(Sandwich { lower: power_mean(q), norm_of_sum: norm(&sum, space)?.to_f64_lossy(), upper: power_mean(p) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::embed_l1;
    use crate::spaces::Key;
    use crate::systems::BiorthSystem;

    fn canonical(n: usize, b: u32) -> EmbeddingMap<f64> {
        embed_l1(&BiorthSystem::canonical(&HyperbolicTree::integer(n, b).unwrap())).unwrap()
    }

    #[test]
    fn level_local_map_has_only_the_zero_band() {
        let f = canonical(4, 2);
        let t = filtration_decompose(&f, 2, ProjectionMode::Truncate, Some(&Grading::by_path_length())).unwrap();
        assert_eq!(t.m, 2);
        assert_eq!(t.reconstruction_error, 0.0);
        for (ji, row) in t.norms.iter().enumerate() {
            assert_eq!(row[0], 1.0, "j = {}", ji + 1);
            assert!(row[1..].iter().all(|&x| x == 0.0));
        }
        let cb = counting_bounds(&t, 1.0, 1.0).unwrap();
        assert_eq!(cb.upper_measured, 0.0);
        assert!(cb.upper_measured <= cb.upper_bound);
        assert_eq!(cb.lower_bound, 2.0);
        assert!(cb.bounds_applicable);
        assert_eq!(cb.min_midpoint_ratio, 1.0);
    }

    #[test]
    fn single_band_when_a_equals_depth() {
        let f = canonical(3, 2);
        let t = filtration_decompose(&f, 3, ProjectionMode::Average, None).unwrap();
        assert_eq!(t.m, 1);
        assert!(t.w.iter().all(|r| r.len() == 2));
        assert!(t.reconstruction_error < 1e-15);
    }

    #[test]
    fn truncate_needs_grading() {
        let f = canonical(2, 2);
        assert!(filtration_decompose(&f, 2, ProjectionMode::Truncate, None).is_err());
    }

    #[test]
    fn scaled_map_fails_the_coarse_contract_on_one_side() {
        let f = canonical(3, 2).scaled(0.25);
        let t = filtration_decompose(&f, 2, ProjectionMode::Average, None).unwrap();
        let cb = counting_bounds(&t, 1.0, 2.0).unwrap();
        assert_eq!(cb.failed_side.as_deref(), Some("lower"));
        assert!(!cb.bounds_applicable);
    }

    #[test]
    fn disjoint_l2_parts_meet_equality() {
        let parts: Vec<Vector<f64>> = (0..4)
            .map(|j| Vector::from_entries((0..3).map(|i| (Key(vec![j, i]), (j + i + 1) as f64 * 0.3))))
            .collect();
        let s = band_sandwich(&parts, &SpaceModel::l2(), 2.0, 2.0).unwrap();
        assert!((s.lower - s.norm_of_sum).abs() < 1e-9);
        assert!((s.upper - s.norm_of_sum).abs() < 1e-9);
    }
}
