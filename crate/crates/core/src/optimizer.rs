//! Numerical search for low-distortion placements of a finite metric space
//! in `ℓp^d`.
//!
//! The objective is a soft-max smoothing of `max log r - min log r` over the
//! pair ratios `r = ‖x_i - x_j‖_p / d(i, j)`. Results are upper bounds on the
//! optimal distortion and nothing more.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{distortion_of_points, DistortionConfig, DistortionReport, FiniteMetric};
use crate::embeddings::embed_l1;
use crate::error::{Error, Result};
use crate::scalar::{derive_seed, rng, Real};
use crate::spaces::{Exponent, Key, SpaceModel, Vector};
use crate::systems::BiorthSystem;
use crate::tree::HyperbolicTree;

/// `ℓp^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpTarget {
    pub p: Exponent<f64>,
    pub dim: usize,
}

impl LpTarget {
    pub fn new(p: f64, dim: usize) -> Result<Self> {
        let t = LpTarget { p: Exponent(p), dim };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        self.p.validate()?;
        if self.dim == 0 {
            return Err(Error::InvalidParameter("target dimension must be positive".into()));
        }
        Ok(())
    }

    pub fn space<T: Real>(&self) -> SpaceModel<T> {
        SpaceModel::lp(T::lit(self.p.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub iterations: usize,
    pub restarts: usize,
    /// Initial step as a fraction of the mean pair distance.
    pub step: f64,
    /// Soft-max temperature `β_t = β₀ (1 + t / τ)`; the step decays as `1 / (1 + t / τ)`.
    pub beta0: f64,
    pub tau: f64,
    pub seed: u64,
    /// Improvements smaller than this do not replace the best iterate.
    pub tolerance: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig { iterations: 2000, restarts: 8, step: 0.1, beta0: 8.0, tau: 200.0, seed: 0, tolerance: 1e-12 }
    }
}

impl OptimizeConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.iterations > 0
            && self.restarts > 0
            && self.step > 0.0
            && self.step.is_finite()
            && self.beta0 > 0.0
            && self.beta0.is_finite()
            && self.tau > 0.0
            && self.tau.is_finite()
            && self.tolerance >= 0.0;
        if !ok {
            return Err(Error::InvalidParameter(
                "iterations, restarts, step, beta0 and tau must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub lip: f64,
    pub colip_inverse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OptimizationRun<T: Real> {
    pub points: FiniteMetric,
    pub target: LpTarget,
    pub config: OptimizeConfig,
    pub positions: Vec<Vec<T>>,
    pub trace: Vec<TraceRow>,
    pub best_restart: usize,
    pub initial_distortion: Option<f64>,
    /// Exact distortion of `positions`, recomputed by a full pair scan.
    pub distortion: f64,
    pub report: DistortionReport,
}

impl<T: Real> OptimizationRun<T> {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,objective,lip,colip_inverse\n");
        for r in &self.trace {
            s.push_str(&format!("{},{:?},{:?},{:?}\n", r.iteration, r.objective, r.lip, r.colip_inverse));
        }
        s
    }

    pub fn positions_csv(&self) -> String {
        let mut s = String::from("label");
        for c in 0..self.target.dim {
            s.push_str(&format!(",x{c}"));
        }
        s.push('\n');
        for (label, row) in self.points.labels().iter().zip(&self.positions) {
            s.push_str(label);
            for x in row {
                s.push_str(&format!(",{x:?}"));
            }
            s.push('\n');
        }
        s
    }
}

fn as_vectors<T: Real>(positions: &[Vec<T>]) -> Vec<Vector<T>> {
    positions
        .iter()
        .map(|row| Vector::from_entries(row.iter().enumerate().map(|(i, &x)| (Key::index(i), x))))
        .collect()
}

struct Pairs {
    list: Vec<(usize, usize, f64)>,
    mean: f64,
}

impl Pairs {
    fn new(points: &FiniteMetric) -> Self {
        let n = points.len();
        let list: Vec<_> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, points.distance(i, j)))
            .collect();
        let mean = list.iter().map(|x| x.2).sum::<f64>() / list.len() as f64;
        Pairs { list, mean }
    }
}

fn lp_norm<T: Real>(v: &[T], p: T) -> T {
    crate::spaces::lp_norm_of(v.iter().copied(), p)
}

/// `∇‖v‖_p` with sign subgradients at `p = 1` and the lowest maximal
/// coordinate at `p = ∞`.
fn norm_gradient<T: Real>(v: &[T], p: T, n: T, out: &mut [T]) {
    out.iter_mut().for_each(|g| *g = T::zero());
    if n == T::zero() {
        return;
    }
    let sign = |x: T| {
        if x > T::zero() {
            T::one()
        } else if x < T::zero() {
            -T::one()
        } else {
            T::zero()
        }
    };
    if p == T::one() {
        for (g, &x) in out.iter_mut().zip(v) {
            *g = sign(x);
        }
    } else if p.is_infinite() {
        let mut best = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[best].abs() {
                best = i;
            }
        }
        out[best] = sign(v[best]);
    } else {
        for (g, &x) in out.iter_mut().zip(v) {
            *g = sign(x) * (x.abs() / n).powf(p - T::one());
        }
    }
}

struct Restart<T> {
    positions: Vec<Vec<T>>,
    distortion: f64,
    trace: Vec<TraceRow>,
    initial: f64,
}

/// Log-ratios of every pair.
fn log_ratios<T: Real>(pos: &[Vec<T>], pairs: &Pairs, p: T, diff: &mut Vec<T>) -> Vec<f64> {
    pairs
        .list
        .iter()
        .map(|&(i, j, d)| {
            diff.clear();
            diff.extend(pos[i].iter().zip(&pos[j]).map(|(&a, &b)| a - b));
            (lp_norm(diff, p).to_f64_lossy().max(f64::MIN_POSITIVE) / d).ln()
        })
        .collect()
}

fn soft_max(r: &[f64], beta: f64, sign: f64, weights: &mut Vec<f64>) -> f64 {
    let m = r.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(sign * x));
    weights.clear();
    weights.extend(r.iter().map(|&x| (beta * (sign * x - m)).exp()));
    let z: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= z);
    m + z.ln() / beta
}

fn run_restart<T: Real>(
    pairs: &Pairs,
    start: Vec<Vec<T>>,
    target: &LpTarget,
    config: &OptimizeConfig,
) -> Restart<T> {
    let p = T::lit(target.p.0);
    let dim = target.dim;
    let mut pos = start;
    let mut diff = Vec::with_capacity(dim);
    let mut grad_norm = vec![T::zero(); dim];
    let (mut wa, mut wb) = (Vec::new(), Vec::new());
    let mut best: Option<(f64, Vec<Vec<T>>)> = None;
    let mut trace = Vec::with_capacity(config.iterations);
    let mut initial = f64::NAN;
    for t in 0..config.iterations {
        let r = log_ratios(&pos, pairs, p, &mut diff);
        let (hi, lo) = r.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), &x| (a.max(x), b.min(x)));
        let exact = (hi - lo).exp();
        if t == 0 {
            initial = exact;
        }
        // Uniform rescaling so the smallest ratio is 1.
        let s = T::lit((-lo).exp());
        pos.iter_mut().flat_map(|row| row.iter_mut()).for_each(|x| *x *= s);
        if best.as_ref().is_none_or(|b| exact < b.0 - config.tolerance) {
            best = Some((exact, pos.clone()));
        }
        let beta = config.beta0 * (1.0 + t as f64 / config.tau);
        let objective = soft_max(&r, beta, 1.0, &mut wa) + soft_max(&r, beta, -1.0, &mut wb);
        trace.push(TraceRow { iteration: t, objective, lip: hi.exp(), colip_inverse: (-lo).exp() });

        let mut grad = vec![vec![T::zero(); dim]; pos.len()];
        for (k, &(i, j, _)) in pairs.list.iter().enumerate() {
            let w = wa[k] - wb[k];
            if w == 0.0 {
                continue;
            }
            diff.clear();
            diff.extend(pos[i].iter().zip(&pos[j]).map(|(&a, &b)| a - b));
            let n = lp_norm(&diff, p);
            if n == T::zero() {
                continue;
            }
            norm_gradient(&diff, p, n, &mut grad_norm);
            let c = T::lit(w) / n;
            for c_ix in 0..dim {
                let g = c * grad_norm[c_ix];
                grad[i][c_ix] += g;
                grad[j][c_ix] -= g;
            }
        }
        let total = grad.iter().flatten().map(|g| g.to_f64_lossy().powi(2)).sum::<f64>().sqrt();
        if total == 0.0 || !total.is_finite() {
            break;
        }
        let eta = config.step * pairs.mean / (1.0 + t as f64 / config.tau) / total;
        let eta = T::lit(eta);
        for (row, g) in pos.iter_mut().zip(&grad) {
            for (x, &gx) in row.iter_mut().zip(g) {
                *x -= eta * gx;
            }
        }
    }
    let (distortion, positions) = best.expect("at least one iteration");
    Restart { positions, distortion, trace, initial }
}

fn random_start<T: Real>(n: usize, dim: usize, scale: f64, seed: u64) -> Vec<Vec<T>> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| T::lit(scale * r.gen_range(-1.0..1.0))).collect())
        .collect()
}

fn check_init<T: Real>(init: &[Vec<T>], n: usize, dim: usize) -> Result<()> {
    if init.len() != n || init.iter().any(|r| r.len() != dim) {
        return Err(Error::ShapeMismatch(format!("initial positions must be {n}x{dim}")));
    }
    Ok(())
}

/// Minimizes the smoothed distortion; restart 0 starts from `init` when given.
pub fn optimize<T: Real>(
    points: &FiniteMetric,
    target: LpTarget,
    config: OptimizeConfig,
    init: Option<Vec<Vec<T>>>,
) -> Result<OptimizationRun<T>> {
    target.validate()?;
    config.validate()?;
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    FiniteMetric::new(points.labels().to_vec(), points.distances().to_vec())?;
    if let Some(init) = &init {
        check_init(init, n, target.dim)?;
    }
    let pairs = Pairs::new(points);
    let starts: Vec<Vec<Vec<T>>> = (0..config.restarts)
        .map(|r| match (&init, r) {
            (Some(init), 0) => init.clone(),
            _ => random_start(n, target.dim, pairs.mean, derive_seed(config.seed, r as u64)),
        })
        .collect();
    let runs: Vec<Restart<T>> = starts
        .into_par_iter()
        .map(|start| run_restart(&pairs, start, &target, &config))
        .collect();
    let (best_restart, best) = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.distortion.total_cmp(&b.1.distortion).then(a.0.cmp(&b.0)))
        .expect("restarts > 0");
    let space = target.space::<T>();
    let report = distortion_of_points(points, &as_vectors(&best.positions), &space, &DistortionConfig::default())?;
    Ok(OptimizationRun {
        points: points.clone(),
        target,
        config,
        positions: best.positions.clone(),
        trace: best.trace.clone(),
        best_restart,
        initial_distortion: init.as_ref().map(|_| runs[0].initial),
        distortion: report.distortion,
        report,
    })
}

/// Coordinates of the canonical `ℓ1` image, keeping the `dim` keys of
/// largest variance, plus a small seeded offset when keys are dropped.
pub fn construction_init<T: Real>(tree: &HyperbolicTree, dim: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    let map = embed_l1(&BiorthSystem::<T>::canonical(tree))?;
    let index = map.key_index();
    let dense: Vec<Vec<T>> = map.images().iter().map(|v| v.to_dense(&index)).collect();
    let n = T::from_usize_lossy(dense.len());
    let mut variance: Vec<(T, usize)> = (0..index.len())
        .map(|c| {
            let mean = dense.iter().map(|r| r[c]).sum::<T>() / n;
            let var = dense.iter().map(|r| (r[c] - mean) * (r[c] - mean)).sum::<T>() / n;
            (var, c)
        })
        .collect();
    variance.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let mut keep: Vec<usize> = variance.iter().take(dim).map(|x| x.1).collect();
    keep.sort_unstable();
    let dropped = keep.len() < index.len();
    let mut jitter = rng(seed);
    Ok(dense
        .iter()
        .map(|r| {
            let mut row: Vec<T> = keep.iter().map(|&c| r[c]).collect();
            row.resize(dim, T::zero());
            if dropped {
                // Dropped keys can merge images; a small seeded offset separates them.
                row.iter_mut().for_each(|x| *x += T::lit(0.05 * jitter.gen_range(-1.0..1.0)));
            }
            row
        })
        .collect())
}

/// [`optimize`] on the nodes of a tree, seeded with the construction image.
pub fn optimize_tree<T: Real>(tree: &HyperbolicTree, target: LpTarget, config: OptimizeConfig) -> Result<OptimizationRun<T>> {
    target.validate()?;
    tree.ensure_at_most(20_000)?;
    let init = construction_init(tree, target.dim, config.seed)?;
    optimize(&FiniteMetric::from_tree(tree), target, config, Some(init))
}

/// Target dimension per tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "dim", rename_all = "kebab-case")]
pub enum DimRule {
    Fixed { d: usize },
    NodeCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub depth: usize,
    pub nodes: usize,
    pub dim: usize,
    pub distortion: f64,
    pub best_restart: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub branching: u32,
    pub p: Exponent<f64>,
    pub dim: DimRule,
    pub rows: Vec<GrowthRow>,
    /// Each row at least the previous one minus `tolerance`.
    pub non_decreasing: bool,
    pub tolerance: f64,
}

/// Best distortion found for `T_N^b` into `ℓp^d`, per depth.
pub fn growth_experiment(
    branching: u32,
    depths: &[usize],
    p: f64,
    dim: DimRule,
    config: OptimizeConfig,
) -> Result<GrowthTable> {
    if depths.is_empty() {
        return Err(Error::InvalidParameter("depth list is empty".into()));
    }
    let tolerance = 1e-6;
    let mut rows = Vec::new();
    for (i, &depth) in depths.iter().enumerate() {
        let tree = HyperbolicTree::integer(depth, branching)?;
        let nodes = tree.node_count() as usize;
        let d = match dim {
            DimRule::Fixed { d } => d,
            DimRule::NodeCount => nodes,
        };
        let cfg = OptimizeConfig { seed: derive_seed(config.seed, i as u64), ..config };
        let run = optimize_tree::<f64>(&tree, LpTarget::new(p, d)?, cfg)?;
        rows.push(GrowthRow { depth, nodes, dim: d, distortion: run.distortion, best_restart: run.best_restart, seed: cfg.seed });
    }
    let non_decreasing = rows.windows(2).all(|w| w[1].distortion >= w[0].distortion - tolerance);
    Ok(GrowthTable { branching, p: Exponent(p), dim, rows, non_decreasing, tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_are_exact() {
        let m = FiniteMetric::from_tree(&HyperbolicTree::integer(1, 1).unwrap());
        let run = optimize::<f64>(&m, LpTarget::new(2.0, 3).unwrap(), OptimizeConfig { iterations: 5, restarts: 2, ..Default::default() }, None).unwrap();
        assert!((run.distortion - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l1_init_is_kept() {
        let tree = HyperbolicTree::integer(3, 2).unwrap();
        let cfg = OptimizeConfig { iterations: 50, restarts: 2, ..Default::default() };
        let run = optimize_tree::<f64>(&tree, LpTarget::new(1.0, 15).unwrap(), cfg).unwrap();
        assert_eq!(run.initial_distortion, Some(1.0));
        assert!(run.distortion <= 1.0 + 1e-9);
    }

    #[test]
    fn gradients_at_extreme_exponents() {
        let mut g = vec![0.0; 3];
        norm_gradient(&[2.0, -2.0, 1.0], f64::INFINITY, 2.0, &mut g);
        assert_eq!(g, vec![1.0, 0.0, 0.0]);
        norm_gradient(&[2.0, 0.0, -1.0], 1.0, 3.0, &mut g);
        assert_eq!(g, vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn rejects_bad_config() {
        let m = FiniteMetric::star(2);
        let bad = OptimizeConfig { restarts: 0, ..Default::default() };
        assert!(optimize::<f64>(&m, LpTarget::new(2.0, 2).unwrap(), bad, None).is_err());
        assert!(LpTarget::new(0.5, 2).is_err());
    }

    #[test]
    fn seeded_runs_repeat() {
        let m = FiniteMetric::star(3);
        let cfg = OptimizeConfig { iterations: 200, restarts: 3, seed: 4, ..Default::default() };
        let a = optimize::<f64>(&m, LpTarget::new(2.0, 2).unwrap(), cfg, None).unwrap();
        let b = optimize::<f64>(&m, LpTarget::new(2.0, 2).unwrap(), cfg, None).unwrap();
        assert_eq!(a.distortion, b.distortion);
        assert_eq!(a.positions, b.positions);
    }
}
