//! Modulus of continuity `ω_f` and the coarse Lipschitz constants `L_θ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FiniteMetric;
use crate::embeddings::EmbeddingMap;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spaces::{norm, SpaceModel, Vector};
use crate::tree::rho;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseModuli {
    /// `(t, ω_f(t))`, with `ω_f(t)` the largest image distance over pairs at distance `≤ t`.
    pub omega: Vec<(f64, f64)>,
    /// `(θ, L_θ)` with `L_θ = sup_{t ≥ θ} ω_f(t) / t`.
    pub l_theta: Vec<(f64, f64)>,
    /// Minimum of `L_θ` over the grid.
    pub l_infinity_estimate: f64,
    pub caveat: String,
    pub pairs: u64,
    pub mode: String,
    pub tolerance: f64,
}

/// Pairs as `(source distance, image distance)`, sorted by source distance.
fn moduli(mut pairs: Vec<(f64, f64)>, t_grid: &[f64], theta_grid: &[f64], tol: f64) -> Result<CoarseModuli> {
    if t_grid.is_empty() || theta_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if let Some(&t) = t_grid.iter().chain(theta_grid).find(|&&t| !(t.is_finite() && t > 0.0)) {
        return Err(Error::InvalidParameter(format!("grid value {t} must be positive and finite")));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // Distinct source distances with the running maximum of image distances.
    let mut steps: Vec<(f64, f64)> = Vec::new();
    for (d, e) in pairs.iter().copied() {
        let run = steps.last().map_or(e, |s| s.1.max(e));
        match steps.last_mut() {
            Some(last) if last.0 == d => last.1 = run,
            _ => steps.push((d, run)),
        }
    }
    let omega_at = |t: f64| match steps.partition_point(|s| s.0 <= t) {
        0 => 0.0,
        i => steps[i - 1].1,
    };
    // Suffix maxima of ω(d_i)/d_i.
    let mut tail = vec![0.0f64; steps.len() + 1];
    for i in (0..steps.len()).rev() {
        tail[i] = tail[i + 1].max(steps[i].1 / steps[i].0);
    }
    let l_at = |theta: f64| {
        let after = steps.partition_point(|s| s.0 <= theta);
        (omega_at(theta) / theta).max(tail[after])
    };
    let mut ts = t_grid.to_vec();
    ts.sort_by(f64::total_cmp);
    let mut thetas = theta_grid.to_vec();
    thetas.sort_by(f64::total_cmp);
    let l_theta: Vec<(f64, f64)> = thetas.iter().map(|&th| (th, l_at(th))).collect();
    let l_inf = l_theta.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    Ok(CoarseModuli {
        omega: ts.iter().map(|&t| (t, omega_at(t))).collect(),
        l_theta,
        l_infinity_estimate: l_inf,
        caveat: "L_inf is the minimum over the theta grid; the true value is an infimum over all theta".into(),
        pairs: pairs.len() as u64,
        mode: "exhaustive".into(),
        tolerance: tol,
    })
}

pub fn coarse_moduli<T: Real>(map: &EmbeddingMap<T>, t_grid: &[f64], theta_grid: &[f64]) -> Result<CoarseModuli> {
    let nodes = map.nodes();
    let images = map.images();
    let pairs = all_pairs(nodes.len(), |i, j| rho(&nodes[i], &nodes[j]) as f64, images, map.target())?;
    moduli(pairs, t_grid, theta_grid, 64.0 * T::epsilon().to_f64_lossy())
}

pub fn coarse_moduli_of_points<T: Real>(
    metric: &FiniteMetric,
    images: &[Vector<T>],
    space: &SpaceModel<T>,
    t_grid: &[f64],
    theta_grid: &[f64],
) -> Result<CoarseModuli> {
    if images.len() != metric.len() {
        return Err(Error::SizeMismatch { left: metric.len(), right: images.len() });
    }
    let pairs = all_pairs(metric.len(), |i, j| metric.distance(i, j), images, space)?;
    moduli(pairs, t_grid, theta_grid, 64.0 * T::epsilon().to_f64_lossy())
}

fn all_pairs<T: Real>(
    n: usize,
    d: impl Fn(usize, usize) -> f64 + Sync,
    images: &[Vector<T>],
    space: &SpaceModel<T>,
) -> Result<Vec<(f64, f64)>> {
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| Ok((d(i, j), norm(&images[i].sub(&images[j]), space)?.to_f64_lossy())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Key;

    fn line(n: usize) -> FiniteMetric {
        let d = (0..n).map(|i| (0..n).map(|j| i.abs_diff(j) as f64).collect()).collect();
        FiniteMetric::new((0..n).map(|i| i.to_string()).collect(), d).unwrap()
    }

    #[test]
    fn doubling_on_a_line() {
        let m = line(6);
        let im: Vec<Vector<f64>> = (0..6).map(|i| Vector::from_entries([(Key::index(0), 2.0 * i as f64)])).collect();
        let c = coarse_moduli_of_points(&m, &im, &SpaceModel::l1(), &[0.5, 1.0, 2.5, 9.0], &[0.5, 1.0, 3.0, 5.0])
            .unwrap();
        assert_eq!(c.omega, vec![(0.5, 0.0), (1.0, 2.0), (2.5, 4.0), (9.0, 10.0)]);
        assert!(c.l_theta.iter().all(|&(_, l)| l == 2.0));
        assert_eq!(c.l_infinity_estimate, 2.0);
    }

    #[test]
    fn isometry_omega_is_largest_distance_below_t() {
        let m = line(5);
        let im: Vec<Vector<f64>> = (0..5).map(|i| Vector::from_entries([(Key::index(0), i as f64)])).collect();
        let c = coarse_moduli_of_points(&m, &im, &SpaceModel::l2(), &[0.9, 1.5, 3.2, 100.0], &[1.0]).unwrap();
        assert_eq!(c.omega.iter().map(|x| x.1).collect::<Vec<_>>(), vec![0.0, 1.0, 3.0, 4.0]);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let m = line(2);
        let im = vec![Vector::<f64>::zero(), Vector::unit(Key::index(0))];
        assert_eq!(coarse_moduli_of_points(&m, &im, &SpaceModel::l1(), &[], &[1.0]), Err(Error::EmptyGrid));
    }
}
