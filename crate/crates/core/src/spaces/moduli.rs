//! Numerical estimates of the asymptotic smoothness and convexity moduli.
//!
//! The finite-codimensional subspace `Y` is replaced by the tail span of
//! the last `⌈d/2⌉` coordinates of a `d`-dimensional model, and `x` ranges
//! over sampled unit vectors of the head span. For `ℓp` both moduli equal
//! `(1 + τ^p)^{1/p} - 1`, which the estimate reproduces to rounding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{norm, Key, SpaceModel, Vector};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusConfig {
    /// Random directions sampled on each sphere, besides coordinate and flat vectors.
    pub samples: usize,
    pub seed: u64,
}

impl Default for ModulusConfig {
    fn default() -> Self {
        ModulusConfig { samples: 32, seed: 0 }
    }
}

/// `(1 + τ^p)^{1/p} - 1`, the modulus of `ℓp` (both sides).
pub fn lp_modulus_closed_form<T: Real>(p: T, tau: T) -> T {
    if p.is_infinite() {
        return tau.max(T::one()) - T::one();
    }
    (T::one() + tau.powf(p)).powf(p.recip()) - T::one()
}

fn unit_directions<T: Real>(
    space: &SpaceModel<T>,
    coords: std::ops::Range<usize>,
    cfg: &ModulusConfig,
    stream: u64,
) -> Result<Vec<Vector<T>>> {
    let mut raw: Vec<Vector<T>> = coords.clone().map(|i| Vector::unit(Key::index(i))).collect();
    raw.push(Vector::from_entries(coords.clone().map(|i| (Key::index(i), T::one()))));
    let mut rng = crate::scalar::rng(crate::scalar::derive_seed(cfg.seed, stream));
    for _ in 0..cfg.samples {
        raw.push(Vector::from_entries(
            coords
                .clone()
                .map(|i| (Key::index(i), T::lit(rng.gen_range(-1.0..1.0)))),
        ));
    }
    raw.into_iter()
        .filter(|v| !v.is_zero())
        .map(|v| {
            let n = norm(&v, space)?;
            Ok(v.scale(n.recip()))
        })
        .collect()
}

fn check_args<T: Real>(dim: usize, tau: T) -> Result<()> {
    if dim < 4 {
        return Err(Error::InvalidParameter(format!(
            "dimension {dim} too small for a head/tail split (need >= 4)"
        )));
    }
    if !(tau > T::zero() && tau <= T::lit(10.0)) {
        return Err(Error::InvalidParameter(format!("tau = {tau} outside (0, 10]")));
    }
    Ok(())
}

fn samples<T: Real>(
    space: &SpaceModel<T>,
    dim: usize,
    tau: T,
    cfg: &ModulusConfig,
) -> Result<Vec<Vec<T>>> {
    check_args(dim, tau)?;
    let tail = dim.div_ceil(2);
    let head = dim - tail;
    let xs = unit_directions(space, 0..head, cfg, 0)?;
    let ys = unit_directions(space, head..dim, cfg, 1)?;
    xs.iter()
        .map(|x| {
            ys.iter()
                .map(|y| {
                    let mut v = x.clone();
                    v.axpy(tau, y);
                    Ok(norm(&v, space)? - T::one())
                })
                .collect()
        })
        .collect()
}

/// Estimate of `ρ̄(τ) = sup_x inf_Y sup_{y ∈ S_Y} ‖x + τy‖ - 1`.
pub fn aus_modulus_estimate<T: Real>(
    space: &SpaceModel<T>,
    dim: usize,
    tau: T,
    cfg: &ModulusConfig,
) -> Result<T> {
    let table = samples(space, dim, tau, cfg)?;
    Ok(table
        .iter()
        .map(|row| row.iter().copied().fold(T::neg_infinity(), T::max))
        .fold(T::neg_infinity(), T::max))
}

/// Estimate of `δ̄(τ) = inf_x sup_Y inf_{y ∈ S_Y} ‖x + τy‖ - 1`.
pub fn auc_modulus_estimate<T: Real>(
    space: &SpaceModel<T>,
    dim: usize,
    tau: T,
    cfg: &ModulusConfig,
) -> Result<T> {
    let table = samples(space, dim, tau, cfg)?;
    Ok(table
        .iter()
        .map(|row| row.iter().copied().fold(T::infinity(), T::min))
        .fold(T::infinity(), T::min))
}
