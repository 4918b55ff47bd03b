//! k-subsets under the Hamming metric, James-type sums and a heuristic
//! search for sub-alphabets on which a map has small image diameter.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{rng, Real};
use crate::spaces::{norm, Key, SpaceModel, Vector};

fn check_subset(a: &[u32]) -> Result<()> {
    if a.first() == Some(&0) || a.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::NotSubset(a.to_vec()));
    }
    Ok(())
}

/// Number of positions where two sorted k-subsets differ.
pub fn hamming_metric(a: &[u32], b: &[u32]) -> Result<usize> {
    check_subset(a)?;
    check_subset(b)?;
    if a.len() != b.len() {
        return Err(Error::SizeMismatch { left: a.len(), right: b.len() });
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JamesModel {
    /// `x_n = e_n` in `ℓ1`.
    L1Basis,
    /// `x_n = e_1 + ... + e_n` in `c0`.
    SummingBasis,
}

impl JamesModel {
    pub fn space<T: Real>(self) -> SpaceModel<T> {
        match self {
            JamesModel::L1Basis => SpaceModel::l1(),
            JamesModel::SummingBasis => SpaceModel::linf(),
        }
    }

    /// Separation constant of interleaved sets.
    pub fn theta(self) -> f64 {
        match self {
            JamesModel::L1Basis => 2.0,
            JamesModel::SummingBasis => 1.0,
        }
    }
}

/// `h(A) = x_{a_1} + ... + x_{a_k}`.
pub fn james_sum<T: Real>(model: JamesModel, a: &[u32]) -> Vector<T> {
    match model {
        JamesModel::L1Basis => Vector::from_entries(a.iter().map(|&n| (Key::index(n as usize), T::one()))),
        JamesModel::SummingBasis => {
            let mut sorted = a.to_vec();
            sorted.sort_unstable();
            let mut out = Vector::zero();
            let mut prev = 0u32;
            for (idx, &n) in sorted.iter().enumerate() {
                let count = T::from_usize_lossy(sorted.len() - idx);
                for i in (prev + 1)..=n {
                    out.set(Key::index(i as usize), count);
                }
                prev = n;
            }
            out
        }
    }
}

/// `θk - 1` against `3(2C + 1) k^{1/p}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrCheck {
    pub theta: f64,
    pub k: usize,
    pub c: f64,
    pub p: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs > rhs`.
    pub contradiction: bool,
}

pub fn kr_inequality(theta: f64, k: usize, c: f64, p: f64) -> Result<KrCheck> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    if !(c >= 1.0 && c.is_finite()) || !(theta > 0.0) || k == 0 {
        return Err(Error::InvalidParameter("need C >= 1, theta > 0 and k >= 1".into()));
    }
    let lhs = theta * k as f64 - 1.0;
    let rhs = kr_bound(c, p, k);
    Ok(KrCheck { theta, k, c, p, lhs, rhs, contradiction: lhs > rhs })
}

fn kr_bound(c: f64, p: f64, k: usize) -> f64 {
    let root = if p.is_infinite() { 1.0 } else { (k as f64).powf(1.0 / p) };
    3.0 * (2.0 * c + 1.0) * root
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcentrationConfig {
    /// Total diameter evaluations across restarts.
    pub budget: usize,
    pub restarts: usize,
    /// Alphabets with at most this many k-subsets are scanned exhaustively.
    pub exact_subsets: usize,
    /// Random subset pairs per estimated diameter.
    pub samples: usize,
    pub seed: u64,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        ConcentrationConfig { budget: 200, restarts: 4, exact_subsets: 400, samples: 64, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub k: usize,
    pub c: f64,
    pub p: f64,
    pub best_alphabet: Vec<u32>,
    pub best_diameter: f64,
    /// `false` when the diameter is a lower estimate from sampled pairs.
    pub diameter_exact: bool,
    pub kr_bound: f64,
    pub met: bool,
    pub evaluations: usize,
    pub heuristic: bool,
    pub note: String,
    pub seed: u64,
}

fn binomial_at_most(n: usize, k: usize, cap: usize) -> bool {
    let mut acc: u128 = 1;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > cap as u128 {
            return false;
        }
    }
    true
}

fn k_subsets(alphabet: &[u32], k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| alphabet[i]).collect());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + alphabet.len() - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        if idx[i] == i + alphabet.len() - k {
            return out;
        }
        idx[i] += 1;
        for t in (i + 1)..k {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

struct Diameter<'a, T> {
    f: &'a (dyn Fn(&[u32]) -> Vector<T> + Sync),
    space: &'a SpaceModel<T>,
    k: usize,
    config: ConcentrationConfig,
}

impl<T: Real> Diameter<'_, T> {
    fn dist(&self, a: &[u32], b: &[u32]) -> Result<f64> {
        Ok(norm(&(self.f)(a).sub(&(self.f)(b)), self.space)?.to_f64_lossy())
    }

    /// Exact diameter of `f` on the k-subsets of `alphabet`, or a lower estimate.
    fn of(&self, alphabet: &[u32], stream: &mut impl Rng) -> Result<(f64, bool)> {
        let k = self.k;
        if binomial_at_most(alphabet.len(), k, self.config.exact_subsets) {
            let subsets = k_subsets(alphabet, k);
            let images: Vec<Vector<T>> = subsets.iter().map(|s| (self.f)(s)).collect();
            let mut best = 0.0f64;
            for i in 0..images.len() {
                for j in (i + 1)..images.len() {
                    best = best.max(norm(&images[i].sub(&images[j]), self.space)?.to_f64_lossy());
                }
            }
            return Ok((best, true));
        }
        let head = &alphabet[..k];
        let tail = &alphabet[alphabet.len() - k..];
        let evens: Vec<u32> = alphabet.iter().step_by(2).take(k).copied().collect();
        let odds: Vec<u32> = alphabet.iter().skip(1).step_by(2).take(k).copied().collect();
        let mut best = self.dist(head, tail)?;
        if odds.len() == k && evens.len() == k {
            best = best.max(self.dist(&evens, &odds)?);
        }
        for _ in 0..self.config.samples {
            let mut a: Vec<u32> = alphabet.choose_multiple(stream, k).copied().collect();
            let mut b: Vec<u32> = alphabet.choose_multiple(stream, k).copied().collect();
            a.sort_unstable();
            b.sort_unstable();
            best = best.max(self.dist(&a, &b)?);
        }
        Ok((best, false))
    }
}

/// Local search over alphabets `M ⊂ {1..n}` with `|M| = 2k`, minimizing the
/// image diameter of `f` on k-subsets of `M`.
pub fn concentration_search<T: Real>(
    f: &(dyn Fn(&[u32]) -> Vector<T> + Sync),
    space: &SpaceModel<T>,
    n: usize,
    k: usize,
    c: f64,
    p: f64,
    config: ConcentrationConfig,
) -> Result<ConcentrationReport> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if n < 2 * k {
        return Err(Error::InvalidParameter(format!("need n >= 2k, got n = {n}, k = {k}")));
    }
    if config.budget == 0 || config.restarts == 0 {
        return Err(Error::Budget("budget and restarts must be positive".into()));
    }
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    let diam = Diameter { f, space, k, config };
    let mut stream = rng(config.seed);
    let universe: Vec<u32> = (1..=n as u32).collect();
    let per_restart = (config.budget / config.restarts).max(1);
    let mut evaluations = 0;
    let mut best: Option<(f64, bool, Vec<u32>)> = None;
    for restart in 0..config.restarts {
        let mut alphabet: Vec<u32> = if restart == 0 {
            universe[..2 * k].to_vec()
        } else {
            universe.choose_multiple(&mut stream, 2 * k).copied().collect()
        };
        alphabet.sort_unstable();
        let (mut cur, mut exact) = diam.of(&alphabet, &mut stream)?;
        evaluations += 1;
        for _ in 1..per_restart {
            if cur == 0.0 || n == 2 * k {
                break;
            }
            let out = stream.gen_range(0..alphabet.len());
            let candidates: Vec<u32> = universe.iter().filter(|x| !alphabet.contains(x)).copied().collect();
            let incoming = *candidates.choose(&mut stream).expect("n > 2k");
            let mut next = alphabet.clone();
            next[out] = incoming;
            next.sort_unstable();
            let (d, e) = diam.of(&next, &mut stream)?;
            evaluations += 1;
            if d < cur {
                alphabet = next;
                cur = d;
                exact = e;
            }
        }
        if best.as_ref().is_none_or(|b| cur < b.0) {
            best = Some((cur, exact, alphabet));
        }
    }
    let (best_diameter, diameter_exact, best_alphabet) = best.expect("at least one restart");
    let bound = kr_bound(c, p, k);
    Ok(ConcentrationReport {
        n,
        k,
        c,
        p,
        best_alphabet,
        best_diameter,
        diameter_exact,
        kr_bound: bound,
        met: best_diameter <= bound,
        evaluations,
        heuristic: true,
        note: "heuristic search over finite alphabets; the statement concerns infinite subsets".into(),
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming_metric(&[1, 2, 3], &[1, 2, 3]).unwrap(), 0);
        assert_eq!(hamming_metric(&[1, 2, 3], &[1, 2, 4]).unwrap(), 1);
        assert_eq!(hamming_metric(&[1, 2], &[3, 4]).unwrap(), 2);
        assert!(matches!(hamming_metric(&[1], &[1, 2]), Err(Error::SizeMismatch { .. })));
        assert!(matches!(hamming_metric(&[2, 1], &[1, 2]), Err(Error::NotSubset(_))));
    }

    #[test]
    fn james_examples() {
        let d = james_sum::<f64>(JamesModel::L1Basis, &[1, 2]).sub(&james_sum(JamesModel::L1Basis, &[3, 4]));
        assert_eq!(norm(&d, &SpaceModel::l1()).unwrap(), 4.0);
        let d = james_sum::<f64>(JamesModel::SummingBasis, &[1]).sub(&james_sum(JamesModel::SummingBasis, &[2]));
        assert_eq!(norm(&d, &SpaceModel::linf()).unwrap(), 1.0);
        let h = james_sum::<f64>(JamesModel::SummingBasis, &[2, 4]);
        assert_eq!(h.get(&Key::index(1)), 2.0);
        assert_eq!(h.get(&Key::index(3)), 1.0);
        assert_eq!(h.get(&Key::index(5)), 0.0);
    }

    #[test]
    fn kr_flips_between_small_and_large_k() {
        let small = kr_inequality(2.0, 9, 1.0, 2.0).unwrap();
        assert_eq!((small.lhs, small.rhs, small.contradiction), (17.0, 27.0, false));
        assert!(kr_inequality(2.0, 100, 1.0, 2.0).unwrap().contradiction);
    }

    #[test]
    fn subsets_enumerate() {
        assert_eq!(k_subsets(&[1, 2, 3, 4], 2).len(), 6);
        assert_eq!(k_subsets(&[5, 7], 2), vec![vec![5, 7]]);
        assert_eq!(k_subsets(&[1, 2, 3], 1).len(), 3);
    }

    #[test]
    fn constant_map_concentrates() {
        let f = |_: &[u32]| Vector::<f64>::unit(Key::index(0));
        let r = concentration_search(&f, &SpaceModel::l1(), 8, 2, 1.0, 2.0, ConcentrationConfig::default()).unwrap();
        assert_eq!(r.best_diameter, 0.0);
        assert!(r.met && r.diameter_exact);
    }

    #[test]
    fn james_l1_search_is_seeded() {
        let f = |a: &[u32]| james_sum::<f64>(JamesModel::L1Basis, a);
        let cfg = ConcentrationConfig { budget: 20, seed: 5, ..Default::default() };
        let a = concentration_search(&f, &SpaceModel::l1(), 30, 9, 1.0, 2.0, cfg).unwrap();
        let b = concentration_search(&f, &SpaceModel::l1(), 30, 9, 1.0, 2.0, cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.best_diameter >= 17.0);
        assert!(a.met);
        assert!(concentration_search(&f, &SpaceModel::l1(), 5, 3, 1.0, 2.0, cfg).is_err());
    }
}
