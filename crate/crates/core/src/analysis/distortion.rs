//! Bi-Lipschitz distortion of a finite map by pair scan.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FiniteMetric;
use crate::embeddings::EmbeddingMap;
use crate::error::{Error, Result};
use crate::scalar::{rng, Real};
use crate::spaces::{norm, CompiledNorm, KeyIndex, SpaceModel, Vector};
use crate::tree::{rho, TreeNode};

/// Dense storage is used while `points * keys` stays below this.
const DENSE_LIMIT: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistortionConfig {
    /// Largest pair count scanned exhaustively.
    pub budget: u64,
    /// Pair draws in sampled mode.
    pub samples: u64,
    pub seed: u64,
}

impl Default for DistortionConfig {
    fn default() -> Self {
        DistortionConfig { budget: 10_000_000, samples: 1_000_000, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ScanMode {
    Exhaustive,
    Sampled { samples: u64, seed: u64 },
}

/// A pair attaining one of the extreme ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairWitness {
    pub i: usize,
    pub j: usize,
    pub left: String,
    pub right: String,
    pub source_distance: f64,
    pub image_distance: f64,
    /// `image_distance / source_distance`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub lip: f64,
    /// The `c` with `‖f(x) - f(y)‖ ≥ d(x, y) / c`.
    pub colip_inverse: f64,
    pub distortion: f64,
    pub lip_witness: PairWitness,
    pub colip_witness: PairWitness,
    pub pairs: u64,
    pub points: usize,
    #[serde(flatten)]
    pub mode: ScanMode,
    /// Relative rounding tolerance of the norm evaluations.
    pub tolerance: f64,
}

trait Source: Sync {
    fn len(&self) -> usize;
    fn distance(&self, i: usize, j: usize) -> f64;
    fn label(&self, i: usize) -> String;
}

struct TreeSource<'a>(&'a [TreeNode]);

impl Source for TreeSource<'_> {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn distance(&self, i: usize, j: usize) -> f64 {
        rho(&self.0[i], &self.0[j]) as f64
    }
    fn label(&self, i: usize) -> String {
        self.0[i].to_slash()
    }
}

impl Source for FiniteMetric {
    fn len(&self) -> usize {
        self.len()
    }
    fn distance(&self, i: usize, j: usize) -> f64 {
        self.distance(i, j)
    }
    fn label(&self, i: usize) -> String {
        self.labels()[i].clone()
    }
}

enum Images<'a, T> {
    Dense { rows: Vec<Vec<T>>, norm: CompiledNorm<T> },
    Sparse { images: &'a [Vector<T>], space: &'a SpaceModel<T> },
}

impl<'a, T: Real> Images<'a, T> {
    fn new(images: &'a [Vector<T>], space: &'a SpaceModel<T>) -> Result<Self> {
        space.validate()?;
        let index = KeyIndex::from_vectors(images);
        if images.len().saturating_mul(index.len().max(1)) <= DENSE_LIMIT {
            let norm = space.compile(&index)?;
            let rows = images.iter().map(|v| v.to_dense(&index)).collect();
            Ok(Images::Dense { rows, norm })
        } else {
            for v in images {
                norm(v, space)?;
            }
            Ok(Images::Sparse { images, space })
        }
    }

    fn dist(&self, i: usize, j: usize, scratch: &mut Vec<T>) -> f64 {
        match self {
            Images::Dense { rows, norm } => norm.dist(&rows[i], &rows[j], scratch).to_f64_lossy(),
            Images::Sparse { images, space } => norm(&images[i].sub(&images[j]), space)
                .map(|x| x.to_f64_lossy())
                .unwrap_or(f64::NAN),
        }
    }
}

#[derive(Clone, Copy)]
struct Extremes {
    max: (f64, usize, usize),
    min: (f64, usize, usize),
    zero: Option<(usize, usize)>,
}

impl Extremes {
    fn empty() -> Self {
        Extremes {
            max: (f64::NEG_INFINITY, usize::MAX, usize::MAX),
            min: (f64::INFINITY, usize::MAX, usize::MAX),
            zero: None,
        }
    }

    fn push(mut self, r: f64, i: usize, j: usize) -> Self {
        if r == 0.0 && self.zero.is_none_or(|z| (i, j) < z) {
            self.zero = Some((i, j));
        }
        if r > self.max.0 || (r == self.max.0 && (i, j) < (self.max.1, self.max.2)) {
            self.max = (r, i, j);
        }
        if r < self.min.0 || (r == self.min.0 && (i, j) < (self.min.1, self.min.2)) {
            self.min = (r, i, j);
        }
        self
    }

    fn merge(self, o: Self) -> Self {
        let mut out = self;
        if o.max.1 != usize::MAX {
            out = out.push(o.max.0, o.max.1, o.max.2).push(o.min.0, o.min.1, o.min.2);
        }
        out.zero = match (self.zero, o.zero) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        out
    }
}

fn scan<T: Real>(source: &dyn Source, images: &Images<'_, T>, config: &DistortionConfig) -> Result<DistortionReport> {
    let n = source.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    if config.budget == 0 {
        return Err(Error::Budget("budget must be positive".into()));
    }
    let total = (n as u64) * (n as u64 - 1) / 2;
    let ratio = |i: usize, j: usize, scratch: &mut Vec<T>| images.dist(i, j, scratch) / source.distance(i, j);

    let (ext, pairs, mode) = if total <= config.budget {
        let ext = (0..n)
            .into_par_iter()
            .map_init(Vec::new, |scratch, i| {
                ((i + 1)..n).fold(Extremes::empty(), |e, j| e.push(ratio(i, j, scratch), i, j))
            })
            .reduce(Extremes::empty, Extremes::merge);
        (ext, total, ScanMode::Exhaustive)
    } else {
        if config.samples == 0 {
            return Err(Error::Budget("sampled mode needs a positive sample count".into()));
        }
        let mut r = rng(config.seed);
        let draws: Vec<(usize, usize)> = (0..config.samples)
            .map(|_| {
                let i = r.gen_range(0..n);
                let mut j = r.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                (i.min(j), i.max(j))
            })
            .collect();
        let ext = draws
            .par_iter()
            .map_init(Vec::new, |scratch, &(i, j)| Extremes::empty().push(ratio(i, j, scratch), i, j))
            .reduce(Extremes::empty, Extremes::merge);
        (ext, config.samples, ScanMode::Sampled { samples: config.samples, seed: config.seed })
    };

    if let Some((i, j)) = ext.zero {
        return Err(Error::NonInjective(source.label(i), source.label(j)));
    }
    if ext.max.0.is_nan() || ext.min.0.is_nan() {
        return Err(Error::InvalidParameter("image distance is not a number".into()));
    }
    let witness = |(r, i, j): (f64, usize, usize)| {
        let d = source.distance(i, j);
        PairWitness {
            i,
            j,
            left: source.label(i),
            right: source.label(j),
            source_distance: d,
            image_distance: r * d,
            ratio: r,
        }
    };
    let lip = ext.max.0;
    let colip_inverse = 1.0 / ext.min.0;
    Ok(DistortionReport {
        lip,
        colip_inverse,
        distortion: lip * colip_inverse,
        lip_witness: witness(ext.max),
        colip_witness: witness(ext.min),
        pairs,
        points: n,
        mode,
        tolerance: 64.0 * T::epsilon().to_f64_lossy(),
    })
}

/// Distortion of a tree map against `ρ`.
pub fn distortion<T: Real>(map: &EmbeddingMap<T>, config: &DistortionConfig) -> Result<DistortionReport> {
    let images = Images::new(map.images(), map.target())?;
    scan(&TreeSource(map.nodes()), &images, config)
}

/// Distortion of an explicit point map `metric[i] ↦ images[i]`.
pub fn distortion_of_points<T: Real>(
    metric: &FiniteMetric,
    images: &[Vector<T>],
    space: &SpaceModel<T>,
    config: &DistortionConfig,
) -> Result<DistortionReport> {
    if images.len() != metric.len() {
        return Err(Error::SizeMismatch { left: metric.len(), right: images.len() });
    }
    let images = Images::new(images, space)?;
    scan(metric, &images, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::embed_l1;
    use crate::spaces::Key;
    use crate::systems::BiorthSystem;
    use crate::tree::HyperbolicTree;

    #[test]
    fn canonical_l1_is_isometric() {
        let sys = BiorthSystem::<f64>::canonical(&HyperbolicTree::integer(3, 2).unwrap());
        let f = embed_l1(&sys).unwrap();
        let r = distortion(&f, &DistortionConfig::default()).unwrap();
        assert_eq!(r.distortion, 1.0);
        assert_eq!(r.pairs, 15 * 14 / 2);
        assert_eq!(r.mode, ScanMode::Exhaustive);
        let r2 = distortion(&f.scaled(2.0), &DistortionConfig::default()).unwrap();
        assert_eq!(r2.distortion, 1.0);
        assert_eq!(r2.lip, 2.0);
    }

    #[test]
    fn witnesses_reproduce_ratios() {
        let m = FiniteMetric::star(3);
        let pts = [(0.0, 0.0), (1.0, 0.0), (-0.5, 0.8), (-0.5, -0.9)];
        let images: Vec<Vector<f64>> = pts
            .iter()
            .map(|&(x, y)| Vector::from_entries([(Key::index(0), x), (Key::index(1), y)]))
            .collect();
        let r = distortion_of_points(&m, &images, &SpaceModel::l2(), &DistortionConfig::default()).unwrap();
        for w in [&r.lip_witness, &r.colip_witness] {
            let d = norm(&images[w.i].sub(&images[w.j]), &SpaceModel::l2()).unwrap();
            assert!((d / m.distance(w.i, w.j) - w.ratio).abs() < 1e-12);
        }
        assert!((r.lip - r.lip_witness.ratio).abs() < 1e-12);
        assert!((r.colip_inverse - 1.0 / r.colip_witness.ratio).abs() < 1e-12);
        assert!(r.distortion >= 1.0);
    }

    #[test]
    fn two_points_and_errors() {
        let m = FiniteMetric::new(vec!["a".into(), "b".into()], vec![vec![0.0, 3.0], vec![3.0, 0.0]]).unwrap();
        let im = vec![Vector::zero(), Vector::unit(Key::index(4)).scale(7.0)];
        let r = distortion_of_points(&m, &im, &SpaceModel::l1(), &DistortionConfig::default()).unwrap();
        assert_eq!(r.distortion, 1.0);
        let same = vec![Vector::<f64>::zero(), Vector::zero()];
        assert!(matches!(
            distortion_of_points(&m, &same, &SpaceModel::l1(), &DistortionConfig::default()),
            Err(Error::NonInjective(..))
        ));
        let bad = DistortionConfig { budget: 0, ..Default::default() };
        assert!(matches!(distortion_of_points(&m, &im, &SpaceModel::l1(), &bad), Err(Error::Budget(_))));
    }

    #[test]
    fn sampling_is_seeded() {
        let sys = BiorthSystem::<f64>::perturbed(&HyperbolicTree::integer(4, 2).unwrap(), 0.001, 3).unwrap();
        let f = embed_l1(&sys).unwrap();
        let cfg = DistortionConfig { budget: 10, samples: 200, seed: 9 };
        let a = distortion(&f, &cfg).unwrap();
        let b = distortion(&f, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mode, ScanMode::Sampled { samples: 200, seed: 9 });
        let full = distortion(&f, &DistortionConfig::default()).unwrap();
        assert!(a.lip <= full.lip && a.colip_inverse <= full.colip_inverse);
    }
}
