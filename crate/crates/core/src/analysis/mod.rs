//! Measurements on finite maps: distortion, coarse moduli, the filtration
//! counting argument, its integer certificate and the concentration toolkit.

mod certificate;
mod coarse;
mod concentration;
mod distortion;
mod filtration;

pub use certificate::{certificate, certificate_with, Certificate};
pub use coarse::{coarse_moduli, coarse_moduli_of_points, CoarseModuli};
pub use concentration::{
    concentration_search, hamming_metric, james_sum, kr_inequality, ConcentrationConfig, ConcentrationReport,
    JamesModel, KrCheck,
};
pub use distortion::{
    distortion, distortion_of_points, DistortionConfig, DistortionReport, PairWitness, ScanMode,
};
pub use filtration::{
    band_sandwich, counting_bounds, filtration_decompose, CountingBounds, MidpointWindow, Sandwich, WRow, WTable,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{rho, HyperbolicTree};

/// A finite metric space given by labels and a full distance table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMetric {
    labels: Vec<String>,
    distances: Vec<Vec<f64>>,
}

impl FiniteMetric {
    /// Checks shape, symmetry, positivity and the triangle inequality.
    pub fn new(labels: Vec<String>, distances: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if distances.len() != n || distances.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeMismatch(format!("{n} labels need an {n}x{n} distance table")));
        }
        for i in 0..n {
            if distances[i][i] != 0.0 {
                return Err(Error::InvalidParameter(format!("d({i},{i}) must be 0")));
            }
            for j in 0..n {
                let d = distances[i][j];
                if !d.is_finite() || d != distances[j][i] || (i != j && d <= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "d({i},{j}) must be finite, symmetric and positive"
                    )));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let excess = distances[i][k] - distances[i][j] - distances[j][k];
                    if excess > 1e-12 * distances[i][k] {
                        return Err(Error::NotMetric { i, j, k, excess });
                    }
                }
            }
        }
        Ok(FiniteMetric { labels, distances })
    }

    /// The node set of a tree under `ρ`, in level order.
    pub fn from_tree(tree: &HyperbolicTree) -> Self {
        let nodes = tree.enumerate();
        let distances = nodes
            .iter()
            .map(|s| nodes.iter().map(|t| rho(s, t) as f64).collect())
            .collect();
        FiniteMetric { labels: nodes.iter().map(|s| s.to_slash()).collect(), distances }
    }

    /// A root joined to `leaves` leaves by unit edges.
    pub fn star(leaves: usize) -> Self {
        let n = leaves + 1;
        let distances = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| match (i, j) {
                        _ if i == j => 0.0,
                        (0, _) | (_, 0) => 1.0,
                        _ => 2.0,
                    })
                    .collect()
            })
            .collect();
        let labels = std::iter::once("root".to_string())
            .chain((1..n).map(|i| format!("leaf{i}")))
            .collect();
        FiniteMetric { labels, distances }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i][j]
    }

    pub fn distances(&self) -> &[Vec<f64>] {
        &self.distances
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_violation_is_reported() {
        let labels = vec!["a".into(), "b".into(), "c".into()];
        let d = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        match FiniteMetric::new(labels, d) {
            Err(Error::NotMetric { i, j, k, excess }) => {
                assert_eq!((i, j, k), (0, 1, 2));
                assert_eq!(excess, 3.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tree_metric_validates() {
        let m = FiniteMetric::from_tree(&HyperbolicTree::integer(2, 2).unwrap());
        assert!(FiniteMetric::new(m.labels().to_vec(), m.distances().to_vec()).is_ok());
        assert_eq!(FiniteMetric::star(3).distance(1, 2), 2.0);
    }
}
