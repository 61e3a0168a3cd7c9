//! k-nearest-neighbour classifier over Euclidean distance.

use super::kdtree::KdTree;
use super::similarity::euclidean_sq;
use super::{check_finite, MlError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::OnceLock;

/// Neighbour-search strategy. Both return identical results; `KdTree` is
/// just faster on low-dimensional data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnBackend {
    Brute,
    KdTree,
}

/// A fitted k-NN classifier.
///
/// Prediction is a majority vote over the `k` nearest training points by
/// Euclidean distance. Ties are deterministic: a distance tie is broken by
/// lower insertion index, a vote tie falls back to the class of the single
/// nearest neighbour.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    points: Vec<Vec<f64>>,
    labels: Vec<i32>,
    k: usize,
    backend: KnnBackend,
    #[serde(skip)]
    tree: OnceLock<KdTree>,
}

impl KnnModel {
    /// Store the training set. `k ≥ 1` and `len(points) = len(labels) ≥ k`.
    pub fn fit(
        points: Vec<Vec<f64>>,
        labels: Vec<i32>,
        k: usize,
        backend: KnnBackend,
    ) -> Result<Self, MlError> {
        if k == 0 {
            return Err(MlError::InvalidParameter("k must be ≥ 1".into()));
        }
        if points.len() != labels.len() {
            return Err(MlError::InvalidParameter(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if points.len() < k {
            return Err(MlError::InvalidParameter(format!(
                "need at least k={k} training points, got {}",
                points.len()
            )));
        }
        let dim = points[0].len();
        for p in &points {
            check_finite(p)?;
            if p.len() != dim {
                return Err(MlError::DimensionMismatch { expected: dim, got: p.len() });
            }
        }
        Ok(Self { points, labels, k, backend, tree: OnceLock::new() })
    }

    /// Feature dimension the model was fitted on.
    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Configured neighbour count.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Configured search backend.
    pub fn backend(&self) -> KnnBackend {
        self.backend
    }

    /// The `k` nearest training points to `query` as `(index, distance)`,
    /// sorted by `(distance, index)`.
    pub fn neighbours(&self, query: &[f64]) -> Result<Vec<(usize, f64)>, MlError> {
        if query.len() != self.dim() {
            return Err(MlError::DimensionMismatch { expected: self.dim(), got: query.len() });
        }
        check_finite(query)?;
        Ok(match self.backend {
            KnnBackend::Brute => {
                let mut all: Vec<(f64, usize)> = self
                    .points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (euclidean_sq(p, query), i))
                    .collect();
                all.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
                all.truncate(self.k);
                all.into_iter().map(|(d, i)| (i, d.sqrt())).collect()
            }
            KnnBackend::KdTree => {
                let tree = self.tree.get_or_init(|| KdTree::build(&self.points));
                tree.nearest(query, self.k)
            }
        })
    }

    /// Majority-vote class prediction.
    pub fn predict(&self, query: &[f64]) -> Result<i32, MlError> {
        let neighbours = self.neighbours(query)?;
        let mut votes: BTreeMap<i32, usize> = BTreeMap::new();
        for &(idx, _) in &neighbours {
            *votes.entry(self.labels[idx]).or_insert(0) += 1;
        }
        let top = votes.values().copied().max().expect("k ≥ 1 neighbours");
        let tied = votes.values().filter(|&&v| v == top).count() > 1;
        if tied {
            return Ok(self.labels[neighbours[0].0]);
        }
        Ok(*votes.iter().find(|(_, &v)| v == top).map(|(l, _)| l).expect("has a winner"))
    }
}

impl PartialEq for KnnModel {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points
            && self.labels == other.labels
            && self.k == other.k
            && self.backend == other.backend
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_model(k: usize, backend: KnnBackend) -> KnnModel {
        // Two clumps on a line: class 1 near 0, class 2 near 10.
        let points = vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0], vec![11.0]];
        let labels = vec![1, 1, 1, 2, 2];
        KnnModel::fit(points, labels, k, backend).unwrap()
    }

    #[test]
    fn k1_returns_nearest_label() {
        for backend in [KnnBackend::Brute, KnnBackend::KdTree] {
            let model = simple_model(1, backend);
            assert_eq!(model.predict(&[10.4]).unwrap(), 2);
            assert_eq!(model.predict(&[0.6]).unwrap(), 1);
        }
    }

    #[test]
    fn k3_majority_wins() {
        let model = simple_model(3, KnnBackend::Brute);
        // Neighbours of 8.0 are {10, 11, 2} → labels {2, 2, 1} → 2.
        assert_eq!(model.predict(&[8.0]).unwrap(), 2);
    }

    #[test]
    fn vote_tie_falls_back_to_single_nearest() {
        let points = vec![vec![0.0], vec![4.0]];
        let labels = vec![7, 9];
        let model = KnnModel::fit(points, labels, 2, KnnBackend::Brute).unwrap();
        assert_eq!(model.predict(&[1.0]).unwrap(), 7);
        assert_eq!(model.predict(&[3.0]).unwrap(), 9);
        // Exactly halfway: both neighbours tie on distance too, index 0 is
        // scanned first, so its label wins the fallback.
        assert_eq!(model.predict(&[2.0]).unwrap(), 7);
    }

    #[test]
    fn fit_validates_shapes() {
        assert!(KnnModel::fit(vec![vec![0.0]], vec![1, 2], 1, KnnBackend::Brute).is_err());
        assert!(KnnModel::fit(vec![vec![0.0]], vec![1], 2, KnnBackend::Brute).is_err());
        assert!(KnnModel::fit(vec![vec![0.0]], vec![1], 0, KnnBackend::Brute).is_err());
    }

    #[test]
    fn serde_round_trip_preserves_model() {
        let model = simple_model(3, KnnBackend::KdTree);
        let json = serde_json::to_string(&model).unwrap();
        let back: KnnModel = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
        assert_eq!(back.predict(&[8.0]).unwrap(), 2);
    }
}
