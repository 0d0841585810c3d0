//! Inverse-distance weighted k-nearest-neighbour voting.

use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::dataset::{ClassLabel, NUM_CLASSES};
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub x: Vec<Vec<f64>>,
    pub labels: Vec<ClassLabel>,
    pub k: usize,
    pub epsilon: f64,
}

/// Result of one query.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnVote {
    pub label: ClassLabel,
    /// Sum of `1 / (d + ε)` over the neighbours of each class.
    pub mass: [f64; NUM_CLASSES],
}

impl KnnModel {
    pub fn fit(x: Vec<Vec<f64>>, labels: Vec<ClassLabel>, k: usize, epsilon: f64) -> Result<Self> {
        if x.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: labels.len() });
        }
        if x.is_empty() {
            return Err(Error::InvalidArgument("KNN needs training data".into()));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self { x, labels, k, epsilon })
    }

    pub fn vote(&self, q: &[f64]) -> Result<KnnVote> {
        if self.k > self.x.len() {
            return Err(Error::InvalidArgument(format!(
                "k={} exceeds training size {}",
                self.k,
                self.x.len()
            )));
        }
        let d = self.x[0].len();
        if q.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: q.len() });
        }
        let mut dist: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, xi)| {
                let d2: f64 = xi.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2.sqrt(), i)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut mass = [0.0; NUM_CLASSES];
        let mut total_dist = [0.0; NUM_CLASSES];
        for &(di, i) in &dist[..self.k] {
            let c = self.labels[i].index();
            mass[c] += 1.0 / (di + self.epsilon);
            total_dist[c] += di;
        }
        let mut best = None::<usize>;
        for c in 0..NUM_CLASSES {
            if mass[c] == 0.0 {
                continue;
            }
            best = match best {
                None => Some(c),
                Some(b) if mass[c] > mass[b] || (mass[c] == mass[b] && total_dist[c] < total_dist[b]) => {
                    Some(c)
                }
                keep => keep,
            };
        }
        Ok(KnnVote {
            label: ClassLabel::from_index(best.expect("k >= 1 gives at least one vote"))?,
            mass,
        })
    }
}

impl Classifier for KnnModel {
    /// Vote mass normalized to sum to one.
    fn scores(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        let v = self.vote(x)?;
        let total: f64 = v.mass.iter().sum();
        Ok(v.mass.map(|m| m / total))
    }

    fn predict(&self, x: &[f64]) -> Result<ClassLabel> {
        Ok(self.vote(x)?.label)
    }
}
