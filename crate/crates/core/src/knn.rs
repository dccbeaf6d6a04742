//! k-nearest-neighbour classification with a reject option.
//!
//! Features are z-scored with constants estimated on the training set and
//! compared by Euclidean distance. The `k` nearest training samples vote; a
//! class wins only with strictly more votes than every other class. A vote
//! tie rejects the query, and so does a k-th neighbour farther than the
//! optional `reject_distance`.

use crate::error::{Error, Result};
use crate::stats::Standardizer;
use crate::Label;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredSample {
    pub label: Label,
    /// Standardised features over the kept dimensions.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub reject_distance: Option<f64>,
    pub normalization: Standardizer,
    pub samples: Vec<StoredSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Class(Label),
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    VoteTie,
    TooFar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub outcome: Outcome,
    pub reject_reason: Option<RejectReason>,
    /// Training indices of the neighbours, nearest first.
    pub neighbor_ids: Vec<usize>,
    pub votes: BTreeMap<Label, usize>,
    /// Distance to the k-th neighbour in standardised space.
    pub max_distance_used: f64,
}

impl Decision {
    pub fn label(&self) -> Option<Label> {
        match self.outcome {
            Outcome::Class(l) => Some(l),
            Outcome::Reject => None,
        }
    }
}

pub fn knn_fit(samples: &[LabeledSample], k: usize, reject_distance: Option<f64>) -> Result<KnnModel> {
    if samples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if k == 0 || k > samples.len() {
        return Err(Error::KTooLarge {
            k,
            available: samples.len(),
        });
    }
    if let Some(d) = reject_distance {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidParams(format!("reject distance {d} must be positive")));
        }
    }
    let normalization = Standardizer::fit(samples.iter().map(|s| s.features.as_slice()))?;
    let samples = samples
        .iter()
        .map(|s| {
            Ok(StoredSample {
                label: s.label,
                values: normalization.transform(&s.features)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KnnModel {
        k,
        reject_distance,
        normalization,
        samples,
    })
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl KnnModel {
    pub fn dim(&self) -> usize {
        self.normalization.input_dim
    }

    /// Labels without any training sample.
    pub fn missing_classes(&self) -> Vec<Label> {
        Label::ALL
            .into_iter()
            .filter(|l| !self.samples.iter().any(|s| s.label == *l))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.normalization.validate()?;
        if self.samples.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if self.k == 0 || self.k > self.samples.len() {
            return Err(Error::KTooLarge {
                k: self.k,
                available: self.samples.len(),
            });
        }
        let d = self.normalization.output_dim();
        if self.samples.iter().any(|s| s.values.len() != d) {
            return Err(Error::InvalidModel("stored sample dimension mismatch".into()));
        }
        if matches!(self.reject_distance, Some(r) if !(r.is_finite() && r > 0.0)) {
            return Err(Error::InvalidModel("reject distance must be positive".into()));
        }
        Ok(())
    }

    pub fn classify(&self, query: &[f64]) -> Result<Decision> {
        let q = self.normalization.transform(query)?;
        let mut heap = BinaryHeap::with_capacity(self.k + 1);
        for (index, s) in self.samples.iter().enumerate() {
            let dist2: f64 = s.values.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
            let cand = Candidate { dist2, index };
            if heap.len() < self.k {
                heap.push(cand);
            } else if heap.peek().is_some_and(|worst| cand < *worst) {
                heap.pop();
                heap.push(cand);
            }
        }
        let nearest = heap.into_sorted_vec();
        let mut votes = BTreeMap::new();
        for c in &nearest {
            *votes.entry(self.samples[c.index].label).or_insert(0) += 1;
        }
        let max_distance_used = nearest.last().map_or(0.0, |c| c.dist2.sqrt());
        let top = votes.values().copied().max().unwrap_or(0);
        let leaders: Vec<Label> = votes
            .iter()
            .filter(|(_, &v)| v == top)
            .map(|(&l, _)| l)
            .collect();

        let reject_reason = if self.reject_distance.is_some_and(|r| max_distance_used > r) {
            Some(RejectReason::TooFar)
        } else if leaders.len() != 1 {
            Some(RejectReason::VoteTie)
        } else {
            None
        };
        let outcome = match reject_reason {
            Some(_) => Outcome::Reject,
            None => Outcome::Class(leaders[0]),
        };
        Ok(Decision {
            outcome,
            reject_reason,
            neighbor_ids: nearest.iter().map(|c| c.index).collect(),
            votes,
            max_distance_used,
        })
    }
}

pub fn knn_classify(model: &KnnModel, query: &[f64]) -> Result<Decision> {
    model.classify(query)
}
