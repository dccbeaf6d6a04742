//! k-means vector quantisation for discrete emissions.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const MAX_LLOYD_ITERATIONS: usize = 100;
const MOVEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub centroids: Vec<Vec<f64>>,
}

/// Lloyd run statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookTrace {
    /// Mean squared quantisation error after each assignment step.
    pub distortions: Vec<f64>,
    pub iterations: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Codebook {
    pub fn new(centroids: Vec<Vec<f64>>) -> Result<Self> {
        let cb = Self { centroids };
        cb.validate()?;
        Ok(cb)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.centroids.is_empty() || d == 0 {
            return Err(Error::InvalidModel("codebook is empty".into()));
        }
        if self.centroids.iter().any(|c| c.len() != d || c.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidModel("ragged or non-finite codebook".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Index of the nearest centroid; ties go to the lower index.
    pub fn nearest(&self, v: &[f64]) -> Result<usize> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in self.centroids.iter().enumerate() {
            let d = dist2(v, c);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        Ok(best)
    }
}

/// Maps each vector to its nearest centroid.
pub fn quantize(codebook: &Codebook, vectors: &[Vec<f64>]) -> Result<Vec<usize>> {
    vectors.iter().map(|v| codebook.nearest(v)).collect()
}

pub fn distinct_count(vectors: &[Vec<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = vectors
        .iter()
        .map(|v| v.iter().map(|x| (x + 0.0).to_bits()).collect())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

pub fn train_codebook(vectors: &[Vec<f64>], k: usize, seed: u64) -> Result<Codebook> {
    train_codebook_traced(vectors, k, seed).map(|(cb, _)| cb)
}

/// Lloyd iterations from a seeded farthest-point start: the first centroid
/// is a randomly drawn vector, each further one the vector farthest from
/// the centroids chosen so far.
pub fn train_codebook_traced(vectors: &[Vec<f64>], k: usize, seed: u64) -> Result<(Codebook, CodebookTrace)> {
    let first = vectors.first().ok_or(Error::EmptyTrainingSet)?;
    let d = first.len();
    if d == 0 || vectors.iter().any(|v| v.len() != d || v.iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidParams("vectors must share a positive dimension and be finite".into()));
    }
    let distinct = distinct_count(vectors);
    if k == 0 || k > distinct {
        return Err(Error::KTooLarge { k, available: distinct });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![vectors[rng.random_range(0..vectors.len())].clone()];
    let mut nearest_d: Vec<f64> = vectors.iter().map(|v| dist2(v, &centroids[0])).collect();
    while centroids.len() < k {
        let mut far = 0;
        for (i, &dd) in nearest_d.iter().enumerate() {
            if dd > nearest_d[far] {
                far = i;
            }
        }
        let c = vectors[far].clone();
        for (nd, v) in nearest_d.iter_mut().zip(vectors) {
            *nd = nd.min(dist2(v, &c));
        }
        centroids.push(c);
    }

    let mut cb = Codebook { centroids };
    let mut trace = CodebookTrace {
        distortions: Vec::new(),
        iterations: 0,
    };
    let n = vectors.len() as f64;
    loop {
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        let mut distortion = 0.0;
        for v in vectors {
            let j = cb.nearest(v)?;
            distortion += dist2(v, &cb.centroids[j]);
            counts[j] += 1;
            for (s, x) in sums[j].iter_mut().zip(v) {
                *s += x;
            }
        }
        trace.distortions.push(distortion / n);
        if trace.iterations == MAX_LLOYD_ITERATIONS {
            break;
        }
        trace.iterations += 1;
        let mut movement = 0.0f64;
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            let new: Vec<f64> = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            movement = movement.max(dist2(&new, &cb.centroids[j]).sqrt());
            cb.centroids[j] = new;
        }
        if movement < MOVEMENT_TOL {
            break;
        }
    }
    Ok((cb, trace))
}
