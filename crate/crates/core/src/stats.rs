//! Z-score standardisation shared by the classifiers.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Per-dimension mean and population standard deviation. Dimensions with
/// zero variance are dropped: `kept` lists the raw dimensions that survive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub input_dim: usize,
    pub kept: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
        I::IntoIter: Clone,
    {
        let rows = rows.into_iter();
        let first = rows.clone().next().ok_or(Error::EmptyTrainingSet)?;
        let dim = first.len();
        let mut sum = vec![0.0; dim];
        let mut n = 0usize;
        for r in rows.clone() {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParams("non-finite feature value".into()));
            }
            for (s, v) in sum.iter_mut().zip(r) {
                *s += v;
            }
            n += 1;
        }
        let means: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut sq = vec![0.0; dim];
        for r in rows {
            for ((q, v), m) in sq.iter_mut().zip(r).zip(&means) {
                *q += (v - m) * (v - m);
            }
        }
        let mut out = Standardizer {
            input_dim: dim,
            kept: Vec::new(),
            means: Vec::new(),
            stds: Vec::new(),
        };
        for d in 0..dim {
            let sd = (sq[d] / n as f64).sqrt();
            if sd > 0.0 {
                out.kept.push(d);
                out.means.push(means[d]);
                out.stds.push(sd);
            }
        }
        Ok(out)
    }

    pub fn dropped(&self) -> Vec<usize> {
        (0..self.input_dim).filter(|d| !self.kept.contains(d)).collect()
    }

    pub fn output_dim(&self) -> usize {
        self.kept.len()
    }

    pub fn transform(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: raw.len(),
            });
        }
        Ok(self
            .kept
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&d, (m, s))| (raw[d] - m) / s)
            .collect())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.kept.len();
        if self.means.len() != n
            || self.stds.len() != n
            || self.kept.iter().any(|&d| d >= self.input_dim)
            || self.kept.windows(2).any(|w| w[0] >= w[1])
            || self.stds.iter().any(|s| !(s.is_finite() && *s > 0.0))
            || self.means.iter().any(|m| !m.is_finite())
        {
            return Err(Error::InvalidModel("inconsistent standardizer".into()));
        }
        Ok(())
    }
}
