//! Discrete hidden Markov models over sliding-window observations of a map.
//!
//! A map is cut into overlapping full-width row bands ([`window`]), each band
//! is summarised by a small feature vector, and the vectors are quantised to
//! symbols with a k-means [`codebook`]. One HMM per class is trained with
//! [`baum_welch`](baum_welch::baum_welch) and a sequence is assigned to the
//! class whose model explains it best ([`hmm_classify`]).

pub mod bank;
pub mod baum_welch;
pub mod codebook;
pub mod window;

pub use bank::{HmmBank, HmmBankConfig};
pub use baum_welch::{baum_welch, BaumWelch, BaumWelchConfig, DegenerateRow, TrainingReport};
pub use codebook::{quantize, train_codebook, Codebook};
pub use window::{extract_observation_windows, window_starts, WindowFeatures, WindowParams};

use crate::error::{Error, Result};
use crate::Label;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_STATES: usize = 5;
pub const DEFAULT_SYMBOLS: usize = 16;

/// Tolerance used when validating externally supplied probabilities.
const STOCHASTIC_TOL: f64 = 1e-9;

/// Initial distribution `pi`, transitions `a` (N×N) and emissions `b` (N×M).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmParams {
    pub n_states: usize,
    pub n_symbols: usize,
    pub pi: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

fn check_distribution(row: &[f64], len: usize, what: &str) -> Result<()> {
    if row.len() != len {
        return Err(Error::InvalidModel(format!("{what} has {} entries, expected {len}", row.len())));
    }
    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidModel(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {s}")));
    }
    Ok(())
}

impl HmmParams {
    pub fn new(pi: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Result<Self> {
        let p = Self {
            n_states: pi.len(),
            n_symbols: b.first().map_or(0, Vec::len),
            pi,
            a,
            b,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n_states, self.n_symbols);
        if n == 0 || m == 0 {
            return Err(Error::InvalidModel("need at least one state and one symbol".into()));
        }
        check_distribution(&self.pi, n, "pi")?;
        if self.a.len() != n || self.b.len() != n {
            return Err(Error::InvalidModel("transition/emission row count != n_states".into()));
        }
        for (i, row) in self.a.iter().enumerate() {
            check_distribution(row, n, &format!("a[{i}]"))?;
        }
        for (i, row) in self.b.iter().enumerate() {
            check_distribution(row, m, &format!("b[{i}]"))?;
        }
        Ok(())
    }

    /// Left-to-right model with self loops, starting in state 0 and with
    /// uniform emissions.
    pub fn bakis(n_states: usize, n_symbols: usize) -> Result<Self> {
        if n_states == 0 || n_symbols == 0 {
            return Err(Error::InvalidParams("need at least one state and one symbol".into()));
        }
        let mut pi = vec![0.0; n_states];
        pi[0] = 1.0;
        let a = (0..n_states)
            .map(|i| {
                let mut row = vec![0.0; n_states];
                if i + 1 < n_states {
                    row[i] = 0.5;
                    row[i + 1] = 0.5;
                } else {
                    row[i] = 1.0;
                }
                row
            })
            .collect();
        let b = vec![vec![1.0 / n_symbols as f64; n_symbols]; n_states];
        Self::new(pi, a, b)
    }

    /// Dense model with every entry drawn uniformly and rows normalised.
    pub fn random<R: Rng + ?Sized>(n_states: usize, n_symbols: usize, rng: &mut R) -> Self {
        let mut row = |len: usize| {
            let v: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let pi = row(n_states);
        let a = (0..n_states).map(|_| row(n_states)).collect();
        let b = (0..n_states).map(|_| row(n_symbols)).collect();
        Self {
            n_states,
            n_symbols,
            pi,
            a,
            b,
        }
    }

    /// Draws a state path and its observations.
    pub fn sample<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> (Vec<usize>, ObservationSequence) {
        fn draw<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, &pi) in p.iter().enumerate() {
                acc += pi;
                if u < acc {
                    return i;
                }
            }
            p.iter().rposition(|&x| x > 0.0).unwrap_or(0)
        }
        let mut states = Vec::with_capacity(len);
        let mut symbols = Vec::with_capacity(len);
        let mut s = draw(&self.pi, rng);
        for t in 0..len {
            if t > 0 {
                s = draw(&self.a[s], rng);
            }
            states.push(s);
            symbols.push(draw(&self.b[s], rng));
        }
        (states, ObservationSequence(symbols))
    }

    fn check_symbols(&self, obs: &ObservationSequence) -> Result<()> {
        match obs.0.iter().find(|&&o| o >= self.n_symbols) {
            Some(&symbol) => Err(Error::SymbolOutOfRange {
                symbol,
                alphabet: self.n_symbols,
            }),
            None => Ok(()),
        }
    }
}

/// Non-empty sequence of discrete symbols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ObservationSequence(Vec<usize>);

impl ObservationSequence {
    pub fn new(symbols: Vec<usize>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidParams("observation sequence is empty".into()));
        }
        Ok(Self(symbols))
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<usize>> for ObservationSequence {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ObservationSequence> for Vec<usize> {
    fn from(o: ObservationSequence) -> Self {
        o.0
    }
}

/// Scaled forward pass: `alpha[t]` is normalised to sum to one and
/// `scales[t]` holds the normaliser.
#[derive(Debug, Clone)]
pub(crate) struct ForwardPass {
    pub alpha: Vec<Vec<f64>>,
    pub scales: Vec<f64>,
    pub log_likelihood: f64,
}

pub(crate) fn forward_pass(model: &HmmParams, obs: &[usize]) -> ForwardPass {
    let n = model.n_states;
    let mut alpha = Vec::with_capacity(obs.len());
    let mut scales = Vec::with_capacity(obs.len());
    let mut log_likelihood = 0.0;
    let mut prev: Vec<f64> = Vec::new();
    for (t, &o) in obs.iter().enumerate() {
        let mut cur: Vec<f64> = (0..n)
            .map(|j| {
                let pred = if t == 0 {
                    model.pi[j]
                } else {
                    (0..n).map(|i| prev[i] * model.a[i][j]).sum()
                };
                pred * model.b[j][o]
            })
            .collect();
        let c: f64 = cur.iter().sum();
        if c <= 0.0 {
            return ForwardPass {
                alpha,
                scales,
                log_likelihood: f64::NEG_INFINITY,
            };
        }
        cur.iter_mut().for_each(|v| *v /= c);
        log_likelihood += c.ln();
        scales.push(c);
        alpha.push(cur.clone());
        prev = cur;
    }
    ForwardPass {
        alpha,
        scales,
        log_likelihood,
    }
}

/// `log P(obs | model)`, or −∞ when the sequence is impossible.
pub fn forward_likelihood(model: &HmmParams, obs: &ObservationSequence) -> Result<f64> {
    model.check_symbols(obs)?;
    Ok(forward_pass(model, obs.symbols()).log_likelihood)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViterbiPath {
    pub states: Vec<usize>,
    pub log_prob: f64,
    /// Every path has probability zero; `states` is then arbitrary.
    pub all_zero: bool,
}

/// Most probable state path, in log space. Ties go to the lower state index.
pub fn viterbi(model: &HmmParams, obs: &ObservationSequence) -> Result<ViterbiPath> {
    model.check_symbols(obs)?;
    let n = model.n_states;
    let ln = |p: f64| p.ln();
    let log_a: Vec<Vec<f64>> = model.a.iter().map(|r| r.iter().map(|&p| ln(p)).collect()).collect();
    let syms = obs.symbols();

    let mut delta: Vec<f64> = (0..n).map(|i| ln(model.pi[i]) + ln(model.b[i][syms[0]])).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(syms.len());
    for &o in &syms[1..] {
        let mut next = vec![f64::NEG_INFINITY; n];
        let mut arg = vec![0usize; n];
        for j in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut best_i = 0;
            for i in 0..n {
                let v = delta[i] + log_a[i][j];
                if v > best {
                    best = v;
                    best_i = i;
                }
            }
            next[j] = best + ln(model.b[j][o]);
            arg[j] = best_i;
        }
        back.push(arg);
        delta = next;
    }
    let mut last = 0;
    for (i, &d) in delta.iter().enumerate() {
        if d > delta[last] {
            last = i;
        }
    }
    let log_prob = delta[last];
    let mut states = vec![last; syms.len()];
    for t in (1..syms.len()).rev() {
        states[t - 1] = back[t - 1][states[t]];
    }
    Ok(ViterbiPath {
        states,
        log_prob,
        all_zero: log_prob == f64::NEG_INFINITY,
    })
}

/// Picks the label whose model gives the highest forward log-likelihood.
/// Exact ties go to the first label in order.
pub fn hmm_classify(
    models: &BTreeMap<Label, HmmParams>,
    obs: &ObservationSequence,
) -> Result<(Label, BTreeMap<Label, f64>)> {
    let mut iter = models.values();
    let m = iter
        .next()
        .ok_or_else(|| Error::InvalidParams("no models to classify with".into()))?
        .n_symbols;
    if iter.any(|p| p.n_symbols != m) {
        return Err(Error::InvalidModel("models disagree on the symbol alphabet".into()));
    }
    let mut scores = BTreeMap::new();
    let mut best: Option<(Label, f64)> = None;
    for (&label, model) in models {
        let ll = forward_likelihood(model, obs)?;
        scores.insert(label, ll);
        if best.is_none_or(|(_, b)| ll > b) {
            best = Some((label, ll));
        }
    }
    Ok((best.map(|(l, _)| l).unwrap_or(Label::Healthy), scores))
}
