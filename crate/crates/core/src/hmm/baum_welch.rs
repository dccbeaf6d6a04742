//! Multi-sequence Baum-Welch re-estimation with scaled forward/backward
//! passes.
//!
//! Probabilities are kept above a floor by solving each M-step row as a
//! constrained maximisation (entries `>= floor`), which keeps the update an
//! exact maximiser over the floored set so the total log-likelihood never
//! decreases. Entries that are zero in the initial transition matrix or
//! initial distribution are structural and stay zero; the floor applies to
//! every emission entry.

use super::{forward_pass, HmmParams, ObservationSequence};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaumWelchConfig {
    pub max_iter: usize,
    /// Stop once an iteration improves the total log-likelihood by less.
    pub tol: f64,
    pub floor: f64,
}

impl Default for BaumWelchConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-6,
            floor: DEFAULT_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Initial,
    Transition,
    Emission,
}

/// A row whose expected counts were all zero, so the previous row was kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegenerateRow {
    pub iteration: usize,
    pub kind: RowKind,
    pub state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub params: HmmParams,
    /// Total log-likelihood of the starting model, then after each update.
    pub log_likelihoods: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub degenerate_rows: Vec<DegenerateRow>,
    /// Sequences with zero probability under the model at some iteration;
    /// they contribute no counts.
    pub impossible_sequences: usize,
}

/// Expected counts from one E-step.
struct Counts {
    pi: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    log_likelihood: f64,
    impossible: usize,
}

/// Maximises `Σ counts[j]·ln p[j]` over distributions with `p[j] >= floor`
/// on the allowed entries and `p[j] = 0` elsewhere. Returns `None` when the
/// allowed counts are all zero.
pub(crate) fn floored_distribution(counts: &[f64], allowed: &[bool], floor: f64) -> Option<Vec<f64>> {
    let mut p = vec![0.0; counts.len()];
    let mut fixed = vec![false; counts.len()];
    if !counts.iter().zip(allowed).any(|(&c, &ok)| ok && c > 0.0) {
        return None;
    }
    loop {
        let n_fixed = fixed.iter().filter(|&&f| f).count();
        let mass = 1.0 - n_fixed as f64 * floor;
        let total: f64 = (0..counts.len())
            .filter(|&j| allowed[j] && !fixed[j])
            .map(|j| counts[j])
            .sum();
        let mut changed = false;
        for j in 0..counts.len() {
            if !allowed[j] {
                continue;
            }
            if fixed[j] {
                p[j] = floor;
                continue;
            }
            p[j] = mass * counts[j] / total;
            if p[j] < floor {
                fixed[j] = true;
                changed = true;
            }
        }
        if !changed {
            return Some(p);
        }
    }
}

/// Stepwise trainer; [`baum_welch`] drives it to convergence.
pub struct BaumWelch<'a> {
    params: HmmParams,
    sequences: &'a [ObservationSequence],
    config: BaumWelchConfig,
    pi_mask: Vec<bool>,
    a_mask: Vec<Vec<bool>>,
    iteration: usize,
    current: Counts,
    degenerate: Vec<DegenerateRow>,
    impossible: usize,
}

impl<'a> BaumWelch<'a> {
    pub fn new(init: &HmmParams, sequences: &'a [ObservationSequence], config: BaumWelchConfig) -> Result<Self> {
        init.validate()?;
        if sequences.is_empty() {
            return Err(Error::InvalidParams("no training sequences".into()));
        }
        for s in sequences {
            init.check_symbols(s)?;
        }
        let n = init.n_states;
        let widest = n.max(init.n_symbols) as f64;
        if !(config.floor >= 0.0 && config.floor * widest < 1.0) {
            return Err(Error::InvalidParams(format!(
                "floor {} is incompatible with {} states and {} symbols",
                config.floor, n, init.n_symbols
            )));
        }
        let pi_mask: Vec<bool> = init.pi.iter().map(|&p| p > 0.0).collect();
        let a_mask: Vec<Vec<bool>> = init.a.iter().map(|r| r.iter().map(|&p| p > 0.0).collect()).collect();
        let all = vec![true; init.n_symbols];
        let floor = config.floor;
        let mut params = init.clone();
        // start from the floored version of the initial model
        params.pi = floored_distribution(&init.pi, &pi_mask, floor).unwrap_or_else(|| init.pi.clone());
        for i in 0..n {
            params.a[i] = floored_distribution(&init.a[i], &a_mask[i], floor).unwrap_or_else(|| init.a[i].clone());
            params.b[i] = floored_distribution(&init.b[i], &all, floor).unwrap_or_else(|| init.b[i].clone());
        }
        let current = e_step(&params, sequences);
        let impossible = current.impossible;
        Ok(Self {
            params,
            sequences,
            config,
            pi_mask,
            a_mask,
            iteration: 0,
            current,
            degenerate: Vec::new(),
            impossible,
        })
    }

    pub fn params(&self) -> &HmmParams {
        &self.params
    }

    /// Total log-likelihood of the current parameters.
    pub fn log_likelihood(&self) -> f64 {
        self.current.log_likelihood
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// One M-step followed by the E-step of the new parameters. Returns the
    /// new total log-likelihood.
    pub fn step(&mut self) -> f64 {
        self.iteration += 1;
        let floor = self.config.floor;
        let n = self.params.n_states;
        let all = vec![true; self.params.n_symbols];
        let c = &self.current;
        let mut next = self.params.clone();
        let mut note = |kind, state| {
            self.degenerate.push(DegenerateRow {
                iteration: self.iteration,
                kind,
                state,
            })
        };
        match floored_distribution(&c.pi, &self.pi_mask, floor) {
            Some(p) => next.pi = p,
            None => note(RowKind::Initial, 0),
        }
        for i in 0..n {
            match floored_distribution(&c.a[i], &self.a_mask[i], floor) {
                Some(p) => next.a[i] = p,
                None => note(RowKind::Transition, i),
            }
            match floored_distribution(&c.b[i], &all, floor) {
                Some(p) => next.b[i] = p,
                None => note(RowKind::Emission, i),
            }
        }
        self.params = next;
        self.current = e_step(&self.params, self.sequences);
        self.impossible = self.impossible.max(self.current.impossible);
        self.current.log_likelihood
    }

    pub fn run(mut self) -> TrainingReport {
        let mut trace = vec![self.log_likelihood()];
        let mut converged = false;
        while self.iteration < self.config.max_iter {
            let before = self.log_likelihood();
            let after = self.step();
            trace.push(after);
            if after - before < self.config.tol {
                converged = true;
                break;
            }
        }
        TrainingReport {
            params: self.params,
            log_likelihoods: trace,
            iterations: self.iteration,
            converged,
            degenerate_rows: self.degenerate,
            impossible_sequences: self.impossible,
        }
    }
}

fn e_step(model: &HmmParams, sequences: &[ObservationSequence]) -> Counts {
    let (n, m) = (model.n_states, model.n_symbols);
    let mut c = Counts {
        pi: vec![0.0; n],
        a: vec![vec![0.0; n]; n],
        b: vec![vec![0.0; m]; n],
        log_likelihood: 0.0,
        impossible: 0,
    };
    for seq in sequences {
        let obs = seq.symbols();
        let fwd = forward_pass(model, obs);
        c.log_likelihood += fwd.log_likelihood;
        if fwd.log_likelihood == f64::NEG_INFINITY {
            c.impossible += 1;
            continue;
        }
        let t_len = obs.len();
        // scaled backward pass sharing the forward scales
        let mut beta = vec![vec![1.0; n]; t_len];
        for t in (0..t_len - 1).rev() {
            let o = obs[t + 1];
            let scale = fwd.scales[t + 1];
            for i in 0..n {
                beta[t][i] = (0..n)
                    .map(|j| model.a[i][j] * model.b[j][o] * beta[t + 1][j])
                    .sum::<f64>()
                    / scale;
            }
        }
        for t in 0..t_len {
            let gamma: Vec<f64> = (0..n).map(|i| fwd.alpha[t][i] * beta[t][i]).collect();
            if t == 0 {
                for i in 0..n {
                    c.pi[i] += gamma[i];
                }
            }
            for i in 0..n {
                c.b[i][obs[t]] += gamma[i];
            }
            if t + 1 < t_len {
                let o = obs[t + 1];
                let scale = fwd.scales[t + 1];
                for i in 0..n {
                    for j in 0..n {
                        c.a[i][j] += fwd.alpha[t][i] * model.a[i][j] * model.b[j][o] * beta[t + 1][j] / scale;
                    }
                }
            }
        }
    }
    c
}

/// Trains `init` on `sequences` until the total log-likelihood gains less
/// than `tol` in one iteration or `max_iter` updates have been made.
pub fn baum_welch(
    init: &HmmParams,
    sequences: &[ObservationSequence],
    max_iter: usize,
    tol: f64,
) -> Result<TrainingReport> {
    let config = BaumWelchConfig {
        max_iter,
        tol,
        ..BaumWelchConfig::default()
    };
    Ok(BaumWelch::new(init, sequences, config)?.run())
}
