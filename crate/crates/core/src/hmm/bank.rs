//! Per-class HMM bank sharing one feature scaler and one codebook.

use super::baum_welch::{BaumWelch, BaumWelchConfig, TrainingReport};
use super::codebook::{distinct_count, train_codebook};
use super::{hmm_classify, Codebook, HmmParams, ObservationSequence, WindowParams};
use super::{DEFAULT_STATES, DEFAULT_SYMBOLS};
use crate::error::{Error, Result};
use crate::stats::Standardizer;
use crate::Label;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmmBankConfig {
    pub states: usize,
    /// Codebook size; capped by the number of distinct training vectors.
    pub symbols: usize,
    pub window: WindowParams,
    pub training: BaumWelchConfig,
    pub seed: u64,
}

impl Default for HmmBankConfig {
    fn default() -> Self {
        Self {
            states: DEFAULT_STATES,
            symbols: DEFAULT_SYMBOLS,
            window: WindowParams::default(),
            training: BaumWelchConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmBank {
    pub window: WindowParams,
    pub scaler: Standardizer,
    pub codebook: Codebook,
    pub models: BTreeMap<Label, HmmParams>,
}

/// Left-to-right start whose emissions are the symbol frequencies of an
/// equal split of every sequence into `n_states` consecutive segments.
fn segmental_init(n_states: usize, n_symbols: usize, sequences: &[ObservationSequence]) -> Result<HmmParams> {
    let mut params = HmmParams::bakis(n_states, n_symbols)?;
    let mut counts = vec![vec![0.0; n_symbols]; n_states];
    for seq in sequences {
        let t_len = seq.len();
        for (t, &o) in seq.symbols().iter().enumerate() {
            counts[t * n_states / t_len][o] += 1.0;
        }
    }
    for (row, c) in params.b.iter_mut().zip(&counts) {
        let total: f64 = c.iter().sum();
        if total > 0.0 {
            // mix in a little uniform mass so no symbol starts impossible
            let u = 1.0 / n_symbols as f64;
            for (p, &k) in row.iter_mut().zip(c) {
                *p = 0.9 * k / total + 0.1 * u;
            }
        }
    }
    params.validate()?;
    Ok(params)
}

impl HmmBank {
    /// Trains one model per label from per-sample window vector sequences.
    pub fn train(
        samples: &[(Vec<Vec<f64>>, Label)],
        config: &HmmBankConfig,
    ) -> Result<(HmmBank, BTreeMap<Label, TrainingReport>)> {
        if config.states == 0 || config.symbols == 0 {
            return Err(Error::InvalidParams("states and symbols must be positive".into()));
        }
        if samples.iter().any(|(v, _)| v.is_empty()) {
            return Err(Error::InvalidParams("a sample has no windows".into()));
        }
        for label in Label::ALL {
            if !samples.iter().any(|(_, l)| *l == label) {
                return Err(Error::MissingClass(label));
            }
        }
        let pooled: Vec<&[f64]> = samples.iter().flat_map(|(v, _)| v.iter().map(|x| x.as_slice())).collect();
        let scaler = Standardizer::fit(pooled.iter().copied())?;
        if scaler.output_dim() == 0 {
            return Err(Error::DegenerateInput("every window feature is constant".into()));
        }
        let scaled: Vec<Vec<f64>> = pooled
            .iter()
            .map(|v| scaler.transform(v))
            .collect::<Result<_>>()?;
        let k = config.symbols.min(distinct_count(&scaled));
        let codebook = train_codebook(&scaled, k, config.seed)?;

        let mut per_label: BTreeMap<Label, Vec<ObservationSequence>> = BTreeMap::new();
        let mut offset = 0;
        for (v, label) in samples {
            let symbols = scaled[offset..offset + v.len()]
                .iter()
                .map(|x| codebook.nearest(x))
                .collect::<Result<Vec<_>>>()?;
            offset += v.len();
            per_label.entry(*label).or_default().push(ObservationSequence::new(symbols)?);
        }

        let mut models = BTreeMap::new();
        let mut reports = BTreeMap::new();
        for (label, seqs) in &per_label {
            let init = segmental_init(config.states, codebook.len(), seqs)?;
            let report = BaumWelch::new(&init, seqs, config.training)?.run();
            models.insert(*label, report.params.clone());
            reports.insert(*label, report);
        }
        let bank = HmmBank {
            window: config.window,
            scaler,
            codebook,
            models,
        };
        Ok((bank, reports))
    }

    pub fn validate(&self) -> Result<()> {
        self.scaler.validate()?;
        self.codebook.validate()?;
        if self.codebook.dim() != self.scaler.output_dim() {
            return Err(Error::InvalidModel("codebook dimension differs from scaler output".into()));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidModel("bank has no models".into()));
        }
        for m in self.models.values() {
            m.validate()?;
            if m.n_symbols != self.codebook.len() {
                return Err(Error::InvalidModel("model alphabet differs from codebook size".into()));
            }
        }
        Ok(())
    }

    pub fn encode(&self, vectors: &[Vec<f64>]) -> Result<ObservationSequence> {
        let symbols = vectors
            .iter()
            .map(|v| self.codebook.nearest(&self.scaler.transform(v)?))
            .collect::<Result<Vec<_>>>()?;
        ObservationSequence::new(symbols)
    }

    pub fn classify(&self, vectors: &[Vec<f64>]) -> Result<(Label, BTreeMap<Label, f64>)> {
        hmm_classify(&self.models, &self.encode(vectors)?)
    }
}
