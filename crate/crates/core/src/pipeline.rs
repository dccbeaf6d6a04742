//! Dataset handling and the HMM-vs-KNN evaluation.

use crate::error::{Error, Result};
use crate::features::{FeatureCombo, PachymetryReading, SampleFeatures, DEFAULT_BANDS};
use crate::hmm::{extract_observation_windows, HmmBank, HmmBankConfig, WindowFeatures};
use crate::imgprep::{channel_contrast, crop_map, remove_dark_lines, Channel, LineRemoval, PixelGrid, ScalarGrid};
use crate::io;
use crate::knn::{knn_fit, KnnModel, LabeledSample, DEFAULT_K};
use crate::synth::{synth_topography, SyntheticParams};
use crate::Label;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum MapSource {
    Pixels(PixelGrid),
    Scalar(ScalarGrid),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub sample_id: String,
    pub map: MapSource,
    pub reading: PachymetryReading,
    pub label: Label,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub entries: Vec<DatasetEntry>,
}

impl Dataset {
    pub fn new(entries: Vec<DatasetEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.sample_id.as_str()) {
                return Err(Error::InvalidParams(format!("duplicate sample id `{}`", e.sample_id)));
            }
        }
        Ok(Self { entries })
    }

    /// `n_per_class` rendered samples of each label, ids `<label>_<index>`.
    pub fn synthetic(n_per_class: usize, params: &SyntheticParams) -> Result<Self> {
        let jobs: Vec<(Label, usize)> = Label::ALL
            .into_iter()
            .flat_map(|l| (0..n_per_class).map(move |i| (l, i)))
            .collect();
        let entries = jobs
            .into_par_iter()
            .map(|(label, i)| {
                let s = synth_topography(label, params, i as u64)?;
                Ok(DatasetEntry {
                    sample_id: format!("{}_{i:04}", label.as_str().to_ascii_lowercase()),
                    map: MapSource::Pixels(s.image),
                    reading: s.reading,
                    label,
                    split: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn from_manifest(path: &Path) -> Result<Self> {
        let entries = io::read_manifest(path)?
            .into_iter()
            .map(|m| {
                Ok(DatasetEntry {
                    map: MapSource::Pixels(io::read_image(&m.image_path)?),
                    reading: io::read_pachymetry(&m.pachy_path)?,
                    sample_id: m.sample_id,
                    label: m.label,
                    split: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// Seeded stratified split: within each label the ids are shuffled and
    /// the first `round(train_fraction · n)` go to training.
    pub fn stratified_split(&mut self, train_fraction: f64, seed: u64) -> Result<()> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(Error::InvalidParams(format!("train fraction {train_fraction} outside [0, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for label in Label::ALL {
            let mut idx: Vec<usize> = (0..self.entries.len()).filter(|&i| self.entries[i].label == label).collect();
            idx.sort_by(|&a, &b| self.entries[a].sample_id.cmp(&self.entries[b].sample_id));
            idx.shuffle(&mut rng);
            let n_train = (train_fraction * idx.len() as f64).round() as usize;
            for (rank, &i) in idx.iter().enumerate() {
                self.entries[i].split = Some(if rank < n_train { Split::Train } else { Split::Test });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropSpec {
    pub center: (i64, i64),
    pub side: usize,
}

/// How a raw image becomes a scalar map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepConfig {
    pub crop: Option<CropSpec>,
    pub line_removal: LineRemoval,
    pub channel: Channel,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self {
            crop: None,
            line_removal: LineRemoval::default(),
            channel: Channel::Red,
        }
    }
}

impl PrepConfig {
    pub fn prepare(&self, source: &MapSource) -> Result<ScalarGrid> {
        match source {
            MapSource::Scalar(g) => Ok(g.clone()),
            MapSource::Pixels(img) => {
                let cropped;
                let img = match self.crop {
                    Some(c) => {
                        cropped = crop_map(img, c.center, c.side)?;
                        &cropped
                    }
                    None => img,
                };
                let (clean, _) = remove_dark_lines(img, self.line_removal);
                Ok(channel_contrast(&clean, self.channel))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    pub k: usize,
    pub reject_distance: Option<f64>,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            reject_distance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic {
        n_per_class: usize,
        #[serde(default)]
        params: SyntheticParams,
    },
    Manifest {
        path: PathBuf,
    },
}

/// Complete evaluation configuration. `seed` is the single global seed: it
/// replaces the seeds of the synthetic generator and the codebook, and
/// drives the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub seed: u64,
    pub dataset: DatasetSource,
    pub train_fraction: f64,
    pub prep: PrepConfig,
    pub bands: usize,
    pub knn: KnnConfig,
    pub hmm: HmmBankConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            dataset: DatasetSource::Synthetic {
                n_per_class: 100,
                params: SyntheticParams::default(),
            },
            train_fraction: 0.7,
            prep: PrepConfig::default(),
            bands: DEFAULT_BANDS,
            knn: KnnConfig::default(),
            hmm: HmmBankConfig::default(),
        }
    }
}

impl EvalConfig {
    /// Copies the global seed into every seeded component.
    pub fn resolved(&self) -> EvalConfig {
        let mut c = self.clone();
        if let DatasetSource::Synthetic { params, .. } = &mut c.dataset {
            params.seed = c.seed;
        }
        c.hmm.seed = c.seed;
        c
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.resolved()).expect("config serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Builds the dataset named by the config and applies the split.
    pub fn load_dataset(&self) -> Result<Dataset> {
        let c = self.resolved();
        let mut ds = match &c.dataset {
            DatasetSource::Synthetic { n_per_class, params } => Dataset::synthetic(*n_per_class, params)?,
            DatasetSource::Manifest { path } => Dataset::from_manifest(path)?,
        };
        ds.stratified_split(c.train_fraction, c.seed)?;
        Ok(ds)
    }
}

/// A sample after preprocessing, shared by every classifier and combo.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub sample_id: String,
    pub label: Label,
    pub features: SampleFeatures,
    pub windows: Vec<WindowFeatures>,
}

impl PreparedSample {
    pub fn prepare(entry: &DatasetEntry, prep: &PrepConfig, bands: usize, hmm: &HmmBankConfig) -> Result<Self> {
        let map = prep.prepare(&entry.map)?;
        Ok(Self {
            sample_id: entry.sample_id.clone(),
            label: entry.label,
            features: SampleFeatures::compute(&map, &entry.reading, bands)?,
            windows: extract_observation_windows(&map, hmm.window.height, hmm.window.stride)?,
        })
    }

    /// Window vectors fed to the HMM under `combo`: band features followed
    /// by the combo's pachymetry differences.
    pub fn window_vectors(&self, combo: FeatureCombo) -> Vec<Vec<f64>> {
        hmm_window_vectors(&self.windows, &self.features.reading, combo)
    }
}

pub fn hmm_window_vectors(windows: &[WindowFeatures], reading: &PachymetryReading, combo: FeatureCombo) -> Vec<Vec<f64>> {
    let extra = combo.pachymetry_values(reading);
    windows
        .iter()
        .map(|w| {
            let mut v = w.to_vec();
            v.extend_from_slice(&extra);
            v
        })
        .collect()
}

/// A trained classifier; `None` means the sample was rejected.
pub trait Predictor: Sync {
    fn predict(&self, sample: &PreparedSample) -> Result<Option<Label>>;
}

/// A classifier family evaluated once per feature combo.
pub trait ComboClassifier: Sync {
    fn name(&self) -> &str;
    fn fit(&self, combo: FeatureCombo, train: &[&PreparedSample]) -> Result<Box<dyn Predictor>>;
}

pub struct KnnClassifier(pub KnnConfig);

struct KnnPredictor {
    combo: FeatureCombo,
    model: KnnModel,
}

impl Predictor for KnnPredictor {
    fn predict(&self, s: &PreparedSample) -> Result<Option<Label>> {
        Ok(self.model.classify(&s.features.assemble(self.combo).values)?.label())
    }
}

impl KnnClassifier {
    pub fn train(&self, combo: FeatureCombo, train: &[&PreparedSample]) -> Result<KnnModel> {
        let samples: Vec<LabeledSample> = train
            .iter()
            .map(|s| LabeledSample {
                features: s.features.assemble(combo).values,
                label: s.label,
            })
            .collect();
        knn_fit(&samples, self.0.k, self.0.reject_distance)
    }
}

impl ComboClassifier for KnnClassifier {
    fn name(&self) -> &str {
        "KNN"
    }

    fn fit(&self, combo: FeatureCombo, train: &[&PreparedSample]) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(KnnPredictor {
            combo,
            model: self.train(combo, train)?,
        }))
    }
}

pub struct HmmClassifier(pub HmmBankConfig);

struct HmmPredictor {
    combo: FeatureCombo,
    bank: HmmBank,
}

impl Predictor for HmmPredictor {
    fn predict(&self, s: &PreparedSample) -> Result<Option<Label>> {
        Ok(Some(self.bank.classify(&s.window_vectors(self.combo))?.0))
    }
}

impl HmmClassifier {
    pub fn train(&self, combo: FeatureCombo, train: &[&PreparedSample]) -> Result<HmmBank> {
        let data: Vec<(Vec<Vec<f64>>, Label)> = train.iter().map(|s| (s.window_vectors(combo), s.label)).collect();
        Ok(HmmBank::train(&data, &self.0)?.0)
    }
}

impl ComboClassifier for HmmClassifier {
    fn name(&self) -> &str {
        "HMM"
    }

    fn fit(&self, combo: FeatureCombo, train: &[&PreparedSample]) -> Result<Box<dyn Predictor>> {
        Ok(Box::new(HmmPredictor {
            combo,
            bank: self.train(combo, train)?,
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierResult {
    pub classifier: String,
    pub combo: FeatureCombo,
    /// Percentage of test samples classified correctly; rejects count as
    /// errors.
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub rejects: usize,
    /// `confusion[truth][predicted]`, rejects excluded.
    pub confusion: BTreeMap<Label, BTreeMap<Label, usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub format_version: u32,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub train_per_label: BTreeMap<Label, usize>,
    pub test_per_label: BTreeMap<Label, usize>,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: ReportMetadata,
    pub results: Vec<ClassifierResult>,
}

impl EvalReport {
    pub fn result(&self, classifier: &str, combo: FeatureCombo) -> Option<&ClassifierResult> {
        self.results.iter().find(|r| r.classifier == classifier && r.combo == combo)
    }

    /// Rows are classifiers, columns the three feature combos.
    pub fn render_table(&self) -> String {
        let mut classifiers: Vec<&str> = Vec::new();
        for r in &self.results {
            if !classifiers.contains(&r.classifier.as_str()) {
                classifiers.push(&r.classifier);
            }
        }
        let headers: Vec<&str> = FeatureCombo::ALL.iter().map(|c| c.title()).collect();
        let first_w = classifiers.iter().map(|c| c.len()).max().unwrap_or(0).max("Model".len());
        let mut out = format!("{:<first_w$}", "Model");
        for h in &headers {
            let _ = write!(out, " | {h}");
        }
        out.push('\n');
        let _ = write!(out, "{}", "-".repeat(first_w));
        for h in &headers {
            let _ = write!(out, "-+-{}", "-".repeat(h.len()));
        }
        out.push('\n');
        for c in classifiers {
            let _ = write!(out, "{c:<first_w$}");
            for (combo, h) in FeatureCombo::ALL.iter().zip(&headers) {
                let cell = self
                    .result(c, *combo)
                    .map_or_else(|| "-".to_string(), |r| format!("%{:.1}", r.accuracy));
                let _ = write!(out, " | {cell:<w$}", w = h.len());
            }
            out.push('\n');
        }
        out
    }
}

fn score(classifier: &str, combo: FeatureCombo, test: &[&PreparedSample], predictions: &[Option<Label>]) -> ClassifierResult {
    let mut confusion: BTreeMap<Label, BTreeMap<Label, usize>> = BTreeMap::new();
    let (mut correct, mut rejects) = (0, 0);
    for (s, p) in test.iter().zip(predictions) {
        match p {
            Some(pred) => {
                *confusion.entry(s.label).or_default().entry(*pred).or_insert(0) += 1;
                if *pred == s.label {
                    correct += 1;
                }
            }
            None => rejects += 1,
        }
    }
    let total = test.len();
    ClassifierResult {
        classifier: classifier.to_string(),
        combo,
        accuracy: if total == 0 { 0.0 } else { 100.0 * correct as f64 / total as f64 },
        correct,
        total,
        rejects,
        confusion,
    }
}

/// Evaluates the standard KNN and HMM classifiers on every combo.
pub fn run_evaluation(dataset: &Dataset, config: &EvalConfig) -> Result<EvalReport> {
    let c = config.resolved();
    let knn = KnnClassifier(c.knn);
    let hmm = HmmClassifier(c.hmm);
    run_evaluation_with(dataset, &c, &[&knn, &hmm])
}

pub fn run_evaluation_with(
    dataset: &Dataset,
    config: &EvalConfig,
    classifiers: &[&dyn ComboClassifier],
) -> Result<EvalReport> {
    let config = config.resolved();
    if config.bands == 0 {
        return Err(Error::InvalidParams("bands must be positive".into()));
    }
    let mut entries: Vec<&DatasetEntry> = dataset.entries.iter().collect();
    entries.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let split_of = |e: &DatasetEntry| e.split.ok_or_else(|| Error::InvalidParams(format!("sample `{}` has no split", e.sample_id)));
    for e in &entries {
        split_of(e)?;
    }
    let prepared = entries
        .par_iter()
        .map(|e| PreparedSample::prepare(e, &config.prep, config.bands, &config.hmm))
        .collect::<Result<Vec<_>>>()?;
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (e, p) in entries.iter().zip(&prepared) {
        match split_of(e)? {
            Split::Train => train.push(p),
            Split::Test => test.push(p),
        }
    }
    if test.is_empty() {
        return Err(Error::InvalidParams("test split is empty".into()));
    }
    for label in Label::ALL {
        if !train.iter().any(|s| s.label == label) {
            return Err(Error::MissingClass(label));
        }
    }

    let mut results = Vec::new();
    for clf in classifiers {
        let per_combo = FeatureCombo::ALL
            .par_iter()
            .map(|&combo| {
                let predictor = clf.fit(combo, &train)?;
                let predictions = test
                    .par_iter()
                    .map(|s| predictor.predict(s))
                    .collect::<Result<Vec<_>>>()?;
                Ok(score(clf.name(), combo, &test, &predictions))
            })
            .collect::<Result<Vec<_>>>()?;
        results.extend(per_combo);
    }

    let count = |set: &[&PreparedSample]| {
        let mut m = BTreeMap::new();
        for s in set {
            *m.entry(s.label).or_insert(0) += 1;
        }
        m
    };
    Ok(EvalReport {
        metadata: ReportMetadata {
            format_version: REPORT_FORMAT_VERSION,
            seed: config.seed,
            n_train: train.len(),
            n_test: test.len(),
            train_per_label: count(&train),
            test_per_label: count(&test),
            config_hash: config.hash(),
        },
        results,
    })
}
