//! `corneal`: command-line front end for the topography pipeline.
//!
//! Exit codes: 0 on success, 1 for invalid input or parameters, 2 for I/O
//! failures.

use clap::{Args, Parser, Subcommand, ValueEnum};
use corneal_core::curvefit::{fit_line_stagewise, fit_quad_stagewise, FitTrace};
use corneal_core::features::{FeatureCombo, FeatureVector, PachymetryReading, SampleFeatures};
use corneal_core::hmm::{extract_observation_windows, HmmBankConfig, WindowParams};
use corneal_core::imgprep::{remove_dark_lines, Channel, LineRemoval, ScalarGrid};
use corneal_core::io::{self, ManifestEntry};
use corneal_core::persist::{load_model, save_model, HmmArtifact, KnnArtifact, StoredModel};
use corneal_core::pipeline::{
    hmm_window_vectors, run_evaluation, CropSpec, Dataset, EvalConfig, HmmClassifier, KnnClassifier, KnnConfig,
    MapSource, PrepConfig, PreparedSample,
};
use corneal_core::synth::{synth_topography, SyntheticParams};
use corneal_core::{Error, Label, Result};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "corneal", version, about = "Corneal topography classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled synthetic dataset with a manifest.
    Synth(SynthArgs),
    /// Crop and remove dark overlay lines from a topography image.
    Prep(PrepArgs),
    /// Compute the feature vector of one map.
    Features(FeaturesArgs),
    /// Train a KNN or HMM classifier on a dataset and save it.
    Train(TrainArgs),
    /// Classify a feature vector or a map with a saved model.
    Classify(ClassifyArgs),
    /// Run the KNN-vs-HMM evaluation and write the report.
    Eval(EvalArgs),
    /// Stagewise least-squares fit of a point set.
    Fitdemo(FitdemoArgs),
}

fn parse_pair(s: &str) -> std::result::Result<(i64, i64), String> {
    let (x, y) = s.split_once(',').ok_or("expected X,Y")?;
    let p = |v: &str| v.trim().parse::<i64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((p(x)?, p(y)?))
}

fn parse_combo(s: &str) -> std::result::Result<FeatureCombo, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_channel(s: &str) -> std::result::Result<Channel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Clone)]
struct PrepFlags {
    /// Crop centre in pixels.
    #[arg(long, value_parser = parse_pair)]
    center: Option<(i64, i64)>,
    /// Crop side length; only used with --center.
    #[arg(long, default_value_t = 159)]
    side: usize,
    #[arg(long, default_value_t = LineRemoval::default().darkness_threshold)]
    dark_threshold: u8,
    #[arg(long, default_value_t = LineRemoval::default().window_radius)]
    radius: usize,
    #[arg(long, value_parser = parse_channel, default_value = "red")]
    channel: Channel,
}

impl PrepFlags {
    fn config(&self) -> PrepConfig {
        PrepConfig {
            crop: self.center.map(|center| CropSpec { center, side: self.side }),
            line_removal: LineRemoval {
                darkness_threshold: self.dark_threshold,
                window_radius: self.radius,
            },
            channel: self.channel,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    n_per_class: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    grid_side: Option<usize>,
    /// Render without the dark overlay grid.
    #[arg(long)]
    no_overlay: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct PrepArgs {
    input: PathBuf,
    output: PathBuf,
    #[command(flatten)]
    prep: PrepFlags,
    #[arg(long)]
    repair_report: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    map: PathBuf,
    pachy: PathBuf,
    #[arg(long, value_parser = parse_combo, default_value = "maxmindiff")]
    combo: FeatureCombo,
    #[arg(long, default_value_t = corneal_core::features::DEFAULT_BANDS)]
    bands: usize,
    #[command(flatten)]
    prep: PrepFlags,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Knn,
    Hmm,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    model: ModelKind,
    /// Dataset manifest; when absent a synthetic dataset is generated.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    n_per_class: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_parser = parse_combo, default_value = "maxmindiff")]
    combo: FeatureCombo,
    #[arg(long, default_value_t = corneal_core::features::DEFAULT_BANDS)]
    bands: usize,
    #[arg(long, default_value_t = KnnConfig::default().k)]
    k: usize,
    #[arg(long)]
    reject_distance: Option<f64>,
    #[arg(long, default_value_t = HmmBankConfig::default().states)]
    states: usize,
    #[arg(long, default_value_t = HmmBankConfig::default().symbols)]
    symbols: usize,
    #[arg(long, default_value_t = WindowParams::default().height)]
    window: usize,
    #[arg(long, default_value_t = WindowParams::default().stride)]
    stride: usize,
    #[arg(long, default_value_t = HmmBankConfig::default().training.max_iter)]
    max_iter: usize,
    #[command(flatten)]
    prep: PrepFlags,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    model_file: PathBuf,
    /// Feature JSON written by `features` (KNN models only).
    features: Option<PathBuf>,
    #[arg(long, requires = "pachy", conflicts_with = "features")]
    map: Option<PathBuf>,
    #[arg(long, requires = "map")]
    pachy: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// JSON config; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_per_class: Option<usize>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    reject_distance: Option<f64>,
    #[arg(long)]
    states: Option<usize>,
    #[arg(long)]
    symbols: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    dark_threshold: Option<u8>,
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
    /// Override any config field, e.g. `--set hmm.training.tol=1e-8`.
    #[arg(long = "set", value_name = "PATH=JSON")]
    sets: Vec<String>,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CurveKind {
    Line,
    Quad,
}

#[derive(Args)]
struct FitdemoArgs {
    points: PathBuf,
    #[arg(long, value_enum, default_value = "quad")]
    curve: CurveKind,
    #[arg(short, long)]
    output: PathBuf,
    /// Per-stage sampled curves as CSV `stage,x,y`.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    samples: usize,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn emit_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    match path {
        Some(p) => write_json(p, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut params = SyntheticParams {
        seed: a.seed,
        ..Default::default()
    };
    if let Some(n) = a.noise_std {
        params.noise_std = n;
    }
    if let Some(s) = a.grid_side {
        params.grid_side = s;
    }
    if a.no_overlay {
        params.overlay_spacing = None;
    }
    params.validate()?;
    fs::create_dir_all(&a.output)?;
    let mut manifest = Vec::new();
    for label in Label::ALL {
        for i in 0..a.n_per_class {
            let id = format!("{}_{i:04}", label.as_str().to_ascii_lowercase());
            let s = synth_topography(label, &params, i as u64)?;
            let image = format!("{id}.ppm");
            let pachy = format!("{id}_pachy.csv");
            io::write_ppm(&a.output.join(&image), &s.image)?;
            fs::write(a.output.join(&pachy), io::encode_pachymetry(&s.reading))?;
            manifest.push(ManifestEntry {
                sample_id: id,
                image_path: image.into(),
                pachy_path: pachy.into(),
                label,
            });
        }
    }
    fs::write(a.output.join("manifest.csv"), io::encode_manifest(&manifest))?;
    eprintln!("wrote {} samples to {}", manifest.len(), a.output.display());
    Ok(())
}

fn prep(a: PrepArgs) -> Result<()> {
    let cfg = a.prep.config();
    let mut img = io::read_image(&a.input)?;
    if let Some(c) = cfg.crop {
        img = corneal_core::imgprep::crop_map(&img, c.center, c.side)?;
    }
    let (clean, report) = remove_dark_lines(&img, cfg.line_removal);
    io::write_ppm(&a.output, &clean)?;
    if let Some(p) = &a.repair_report {
        write_json(p, &report)?;
    }
    eprintln!(
        "{} dark pixels, {} repaired, {} unrepaired",
        report.dark_pixels,
        report.repaired,
        report.unrepaired.len()
    );
    Ok(())
}

fn prepared_map(path: &Path, prep: &PrepConfig) -> Result<ScalarGrid> {
    prep.prepare(&MapSource::Pixels(io::read_image(path)?))
}

fn features(a: FeaturesArgs) -> Result<()> {
    let map = prepared_map(&a.map, &a.prep.config())?;
    let reading = io::read_pachymetry(&a.pachy)?;
    let v = SampleFeatures::compute(&map, &reading, a.bands)?.assemble(a.combo);
    emit_json(a.output.as_deref(), &v)
}

fn train(a: TrainArgs) -> Result<()> {
    let prep = a.prep.config();
    let dataset = match &a.manifest {
        Some(m) => Dataset::from_manifest(m)?,
        None => Dataset::synthetic(
            a.n_per_class,
            &SyntheticParams {
                seed: a.seed,
                ..Default::default()
            },
        )?,
    };
    let hmm_cfg = HmmBankConfig {
        states: a.states,
        symbols: a.symbols,
        window: WindowParams {
            height: a.window,
            stride: a.stride,
        },
        training: corneal_core::hmm::BaumWelchConfig {
            max_iter: a.max_iter,
            ..Default::default()
        },
        seed: a.seed,
    };
    let samples = dataset
        .entries
        .iter()
        .map(|e| PreparedSample::prepare(e, &prep, a.bands, &hmm_cfg))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&PreparedSample> = samples.iter().collect();
    let stored = match a.model {
        ModelKind::Knn => {
            let cfg = KnnConfig {
                k: a.k,
                reject_distance: a.reject_distance,
            };
            StoredModel::Knn(KnnArtifact {
                combo: a.combo,
                bands: a.bands,
                feature_names: a.combo.layout(a.bands),
                prep,
                model: KnnClassifier(cfg).train(a.combo, &refs)?,
            })
        }
        ModelKind::Hmm => StoredModel::Hmm(HmmArtifact {
            combo: a.combo,
            prep,
            bank: HmmClassifier(hmm_cfg).train(a.combo, &refs)?,
        }),
    };
    save_model(&stored, &a.output)?;
    eprintln!("trained on {} samples, saved to {}", samples.len(), a.output.display());
    Ok(())
}

fn classify(a: ClassifyArgs) -> Result<()> {
    let model = load_model(&a.model_file)?;
    let from_map = |prep: &PrepConfig| -> Result<(ScalarGrid, PachymetryReading)> {
        match (&a.map, &a.pachy) {
            (Some(m), Some(p)) => Ok((prepared_map(m, prep)?, io::read_pachymetry(p)?)),
            _ => Err(invalid("give a feature file or --map with --pachy")),
        }
    };
    let out = match &model {
        StoredModel::Knn(k) => {
            let values = match &a.features {
                Some(path) => {
                    let v: FeatureVector = serde_json::from_slice(&fs::read(path)?)?;
                    if v.combo != k.combo || v.names != k.feature_names {
                        return Err(invalid(format!(
                            "feature file has combo `{}` with {} values; model expects `{}` with {}",
                            v.combo.key(),
                            v.values.len(),
                            k.combo.key(),
                            k.feature_names.len()
                        )));
                    }
                    v.values
                }
                None => {
                    let (map, reading) = from_map(&k.prep)?;
                    SampleFeatures::compute(&map, &reading, k.bands)?.assemble(k.combo).values
                }
            };
            let d = k.model.classify(&values)?;
            json!({
                "model": "knn",
                "combo": k.combo,
                "label": d.label(),
                "decision": d,
            })
        }
        StoredModel::Hmm(h) => {
            if a.features.is_some() {
                return Err(invalid("HMM models classify maps; use --map and --pachy"));
            }
            let (map, reading) = from_map(&h.prep)?;
            let windows = extract_observation_windows(&map, h.bank.window.height, h.bank.window.stride)?;
            let (label, scores) = h.bank.classify(&hmm_window_vectors(&windows, &reading, h.combo))?;
            json!({
                "model": "hmm",
                "combo": h.combo,
                "label": label,
                "log_likelihoods": scores,
            })
        }
    };
    emit_json(a.output.as_deref(), &out)
}

/// Sets `path` (dot separated) in a JSON object tree, creating objects on
/// the way.
fn set_path(root: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(invalid(format!("bad config path `{path}`")));
        }
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| invalid(format!("config path `{path}` crosses a non-object")))?;
        if i + 1 == keys.len() {
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        cur = obj.entry(*key).or_insert_with(|| json!({}));
    }
    Ok(())
}

fn get_path<'a>(root: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(root, |v, k| v.get(k))
}

fn eval_config(a: &EvalArgs) -> Result<EvalConfig> {
    let mut value = match &a.config {
        Some(path) => {
            let mut v: Value = serde_json::from_slice(&fs::read(path)?)?;
            // manifest paths in a config file are relative to the file
            if let Some(Value::String(p)) = get_path(&v, "dataset.path") {
                let p = PathBuf::from(p);
                if p.is_relative() {
                    let base = path.parent().unwrap_or_else(|| Path::new("."));
                    set_path(&mut v, "dataset.path", json!(base.join(p)))?;
                }
            }
            v
        }
        None => serde_json::to_value(EvalConfig::default())?,
    };
    if !value.is_object() {
        return Err(Error::Parse("config must be a JSON object".into()));
    }
    let mut overrides: Vec<(String, Value)> = Vec::new();
    let mut flag = |path: &str, v: Option<Value>| {
        if let Some(v) = v {
            overrides.push((path.to_string(), v));
        }
    };
    flag("seed", a.seed.map(|v| json!(v)));
    if let Some(m) = &a.manifest {
        flag("dataset", Some(json!({"kind": "manifest", "path": m})));
    }
    flag("dataset.n_per_class", a.n_per_class.map(|v| json!(v)));
    flag("dataset.params.noise_std", a.noise_std.map(|v| json!(v)));
    flag("train_fraction", a.train_fraction.map(|v| json!(v)));
    flag("bands", a.bands.map(|v| json!(v)));
    flag("knn.k", a.k.map(|v| json!(v)));
    flag("knn.reject_distance", a.reject_distance.map(|v| json!(v)));
    flag("hmm.states", a.states.map(|v| json!(v)));
    flag("hmm.symbols", a.symbols.map(|v| json!(v)));
    flag("hmm.window.height", a.window.map(|v| json!(v)));
    flag("hmm.window.stride", a.stride.map(|v| json!(v)));
    flag("hmm.training.max_iter", a.max_iter.map(|v| json!(v)));
    flag("prep.line_removal.darkness_threshold", a.dark_threshold.map(|v| json!(v)));
    flag("prep.line_removal.window_radius", a.radius.map(|v| json!(v)));
    for s in &a.sets {
        let (path, raw) = s
            .split_once('=')
            .ok_or_else(|| invalid(format!("--set expects PATH=VALUE, got `{s}`")))?;
        let v = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        overrides.push((path.trim().to_string(), v));
    }
    for (path, v) in &overrides {
        set_path(&mut value, path, v.clone())?;
    }
    let config: EvalConfig = serde_json::from_value(value).map_err(|e| Error::Parse(format!("config: {e}")))?;
    // an override that does not survive a round trip names no real field
    let echo = serde_json::to_value(&config)?;
    for (path, _) in &overrides {
        if get_path(&echo, path).is_none() {
            return Err(invalid(format!("unknown config field `{path}`")));
        }
    }
    Ok(config)
}

fn eval(a: EvalArgs) -> Result<()> {
    let config = eval_config(&a)?;
    if a.print_config {
        println!("{}", serde_json::to_string_pretty(&config.resolved())?);
        return Ok(());
    }
    let dataset = config.load_dataset()?;
    let report = run_evaluation(&dataset, &config)?;
    let table = report.render_table();
    if let Some(p) = &a.output {
        write_json(p, &report)?;
    }
    if let Some(p) = &a.table {
        fs::write(p, &table)?;
    }
    print!("{table}");
    Ok(())
}

fn fitdemo(a: FitdemoArgs) -> Result<()> {
    let points = io::read_points(&a.points)?;
    let (final_model, trace): (Value, FitTrace) = match a.curve {
        CurveKind::Line => {
            let (m, t) = fit_line_stagewise(&points)?;
            (serde_json::to_value(m)?, t)
        }
        CurveKind::Quad => {
            let (m, t) = fit_quad_stagewise(&points)?;
            (serde_json::to_value(m)?, t)
        }
    };
    write_json(&a.output, &json!({ "final": final_model, "trace": trace }))?;
    if let Some(p) = &a.plot {
        let lo = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let mut csv = String::from("stage,x,y\n");
        for (stage, x, y) in trace.sampled_curves(lo, hi, a.samples) {
            let _ = writeln!(csv, "{stage},{x},{y}");
        }
        fs::write(p, csv)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Prep(a) => prep(a),
        Command::Features(a) => features(a),
        Command::Train(a) => train(a),
        Command::Classify(a) => classify(a),
        Command::Eval(a) => eval(a),
        Command::Fitdemo(a) => fitdemo(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
