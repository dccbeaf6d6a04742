//! The nine acceptance criteria, one test each. Every check prints a
//! PASS/FAIL line with its runtime (visible with `--nocapture`).

mod common;

use common::*;
use corneal_core::curvefit::{fit_line_batch, fit_line_stagewise, fit_quad_batch, fit_quad_stagewise, Point2};
use corneal_core::features::{band_of, fft_spectrum_energy, max_bands, max_radius, FeatureCombo};
use corneal_core::hmm::{forward_likelihood, viterbi, BaumWelch, BaumWelchConfig, HmmParams, ObservationSequence};
use corneal_core::imgprep::{is_dark, remove_dark_lines, LineRemoval, ScalarGrid};
use corneal_core::knn::{knn_fit, LabeledSample};
use corneal_core::pipeline::{run_evaluation, EvalConfig};
use corneal_core::synth::{overlay_grid, synth_topography, SyntheticParams};
use corneal_core::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

type Check = std::result::Result<String, String>;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn random_instance(rng: &mut ChaCha8Rng) -> (HmmParams, Vec<usize>) {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=5);
    let t = rng.random_range(1..=8);
    let model = random_model(n, m, rng);
    let obs = (0..t).map(|_| rng.random_range(0..m)).collect();
    (model, obs)
}

fn c1_forward() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let (model, obs) = random_instance(&mut rng);
        let (total, _, _) = hmm_enumerate(&model, &obs);
        let expected = total.ln();
        let got = forward_likelihood(&model, &ObservationSequence::new(obs).unwrap()).unwrap();
        let err = (got - expected).abs() / expected.abs().max(1.0);
        worst = worst.max(err);
        if err > 1e-10 {
            return Err(format!("instance {i}: forward {got} vs enumeration {expected}"));
        }
    }
    Ok(format!("200 instances, worst relative error {worst:.1e}"))
}

fn c2_viterbi() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ties = 0;
    for i in 0..200 {
        let (model, obs) = random_instance(&mut rng);
        let (_, best_path, best_score) = hmm_enumerate(&model, &obs);
        let v = viterbi(&model, &ObservationSequence::new(obs.clone()).unwrap()).unwrap();
        if v.states != best_path {
            // equal-probability paths: any optimal path is a valid argmax
            let own = path_log_score(&model, &obs, &v.states);
            if (own - best_score).abs() > 1e-12 * best_score.abs().max(1.0) {
                return Err(format!("instance {i}: path {:?} vs {:?}", v.states, best_path));
            }
            ties += 1;
        }
        if !rel_close(v.log_prob, best_score, 1e-10) {
            return Err(format!("instance {i}: score {} vs {}", v.log_prob, best_score));
        }
    }
    Ok(format!("200 instances, paths identical ({ties} exact ties resolved to another optimal path)"))
}

fn stochastic_ok(p: &HmmParams, floor: f64) -> bool {
    let row_ok = |r: &[f64]| (r.iter().sum::<f64>() - 1.0).abs() <= 1e-9 && r.iter().all(|v| v.is_finite() && *v >= 0.0);
    p.validate().is_ok()
        && row_ok(&p.pi)
        && p.a.iter().all(|r| row_ok(r))
        && p.b.iter().all(|r| row_ok(r) && r.iter().all(|v| *v >= floor * (1.0 - 1e-12)))
}

fn c3_baum_welch() -> Check {
    let config = BaumWelchConfig {
        max_iter: 60,
        tol: 0.0,
        ..Default::default()
    };
    let mut worst_drop = 0.0f64;
    let mut total_steps = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let seqs: Vec<ObservationSequence> = (0..5)
            .map(|_| ObservationSequence::new((0..20).map(|_| rng.random_range(0..4)).collect()).unwrap())
            .collect();
        let init = HmmParams::random(3, 4, &mut rng);
        let mut bw = BaumWelch::new(&init, &seqs, config).unwrap();
        if !stochastic_ok(bw.params(), config.floor) {
            return Err(format!("seed {seed}: initial model breaks invariants"));
        }
        let mut prev = bw.log_likelihood();
        for it in 1..=config.max_iter {
            let ll = bw.step();
            total_steps += 1;
            if !stochastic_ok(bw.params(), config.floor) {
                return Err(format!("seed {seed} iteration {it}: invariants broken"));
            }
            worst_drop = worst_drop.max(prev - ll);
            if ll < prev - 1e-9 {
                return Err(format!("seed {seed} iteration {it}: {prev} -> {ll}"));
            }
            prev = ll;
        }
    }
    Ok(format!("{total_steps} updates, largest decrease {worst_drop:.1e}"))
}

fn c4_knn() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut decisions, mut rejects) = (0, 0);
    for set in 0..100 {
        let n = rng.random_range(5..=200);
        let d = rng.random_range(1..=12);
        // coarse integer grid in some sets so distance ties happen
        let coarse = set % 3 == 0;
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..d)
                .map(|j| {
                    if coarse {
                        f64::from(rng.random_range(0..3u8))
                    } else {
                        rng.random_range(-1.0..1.0) * (j as f64 + 1.0) * 10.0
                    }
                })
                .collect()
        };
        let mut train: Vec<(Vec<f64>, Label)> = (0..n)
            .map(|_| (draw(&mut rng), if rng.random_bool(0.5) { Label::Healthy } else { Label::Lasik }))
            .collect();
        train[0].1 = Label::Healthy;
        train[1].1 = Label::Lasik;
        let samples: Vec<LabeledSample> = train
            .iter()
            .map(|(f, l)| LabeledSample {
                features: f.clone(),
                label: *l,
            })
            .collect();
        for k in [1usize, 3, 5] {
            if k > n {
                continue;
            }
            let reject = match set % 4 {
                0 => None,
                _ => Some(rng.random_range(0.2..3.0) * (d as f64).sqrt()),
            };
            let model = knn_fit(&samples, k, reject).map_err(|e| e.to_string())?;
            for q in 0..20 {
                let query = if q % 5 == 0 {
                    train[rng.random_range(0..n)].0.clone()
                } else {
                    draw(&mut rng)
                };
                let expected = knn_oracle(&train, &query, k, reject);
                let got = model.classify(&query).map_err(|e| e.to_string())?.label();
                if got != expected {
                    return Err(format!("set {set} k={k} query {q}: {got:?} vs oracle {expected:?}"));
                }
                decisions += 1;
                rejects += usize::from(expected.is_none());
            }
        }
    }
    Ok(format!("{decisions} decisions identical, {rejects} rejects"))
}

fn c5_fitting() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for set in 0..100 {
        let n = rng.random_range(3..=60);
        let pts: Vec<Point2> = (0..n)
            .map(|_| {
                let x: f64 = rng.random_range(-5.0..5.0);
                Point2::new(x, 0.7 * x * x - 2.0 * x + 3.0 + rng.random_range(-1.0..1.0))
            })
            .collect();
        let (a, b) = line_oracle(&pts);
        let (qa, qb, qc) = quad_oracle(&pts);
        let (line, line_trace) = fit_line_stagewise(&pts).map_err(|e| e.to_string())?;
        let (quad, quad_trace) = fit_quad_stagewise(&pts).map_err(|e| e.to_string())?;
        let lb = fit_line_batch(&pts).map_err(|e| e.to_string())?;
        let qb_ = fit_quad_batch(&pts).map_err(|e| e.to_string())?;
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-8 * y.abs().max(1.0);
        if !(close(line.a, a) && close(line.b, b) && close(lb.a, a) && close(lb.b, b)) {
            return Err(format!("set {set}: line {line:?} / {lb:?} vs oracle ({a}, {b})"));
        }
        if !(close(quad.a, qa) && close(quad.b, qb) && close(quad.c, qc)) || !(close(qb_.a, qa) && close(qb_.b, qb) && close(qb_.c, qc)) {
            return Err(format!("set {set}: quad {quad:?} / {qb_:?} vs oracle ({qa}, {qb}, {qc})"));
        }
        for trace in [&line_trace, &quad_trace] {
            for w in trace.stages.windows(2) {
                if w[1].residual < w[0].residual - 1e-9 * w[0].residual.max(1.0) {
                    return Err(format!("set {set}: residual fell at stage {}", w[1].stage_index));
                }
            }
        }
    }
    Ok("100 point sets, stagewise = batch = oracle".into())
}

fn oracle_bands(g: &ScalarGrid, bands: usize) -> Vec<f64> {
    let (w, h) = (g.width(), g.height());
    let energy = naive_dft_energy(g, true);
    let r_max = (((h / 2) * (h / 2) + (w / 2) * (w / 2)) as f64).sqrt();
    let mut out = vec![0.0; bands];
    for u in 0..h {
        for v in 0..w {
            if u == 0 && v == 0 {
                continue;
            }
            let fu = if u <= h / 2 { u as f64 } else { u as f64 - h as f64 };
            let fv = if v <= w / 2 { v as f64 } else { v as f64 - w as f64 };
            let r = (fu * fu + fv * fv).sqrt();
            let b = ((r / (r_max / bands as f64)).ceil() as usize).clamp(1, bands) - 1;
            out[b] += energy[u * w + v];
        }
    }
    out
}

fn c6_fft() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for case in 0..40 {
        let w = rng.random_range(2..=32);
        let h = rng.random_range(2..=32);
        let vals: Vec<f64> = (0..w * h).map(|_| rng.random_range(-50.0..50.0)).collect();
        let g = ScalarGrid::new(w, h, vals).unwrap();
        let bands = rng.random_range(1..=max_bands(w, h));
        let got = fft_spectrum_energy(&g, bands).map_err(|e| e.to_string())?;
        let mean = g.values().iter().sum::<f64>() / (w * h) as f64;
        let parseval = (w * h) as f64 * g.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        let total: f64 = got.iter().sum();
        let naive = oracle_bands(&g, bands);
        let naive_total: f64 = naive.iter().sum();
        let rel = ((total - parseval).abs() / parseval).max((total - naive_total).abs() / naive_total);
        worst = worst.max(rel);
        if rel > 1e-9 {
            return Err(format!("case {case} {w}x{h}: total {total} vs Parseval {parseval}, naive {naive_total}"));
        }
        for (i, (a, b)) in got.iter().zip(&naive).enumerate() {
            if (a - b).abs() > 1e-9 * naive_total {
                return Err(format!("case {case}: band {i} {a} vs naive {b}"));
            }
        }
        let shifted = g.map(|v| v + 1234.5).unwrap();
        let s = fft_spectrum_energy(&shifted, bands).map_err(|e| e.to_string())?;
        if got.iter().zip(&s).any(|(a, b)| (a - b).abs() > 1e-9 * total) {
            return Err(format!("case {case}: constant shift changed the bands"));
        }
    }
    // single cosine along x
    for (w, h, k, bands) in [(32, 32, 5, 8), (24, 16, 3, 6), (31, 17, 7, 4)] {
        let g = ScalarGrid::from_fn(w, h, |x, _| (2.0 * std::f64::consts::PI * (k * x) as f64 / w as f64).cos()).unwrap();
        let e = fft_spectrum_energy(&g, bands).map_err(|e| e.to_string())?;
        let total: f64 = e.iter().sum();
        let peak = e.iter().cloned().fold(0.0, f64::max);
        let expected = band_of(k as f64, max_radius(w, h), bands);
        if peak / total < 0.99 || e[expected] != peak {
            return Err(format!("cosine {w}x{h} k={k}: concentration {:.4}", peak / total));
        }
    }
    Ok(format!("40 grids, worst Parseval error {worst:.1e}; cosine concentration >= 99%"))
}

fn c7_line_removal() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let params = SyntheticParams {
        overlay_spacing: None,
        ..Default::default()
    };
    let (mut overlaid, mut restored) = (0usize, 0usize);
    for i in 0..50u64 {
        let label = if i % 2 == 0 { Label::Healthy } else { Label::Lasik };
        let clean = synth_topography(label, &params, i).map_err(|e| e.to_string())?.image;
        let spacing = rng.random_range(8..=30);
        let offset = rng.random_range(0..spacing);
        let mut dirty = clean.clone();
        overlay_grid(&mut dirty, spacing, offset, [0, 0, 0]);
        let (fixed, _) = remove_dark_lines(&dirty, LineRemoval::default());
        for y in 0..clean.height() {
            for x in 0..clean.width() {
                let d = dirty.get(x, y);
                let f = fixed.get(x, y);
                if !is_dark(d, LineRemoval::default().darkness_threshold) {
                    if f != d {
                        return Err(format!("map {i}: non-dark pixel ({x}, {y}) modified"));
                    }
                    continue;
                }
                overlaid += 1;
                let c = clean.get(x, y);
                if (0..3).all(|ch| (i16::from(f[ch]) - i16::from(c[ch])).abs() <= 8) {
                    restored += 1;
                }
            }
        }
    }
    let frac = restored as f64 / overlaid as f64;
    if frac < 0.99 {
        return Err(format!("only {:.2}% of {overlaid} overlaid pixels restored", 100.0 * frac));
    }
    Ok(format!("{:.2}% of {overlaid} overlaid pixels restored, no clean pixel touched", 100.0 * frac))
}

fn benchmark_report() -> std::result::Result<corneal_core::pipeline::EvalReport, String> {
    let config = EvalConfig::default();
    let dataset = config.load_dataset().map_err(|e| e.to_string())?;
    run_evaluation(&dataset, &config).map_err(|e| e.to_string())
}

fn report_json(report: &corneal_core::pipeline::EvalReport) -> std::result::Result<String, String> {
    serde_json::to_string_pretty(report).map_err(|e| e.to_string())
}

fn check(name: &str, limit: Option<Duration>, f: impl FnOnce() -> Check) {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let outcome = match (outcome, limit) {
        (Ok(msg), Some(l)) if elapsed > l => Err(format!("{msg}; took {elapsed:?}, limit {l:?}")),
        (o, _) => o,
    };
    match outcome {
        Ok(msg) => println!("PASS  {name} ({:.2}s): {msg}", elapsed.as_secs_f64()),
        Err(msg) => {
            println!("FAIL  {name} ({:.2}s): {msg}", elapsed.as_secs_f64());
            panic!("criterion failed: {name}");
        }
    }
}

fn secs(n: u64) -> Option<Duration> {
    Some(Duration::from_secs(n))
}

#[test]
fn criterion_1_forward_matches_enumeration() {
    check("1 forward vs enumeration", secs(10), c1_forward);
}

#[test]
fn criterion_2_viterbi_matches_enumeration() {
    check("2 viterbi vs enumeration", secs(10), c2_viterbi);
}

#[test]
fn criterion_3_baum_welch_monotone() {
    check("3 baum-welch monotone", secs(30), c3_baum_welch);
}

#[test]
fn criterion_4_knn_matches_exhaustive_sort() {
    check("4 knn vs exhaustive sort", secs(5), c4_knn);
}

#[test]
fn criterion_5_stagewise_equals_batch() {
    check("5 stagewise = batch fit", secs(5), c5_fitting);
}

#[test]
fn criterion_6_fft_band_energy() {
    check("6 fft band energy", None, c6_fft);
}

#[test]
fn criterion_7_line_removal_restores_grid() {
    check("7 line removal", None, c7_line_removal);
}

#[test]
fn criterion_8_synthetic_benchmark() {
    check("8 synthetic benchmark", secs(120), || {
        let report = benchmark_report()?;
        let table = report.render_table();
        for clf in ["KNN", "HMM"] {
            let r = report
                .result(clf, FeatureCombo::CorrFftMaxMinDiff)
                .ok_or_else(|| format!("no {clf} result"))?;
            if r.accuracy < 90.0 {
                return Err(format!("{clf} accuracy {:.1}% < 90%\n{table}", r.accuracy));
            }
        }
        Ok(format!("both >= 90% on Max-Min Diff\n{table}"))
    });
}

#[test]
fn criterion_9_report_is_deterministic() {
    check("9 deterministic report", secs(240), || {
        let a = report_json(&benchmark_report()?)?;
        let b = report_json(&benchmark_report()?)?;
        if a.as_bytes() == b.as_bytes() {
            Ok(format!("{} report bytes identical", a.len()))
        } else {
            Err("reports differ".into())
        }
    });
}
