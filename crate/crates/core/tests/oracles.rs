//! Library routines checked against independent reference computations.

mod common;

use common::*;
use corneal_core::curvefit::*;
use corneal_core::features::*;
use corneal_core::hmm::*;
use corneal_core::imgprep::*;
use corneal_core::knn::{knn_fit, LabeledSample};
use corneal_core::persist::{decode_model, encode_model, HmmArtifact, KnnArtifact, StoredModel};
use corneal_core::pipeline::PrepConfig;
use corneal_core::stats::Standardizer;
use corneal_core::synth::{synth_topography, SyntheticParams};
use corneal_core::Label;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_points(r: &mut ChaCha8Rng, n: usize) -> Vec<Point2> {
    (0..n)
        .map(|_| Point2::new(r.random_range(-10.0..10.0), r.random_range(-10.0..10.0)))
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn line_batch_matches_cramer() {
    let mut r = rng(10);
    for _ in 0..50 {
        let pts = random_points(&mut r, 20);
        let (a, b) = line_oracle(&pts);
        let m = fit_line_batch(&pts).unwrap();
        assert!(close(m.a, a, 1e-8) && close(m.b, b, 1e-8), "{m:?} vs ({a}, {b})");
    }
}

#[test]
fn quad_batch_matches_cramer() {
    let mut r = rng(11);
    for _ in 0..50 {
        let pts = random_points(&mut r, 10);
        let (a, b, c) = quad_oracle(&pts);
        let m = fit_quad_batch(&pts).unwrap();
        assert!(close(m.a, a, 1e-8) && close(m.b, b, 1e-8) && close(m.c, c, 1e-8));
    }
}

#[test]
fn stagewise_final_equals_batch() {
    let mut r = rng(12);
    for _ in 0..50 {
        let pts = random_points(&mut r, 4);
        let (line, trace) = fit_line_stagewise(&pts).unwrap();
        let batch = fit_line_batch(&pts).unwrap();
        assert!(close(line.a, batch.a, 1e-8) && close(line.b, batch.b, 1e-8));
        assert_eq!(trace.stages.last().unwrap().stage_index, 4);

        let pts = random_points(&mut r, 10);
        let (quad, _) = fit_quad_stagewise(&pts).unwrap();
        let batch = fit_quad_batch(&pts).unwrap();
        assert!(close(quad.a, batch.a, 1e-8) && close(quad.b, batch.b, 1e-8) && close(quad.c, batch.c, 1e-8));
    }
}

#[test]
fn frozen_small_fits() {
    // values frozen from the Cramer oracle
    let pts = [
        Point2::new(0.0, 1.0),
        Point2::new(1.0, 3.0),
        Point2::new(2.0, 4.0),
        Point2::new(3.0, 8.0),
    ];
    let (a, b) = line_oracle(&pts);
    assert!((a - 2.2).abs() < 1e-12 && (b - 0.7).abs() < 1e-12);
    let m = fit_line_batch(&pts).unwrap();
    assert!((m.a - 2.2).abs() < 1e-10 && (m.b - 0.7).abs() < 1e-10);
    let (qa, qb, qc) = quad_oracle(&pts);
    assert!((qa - 0.5).abs() < 1e-12 && (qb - 0.7).abs() < 1e-12 && (qc - 1.2).abs() < 1e-12);
    let q = fit_quad_batch(&pts).unwrap();
    assert!((q.a - 0.5).abs() < 1e-10 && (q.b - 0.7).abs() < 1e-10 && (q.c - 1.2).abs() < 1e-10);
}

#[test]
fn residual_sum_matches_resummation() {
    let mut r = rng(13);
    for _ in 0..20 {
        let pts = random_points(&mut r, 30);
        let m = QuadModel {
            a: r.random_range(-1.0..1.0),
            b: r.random_range(-1.0..1.0),
            c: r.random_range(-1.0..1.0),
        };
        let expected = residual_oracle(|x| m.eval(x), &pts);
        assert_eq!(residual_sum(&m, &pts), expected);
    }
}

#[test]
fn channel_contrast_per_pixel() {
    let mut r = rng(14);
    let (w, h) = (17, 9);
    let px: Vec<Rgb> = (0..w * h).map(|_| [r.random(), r.random(), r.random()]).collect();
    let img = PixelGrid::new(w, h, px.clone()).unwrap();
    for (ch, k) in [(Channel::Red, 0), (Channel::Green, 1), (Channel::Blue, 2)] {
        let g = channel_contrast(&img, ch);
        for y in 0..h {
            for x in 0..w {
                assert_eq!(g.get(x, y), f64::from(px[y * w + x][k]) / 255.0);
            }
        }
    }
}

#[test]
fn symmetry_matches_pearson_oracle() {
    let mut r = rng(15);
    for _ in 0..30 {
        let (w, h) = (r.random_range(2..40), r.random_range(1..20));
        let vals: Vec<f64> = (0..w * h).map(|_| r.random_range(-5.0..5.0)).collect();
        let g = ScalarGrid::new(w, h, vals).unwrap();
        let got = symmetry_correlation(&g);
        let expected = mirror_pearson_oracle(&g);
        assert!((got - expected).abs() <= 1e-12, "{got} vs {expected}");
    }
}

#[test]
fn band_energies_match_naive_dft() {
    let mut r = rng(16);
    for _ in 0..10 {
        let (w, h) = (r.random_range(2..=32), r.random_range(2..=32));
        let vals: Vec<f64> = (0..w * h).map(|_| r.random_range(0.0..1.0)).collect();
        let g = ScalarGrid::new(w, h, vals).unwrap();
        let naive: f64 = naive_dft_energy(&g, true).iter().skip(1).sum();
        let got: f64 = fft_spectrum_energy(&g, max_bands(w, h)).unwrap().iter().sum();
        assert!((got - naive).abs() <= 1e-9 * naive);
    }
}

#[test]
fn pachymetry_powers_match_formula() {
    let mut r = rng(17);
    for _ in 0..1000 {
        let p = PachymetryReading {
            center: r.random_range(300.0..700.0),
            up: r.random_range(300.0..900.0),
            down: r.random_range(300.0..900.0),
            left: r.random_range(300.0..900.0),
            right: r.random_range(300.0..900.0),
        };
        let sides = [p.up, p.down, p.left, p.right];
        let hi = sides.iter().cloned().fold(f64::MIN, f64::max);
        let lo = sides.iter().cloned().fold(f64::MAX, f64::min);
        assert_eq!(max_power(&p), p.center - hi);
        assert_eq!(min_power(&p), p.center - lo);
        assert!(max_power(&p) <= min_power(&p));
    }
}

#[test]
fn feature_vector_components_recomputed() {
    let s = synth_topography(Label::Lasik, &SyntheticParams::default(), 5).unwrap();
    let map = channel_contrast(&s.image, Channel::Red);
    for combo in FeatureCombo::ALL {
        let v = build_feature_vector(&map, &s.reading, combo, 6).unwrap();
        assert_eq!(v.values.len(), v.names.len());
        assert_eq!(v.values[0], symmetry_correlation(&map));
        assert_eq!(&v.values[1..7], fft_spectrum_energy(&map, 6).unwrap().as_slice());
        let mut tail = Vec::new();
        if combo.uses_max_power() {
            tail.push(max_power(&s.reading));
        }
        if combo.uses_min_power() {
            tail.push(min_power(&s.reading));
        }
        assert_eq!(&v.values[7..], tail.as_slice());
    }
}

#[test]
fn standardizer_matches_two_pass() {
    let mut r = rng(18);
    let rows: Vec<Vec<f64>> = (0..57)
        .map(|_| vec![r.random_range(0.0..100.0), 3.0, r.random_range(-1.0..1.0)])
        .collect();
    let s = Standardizer::fit(rows.iter().map(Vec::as_slice)).unwrap();
    assert_eq!(s.kept, vec![0, 2]);
    for (slot, &d) in s.kept.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r[d]).collect();
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        assert!((s.means[slot] - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        assert!((s.stds[slot] - sd).abs() <= 1e-12 * sd);
    }
}

#[test]
fn knn_k5_matches_sort_oracle() {
    let mut r = rng(19);
    let train: Vec<(Vec<f64>, Label)> = (0..100)
        .map(|i| {
            let l = if i % 2 == 0 { Label::Healthy } else { Label::Lasik };
            let off = if l == Label::Healthy { 0.0 } else { 1.0 };
            ((0..4).map(|_| r.random_range(0.0..2.0) + off).collect(), l)
        })
        .collect();
    let samples: Vec<LabeledSample> = train
        .iter()
        .map(|(f, l)| LabeledSample {
            features: f.clone(),
            label: *l,
        })
        .collect();
    let model = knn_fit(&samples, 5, None).unwrap();
    for _ in 0..20 {
        let q: Vec<f64> = (0..4).map(|_| r.random_range(0.0..3.0)).collect();
        assert_eq!(model.classify(&q).unwrap().label(), knn_oracle(&train, &q, 5, None));
    }
}

#[test]
fn codebook_distortion_and_nearest() {
    let mut r = rng(20);
    let vectors: Vec<Vec<f64>> = (0..300)
        .map(|i| {
            let c = (i % 3) as f64 * 4.0;
            vec![c + r.random_range(-1.0..1.0), -c + r.random_range(-1.0..1.0)]
        })
        .collect();
    let (cb, trace) = codebook::train_codebook_traced(&vectors, 5, 3).unwrap();
    for w in trace.distortions.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "distortion rose: {:?}", trace.distortions);
    }
    let symbols = quantize(&cb, &vectors).unwrap();
    for (v, &s) in vectors.iter().zip(&symbols) {
        let d: Vec<f64> = cb
            .centroids
            .iter()
            .map(|c| c.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        let best = (0..d.len()).fold(0, |b, i| if d[i] < d[b] { i } else { b });
        assert_eq!(s, best);
    }
}

#[test]
fn forward_and_viterbi_n3_t6() {
    let mut r = rng(21);
    let m = HmmParams::random(3, 4, &mut r);
    let obs: Vec<usize> = (0..5).map(|_| r.random_range(0..4)).collect();
    let (total, _, _) = hmm_enumerate(&m, &obs);
    let ll = forward_likelihood(&m, &ObservationSequence::new(obs).unwrap()).unwrap();
    assert!((ll - total.ln()).abs() <= 1e-10 * total.ln().abs());

    let obs: Vec<usize> = (0..6).map(|_| r.random_range(0..4)).collect();
    let (_, path, score) = hmm_enumerate(&m, &obs);
    let v = viterbi(&m, &ObservationSequence::new(obs.clone()).unwrap()).unwrap();
    if v.states != path {
        // only an exactly tied path may differ from the enumerated argmax
        assert!((path_log_score(&m, &obs, &v.states) - score).abs() <= 1e-12 * score.abs());
    }
    assert!((v.log_prob - score).abs() <= 1e-10 * score.abs());
}

fn separated_pair() -> (HmmParams, HmmParams) {
    let a = HmmParams::new(
        vec![0.6, 0.4],
        vec![vec![0.8, 0.2], vec![0.3, 0.7]],
        vec![vec![0.48, 0.48, 0.02, 0.02], vec![0.02, 0.48, 0.48, 0.02]],
    )
    .unwrap();
    let b = HmmParams::new(
        vec![0.5, 0.5],
        vec![vec![0.7, 0.3], vec![0.3, 0.7]],
        vec![vec![0.02, 0.02, 0.48, 0.48], vec![0.48, 0.02, 0.02, 0.48]],
    )
    .unwrap();
    (a, b)
}

#[test]
fn classify_monte_carlo() {
    let (a, b) = separated_pair();
    let models = BTreeMap::from([(Label::Healthy, a.clone()), (Label::Lasik, b)]);
    let mut r = rng(22);
    let hits = (0..200)
        .filter(|_| {
            let (_, obs) = a.sample(20, &mut r);
            hmm_classify(&models, &obs).unwrap().0 == Label::Healthy
        })
        .count();
    assert!(hits >= 190, "{hits}/200");
}

#[test]
fn baum_welch_improves_held_out() {
    let truth = HmmParams::new(
        vec![0.5, 0.5],
        vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        vec![vec![0.49, 0.49, 0.01, 0.01], vec![0.01, 0.01, 0.49, 0.49]],
    )
    .unwrap();
    let mut r = rng(23);
    let train: Vec<_> = (0..10).map(|_| truth.sample(40, &mut r).1).collect();
    let held: Vec<_> = (0..10).map(|_| truth.sample(40, &mut r).1).collect();
    let score = |m: &HmmParams| held.iter().map(|s| forward_likelihood(m, s).unwrap()).sum::<f64>();
    for seed in 0..5 {
        let init = HmmParams::random(2, 4, &mut rng(100 + seed));
        let report = baum_welch(&init, &train, 100, 1e-8).unwrap();
        assert!(score(&report.params) > score(&init) + 1.0);
    }
}

#[test]
fn lasik_generator_thins_periphery() {
    let p = SyntheticParams::default();
    for seed in 0..100 {
        let s = synth_topography(Label::Lasik, &p, seed).unwrap();
        assert!(min_power(&s.reading) > 0.0, "seed {seed}: {:?}", s.reading);
        assert!(s.reading.center < 460.0);
    }
}

#[test]
fn knn_model_round_trip_keeps_decisions() {
    let mut r = rng(24);
    let samples: Vec<LabeledSample> = (0..60)
        .map(|i| LabeledSample {
            features: (0..5).map(|_| r.random_range(0.0..1.0) + (i % 2) as f64 * 0.5).collect(),
            label: if i % 2 == 0 { Label::Healthy } else { Label::Lasik },
        })
        .collect();
    let model = knn_fit(&samples, 3, Some(2.0)).unwrap();
    let stored = StoredModel::Knn(KnnArtifact {
        combo: FeatureCombo::CorrFftMaxMinDiff,
        bands: 0,
        feature_names: (0..5).map(|i| format!("f{i}")).collect(),
        prep: PrepConfig::default(),
        model: model.clone(),
    });
    let back = match decode_model(encode_model(&stored).unwrap().as_bytes()).unwrap() {
        StoredModel::Knn(k) => k.model,
        _ => panic!("kind changed"),
    };
    for _ in 0..50 {
        let q: Vec<f64> = (0..5).map(|_| r.random_range(-0.5..2.0)).collect();
        assert_eq!(model.classify(&q).unwrap(), back.classify(&q).unwrap());
    }
}

#[test]
fn hmm_bank_round_trip_keeps_likelihoods() {
    let mut r = rng(25);
    let data: Vec<(Vec<Vec<f64>>, Label)> = (0..12)
        .map(|i| {
            let l = if i % 2 == 0 { Label::Healthy } else { Label::Lasik };
            let seq = (0..15)
                .map(|t| vec![t as f64 * (i % 2) as f64 + r.random_range(0.0..1.0), r.random_range(0.0..1.0)])
                .collect();
            (seq, l)
        })
        .collect();
    let config = HmmBankConfig {
        states: 3,
        symbols: 6,
        ..Default::default()
    };
    let (bank, _) = HmmBank::train(&data, &config).unwrap();
    let stored = StoredModel::Hmm(HmmArtifact {
        combo: FeatureCombo::CorrFftMinDiff,
        prep: PrepConfig::default(),
        bank: bank.clone(),
    });
    let back = match decode_model(encode_model(&stored).unwrap().as_bytes()).unwrap() {
        StoredModel::Hmm(h) => h.bank,
        _ => panic!("kind changed"),
    };
    assert_eq!(back, bank);
    for _ in 0..20 {
        let obs = ObservationSequence::new((0..10).map(|_| r.random_range(0..6)).collect()).unwrap();
        for (label, m) in &bank.models {
            let before = forward_likelihood(m, &obs).unwrap();
            let after = forward_likelihood(&back.models[label], &obs).unwrap();
            assert!((before - after).abs() <= 1e-15 * before.abs());
        }
    }
}

#[test]
fn noiseless_classes_separate_on_min_power() {
    let p = SyntheticParams {
        noise_std: 0.0,
        ..Default::default()
    };
    for seed in 0..50 {
        let h = synth_topography(Label::Healthy, &p, seed).unwrap();
        for other in 0..5 {
            let l = synth_topography(Label::Lasik, &p, seed * 5 + other).unwrap();
            assert!(min_power(&l.reading) > min_power(&h.reading));
        }
    }
}

#[test]
fn report_counts_are_consistent() {
    use corneal_core::pipeline::{run_evaluation, DatasetSource, EvalConfig};
    let config = EvalConfig {
        seed: 9,
        dataset: DatasetSource::Synthetic {
            n_per_class: 12,
            params: SyntheticParams {
                noise_std: 40.0,
                ..Default::default()
            },
        },
        ..Default::default()
    };
    let report = run_evaluation(&config.load_dataset().unwrap(), &config).unwrap();
    assert_eq!(report.results.len(), 6);
    for r in &report.results {
        let decided: usize = r.confusion.values().flat_map(|row| row.values()).sum();
        assert_eq!(decided + r.rejects, r.total);
        assert_eq!(r.total, report.metadata.n_test);
        let diagonal: usize = r.confusion.iter().map(|(t, row)| row.get(t).copied().unwrap_or(0)).sum();
        assert_eq!(diagonal, r.correct);
        assert!((r.accuracy - 100.0 * r.correct as f64 / r.total as f64).abs() < 1e-12);
    }
}
