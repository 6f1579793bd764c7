//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use videosync_core::datagen::{
    gen_latent_pair, generate_corpus, inject_offset_fair, read_manifest, write_manifest, CorpusSpec, SynthConfig,
};
use videosync_core::embeddings::{read_eseq, write_eseq};
use videosync_core::eval::{
    hard_benchmark, run_benchmark, run_bias_experiment, run_duration_sweep, train_and_compare, BenchmarkOptions,
    HardBenchmarkSpec,
};
use videosync_core::nn::{
    decode_model, encode_model, forward, grad_check, reference_cnn_layers, Head, LayerSpec, ModelParams,
    RegressionLoss, Target, Tensor, OFFSET_CLASSES,
};
use videosync_core::predictors::{
    adjust_extreme, dtw_path, encode_input, path_cost, predict_argmax, train_classifier, Predictor,
    PredictorConfig, PredictorKind, SyncPrediction, TrainSpec,
};
use videosync_core::simmatrix::{row_softmax, SimilarityMatrix};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn exact_recovery() -> Outcome {
    let base = SynthConfig {
        identity_views: true,
        ..SynthConfig::new(240, 32, 1000)
    };
    let mut pairs = Vec::new();
    for i in 0..100usize {
        let k = (i % 61) as i64 - 30;
        let pair = gen_latent_pair(&base.with_seed(1000 + i as u64)).map_err(fail)?;
        pairs.push(inject_offset_fair(&pair, k).map_err(fail)?);
    }
    let reports = run_benchmark(&pairs, &[Predictor::Argmax, Predictor::Dtw], &BenchmarkOptions::default()).map_err(fail)?;
    let (a, d) = (reports[0].mean_abs_error, reports[1].mean_abs_error);
    check(a == 0.0 && d == 0.0, format!("argmax {a}, dtw {d} over 100 pairs, all 61 offsets"))
}

fn naive_calibration() -> Outcome {
    let spec = CorpusSpec::new(SynthConfig::new(100, 4, 2000), 500);
    let pairs = generate_corpus(&spec).map_err(fail)?;
    let r = run_benchmark(&pairs, &[Predictor::Naive], &BenchmarkOptions::default()).map_err(fail)?;
    let mean = r[0].mean_abs_error;
    check(
        (14.25..=16.25).contains(&mean),
        format!("naive mean {mean:.3} (exact expectation {:.3})", 930.0 / 61.0),
    )
}

fn brute_force_min(cost: &[Vec<f64>], i: usize, j: usize) -> f64 {
    if i == 0 && j == 0 {
        return cost[0][0];
    }
    let mut best = f64::INFINITY;
    if i > 0 {
        best = best.min(brute_force_min(cost, i - 1, j));
    }
    if j > 0 {
        best = best.min(brute_force_min(cost, i, j - 1));
    }
    if i > 0 && j > 0 {
        best = best.min(brute_force_min(cost, i - 1, j - 1));
    }
    cost[i][j] + best
}

fn dtw_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3000);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let (rows, cols) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let cost: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|_| rng.random_range(0..10) as f64 * 0.5).collect())
            .collect();
        let sim: Vec<Vec<f64>> = cost.iter().map(|r| r.iter().map(|c| -c).collect()).collect();
        let m = SimilarityMatrix::from_rows(&sim).map_err(fail)?;
        let path = dtw_path(&m).map_err(fail)?;
        if path_cost(&m, &path) != brute_force_min(&cost, rows - 1, cols - 1) {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("{mismatches} of 1000 matrices differ from exhaustive minimum"))
}

type GradCase = (&'static str, Vec<LayerSpec>, Vec<usize>, Head, Target);

fn gradient_verification() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4000);
    let mut input = |shape: Vec<usize>| {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    };
    let cases: Vec<GradCase> = vec![
        ("dense", vec![LayerSpec::dense(6, 4)], vec![6], Head::Classifier { classes: 4 }, Target::Class(1)),
        (
            "conv2d",
            vec![LayerSpec::conv(2, 3, 3, 2, 1), LayerSpec::Flatten],
            vec![2, 6, 6],
            Head::Classifier { classes: 27 },
            Target::Class(4),
        ),
        (
            "relu",
            vec![LayerSpec::dense(5, 8), LayerSpec::Relu, LayerSpec::dense(8, 3)],
            vec![5],
            Head::Classifier { classes: 3 },
            Target::Class(2),
        ),
        (
            "global_avg_pool",
            vec![LayerSpec::conv(1, 4, 3, 1, 1), LayerSpec::GlobalAvgPool, LayerSpec::dense(4, 3)],
            vec![1, 5, 5],
            Head::Classifier { classes: 3 },
            Target::Class(0),
        ),
        (
            "regressor",
            vec![LayerSpec::Flatten, LayerSpec::dense(9, 1)],
            vec![1, 3, 3],
            Head::Regressor { loss: RegressionLoss::Squared },
            Target::Value(2.5),
        ),
        (
            "reference_cnn",
            reference_cnn_layers(OFFSET_CLASSES),
            vec![1, 16, 16],
            Head::Classifier { classes: OFFSET_CLASSES },
            Target::Class(37),
        ),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (i, (name, layers, shape, head, target)) in cases.into_iter().enumerate() {
        let mut model = ModelParams::init(layers, shape.clone(), head, 40 + i as u64).map_err(fail)?;
        for w in model.weights.iter_mut().flatten() {
            for (j, b) in w.bias.values_mut().iter_mut().enumerate() {
                *b = 0.05 * ((j % 7) as f64 - 3.0);
            }
        }
        let report = grad_check(&model, &input(shape), target, 1e-5).map_err(fail)?;
        worst = worst.max(report.max_relative_error);
        parts.push(format!("{name} {:.1e}", report.max_relative_error));
    }
    check(worst < 1e-4, parts.join(", "))
}

fn bias_experiment() -> Outcome {
    let cfg = |seed| SynthConfig {
        positional_weight: 4.0,
        walk_sigma: 0.1,
        view_noise_sigma: 0.1,
        ..SynthConfig::new(120, 32, seed)
    };
    let main = run_bias_experiment(&cfg(5000), 200, 30).map_err(fail)?;
    let (leaky, fair) = (main.leaky.mean_abs_error, main.fair.mean_abs_error);
    let mut wins = 0;
    for s in 0..20u64 {
        let r = run_bias_experiment(&cfg(50_000 + s * 1000), 200, 30).map_err(fail)?;
        wins += usize::from(r.leaky.mean_abs_error < r.fair.mean_abs_error);
    }
    check(
        leaky <= 5.0 && (13.25..=17.25).contains(&fair) && wins >= 19,
        format!(
            "leaky {leaky:.3} ± {:.3}, fair {fair:.3} ± {:.3}, leaky < fair in {wins}/20 seeds",
            main.leaky.ci_half_width, main.fair.ci_half_width
        ),
    )
}

fn predictor_ordering() -> Outcome {
    let spec = HardBenchmarkSpec::new(6000);
    let (train, test) = hard_benchmark(&spec).map_err(fail)?;
    let config = PredictorConfig {
        pad_size: 128,
        ..PredictorConfig::new(PredictorKind::Cnn)
    }
    .with_train(TrainSpec {
        epochs: 40,
        lr: 2e-3,
        weight_decay: 0.1,
        ..TrainSpec::with_seed(6001)
    });
    let (_, train_report, reports) = train_and_compare(
        &config,
        &train,
        &test,
        &[Predictor::Argmax, Predictor::Naive],
        &BenchmarkOptions::default(),
    )
    .map_err(fail)?;
    let (cnn, argmax, naive) = (reports[0].mean_abs_error, reports[1].mean_abs_error, reports[2].mean_abs_error);
    check(
        cnn <= argmax - 0.5 && cnn < naive && argmax < naive,
        format!(
            "cnn {cnn:.3}, argmax {argmax:.3}, naive {naive:.3} on {} test pairs (cnn train accuracy {:.3})",
            test.len(),
            train_report.train_accuracy
        ),
    )
}

fn duration_sweep() -> Outcome {
    let template = SynthConfig {
        view_noise_sigma: 1.0,
        ..SynthConfig::new(80, 16, 7000)
    };
    let points = run_duration_sweep(&template, &[80, 160, 240], 100, 30, &Predictor::Argmax).map_err(fail)?;
    let means: Vec<String> = points.iter().map(|p| format!("{}: {:.3}", p.duration, p.report.mean_abs_error)).collect();
    check(
        points[2].report.mean_abs_error < points[0].report.mean_abs_error,
        format!("argmax mean by duration {}", means.join(", ")),
    )
}

fn adjustment_rule() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8000);
    let mut bad = 0;
    for _ in 0..10_000 {
        let offset = rng.random_range(-300i64..=300);
        let a = adjust_extreme(&SyncPrediction::new(offset, PredictorKind::Argmax), 30);
        let expected = if offset.abs() > 30 { 0 } else { offset };
        bad += usize::from(a.offset != expected || a.adjusted != (offset.abs() > 30));
    }
    check(bad == 0, format!("{bad} of 10000 predictions violate the rule"))
}

fn softmax_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9000);
    let mut bad = 0;
    for _ in 0..1000 {
        let (rows, cols) = (rng.random_range(1..=40), rng.random_range(1..=40));
        let values: Vec<f64> = (0..rows * cols).map(|_| -rng.random_range(0.0..30.0)).collect();
        let m = SimilarityMatrix::from_raw(rows, cols, values).map_err(fail)?;
        let soft = row_softmax(&m).map_err(fail)?;
        bad += usize::from(predict_argmax(&m).map_err(fail)?.offset != predict_argmax(&soft).map_err(fail)?.offset);
    }
    check(bad == 0, format!("{bad} of 1000 matrices disagree"))
}

fn round_trips() -> Outcome {
    let dir = tempfile::tempdir().map_err(fail)?;
    let mut notes = Vec::new();

    let spec = CorpusSpec {
        distractor_fraction: 0.2,
        ..CorpusSpec::new(
            SynthConfig {
                view_noise_sigma: 0.7,
                positional_weight: 1.5,
                ..SynthConfig::new(90, 12, 10_000)
            },
            8,
        )
    };
    let pairs = generate_corpus(&spec).map_err(fail)?;
    let eseq_path = dir.path().join("one.eseq");
    write_eseq(&pairs[0].v1, &eseq_path).map_err(fail)?;
    let eseq_ok = read_eseq(&eseq_path).map_err(fail)?.values() == pairs[0].v1.values();
    notes.push(format!("eseq {eseq_ok}"));

    let manifest = write_manifest(&pairs, &dir.path().join("corpus")).map_err(fail)?;
    let back = read_manifest(&manifest).map_err(fail)?;
    let manifest_ok = back.len() == pairs.len()
        && back.iter().zip(&pairs).all(|(a, b)| {
            a.v1.values() == b.v1.values()
                && a.v2.values() == b.v2.values()
                && (a.true_offset, a.injection, a.seed) == (b.true_offset, b.injection, b.seed)
        });
    notes.push(format!("manifest {manifest_ok}"));

    let data: Vec<(SimilarityMatrix, i64)> = pairs
        .iter()
        .map(|p| Ok((videosync_core::simmatrix::pairwise_neg_l2(&p.v1, &p.v2)?, p.true_offset)))
        .collect::<videosync_core::Result<_>>()
        .map_err(fail)?;
    let config = PredictorConfig {
        pad_size: 96,
        ..PredictorConfig::new(PredictorKind::Cnn)
    }
    .with_train(TrainSpec {
        epochs: 2,
        batch_size: 4,
        ..TrainSpec::with_seed(10_001)
    });
    let model = train_classifier(&config, &data).map_err(fail)?;
    let bytes = encode_model(&model).map_err(fail)?;
    let decoded = decode_model(dir.path(), &bytes).map_err(fail)?;
    let x = encode_input(&data[0].0, 96).map_err(fail)?;
    let vsmd_ok = forward(&model, &x).map_err(fail)?.values() == forward(&decoded, &x).map_err(fail)?.values()
        && encode_model(&decoded).map_err(fail)? == bytes;
    notes.push(format!("vsmd {vsmd_ok}"));

    let gen_ok = generate_corpus(&spec).map_err(fail)? == pairs;
    let train_ok = encode_model(&train_classifier(&config, &data).map_err(fail)?).map_err(fail)? == bytes;
    let bias_cfg = SynthConfig {
        positional_weight: 2.0,
        ..SynthConfig::new(80, 8, 10_002)
    };
    let bias_ok = run_bias_experiment(&bias_cfg, 10, 30).map_err(fail)? == run_bias_experiment(&bias_cfg, 10, 30).map_err(fail)?;
    notes.push(format!("reproducible gen {gen_ok}, train {train_ok}, bias {bias_ok}"));

    check(eseq_ok && manifest_ok && vsmd_ok && gen_ok && train_ok && bias_ok, notes.join(", "))
}

type Criterion = fn() -> Outcome;

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 10] = [
        ("exact recovery (argmax, dtw)", exact_recovery),
        ("naive baseline calibration", naive_calibration),
        ("dtw exhaustive-path oracle", dtw_oracle),
        ("gradient verification", gradient_verification),
        ("bias experiment: leaky vs fair", bias_experiment),
        ("predictor ordering: cnn < argmax < naive", predictor_ordering),
        ("duration sweep: 240 < 80", duration_sweep),
        ("adjustment rule", adjustment_rule),
        ("argmax/softmax invariance", softmax_invariance),
        ("round trips and determinism", round_trips),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.ends_with(&format!(" {f}")) || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id:>12} {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id:>12} {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
