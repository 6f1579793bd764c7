use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::json;
use videosync_core::datagen::{generate_corpus, read_manifest, write_manifest, CorpusSpec, SynthConfig};
use videosync_core::embeddings::{extract_pixel_features, read_eseq, sliding_window_pool, write_eseq};
use videosync_core::eval::{
    errors_csv, report_table, run_benchmark, run_bias_experiment, run_duration_sweep, training_matrices,
    BenchmarkOptions, EvalReport,
};
use videosync_core::nn::{deserialize_model, serialize_model};
use videosync_core::predictors::{
    adjust_extreme, train_classifier_with_report, Predictor, PredictorConfig, PredictorKind, TrainSpec,
    DEFAULT_OFFSET_BOUND,
};
use videosync_core::simmatrix::{pad_to_square, pairwise_neg_l2, render_pgm, row_softmax};

use crate::record::{sidecar, RunRecord};
use crate::{usage, BiasArgs, Cli, CliError, Command, EvalArgs, FeaturesArgs, Format, GenArgs, PredictArgs, SimmatArgs, SweepArgs, TrainArgs};

type CmdResult = Result<(), CliError>;

pub fn run(cli: &Cli) -> CmdResult {
    let ctx = Ctx { cli };
    match &cli.command {
        Command::Gen(a) => ctx.gen(a),
        Command::Features(a) => ctx.features(a),
        Command::Simmat(a) => ctx.simmat(a),
        Command::Train(a) => ctx.train(a),
        Command::Predict(a) => ctx.predict(a),
        Command::Eval(a) => ctx.eval(a),
        Command::BiasExp(a) => ctx.bias(a),
        Command::DurationSweep(a) => ctx.sweep(a),
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// `key,value` lines for single-record CSV output.
fn summary_csv(summary: &serde_json::Value) -> String {
    let mut out = String::from("key,value\n");
    if let Some(map) = summary.as_object() {
        for (k, v) in map {
            let v = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            writeln!(out, "{k},{v}").unwrap();
        }
    }
    out
}

fn summary_text(summary: &serde_json::Value) -> String {
    summary_csv(summary)
        .lines()
        .skip(1)
        .map(|l| l.replacen(',', " ", 1) + "\n")
        .collect()
}

fn check_bound(bound: i64) -> Result<(), CliError> {
    if bound < 0 {
        return Err(usage("--offset-bound must be non-negative"));
    }
    Ok(())
}

fn load_predictor(kind: PredictorKind, model: Option<&Path>) -> Result<Predictor, CliError> {
    if !kind.is_learned() {
        if model.is_some() {
            return Err(usage(format!("--model does not apply to {kind}")));
        }
        return Ok(Predictor::handcrafted(kind)?);
    }
    let path = model.ok_or_else(|| usage(format!("{kind} needs --model")))?;
    let loaded = Predictor::Learned(Box::new(deserialize_model(path)?));
    if loaded.kind() != kind {
        return Err(usage(format!("{} holds a {} model, not {kind}", path.display(), loaded.kind())));
    }
    Ok(loaded)
}

impl Ctx<'_> {
    fn format(&self) -> Format {
        self.cli.format
    }

    fn record(&self, path: &Path, outputs: Vec<PathBuf>, summary: serde_json::Value) -> anyhow::Result<()> {
        RunRecord::new(self.format(), &self.cli.command, outputs, summary).write(path)
    }

    /// Prints a flat summary object in the selected format.
    fn print_summary(&self, summary: &serde_json::Value) {
        match self.format() {
            Format::Json => print!("{}", to_json(summary)),
            Format::Csv => print!("{}", summary_csv(summary)),
            Format::Text => print!("{}", summary_text(summary)),
        }
    }

    fn print_reports(&self, reports: &[EvalReport]) {
        match self.format() {
            Format::Json => print!("{}", to_json(&reports)),
            Format::Csv => print!("{}", errors_csv(reports)),
            Format::Text => print!("{}", report_table(reports)),
        }
    }

    fn gen(&self, a: &GenArgs) -> CmdResult {
        let synth = SynthConfig {
            walk_sigma: a.walk_sigma,
            view_noise_sigma: a.noise,
            positional_weight: a.positional_weight,
            identity_views: a.identity_views,
            ..SynthConfig::new(a.frames, a.dim, a.seed)
        };
        synth.validate().map_err(usage)?;
        check_bound(a.offset_bound)?;
        if a.offset_bound as usize + 1 >= a.frames {
            return Err(usage(format!("--offset-bound {} too large for {} frames", a.offset_bound, a.frames)));
        }
        if !(0.0..=1.0).contains(&a.distractor_fraction) {
            return Err(usage("--distractor-fraction must lie in [0, 1]"));
        }
        let spec = CorpusSpec {
            offset_bound: a.offset_bound,
            injection: a.injection.into(),
            distractor_fraction: a.distractor_fraction,
            ..CorpusSpec::new(synth, a.pairs)
        };
        let pairs = generate_corpus(&spec)?;
        let manifest = write_manifest(&pairs, &a.out_dir)?;
        let summary = json!({ "manifest": manifest, "pairs": pairs.len() });
        self.record(&a.out_dir.join("run_record.json"), vec![manifest], summary.clone())?;
        self.print_summary(&summary);
        Ok(())
    }

    fn features(&self, a: &FeaturesArgs) -> CmdResult {
        if a.window == 0 {
            return Err(usage("--window must be at least 1"));
        }
        let seq = sliding_window_pool(&extract_pixel_features(&a.frames_dir, a.temporal_diff)?, a.window)?;
        write_eseq(&seq, &a.out)?;
        let summary = json!({ "out": a.out, "frames": seq.frames(), "dim": seq.dim() });
        self.record(&sidecar(&a.out), vec![a.out.clone()], summary.clone())?;
        self.print_summary(&summary);
        Ok(())
    }

    fn simmat(&self, a: &SimmatArgs) -> CmdResult {
        let mut m = pairwise_neg_l2(&read_eseq(&a.v1)?, &read_eseq(&a.v2)?)?;
        if a.softmax {
            m = row_softmax(&m)?;
        }
        if let Some(size) = a.pad {
            m = pad_to_square(&m, size)?;
        }
        m.write_eseq(&a.out)?;
        let mut outputs = vec![a.out.clone()];
        if let Some(pgm) = &a.pgm {
            render_pgm(&m, pgm)?;
            outputs.push(pgm.clone());
        }
        let summary = json!({ "out": a.out, "rows": m.n_rows(), "cols": m.n_cols() });
        self.record(&sidecar(&a.out), outputs, summary.clone())?;
        self.print_summary(&summary);
        Ok(())
    }

    fn train(&self, a: &TrainArgs) -> CmdResult {
        let config = PredictorConfig {
            pad_size: a.pad,
            ..PredictorConfig::new(a.predictor)
        }
        .with_train(TrainSpec {
            epochs: a.epochs,
            batch_size: a.batch,
            lr: a.lr,
            weight_decay: a.weight_decay,
            seed: a.seed,
        });
        config.validate().map_err(usage)?;
        let pairs = read_manifest(&a.manifest)?;
        let (model, report) = train_classifier_with_report(&config, &training_matrices(&pairs)?)?;
        serialize_model(&model, &a.out_model)?;
        let summary = json!({
            "model": a.out_model,
            "predictor": a.predictor,
            "pairs": pairs.len(),
            "train_accuracy": report.train_accuracy,
            "train_mean_abs_error": report.train_mean_abs_error,
            "final_loss": report.epoch_losses.last(),
        });
        let mut full = summary.clone();
        full["epoch_losses"] = json!(report.epoch_losses);
        self.record(&sidecar(&a.out_model), vec![a.out_model.clone()], full)?;
        self.print_summary(&summary);
        Ok(())
    }

    fn predict(&self, a: &PredictArgs) -> CmdResult {
        let predictor = load_predictor(a.predictor, a.model.as_deref())?;
        let m = pairwise_neg_l2(&read_eseq(&a.v1)?, &read_eseq(&a.v2)?)?;
        let mut pred = predictor.predict(&m)?;
        if a.adjust {
            pred = adjust_extreme(&pred, DEFAULT_OFFSET_BOUND);
        }
        match self.format() {
            Format::Text => println!("{}", pred.offset),
            Format::Json => print!(
                "{}",
                to_json(&RunRecord::new(self.format(), &self.cli.command, vec![], json!(pred)))
            ),
            Format::Csv => {
                let raw = pred.raw_value.map(|v| v.to_string()).unwrap_or_default();
                print!("offset,predictor,adjusted,raw_value\n{},{},{},{raw}\n", pred.offset, pred.predictor, pred.adjusted);
            }
        }
        Ok(())
    }

    fn eval(&self, a: &EvalArgs) -> CmdResult {
        let predictors = a
            .predictors
            .iter()
            .map(|&k| {
                let model = a.models.as_ref().map(|d| d.join(format!("{k}.vsmd")));
                load_predictor(k, if k.is_learned() { model.as_deref() } else { None })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let pairs = read_manifest(&a.manifest)?;
        let options = BenchmarkOptions {
            adjust_bound: a.adjust.then_some(DEFAULT_OFFSET_BOUND),
            dataset: a.manifest.display().to_string(),
            seed: None,
        };
        let reports = run_benchmark(&pairs, &predictors, &options)?;

        create_dir(&a.out)?;
        let mut outputs = vec![a.out.join("report.json"), a.out.join("report.txt"), a.out.join("errors.csv")];
        write_text(&outputs[0], &to_json(&reports))?;
        write_text(&outputs[1], &report_table(&reports))?;
        write_text(&outputs[2], &errors_csv(&reports))?;
        for (i, pair) in pairs.iter().take(a.pgm).enumerate() {
            let path = a.out.join(format!("matrix_{i:04}.pgm"));
            render_pgm(&pairwise_neg_l2(&pair.v1, &pair.v2)?, &path)?;
            outputs.push(path);
        }
        let excluded: usize = reports.iter().map(|r| r.meta.excluded).sum();
        let summary = json!({
            "pairs": pairs.len(),
            "excluded": excluded,
            "means": reports.iter().map(|r| (r.meta.predictor.clone(), json!(r.mean_abs_error))).collect::<serde_json::Map<_, _>>(),
        });
        self.record(&a.out.join("run_record.json"), outputs, summary)?;
        self.print_reports(&reports);
        if excluded > 0 {
            return Err(anyhow::anyhow!("{excluded} pair evaluations were excluded; see report.json").into());
        }
        Ok(())
    }

    fn bias(&self, a: &BiasArgs) -> CmdResult {
        if a.positional_weight.is_nan() || a.positional_weight <= 0.0 {
            return Err(usage("--positional-weight must be positive"));
        }
        check_bound(a.offset_bound)?;
        let cfg = SynthConfig {
            walk_sigma: a.walk_sigma,
            view_noise_sigma: a.noise,
            positional_weight: a.positional_weight,
            ..SynthConfig::new(a.frames, a.dim, a.seed)
        };
        cfg.validate().map_err(usage)?;
        if a.offset_bound as usize + 1 >= a.frames {
            return Err(usage(format!("--offset-bound {} too large for {} frames", a.offset_bound, a.frames)));
        }
        let result = run_bias_experiment(&cfg, a.pairs, a.offset_bound)?;
        let mut leaky = result.leaky.clone();
        leaky.meta.predictor = "argmax (leaky)".into();
        let mut fair = result.fair.clone();
        fair.meta.predictor = "argmax (fair)".into();
        let reports = [leaky, fair];

        create_dir(&a.out)?;
        let outputs = vec![a.out.join("bias_report.json"), a.out.join("bias_report.txt"), a.out.join("errors.csv")];
        write_text(&outputs[0], &to_json(&result))?;
        write_text(&outputs[1], &report_table(&reports))?;
        write_text(&outputs[2], &errors_csv(&reports))?;
        let summary = json!({
            "leaky_mean": result.leaky.mean_abs_error,
            "fair_mean": result.fair.mean_abs_error,
        });
        self.record(&a.out.join("run_record.json"), outputs, summary)?;
        self.print_reports(&reports);
        Ok(())
    }

    fn sweep(&self, a: &SweepArgs) -> CmdResult {
        check_bound(a.offset_bound)?;
        if a.durations.is_empty() {
            return Err(usage("--durations is empty"));
        }
        let template = SynthConfig {
            view_noise_sigma: a.noise,
            ..SynthConfig::new(a.durations[0], a.dim, a.seed)
        };
        for &d in &a.durations {
            SynthConfig { frames: d, ..template.clone() }.validate().map_err(usage)?;
            if a.offset_bound as usize + 1 >= d {
                return Err(usage(format!("--offset-bound {} too large for {d} frames", a.offset_bound)));
            }
        }
        let predictor = load_predictor(a.predictor, a.model.as_deref())?;
        let points = run_duration_sweep(&template, &a.durations, a.pairs, a.offset_bound, &predictor)?;
        let reports: Vec<EvalReport> = points.iter().map(|p| p.report.clone()).collect();

        create_dir(&a.out)?;
        let mut csv = String::from("duration,n,mean_abs_error,ci95\n");
        for p in &points {
            writeln!(csv, "{},{},{},{}", p.duration, p.report.n, p.report.mean_abs_error, p.report.ci_half_width).unwrap();
        }
        let outputs = vec![a.out.join("sweep.json"), a.out.join("sweep.txt"), a.out.join("sweep.csv")];
        write_text(&outputs[0], &to_json(&points))?;
        write_text(&outputs[1], &report_table(&reports))?;
        write_text(&outputs[2], &csv)?;
        let summary = json!(points.iter().map(|p| json!({"duration": p.duration, "mean": p.report.mean_abs_error})).collect::<Vec<_>>());
        self.record(&a.out.join("run_record.json"), outputs, summary)?;
        match self.format() {
            Format::Csv => print!("{csv}"),
            _ => self.print_reports(&reports),
        }
        Ok(())
    }
}
