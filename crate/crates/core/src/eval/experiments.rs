use serde::{Deserialize, Serialize};

use super::{run_benchmark, BenchmarkOptions, EvalReport};
use crate::datagen::{
    gen_positional_biased_pair, generate_corpus, inject_offset_fair, inject_offset_leaky, noise_seed,
    offset_seed, pair_seed, sample_offset, CorpusSpec, Injection, LabeledPair, SynthConfig,
};
use crate::error::{Error, Result};
use crate::nn::ModelParams;
use crate::predictors::{train_classifier_with_report, Predictor, PredictorConfig, TrainReport};
use crate::simmatrix::{pairwise_neg_l2, SimilarityMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReports {
    pub leaky: EvalReport,
    pub fair: EvalReport,
}

/// Positional-biased pairs whose v1 content is swapped for moment-matched
/// noise, scored with argmax under leaky and under fair injection of the
/// same sampled offsets.
pub fn run_bias_experiment(cfg: &SynthConfig, n_pairs: usize, bound: i64) -> Result<BiasReports> {
    if cfg.positional_weight.is_nan() || cfg.positional_weight <= 0.0 {
        return Err(Error::Argument("bias experiment needs a positive positional weight".into()));
    }
    let mut leaky = Vec::with_capacity(n_pairs);
    let mut fair = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        let seed = pair_seed(cfg.seed, i);
        let pair = gen_positional_biased_pair(&cfg.with_seed(seed))?.substitute_v1_content(noise_seed(seed))?;
        let k = sample_offset(offset_seed(seed), bound);
        leaky.push(inject_offset_leaky(&pair, k)?);
        fair.push(inject_offset_fair(&pair, k)?);
    }
    let argmax = [Predictor::Argmax];
    let options = |name: &str| BenchmarkOptions {
        dataset: format!("bias-{name} frames={} dim={} alpha={} pairs={n_pairs}", cfg.frames, cfg.dim, cfg.positional_weight),
        seed: Some(cfg.seed),
        adjust_bound: None,
    };
    Ok(BiasReports {
        leaky: run_benchmark(&leaky, &argmax, &options("leaky"))?.remove(0),
        fair: run_benchmark(&fair, &argmax, &options("fair"))?.remove(0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub duration: usize,
    pub report: EvalReport,
}

/// One fair-injected corpus per duration, all other settings (including
/// the base seed) held fixed.
pub fn run_duration_sweep(
    template: &SynthConfig,
    durations: &[usize],
    n_pairs: usize,
    bound: i64,
    predictor: &Predictor,
) -> Result<Vec<SweepPoint>> {
    durations
        .iter()
        .map(|&duration| {
            let spec = CorpusSpec {
                offset_bound: bound,
                ..CorpusSpec::new(SynthConfig { frames: duration, ..template.clone() }, n_pairs)
            };
            let pairs = generate_corpus(&spec)?;
            let options = BenchmarkOptions {
                dataset: format!("sweep frames={duration} noise={} pairs={n_pairs}", template.view_noise_sigma),
                seed: Some(template.seed),
                adjust_bound: None,
            };
            let report = run_benchmark(&pairs, std::slice::from_ref(predictor), &options)?.remove(0);
            Ok(SweepPoint { duration, report })
        })
        .collect()
}

/// Noisy fair-injected corpus where a fraction of pairs loop their content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardBenchmarkSpec {
    pub synth: SynthConfig,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub distractor_fraction: f64,
    pub distractor_period: usize,
    pub offset_bound: i64,
}

impl HardBenchmarkSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            // Small embedding scale keeps the row softmax informative; argmax
            // itself is scale-invariant.
            synth: SynthConfig {
                walk_sigma: 0.1,
                view_noise_sigma: 0.4,
                ..SynthConfig::new(80, 16, seed)
            },
            train_pairs: 400,
            test_pairs: 200,
            distractor_fraction: 0.1,
            distractor_period: 24,
            offset_bound: 30,
        }
    }
}

/// Train and test splits with disjoint pair seeds.
pub fn hard_benchmark(spec: &HardBenchmarkSpec) -> Result<(Vec<LabeledPair>, Vec<LabeledPair>)> {
    let corpus = |seed: u64, pairs: usize| {
        generate_corpus(&CorpusSpec {
            synth: spec.synth.with_seed(seed),
            pairs,
            offset_bound: spec.offset_bound,
            injection: Injection::Fair,
            distractor_fraction: spec.distractor_fraction,
            distractor_period: spec.distractor_period,
        })
    };
    let train = corpus(spec.synth.seed, spec.train_pairs)?;
    let test = corpus(pair_seed(spec.synth.seed, spec.train_pairs), spec.test_pairs)?;
    Ok((train, test))
}

/// Raw similarity matrices with their true offsets.
pub fn training_matrices(pairs: &[LabeledPair]) -> Result<Vec<(SimilarityMatrix, i64)>> {
    pairs
        .iter()
        .map(|p| Ok((pairwise_neg_l2(&p.v1, &p.v2)?, p.true_offset)))
        .collect()
}

/// Trains `config` on `train` and benchmarks it next to `baselines` on
/// `test`. The learned predictor's report comes first.
pub fn train_and_compare(
    config: &PredictorConfig,
    train: &[LabeledPair],
    test: &[LabeledPair],
    baselines: &[Predictor],
    options: &BenchmarkOptions,
) -> Result<(ModelParams, TrainReport, Vec<EvalReport>)> {
    let (model, report) = train_classifier_with_report(config, &training_matrices(train)?)?;
    let mut predictors = vec![Predictor::Learned(Box::new(model.clone()))];
    predictors.extend(baselines.iter().cloned());
    let reports = run_benchmark(test, &predictors, options)?;
    Ok((model, report, reports))
}
