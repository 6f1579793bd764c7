//! Absolute frame error, report aggregation and the experiment harnesses.
//!
//! The `±` of every report is the 95% normal-approximation half-width of the
//! mean: `1.96 · s / √n` with the sample standard deviation `s`.

mod experiments;
mod output;

pub use experiments::{
    hard_benchmark, run_bias_experiment, run_duration_sweep, train_and_compare, training_matrices,
    BiasReports, HardBenchmarkSpec, SweepPoint,
};
pub use output::{errors_csv, report_table};

use serde::{Deserialize, Serialize};

use crate::datagen::LabeledPair;
use crate::error::{Error, Result};
use crate::predictors::{adjust_extreme, Predictor, SyncPrediction};
use crate::simmatrix::pairwise_neg_l2;

pub const CI_DEFINITION: &str = "95% normal-approximation half-width: 1.96 * sample_std / sqrt(n)";

pub fn abs_frame_error(pred: &SyncPrediction, truth: i64) -> u64 {
    pred.offset.abs_diff(truth)
}

/// Descriptive fields carried into a report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub predictor: String,
    pub predictor_config: serde_json::Value,
    pub dataset: String,
    pub seed: Option<u64>,
    /// Bound of the extreme-offset adjustment, when applied.
    pub adjust_bound: Option<i64>,
    pub adjusted_count: usize,
    pub excluded: usize,
    pub exclusion_reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_pair_errors: Vec<u64>,
    pub mean_abs_error: f64,
    pub ci_half_width: f64,
    pub n: usize,
    pub ci_definition: String,
    #[serde(flatten)]
    pub meta: ReportMeta,
}

pub fn aggregate_report(errors: &[u64], meta: ReportMeta) -> Result<EvalReport> {
    if errors.is_empty() {
        return Err(Error::Argument("cannot aggregate an empty error list".into()));
    }
    let n = errors.len();
    let mean = errors.iter().map(|&e| e as f64).sum::<f64>() / n as f64;
    let ci = if n < 2 {
        0.0
    } else {
        let var = errors.iter().map(|&e| (e as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        1.96 * var.sqrt() / (n as f64).sqrt()
    };
    Ok(EvalReport {
        per_pair_errors: errors.to_vec(),
        mean_abs_error: mean,
        ci_half_width: ci,
        n,
        ci_definition: CI_DEFINITION.to_string(),
        meta,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    pub adjust_bound: Option<i64>,
    pub dataset: String,
    pub seed: Option<u64>,
}

/// Scores every predictor on every pair. Pairs a predictor fails on are
/// excluded from its report and counted; a predictor failing on all pairs
/// is an error. Reports follow the order of `predictors`.
pub fn run_benchmark(pairs: &[LabeledPair], predictors: &[Predictor], options: &BenchmarkOptions) -> Result<Vec<EvalReport>> {
    if predictors.is_empty() {
        return Err(Error::Argument("no predictors given".into()));
    }
    let mut errors = vec![Vec::with_capacity(pairs.len()); predictors.len()];
    let mut metas: Vec<ReportMeta> = predictors
        .iter()
        .map(|p| ReportMeta {
            predictor: p.kind().to_string(),
            predictor_config: predictor_summary(p),
            dataset: options.dataset.clone(),
            seed: options.seed,
            adjust_bound: options.adjust_bound,
            ..ReportMeta::default()
        })
        .collect();
    for (i, pair) in pairs.iter().enumerate() {
        let raw = pairwise_neg_l2(&pair.v1, &pair.v2);
        for (p, predictor) in predictors.iter().enumerate() {
            let outcome = raw.as_ref().map_err(|e| e.to_string()).and_then(|m| predictor.predict(m).map_err(|e| e.to_string()));
            match outcome {
                Ok(mut pred) => {
                    if let Some(bound) = options.adjust_bound {
                        pred = adjust_extreme(&pred, bound);
                        metas[p].adjusted_count += usize::from(pred.adjusted);
                    }
                    errors[p].push(abs_frame_error(&pred, pair.true_offset));
                }
                Err(msg) => {
                    metas[p].excluded += 1;
                    metas[p].exclusion_reasons.push(format!("pair {i}: {msg}"));
                }
            }
        }
    }
    errors
        .into_iter()
        .zip(metas)
        .map(|(errs, meta)| {
            if errs.is_empty() {
                return Err(Error::Argument(format!(
                    "{} failed on all {} pairs{}",
                    meta.predictor,
                    pairs.len(),
                    meta.exclusion_reasons.first().map(|r| format!(" ({r})")).unwrap_or_default()
                )));
            }
            aggregate_report(&errs, meta)
        })
        .collect()
}

fn predictor_summary(p: &Predictor) -> serde_json::Value {
    match p {
        Predictor::Learned(model) => serde_json::json!({
            "params": model.param_count(),
            "model": model.extra,
        }),
        other => serde_json::json!({ "kind": other.kind() }),
    }
}
