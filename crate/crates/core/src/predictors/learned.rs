use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PredictorConfig, PredictorKind, SyncPrediction};
use crate::error::{Error, Result};
use crate::nn::{
    accumulate_grad, adamw_step, forward, reference_cnn_layers, AdamWConfig, Gradients, Head,
    LayerSpec, ModelParams, OptimizerState, RegressionLoss, Target, Tensor,
};
use crate::simmatrix::{pad_to_square, row_softmax, Normalization, SimilarityMatrix};

/// Shuffle stream is kept apart from the init stream of the same seed.
const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
    pub train_mean_abs_error: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelExtra {
    predictor: PredictorKind,
    config: PredictorConfig,
}

pub(crate) fn model_config(model: &ModelParams) -> PredictorConfig {
    serde_json::from_value::<ModelExtra>(model.extra.clone())
        .map(|e| e.config)
        .unwrap_or_else(|_| {
            let kind = match model.head {
                Head::Regressor { .. } => PredictorKind::Svm,
                Head::Classifier { .. } if model.layers.iter().any(|l| matches!(l, LayerSpec::Conv2d { .. })) => {
                    PredictorKind::Cnn
                }
                Head::Classifier { .. } if model.layers.len() > 2 => PredictorKind::Mlp,
                Head::Classifier { .. } => PredictorKind::Logreg,
            };
            let mut c = PredictorConfig::new(kind);
            if let Some(&p) = model.input_shape.last() {
                c.pad_size = p;
            }
            if let Some(classes) = model.class_count() {
                c.offset_bound = (classes as i64 - 1) / 2;
            }
            c
        })
}

/// Row-softmax (unless already normalized), then zero-pad to
/// `pad_size × pad_size`, as a `[1, pad, pad]` tensor.
pub fn encode_input(m: &SimilarityMatrix, pad_size: usize) -> Result<Tensor> {
    let soft = match m.normalized() {
        Normalization::Raw => row_softmax(m)?,
        Normalization::RowSoftmax => m.clone(),
    };
    let padded = pad_to_square(&soft, pad_size)?;
    Tensor::new(vec![1, pad_size, pad_size], padded.values().to_vec())
}

fn architecture(config: &PredictorConfig) -> Result<(Vec<LayerSpec>, Head)> {
    let inputs = config.pad_size * config.pad_size;
    let classes = config.class_count();
    let classifier = Head::Classifier { classes };
    Ok(match config.kind {
        PredictorKind::Logreg => (vec![LayerSpec::Flatten, LayerSpec::dense(inputs, classes)], classifier),
        PredictorKind::Mlp => {
            let mut layers = vec![LayerSpec::Flatten];
            let mut prev = inputs;
            for &h in &config.mlp_hidden {
                layers.push(LayerSpec::dense(prev, h));
                layers.push(LayerSpec::Relu);
                prev = h;
            }
            layers.push(LayerSpec::dense(prev, classes));
            (layers, classifier)
        }
        PredictorKind::Cnn => (reference_cnn_layers(classes), classifier),
        PredictorKind::Svm => (
            vec![LayerSpec::Flatten, LayerSpec::dense(inputs, 1)],
            Head::Regressor {
                loss: RegressionLoss::EpsilonInsensitive {
                    epsilon: config.svm_epsilon,
                },
            },
        ),
        k => return Err(Error::Argument(format!("{k} is not a trainable predictor"))),
    })
}

pub fn train_classifier(config: &PredictorConfig, data: &[(SimilarityMatrix, i64)]) -> Result<ModelParams> {
    Ok(train_classifier_with_report(config, data)?.0)
}

/// Trains a learned predictor with AdamW on mini-batches (mean gradient per
/// batch, reshuffled each epoch). The result is deterministic per seed and
/// its parameters are rounded to f32 so they survive serialization exactly.
pub fn train_classifier_with_report(
    config: &PredictorConfig,
    data: &[(SimilarityMatrix, i64)],
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    let train = config
        .train
        .ok_or_else(|| Error::Argument("training requires an explicit TrainSpec (seed)".into()))?;
    if data.is_empty() {
        return Err(Error::Argument("no training pairs".into()));
    }
    let (layers, head) = architecture(config)?;
    let mut samples = Vec::with_capacity(data.len());
    for (m, offset) in data {
        let target = match head {
            Head::Classifier { .. } => Target::Class(config.encode_label(*offset)?),
            Head::Regressor { .. } => {
                config.encode_label(*offset)?;
                Target::Value(*offset as f64)
            }
        };
        samples.push((encode_input(m, config.pad_size)?, target));
    }

    let input_shape = vec![1, config.pad_size, config.pad_size];
    let mut model = ModelParams::init(layers, input_shape, head, train.seed)?;
    let mut state = OptimizerState::for_model(
        &model,
        AdamWConfig {
            lr: train.lr,
            weight_decay: train.weight_decay,
            ..AdamWConfig::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut grads = Gradients::zeros_like(&model);
    let mut epoch_losses = Vec::with_capacity(train.epochs);
    for _ in 0..train.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(train.batch_size) {
            grads.fill_zero();
            for &idx in batch {
                let (x, t) = &samples[idx];
                total += accumulate_grad(&model, x, *t, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adamw_step(&mut model, &grads, &mut state);
        }
        epoch_losses.push(total / samples.len() as f64);
    }
    model.quantize_f32();
    model.extra = serde_json::to_value(ModelExtra {
        predictor: config.kind,
        config: config.clone(),
    })
    .expect("config serializes");

    let mut correct = 0usize;
    let mut abs_err = 0i64;
    for (m, offset) in data {
        let p = predict_learned(&model, m)?;
        correct += usize::from(p.offset == *offset);
        abs_err += (p.offset - offset).abs();
    }
    let report = TrainReport {
        epoch_losses,
        train_accuracy: correct as f64 / data.len() as f64,
        train_mean_abs_error: abs_err as f64 / data.len() as f64,
    };
    Ok((model, report))
}

/// Classifiers: argmax class (lowest on ties) minus the bound. Regressors:
/// round half away from zero, then clamp to ±bound.
pub fn predict_learned(model: &ModelParams, m: &SimilarityMatrix) -> Result<SyncPrediction> {
    let config = model_config(model);
    let x = encode_input(m, config.pad_size)?;
    let out = forward(model, &x)?;
    let out = out.values();
    Ok(match model.head {
        Head::Classifier { .. } => {
            let mut best = 0;
            for (k, &v) in out.iter().enumerate().skip(1) {
                if v > out[best] {
                    best = k;
                }
            }
            SyncPrediction::new(config.decode_label(best), config.kind)
        }
        Head::Regressor { .. } => SyncPrediction {
            raw_value: Some(out[0]),
            ..SyncPrediction::new(round_and_clamp(out[0], config.offset_bound), config.kind)
        },
    })
}

pub(crate) fn round_and_clamp(raw: f64, bound: i64) -> i64 {
    (raw.round() as i64).clamp(-bound, bound)
}
