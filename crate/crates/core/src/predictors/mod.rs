//! Synchronization-offset predictors: similarity matrix in, integer offset out.
//!
//! Sign convention: a positive offset means the first video starts later, so
//! its frame `i` is simultaneous with frame `i + offset` of the second video.

mod handcrafted;
mod learned;

pub use handcrafted::{dtw_path, path_cost, predict_argmax, predict_dtw, predict_naive};
pub use learned::{
    encode_input, predict_learned, train_classifier, train_classifier_with_report, TrainReport,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ModelParams;
use crate::simmatrix::SimilarityMatrix;

pub const DEFAULT_OFFSET_BOUND: i64 = 30;
pub const DEFAULT_PAD_SIZE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Naive,
    Argmax,
    Dtw,
    Logreg,
    Svm,
    Mlp,
    Cnn,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 7] = [
        PredictorKind::Naive,
        PredictorKind::Argmax,
        PredictorKind::Dtw,
        PredictorKind::Logreg,
        PredictorKind::Svm,
        PredictorKind::Mlp,
        PredictorKind::Cnn,
    ];

    pub fn is_learned(self) -> bool {
        matches!(
            self,
            PredictorKind::Logreg | PredictorKind::Svm | PredictorKind::Mlp | PredictorKind::Cnn
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            PredictorKind::Naive => "naive",
            PredictorKind::Argmax => "argmax",
            PredictorKind::Dtw => "dtw",
            PredictorKind::Logreg => "logreg",
            PredictorKind::Svm => "svm",
            PredictorKind::Mlp => "mlp",
            PredictorKind::Cnn => "cnn",
        }
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Argument(format!("unknown predictor {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncPrediction {
    pub offset: i64,
    pub predictor: PredictorKind,
    /// Pre-rounding output of regressors.
    pub raw_value: Option<f64>,
    pub adjusted: bool,
}

impl SyncPrediction {
    pub fn new(offset: i64, predictor: PredictorKind) -> Self {
        Self {
            offset,
            predictor,
            raw_value: None,
            adjusted: false,
        }
    }
}

/// Optimization settings for learned predictors. There is deliberately no
/// default seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl TrainSpec {
    /// 30 epochs, batch 16, lr 1e-3, weight decay 0.01.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            lr: 1e-3,
            weight_decay: 0.01,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    pub pad_size: usize,
    pub offset_bound: i64,
    /// Half-width of the SVM regressor's insensitive zone, in frames.
    pub svm_epsilon: f64,
    pub mlp_hidden: Vec<usize>,
    pub train: Option<TrainSpec>,
}

impl PredictorConfig {
    pub fn new(kind: PredictorKind) -> Self {
        Self {
            kind,
            pad_size: DEFAULT_PAD_SIZE,
            offset_bound: DEFAULT_OFFSET_BOUND,
            svm_epsilon: 1.0,
            mlp_hidden: vec![256, 128, 64],
            train: None,
        }
    }

    pub fn with_train(mut self, train: TrainSpec) -> Self {
        self.train = Some(train);
        self
    }

    pub fn class_count(&self) -> usize {
        (2 * self.offset_bound + 1) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.offset_bound < 0 {
            return Err(Error::Argument("offset bound must be non-negative".into()));
        }
        if (self.pad_size as i64) < 2 * self.offset_bound + 1 {
            return Err(Error::Argument(format!(
                "pad size {} is smaller than the {} offset classes",
                self.pad_size,
                self.class_count()
            )));
        }
        if let Some(t) = &self.train {
            if t.epochs == 0 || t.batch_size == 0 || t.lr.is_nan() || t.lr <= 0.0 {
                return Err(Error::Argument(format!("invalid training spec {t:?}")));
            }
        }
        Ok(())
    }

    /// Class index for an offset: `offset + bound`.
    pub fn encode_label(&self, offset: i64) -> Result<usize> {
        if offset.abs() > self.offset_bound {
            return Err(Error::OutOfRange(format!(
                "offset {offset} outside ±{}",
                self.offset_bound
            )));
        }
        Ok((offset + self.offset_bound) as usize)
    }

    pub fn decode_label(&self, class: usize) -> i64 {
        class as i64 - self.offset_bound
    }
}

/// Replaces offsets with magnitude above `bound` by 0.
pub fn adjust_extreme(p: &SyncPrediction, bound: i64) -> SyncPrediction {
    if p.offset.abs() > bound {
        SyncPrediction {
            offset: 0,
            adjusted: true,
            ..p.clone()
        }
    } else {
        p.clone()
    }
}

/// Lower median: the smaller of the two middle values for even counts.
pub fn lower_median(values: &mut [i64]) -> Option<i64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    Some(values[(values.len() - 1) / 2])
}

/// A ready-to-run predictor. Hand-crafted predictors read the raw matrix;
/// learned ones apply their own softmax and padding.
#[derive(Debug, Clone)]
pub enum Predictor {
    Naive,
    Argmax,
    Dtw,
    Learned(Box<ModelParams>),
}

impl Predictor {
    pub fn handcrafted(kind: PredictorKind) -> Result<Self> {
        match kind {
            PredictorKind::Naive => Ok(Predictor::Naive),
            PredictorKind::Argmax => Ok(Predictor::Argmax),
            PredictorKind::Dtw => Ok(Predictor::Dtw),
            k => Err(Error::Argument(format!("{k} needs a trained model"))),
        }
    }

    pub fn kind(&self) -> PredictorKind {
        match self {
            Predictor::Naive => PredictorKind::Naive,
            Predictor::Argmax => PredictorKind::Argmax,
            Predictor::Dtw => PredictorKind::Dtw,
            Predictor::Learned(m) => learned::model_config(m).kind,
        }
    }

    pub fn predict(&self, raw: &SimilarityMatrix) -> Result<SyncPrediction> {
        match self {
            Predictor::Naive => Ok(predict_naive(raw)),
            Predictor::Argmax => predict_argmax(raw),
            Predictor::Dtw => predict_dtw(raw),
            Predictor::Learned(m) => predict_learned(m, raw),
        }
    }
}
