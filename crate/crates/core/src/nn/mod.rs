//! Small feed-forward network engine: dense and 2-D convolution layers,
//! ReLU, global average pooling, softmax cross-entropy and regression heads,
//! exact backpropagation, AdamW, and finite-difference gradient checks.
//!
//! All arithmetic is f64; models serialize their parameters as f32.

mod gradcheck;
mod layers;
mod model;
mod optim;
mod tensor;
mod vsmd;

pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::LayerSpec;
pub use model::{
    accumulate_grad, forward, head_loss, loss, loss_and_grad, Gradients, Head, LayerWeights, ModelParams,
    RegressionLoss, Target,
};
pub use optim::{adamw_step, adamw_update, AdamWConfig, OptimizerState};
pub use tensor::Tensor;
pub use vsmd::{decode_model, deserialize_model, encode_model, serialize_model, VSMD_MAGIC, VSMD_VERSION};

/// Number of offset classes for the ±30 frame range.
pub const OFFSET_CLASSES: usize = 61;

/// conv(1→8) → conv(8→16) → conv(16→32) → conv(32→64), each 3×3 stride 2
/// padding 1 with ReLU, then global average pooling and a dense head.
pub fn reference_cnn_layers(classes: usize) -> Vec<LayerSpec> {
    let mut layers = Vec::new();
    let mut in_c = 1;
    for out_c in [8, 16, 32, 64] {
        layers.push(LayerSpec::conv(in_c, out_c, 3, 2, 1));
        layers.push(LayerSpec::Relu);
        in_c = out_c;
    }
    layers.push(LayerSpec::GlobalAvgPool);
    layers.push(LayerSpec::dense(64, classes));
    layers
}
