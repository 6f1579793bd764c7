//! Central finite-difference verification of `loss_and_grad`.

use super::layers::LayerSpec;
use super::model::{forward_trace, head_loss, loss_and_grad, ModelParams, Target};
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// max over checked parameters of
    /// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)`.
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameters whose ±h perturbation flipped some ReLU on or off; the
    /// finite difference straddles a kink there and is not comparable.
    pub skipped_at_kinks: usize,
}

/// Loss plus the on/off state of every ReLU input.
fn eval(model: &ModelParams, input: &Tensor, target: Target) -> Result<(f64, Vec<bool>)> {
    let trace = forward_trace(model, input)?;
    let (loss, _) = head_loss(&model.head, trace.acts.last().unwrap(), target)?;
    let mut mask = Vec::new();
    for (i, l) in model.layers.iter().enumerate() {
        if *l == LayerSpec::Relu {
            mask.extend(trace.acts[i].iter().map(|&v| v > 0.0));
        }
    }
    Ok((loss, mask))
}

pub fn grad_check(model: &ModelParams, input: &Tensor, target: Target, h: f64) -> Result<GradCheckReport> {
    let (_, grads) = loss_and_grad(model, input, target)?;
    let analytic = grads.flat();
    let (_, base_mask) = eval(model, input, target)?;

    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        skipped_at_kinks: 0,
    };
    let sizes: Vec<usize> = model.param_slices().map(<[f64]>::len).collect();
    let mut flat_idx = 0;
    for (slice_idx, &len) in sizes.iter().enumerate() {
        for k in 0..len {
            let orig = model.param_slices().nth(slice_idx).unwrap()[k];
            set_param(&mut probe, slice_idx, k, orig + h);
            let (plus, mask_plus) = eval(&probe, input, target)?;
            set_param(&mut probe, slice_idx, k, orig - h);
            let (minus, mask_minus) = eval(&probe, input, target)?;
            set_param(&mut probe, slice_idx, k, orig);

            if mask_plus != base_mask || mask_minus != base_mask {
                report.skipped_at_kinks += 1;
            } else {
                let numeric = (plus - minus) / (2.0 * h);
                let a = analytic[flat_idx];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
                report.max_relative_error = report.max_relative_error.max(rel);
                report.checked += 1;
            }
            flat_idx += 1;
        }
    }
    Ok(report)
}

fn set_param(model: &mut ModelParams, slice_idx: usize, k: usize, v: f64) {
    model.param_slices_mut().nth(slice_idx).unwrap()[k] = v;
}
