use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{conv_out, dense_backward, dense_forward, ConvGeom, LayerSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressionLoss {
    /// `0.5 (r - y)^2`
    Squared,
    /// `max(0, |r - y| - epsilon)`
    EpsilonInsensitive { epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Head {
    /// Softmax cross-entropy over `classes` logits.
    Classifier { classes: usize },
    /// Single real output.
    Regressor { loss: RegressionLoss },
}

impl Head {
    pub fn output_len(&self) -> usize {
        match self {
            Head::Classifier { classes } => *classes,
            Head::Regressor { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Class(usize),
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Architecture plus parameters of a feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub layers: Vec<LayerSpec>,
    /// One entry per layer; `None` for parameter-free layers.
    pub weights: Vec<Option<LayerWeights>>,
    pub head: Head,
    pub input_shape: Vec<usize>,
    /// Opaque caller metadata carried through serialization.
    pub extra: serde_json::Value,
}

/// Per-parameter gradients, shaped like `ModelParams::weights`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Option<LayerWeights>>,
}

impl Gradients {
    pub fn zeros_like(model: &ModelParams) -> Self {
        Self {
            layers: model
                .weights
                .iter()
                .map(|w| {
                    w.as_ref().map(|w| LayerWeights {
                        weight: Tensor::zeros(w.weight.shape().to_vec()),
                        bias: Tensor::zeros(w.bias.shape().to_vec()),
                    })
                })
                .collect(),
        }
    }

    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flatten()
            .flat_map(|w| [w.weight.values(), w.bias.values()])
    }

    pub fn slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flatten()
            .flat_map(|w| [&mut w.weight, &mut w.bias])
            .map(Tensor::values_mut)
    }

    pub fn fill_zero(&mut self) {
        for sl in self.slices_mut() {
            sl.fill(0.0);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for sl in self.slices_mut() {
            sl.iter_mut().for_each(|g| *g *= s);
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.slices_mut().zip(other.slices()) {
            a.iter_mut().zip(b).for_each(|(a, b)| *a += b);
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.slices().flatten().copied().collect()
    }
}

impl ModelParams {
    /// Seeded He-style uniform init (`U(-sqrt(6/fan_in), +sqrt(6/fan_in))`),
    /// zero biases.
    pub fn init(layers: Vec<LayerSpec>, input_shape: Vec<usize>, head: Head, seed: u64) -> Result<Self> {
        let mut shape = input_shape.clone();
        for (i, l) in layers.iter().enumerate() {
            l.validate(i)?;
            shape = l.output_shape(i, &shape)?;
        }
        if shape != [head.output_len()] {
            return Err(Error::Shape {
                layer: layers.len(),
                expected: vec![head.output_len()],
                found: shape,
            });
        }
        if let Head::Classifier { classes } = head {
            if classes < 2 {
                return Err(Error::Argument("classifier needs at least 2 classes".into()));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = layers
            .iter()
            .map(|l| {
                l.param_shapes().map(|(ws, bs)| {
                    let bound = (6.0 / l.fan_in() as f64).sqrt();
                    let n: usize = ws.iter().product();
                    let w = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
                    LayerWeights {
                        weight: Tensor::new(ws, w).expect("finite init"),
                        bias: Tensor::zeros(bs),
                    }
                })
            })
            .collect();
        Ok(Self {
            layers,
            weights,
            head,
            input_shape,
            extra: serde_json::Value::Null,
        })
    }

    pub fn class_count(&self) -> Option<usize> {
        match self.head {
            Head::Classifier { classes } => Some(classes),
            Head::Regressor { .. } => None,
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().map(<[f64]>::len).sum()
    }

    pub fn param_slices(&self) -> impl Iterator<Item = &[f64]> {
        self.weights
            .iter()
            .flatten()
            .flat_map(|w| [w.weight.values(), w.bias.values()])
    }

    pub fn param_slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.weights
            .iter_mut()
            .flatten()
            .flat_map(|w| [&mut w.weight, &mut w.bias])
            .map(Tensor::values_mut)
    }

    /// Rounds every parameter to the nearest f32 (the serialized precision).
    pub fn quantize_f32(&mut self) {
        for s in self.param_slices_mut() {
            s.iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }

    /// Checks that weights match the layer specs and the input shape chains
    /// through every layer to the head.
    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.layers.len() {
            return Err(Error::Argument(format!(
                "{} weight entries for {} layers",
                self.weights.len(),
                self.layers.len()
            )));
        }
        let mut shape = self.input_shape.clone();
        for (i, (l, w)) in self.layers.iter().zip(&self.weights).enumerate() {
            l.validate(i)?;
            match (l.param_shapes(), w) {
                (None, None) => {}
                (Some((ws, bs)), Some(w)) if w.weight.shape() == ws && w.bias.shape() == bs => {}
                (Some((ws, _)), w) => {
                    return Err(Error::Shape {
                        layer: i,
                        expected: ws,
                        found: w.as_ref().map_or(vec![], |w| w.weight.shape().to_vec()),
                    })
                }
                (None, Some(w)) => {
                    return Err(Error::Shape {
                        layer: i,
                        expected: vec![],
                        found: w.weight.shape().to_vec(),
                    })
                }
            }
            shape = l.output_shape(i, &shape)?;
        }
        if shape != [self.head.output_len()] {
            return Err(Error::Shape {
                layer: self.layers.len(),
                expected: vec![self.head.output_len()],
                found: shape,
            });
        }
        Ok(())
    }
}

/// Activations recorded during a forward pass: `acts[i]` is the input to
/// layer `i`, the final entry is the network output.
pub(crate) struct Trace {
    pub acts: Vec<Vec<f64>>,
    pub shapes: Vec<Vec<usize>>,
}

pub(crate) fn forward_trace(model: &ModelParams, input: &Tensor) -> Result<Trace> {
    if input.shape() != model.input_shape.as_slice() {
        return Err(Error::Shape {
            layer: 0,
            expected: model.input_shape.clone(),
            found: input.shape().to_vec(),
        });
    }
    let mut acts = Vec::with_capacity(model.layers.len() + 1);
    let mut shapes = Vec::with_capacity(model.layers.len() + 1);
    acts.push(input.values().to_vec());
    shapes.push(input.shape().to_vec());
    for (i, (layer, w)) in model.layers.iter().zip(&model.weights).enumerate() {
        let x = acts.last().unwrap();
        let in_shape = shapes.last().unwrap();
        let out_shape = layer.output_shape(i, in_shape)?;
        let out_len: usize = out_shape.iter().product();
        let y = match *layer {
            LayerSpec::Dense { .. } => {
                let w = w.as_ref().expect("validated dense weights");
                let mut y = vec![0.0; out_len];
                dense_forward(x, w.weight.values(), w.bias.values(), &mut y);
                y
            }
            LayerSpec::Conv2d { .. } => {
                let w = w.as_ref().expect("validated conv weights");
                let geom = conv_geom(layer, in_shape);
                let mut y = vec![0.0; out_len];
                geom.forward(x, w.weight.values(), w.bias.values(), &mut y);
                y
            }
            LayerSpec::Relu => x.iter().map(|&v| v.max(0.0)).collect(),
            LayerSpec::GlobalAvgPool => {
                let plane = in_shape[1] * in_shape[2];
                x.chunks_exact(plane)
                    .map(|c| c.iter().sum::<f64>() / plane as f64)
                    .collect()
            }
            LayerSpec::Flatten => x.clone(),
        };
        acts.push(y);
        shapes.push(out_shape);
    }
    Ok(Trace { acts, shapes })
}

pub(crate) fn conv_geom(layer: &LayerSpec, in_shape: &[usize]) -> ConvGeom {
    let LayerSpec::Conv2d {
        in_channels,
        out_channels,
        kernel,
        stride,
        padding,
    } = *layer
    else {
        unreachable!("conv_geom on non-conv layer")
    };
    ConvGeom {
        in_c: in_channels,
        in_h: in_shape[1],
        in_w: in_shape[2],
        out_c: out_channels,
        out_h: conv_out(in_shape[1], kernel, stride, padding).unwrap(),
        out_w: conv_out(in_shape[2], kernel, stride, padding).unwrap(),
        k: kernel,
        stride,
        pad: padding,
    }
}

/// Network output: logits for classifiers, a single value for regressors.
pub fn forward(model: &ModelParams, input: &Tensor) -> Result<Tensor> {
    let mut trace = forward_trace(model, input)?;
    let out = trace.acts.pop().unwrap();
    let shape = trace.shapes.pop().unwrap();
    Tensor::new(shape, out)
}

/// Loss for one output vector and its gradient with respect to that output.
pub fn head_loss(head: &Head, out: &[f64], target: Target) -> Result<(f64, Vec<f64>)> {
    let (loss, grad) = match (head, target) {
        (Head::Classifier { classes }, Target::Class(label)) => {
            if label >= *classes {
                return Err(Error::Argument(format!(
                    "label {label} out of range for {classes} classes"
                )));
            }
            let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = out.iter().map(|z| (z - max).exp()).sum();
            let lse = max + sum.ln();
            let grad = out
                .iter()
                .enumerate()
                .map(|(k, z)| (z - lse).exp() - if k == label { 1.0 } else { 0.0 })
                .collect();
            (lse - out[label], grad)
        }
        (Head::Regressor { loss }, Target::Value(y)) => {
            let r = out[0];
            let d = r - y;
            match loss {
                RegressionLoss::Squared => (0.5 * d * d, vec![d]),
                RegressionLoss::EpsilonInsensitive { epsilon } => {
                    let excess = d.abs() - epsilon;
                    if excess > 0.0 {
                        (excess, vec![d.signum()])
                    } else {
                        (0.0, vec![0.0])
                    }
                }
            }
        }
        (h, t) => {
            return Err(Error::Argument(format!(
                "target {t:?} does not match head {h:?}"
            )))
        }
    };
    if !loss.is_finite() || grad.iter().any(|g: &f64| !g.is_finite()) {
        return Err(Error::Numerical(format!("non-finite loss {loss}")));
    }
    Ok((loss, grad))
}

/// Loss and exact parameter gradients for a single example.
pub fn loss_and_grad(model: &ModelParams, input: &Tensor, target: Target) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros_like(model);
    let loss = accumulate_grad(model, input, target, &mut grads)?;
    Ok((loss, grads))
}

/// Like [`loss_and_grad`] but adds the gradients into `grads`.
pub fn accumulate_grad(
    model: &ModelParams,
    input: &Tensor,
    target: Target,
    grads: &mut Gradients,
) -> Result<f64> {
    let trace = forward_trace(model, input)?;
    let (loss, mut dy) = head_loss(&model.head, trace.acts.last().unwrap(), target)?;
    // No input gradient is needed at or below the first parameterized layer.
    let first_param = model.weights.iter().position(Option::is_some).unwrap_or(usize::MAX);
    for i in (0..model.layers.len()).rev() {
        if i < first_param {
            break;
        }
        let layer = &model.layers[i];
        let x = &trace.acts[i];
        let in_shape = &trace.shapes[i];
        let need_dx = i > first_param;
        let mut dx = vec![0.0; if need_dx { x.len() } else { 0 }];
        match *layer {
            LayerSpec::Dense { .. } => {
                let w = model.weights[i].as_ref().unwrap();
                let g = grads.layers[i].as_mut().unwrap();
                dense_backward(
                    x,
                    w.weight.values(),
                    &dy,
                    g.weight.values_mut(),
                    g.bias.values_mut(),
                    need_dx.then_some(dx.as_mut_slice()),
                );
            }
            LayerSpec::Conv2d { .. } => {
                let w = model.weights[i].as_ref().unwrap();
                let g = grads.layers[i].as_mut().unwrap();
                conv_geom(layer, in_shape).backward(
                    x,
                    w.weight.values(),
                    &dy,
                    g.weight.values_mut(),
                    g.bias.values_mut(),
                    need_dx.then_some(dx.as_mut_slice()),
                );
            }
            LayerSpec::Relu => {
                for ((d, &v), &g) in dx.iter_mut().zip(x).zip(&dy) {
                    *d = if v > 0.0 { g } else { 0.0 };
                }
            }
            LayerSpec::GlobalAvgPool => {
                let plane = in_shape[1] * in_shape[2];
                for (chunk, &g) in dx.chunks_exact_mut(plane).zip(&dy) {
                    chunk.fill(g / plane as f64);
                }
            }
            LayerSpec::Flatten => dx.copy_from_slice(&dy),
        }
        dy = dx;
    }
    Ok(loss)
}

/// Scalar loss only (no backward pass).
pub fn loss(model: &ModelParams, input: &Tensor, target: Target) -> Result<f64> {
    let out = forward(model, input)?;
    Ok(head_loss(&model.head, out.values(), target)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_dense() -> ModelParams {
        let mut m = ModelParams::init(
            vec![LayerSpec::dense(3, 2)],
            vec![3],
            Head::Classifier { classes: 2 },
            0,
        )
        .unwrap();
        m.param_slices_mut().for_each(|s| s.fill(0.0));
        m
    }

    #[test]
    fn zero_dense_gives_zero_logits() {
        let m = zero_dense();
        let out = forward(&m, &Tensor::from_vec(vec![1.0, -2.0, 3.5]).unwrap()).unwrap();
        assert_eq!(out.values(), &[0.0, 0.0]);
    }

    #[test]
    fn relu_definition() {
        let m = ModelParams {
            layers: vec![LayerSpec::Relu],
            weights: vec![None],
            head: Head::Classifier { classes: 3 },
            input_shape: vec![3],
            extra: serde_json::Value::Null,
        };
        let out = forward(&m, &Tensor::from_vec(vec![-1.0, 0.0, 2.0]).unwrap()).unwrap();
        assert_eq!(out.values(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn hand_convolution() {
        let m = ModelParams {
            layers: vec![LayerSpec::conv(1, 1, 3, 1, 0), LayerSpec::Flatten],
            weights: vec![
                Some(LayerWeights {
                    weight: Tensor::new(vec![1, 1, 3, 3], vec![1.0; 9]).unwrap(),
                    bias: Tensor::zeros(vec![1]),
                }),
                None,
            ],
            head: Head::Classifier { classes: 4 },
            input_shape: vec![1, 4, 4],
            extra: serde_json::Value::Null,
        };
        m.validate().unwrap();
        let x = Tensor::new(vec![1, 4, 4], vec![1.0; 16]).unwrap();
        let trace = forward_trace(&m, &x).unwrap();
        assert_eq!(trace.shapes[1], vec![1, 2, 2]);
        assert_eq!(forward(&m, &x).unwrap().values(), &[9.0; 4]);
    }

    #[test]
    fn shape_mismatch_names_layer() {
        let m = ModelParams::init(
            vec![LayerSpec::Flatten, LayerSpec::dense(4, 2)],
            vec![2, 2],
            Head::Classifier { classes: 2 },
            1,
        )
        .unwrap();
        let err = forward(&m, &Tensor::from_vec(vec![1.0; 4]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Shape { layer: 0, .. }));
    }

    #[test]
    fn cross_entropy_uniform_and_saturated() {
        let head = Head::Classifier { classes: 2 };
        let (l, g) = head_loss(&head, &[0.0, 0.0], Target::Class(0)).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert!((g[0] + 0.5).abs() < 1e-15 && (g[1] - 0.5).abs() < 1e-15);

        let (l, _) = head_loss(&Head::Classifier { classes: 3 }, &[0.0, 1e6, 0.0], Target::Class(1)).unwrap();
        assert!((0.0..1e-6).contains(&l));

        let (l, _) = head_loss(&Head::Classifier { classes: 61 }, &[0.3; 61], Target::Class(17)).unwrap();
        assert!((l - 61f64.ln()).abs() < 1e-12);
        assert!(head_loss(&head, &[0.0, 0.0], Target::Class(2)).is_err());
    }

    #[test]
    fn non_finite_loss_is_surfaced() {
        let head = Head::Regressor { loss: RegressionLoss::Squared };
        assert!(matches!(
            head_loss(&head, &[f64::MAX], Target::Value(-f64::MAX)),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn epsilon_insensitive_loss() {
        let head = Head::Regressor {
            loss: RegressionLoss::EpsilonInsensitive { epsilon: 1.0 },
        };
        assert_eq!(head_loss(&head, &[3.5], Target::Value(3.0)).unwrap(), (0.0, vec![0.0]));
        assert_eq!(head_loss(&head, &[5.0], Target::Value(3.0)).unwrap(), (1.0, vec![1.0]));
        assert_eq!(head_loss(&head, &[0.0], Target::Value(3.0)).unwrap(), (2.0, vec![-1.0]));
    }

    #[test]
    fn init_is_seed_deterministic() {
        let mk = |seed| {
            ModelParams::init(
                vec![LayerSpec::dense(5, 4), LayerSpec::Relu, LayerSpec::dense(4, 3)],
                vec![5],
                Head::Classifier { classes: 3 },
                seed,
            )
            .unwrap()
        };
        assert_eq!(mk(9), mk(9));
        assert_ne!(mk(9), mk(10));
        let m = mk(9);
        let bound = (6.0f64 / 5.0).sqrt();
        let w = m.weights[0].as_ref().unwrap();
        assert!(w.weight.values().iter().all(|v| v.abs() < bound));
        assert!(w.bias.values().iter().all(|&v| v == 0.0));
    }
}
