use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    GlobalAvgPool,
    Flatten,
}

impl LayerSpec {
    pub fn conv(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        }
    }

    pub fn dense(inputs: usize, outputs: usize) -> Self {
        LayerSpec::Dense { inputs, outputs }
    }

    /// Shapes of (weight, bias) for parameterized layers.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => Some((vec![outputs, inputs], vec![outputs])),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => Some((
                vec![out_channels, in_channels, kernel, kernel],
                vec![out_channels],
            )),
            _ => None,
        }
    }

    /// Inputs feeding each output unit, for initialization scaling.
    pub fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, .. } => inputs,
            LayerSpec::Conv2d {
                in_channels, kernel, ..
            } => in_channels * kernel * kernel,
            _ => 0,
        }
    }

    pub(crate) fn validate(&self, index: usize) -> Result<()> {
        let ok = match *self {
            LayerSpec::Dense { inputs, outputs } => inputs > 0 && outputs > 0,
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            } => in_channels > 0 && out_channels > 0 && kernel > 0 && stride > 0,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("layer {index}: sizes must be positive: {self:?}")))
        }
    }

    pub fn output_shape(&self, index: usize, input: &[usize]) -> Result<Vec<usize>> {
        let mismatch = |expected: Vec<usize>| Error::Shape {
            layer: index,
            expected,
            found: input.to_vec(),
        };
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                if input != [inputs] {
                    return Err(mismatch(vec![inputs]));
                }
                Ok(vec![outputs])
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let [c, h, w] = *input else {
                    return Err(mismatch(vec![in_channels, 0, 0]));
                };
                if c != in_channels {
                    return Err(mismatch(vec![in_channels, h, w]));
                }
                let oh = conv_out(h, kernel, stride, padding);
                let ow = conv_out(w, kernel, stride, padding);
                match (oh, ow) {
                    (Some(oh), Some(ow)) => Ok(vec![out_channels, oh, ow]),
                    _ => Err(mismatch(vec![in_channels, kernel, kernel])),
                }
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::GlobalAvgPool => match *input {
                [c, h, w] if h * w > 0 => Ok(vec![c]),
                _ => Err(mismatch(vec![input.first().copied().unwrap_or(0), 1, 1])),
            },
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        }
    }
}

pub(crate) fn conv_out(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = len + 2 * padding;
    (padded >= kernel).then(|| (padded - kernel) / stride + 1)
}

/// Geometry of one conv2d application.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    /// Output index range along one axis for which `o*stride + k_off - pad`
    /// lands inside `[0, in_len)`.
    fn valid_range(&self, k_off: usize, in_len: usize, out_len: usize) -> std::ops::Range<usize> {
        let s = self.stride as isize;
        let shift = k_off as isize - self.pad as isize;
        // o*s + shift >= 0  =>  o >= ceil(-shift / s)
        let lo = if shift >= 0 { 0 } else { ((-shift) + s - 1) / s };
        // o*s + shift <= in_len - 1
        let top = in_len as isize - 1 - shift;
        let hi = if top < 0 { 0 } else { (top / s + 1).min(out_len as isize) };
        (lo as usize)..(hi.max(lo) as usize)
    }

    pub fn forward(&self, x: &[f64], weight: &[f64], bias: &[f64], y: &mut [f64]) {
        let out_plane = self.out_h * self.out_w;
        for o in 0..self.out_c {
            y[o * out_plane..(o + 1) * out_plane].fill(bias[o]);
        }
        for o in 0..self.out_c {
            let yo = &mut y[o * out_plane..(o + 1) * out_plane];
            for c in 0..self.in_c {
                let xc = &x[c * self.in_h * self.in_w..(c + 1) * self.in_h * self.in_w];
                for ky in 0..self.k {
                    let rows = self.valid_range(ky, self.in_h, self.out_h);
                    for kx in 0..self.k {
                        let w = weight[((o * self.in_c + c) * self.k + ky) * self.k + kx];
                        let cols = self.valid_range(kx, self.in_w, self.out_w);
                        for oy in rows.clone() {
                            let iy = oy * self.stride + ky - self.pad;
                            let xrow = &xc[iy * self.in_w..(iy + 1) * self.in_w];
                            let yrow = &mut yo[oy * self.out_w..(oy + 1) * self.out_w];
                            for ox in cols.clone() {
                                yrow[ox] += w * xrow[ox * self.stride + kx - self.pad];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Accumulates weight/bias gradients and writes the input gradient.
    pub fn backward(
        &self,
        x: &[f64],
        weight: &[f64],
        dy: &[f64],
        dweight: &mut [f64],
        dbias: &mut [f64],
        dx: Option<&mut [f64]>,
    ) {
        let out_plane = self.out_h * self.out_w;
        let in_plane = self.in_h * self.in_w;
        for o in 0..self.out_c {
            dbias[o] += dy[o * out_plane..(o + 1) * out_plane].iter().sum::<f64>();
        }
        let mut dx = dx;
        if let Some(dx) = dx.as_deref_mut() {
            dx.fill(0.0);
        }
        for o in 0..self.out_c {
            let dyo = &dy[o * out_plane..(o + 1) * out_plane];
            for c in 0..self.in_c {
                let xc = &x[c * in_plane..(c + 1) * in_plane];
                for ky in 0..self.k {
                    let rows = self.valid_range(ky, self.in_h, self.out_h);
                    for kx in 0..self.k {
                        let widx = ((o * self.in_c + c) * self.k + ky) * self.k + kx;
                        let cols = self.valid_range(kx, self.in_w, self.out_w);
                        let mut acc = 0.0;
                        for oy in rows.clone() {
                            let iy = oy * self.stride + ky - self.pad;
                            let xrow = &xc[iy * self.in_w..(iy + 1) * self.in_w];
                            let dyrow = &dyo[oy * self.out_w..(oy + 1) * self.out_w];
                            for ox in cols.clone() {
                                acc += dyrow[ox] * xrow[ox * self.stride + kx - self.pad];
                            }
                        }
                        dweight[widx] += acc;
                        if let Some(dx) = dx.as_deref_mut() {
                            let w = weight[widx];
                            let dxc = &mut dx[c * in_plane..(c + 1) * in_plane];
                            for oy in rows.clone() {
                                let iy = oy * self.stride + ky - self.pad;
                                let dyrow = &dyo[oy * self.out_w..(oy + 1) * self.out_w];
                                let dxrow = &mut dxc[iy * self.in_w..(iy + 1) * self.in_w];
                                for ox in cols.clone() {
                                    dxrow[ox * self.stride + kx - self.pad] += w * dyrow[ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn dense_forward(x: &[f64], weight: &[f64], bias: &[f64], y: &mut [f64]) {
    let n_in = x.len();
    for (o, yo) in y.iter_mut().enumerate() {
        let row = &weight[o * n_in..(o + 1) * n_in];
        *yo = bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
    }
}

pub(crate) fn dense_backward(
    x: &[f64],
    weight: &[f64],
    dy: &[f64],
    dweight: &mut [f64],
    dbias: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let n_in = x.len();
    for (o, &g) in dy.iter().enumerate() {
        dbias[o] += g;
        if g != 0.0 {
            let drow = &mut dweight[o * n_in..(o + 1) * n_in];
            for (d, v) in drow.iter_mut().zip(x) {
                *d += g * v;
            }
        }
    }
    if let Some(dx) = dx {
        dx.fill(0.0);
        for (o, &g) in dy.iter().enumerate() {
            if g != 0.0 {
                let row = &weight[o * n_in..(o + 1) * n_in];
                for (d, w) in dx.iter_mut().zip(row) {
                    *d += g * w;
                }
            }
        }
    }
}
