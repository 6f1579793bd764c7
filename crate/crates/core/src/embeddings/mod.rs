//! Per-frame embedding sequences: the unit every pipeline stage consumes.
//!
//! Values are held in 64-bit precision; the on-disk ESEQ format stores 32-bit
//! floats, so file round-trips are exact for f32-representable sequences
//! (which is what every generator in this crate emits).

mod eseq;
mod pixels;

pub use eseq::{read_eseq, write_eseq, ESEQ_MAGIC, ESEQ_VERSION};
pub use pixels::{extract_pixel_features, GRID_SIZE};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FPS: f32 = 29.97;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSequence {
    frames: usize,
    dim: usize,
    fps: f32,
    values: Vec<f64>,
    source_id: String,
}

impl EmbeddingSequence {
    /// Builds a sequence from row-major `values`, checking shape and finiteness.
    pub fn new(frames: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_meta(frames, dim, DEFAULT_FPS, values, String::new())
    }

    pub fn with_meta(
        frames: usize,
        dim: usize,
        fps: f32,
        values: Vec<f64>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if frames == 0 || dim == 0 {
            return Err(Error::Argument(format!(
                "embedding sequence needs frames >= 1 and dim >= 1 (got {frames}x{dim})"
            )));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::Argument(format!("fps must be positive, got {fps}")));
        }
        if values.len() != frames * dim {
            return Err(Error::Argument(format!(
                "expected {} values for {frames}x{dim}, got {}",
                frames * dim,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "non-finite value at row {} col {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self {
            frames,
            dim,
            fps,
            values,
            source_id: source_id.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::Argument(format!(
                "row {i} has {} values, expected {dim}",
                rows[i].len()
            )));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fps(&self) -> f32 {
        self.fps
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn set_source_id(&mut self, id: impl Into<String>) {
        self.source_id = id.into();
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Rows `range` as a new sequence with the same metadata.
    pub fn slice_frames(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.frames {
            return Err(Error::Argument(format!(
                "frame range {range:?} invalid for {} frames",
                self.frames
            )));
        }
        let values = self.values[range.start * self.dim..range.end * self.dim].to_vec();
        Ok(Self {
            frames: range.len(),
            dim: self.dim,
            fps: self.fps,
            values,
            source_id: self.source_id.clone(),
        })
    }

    /// Applies `f` entrywise, keeping shape and metadata.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::with_meta(
            self.frames,
            self.dim,
            self.fps,
            self.values.iter().map(|&v| f(v)).collect(),
            self.source_id.clone(),
        )
    }

    /// Same sequence with every value rounded to the nearest f32.
    pub fn quantized(&self) -> Self {
        Self {
            values: self.values.iter().map(|&v| v as f32 as f64).collect(),
            ..self.clone()
        }
    }

    pub(crate) fn replace_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::with_meta(self.frames, self.dim, self.fps, values, self.source_id.clone())
    }

    /// Global (population) mean and variance over all entries.
    pub fn moments(&self) -> (f64, f64) {
        moments(&self.values)
    }
}

pub(crate) fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Mean-pools every run of `window` consecutive frames with stride one, so
/// output row `i` summarizes input rows `i..i + window`.
pub fn sliding_window_pool(seq: &EmbeddingSequence, window: usize) -> Result<EmbeddingSequence> {
    if window == 0 || window > seq.frames {
        return Err(Error::Argument(format!(
            "window {window} must be in 1..={}",
            seq.frames
        )));
    }
    if window == 1 {
        return Ok(seq.clone());
    }
    let dim = seq.dim;
    let out_frames = seq.frames - window + 1;
    let mut values = vec![0.0; out_frames * dim];
    for (i, out) in values.chunks_exact_mut(dim).enumerate() {
        for r in i..i + window {
            for (o, v) in out.iter_mut().zip(seq.row(r)) {
                *o += v;
            }
        }
        let w = window as f64;
        out.iter_mut().for_each(|o| *o /= w);
    }
    EmbeddingSequence::with_meta(out_frames, dim, seq.fps, values, seq.source_id.clone())
}

/// Replaces every value with seeded Gaussian noise, affinely rescaled so the
/// global mean and variance equal those of `seq`.
pub fn noise_substitute(seq: &EmbeddingSequence, seed: u64) -> Result<EmbeddingSequence> {
    let (mean, var) = seq.moments();
    if var == 0.0 {
        return seq.replace_values(vec![mean; seq.values.len()]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..seq.values.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let (raw_mean, raw_var) = moments(&raw);
    // A single-entry sequence has zero variance and is handled above, so
    // raw_var is only zero with vanishing probability.
    let scale = if raw_var > 0.0 { (var / raw_var).sqrt() } else { 0.0 };
    let values = raw.iter().map(|r| (r - raw_mean) * scale + mean).collect();
    seq.replace_values(values)
}
