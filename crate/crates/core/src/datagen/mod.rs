//! Labeled video-pair construction.
//!
//! Synthetic views share a latent random-walk trajectory observed through
//! per-view near-identity linear maps plus noise. Offsets are injected by
//! cropping, either fairly (both clips end with equal duration) or leakily
//! (only one clip is cropped, so the duration difference equals the offset).

mod inject;
mod manifest;

pub use inject::{inject_offset, inject_offset_fair, inject_offset_leaky};
pub use manifest::{read_manifest, read_manifest_records, write_manifest, ManifestRecord, MANIFEST_FILE};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::embeddings::{noise_substitute, EmbeddingSequence};
use crate::error::{Error, Result};

/// Smallest clip length that survives a ±30 crop with a usable matrix.
pub const MIN_FRAMES: usize = 62;

const OFFSET_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;
const DISTRACTOR_STREAM: u64 = 0xD1B5_4A32_D192_ED03;
const NOISE_STREAM: u64 = 0x94D0_49BB_1331_11EB;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injection {
    None,
    Fair,
    Leaky,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub v1: EmbeddingSequence,
    pub v2: EmbeddingSequence,
    pub true_offset: i64,
    pub injection: Injection,
    pub seed: u64,
    /// Weight of the end-anchored positional component baked into both
    /// views (0 when absent). Cropping re-anchors it to the new clip end.
    pub positional_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub frames: usize,
    pub dim: usize,
    /// Std-dev of each latent random-walk step, per dimension.
    pub walk_sigma: f64,
    /// Std-dev of i.i.d. per-view observation noise.
    pub view_noise_sigma: f64,
    /// Scale of each view map's deviation from identity.
    pub view_map_sigma: f64,
    /// Std-dev of each view's constant offset vector.
    pub view_bias_sigma: f64,
    /// Forces both view maps to identity with zero bias.
    pub identity_views: bool,
    pub positional_weight: f64,
    /// When set, the latent trajectory loops with this period.
    pub content_period: Option<usize>,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(frames: usize, dim: usize, seed: u64) -> Self {
        Self {
            frames,
            dim,
            walk_sigma: 1.0,
            view_noise_sigma: 0.0,
            view_map_sigma: 0.1,
            view_bias_sigma: 0.1,
            identity_views: false,
            positional_weight: 0.0,
            content_period: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames < MIN_FRAMES {
            return Err(Error::Argument(format!(
                "frames must be at least {MIN_FRAMES}, got {}",
                self.frames
            )));
        }
        if self.dim == 0 {
            return Err(Error::Argument("dim must be positive".into()));
        }
        let sigmas = [
            self.walk_sigma,
            self.view_noise_sigma,
            self.view_map_sigma,
            self.view_bias_sigma,
            self.positional_weight,
        ];
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Argument("sigmas and weights must be finite and >= 0".into()));
        }
        if self.content_period == Some(0) {
            return Err(Error::Argument("content period must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, sigma: f64) -> Vec<f64> {
    (0..n)
        .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect()
}

/// Latent trajectory, one `dim`-vector per frame.
fn latent_walk(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let steps = cfg.content_period.unwrap_or(cfg.frames).min(cfg.frames);
    let mut walk = Vec::with_capacity(steps);
    let mut z = vec![0.0; cfg.dim];
    for _ in 0..steps {
        walk.push(z.clone());
        for (zi, step) in z.iter_mut().zip(gaussian_vec(rng, cfg.dim, cfg.walk_sigma)) {
            *zi += step;
        }
    }
    (0..cfg.frames).map(|t| walk[t % steps].clone()).collect()
}

fn observe(cfg: &SynthConfig, latent: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Result<EmbeddingSequence> {
    let d = cfg.dim;
    // Map and bias are always drawn so the RNG stream does not depend on
    // `identity_views`.
    let perturb = gaussian_vec(rng, d * d, cfg.view_map_sigma / (d as f64).sqrt());
    let bias = gaussian_vec(rng, d, cfg.view_bias_sigma);
    let noise = Normal::new(0.0, cfg.view_noise_sigma).expect("validated sigma");
    let mut values = Vec::with_capacity(cfg.frames * d);
    for z in latent {
        for r in 0..d {
            let mut v = if cfg.identity_views {
                z[r]
            } else {
                z[r] + perturb[r * d..(r + 1) * d].iter().zip(z).map(|(m, x)| m * x).sum::<f64>() + bias[r]
            };
            if cfg.view_noise_sigma > 0.0 {
                v += noise.sample(rng);
            }
            values.push(v);
        }
    }
    Ok(EmbeddingSequence::new(cfg.frames, d, values)?.quantized())
}

/// Two views of one latent trajectory, no offset injected.
pub fn gen_latent_pair(cfg: &SynthConfig) -> Result<LabeledPair> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let latent = latent_walk(cfg, &mut rng);
    let mut v1 = observe(cfg, &latent, &mut rng)?;
    let mut v2 = observe(cfg, &latent, &mut rng)?;
    v1.set_source_id(format!("synth-{}-v1", cfg.seed));
    v2.set_source_id(format!("synth-{}-v2", cfg.seed));
    Ok(LabeledPair {
        v1,
        v2,
        true_offset: 0,
        injection: Injection::None,
        seed: cfg.seed,
        positional_weight: 0.0,
    })
}

/// Sinusoidal encoding of `end_distance` (sin on even, cos on odd indices,
/// geometric frequencies with base 10000).
pub fn positional_encoding(end_distance: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|k| {
            let pair = (k / 2) as f64;
            let angle = end_distance as f64 / 10000f64.powf(2.0 * pair / dim as f64);
            if k % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

/// Adds `weight · P(frames - 1 - i)` to every row `i`.
pub(crate) fn add_end_positional(seq: &EmbeddingSequence, weight: f64, sign: f64) -> Result<EmbeddingSequence> {
    if weight == 0.0 {
        return Ok(seq.clone());
    }
    let (n, d) = (seq.frames(), seq.dim());
    let mut values = seq.values().to_vec();
    for (i, row) in values.chunks_exact_mut(d).enumerate() {
        for (v, p) in row.iter_mut().zip(positional_encoding(n - 1 - i, d)) {
            *v += sign * weight * p;
        }
    }
    Ok(seq.replace_values(values)?.quantized())
}

/// [`gen_latent_pair`] plus a shared end-anchored positional component of
/// weight `cfg.positional_weight` in both views.
pub fn gen_positional_biased_pair(cfg: &SynthConfig) -> Result<LabeledPair> {
    let mut pair = gen_latent_pair(cfg)?;
    let alpha = cfg.positional_weight;
    pair.v1 = add_end_positional(&pair.v1, alpha, 1.0)?;
    pair.v2 = add_end_positional(&pair.v2, alpha, 1.0)?;
    pair.positional_weight = alpha;
    Ok(pair)
}

impl LabeledPair {
    /// Replaces the content part of `v1` with moment-matched noise while
    /// keeping any positional component.
    pub fn substitute_v1_content(&self, seed: u64) -> Result<LabeledPair> {
        let content = add_end_positional(&self.v1, self.positional_weight, -1.0)?;
        let noise = noise_substitute(&content, seed)?;
        Ok(LabeledPair {
            v1: add_end_positional(&noise, self.positional_weight, 1.0)?,
            ..self.clone()
        })
    }
}

/// Uniform integer in `[-bound, bound]`, deterministic per seed.
pub fn sample_offset(seed: u64, bound: i64) -> i64 {
    if bound <= 0 {
        return 0;
    }
    ChaCha8Rng::seed_from_u64(seed).random_range(-bound..=bound)
}

/// Seed of pair `index` in a corpus: `base + index`.
pub fn pair_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

pub fn offset_seed(pair_seed: u64) -> u64 {
    pair_seed ^ OFFSET_STREAM
}

pub fn noise_seed(pair_seed: u64) -> u64 {
    pair_seed ^ NOISE_STREAM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub synth: SynthConfig,
    pub pairs: usize,
    pub offset_bound: i64,
    pub injection: Injection,
    /// Fraction of pairs whose content loops (repeated-motion distractors).
    pub distractor_fraction: f64,
    pub distractor_period: usize,
}

impl CorpusSpec {
    pub fn new(synth: SynthConfig, pairs: usize) -> Self {
        Self {
            synth,
            pairs,
            offset_bound: 30,
            injection: Injection::Fair,
            distractor_fraction: 0.0,
            distractor_period: 24,
        }
    }
}

/// Generates `spec.pairs` pairs with seeds `synth.seed + i` and uniform
/// offsets. Each pair depends only on its own seed.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<LabeledPair>> {
    spec.synth.validate()?;
    if spec.offset_bound < 0 || spec.offset_bound as usize + 1 >= spec.synth.frames {
        return Err(Error::Argument(format!(
            "offset bound {} too large for {} frames",
            spec.offset_bound, spec.synth.frames
        )));
    }
    (0..spec.pairs)
        .map(|i| {
            let seed = pair_seed(spec.synth.seed, i);
            let mut cfg = spec.synth.with_seed(seed);
            if spec.distractor_fraction > 0.0 {
                let u: f64 = ChaCha8Rng::seed_from_u64(seed ^ DISTRACTOR_STREAM).random();
                if u < spec.distractor_fraction {
                    cfg.content_period = Some(spec.distractor_period);
                }
            }
            let pair = if cfg.positional_weight > 0.0 {
                gen_positional_biased_pair(&cfg)?
            } else {
                gen_latent_pair(&cfg)?
            };
            let k = sample_offset(offset_seed(seed), spec.offset_bound);
            inject_offset(&pair, k, spec.injection)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn degenerate(seed: u64) -> SynthConfig {
        SynthConfig {
            identity_views: true,
            view_noise_sigma: 0.0,
            ..SynthConfig::new(80, 8, seed)
        }
    }

    #[test]
    fn identity_views_without_noise_are_equal() {
        let p = gen_latent_pair(&degenerate(3)).unwrap();
        assert_eq!(p.v1.values(), p.v2.values());
        assert_eq!((p.true_offset, p.injection), (0, Injection::None));
    }

    #[test]
    fn same_seed_same_pair() {
        let cfg = SynthConfig {
            view_noise_sigma: 0.3,
            ..SynthConfig::new(70, 5, 11)
        };
        assert_eq!(gen_latent_pair(&cfg).unwrap(), gen_latent_pair(&cfg).unwrap());
        assert_ne!(gen_latent_pair(&cfg).unwrap(), gen_latent_pair(&cfg.with_seed(12)).unwrap());
    }

    #[test]
    fn frozen_walk_gives_constant_frames() {
        let cfg = SynthConfig {
            walk_sigma: 0.0,
            ..SynthConfig::new(64, 4, 2)
        };
        let p = gen_latent_pair(&cfg).unwrap();
        for seq in [&p.v1, &p.v2] {
            assert!(seq.rows().all(|r| r == seq.row(0)));
        }
    }

    #[test]
    fn zero_positional_weight_matches_latent_pair() {
        let cfg = SynthConfig::new(64, 6, 5);
        assert_eq!(gen_positional_biased_pair(&cfg).unwrap(), gen_latent_pair(&cfg).unwrap());
    }

    #[test]
    fn rejects_short_clips() {
        assert!(gen_latent_pair(&SynthConfig::new(50, 4, 0)).is_err());
    }

    #[test]
    fn sample_offset_rules() {
        assert!((0..50).all(|s| sample_offset(s, 0) == 0));
        assert_eq!(sample_offset(77, 30), sample_offset(77, 30));
        assert!((0..500).all(|s| sample_offset(s, 30).abs() <= 30));
    }

    #[test]
    fn periodic_content_repeats() {
        let cfg = SynthConfig {
            identity_views: true,
            content_period: Some(20),
            ..SynthConfig::new(64, 3, 9)
        };
        let p = gen_latent_pair(&cfg).unwrap();
        assert_eq!(p.v1.row(3), p.v1.row(23));
        assert_eq!(p.v1.row(5), p.v1.row(45));
    }
}
