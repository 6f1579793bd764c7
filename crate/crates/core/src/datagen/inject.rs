use super::{add_end_positional, Injection, LabeledPair};
use crate::embeddings::EmbeddingSequence;
use crate::error::{Error, Result};

fn check(pair: &LabeledPair, k: i64) -> Result<()> {
    if pair.injection != Injection::None {
        return Err(Error::Argument(format!(
            "pair {} already carries a {:?} offset",
            pair.seed, pair.injection
        )));
    }
    let shortest = pair.v1.frames().min(pair.v2.frames()) as i64;
    if k.abs() >= shortest - 1 {
        return Err(Error::OutOfRange(format!(
            "offset {k} needs more than {shortest} frames"
        )));
    }
    Ok(())
}

/// Crops `seq` to `range`, keeping the end-anchored positional component
/// anchored to the new clip end.
fn crop(seq: &EmbeddingSequence, range: std::ops::Range<usize>, alpha: f64) -> Result<EmbeddingSequence> {
    if range.start == 0 && range.end == seq.frames() {
        return Ok(seq.clone());
    }
    let content = add_end_positional(seq, alpha, -1.0)?;
    add_end_positional(&content.slice_frames(range)?, alpha, 1.0)
}

fn with_views(pair: &LabeledPair, v1: EmbeddingSequence, v2: EmbeddingSequence, k: i64, how: Injection) -> LabeledPair {
    LabeledPair {
        v1,
        v2,
        true_offset: k,
        injection: how,
        ..pair.clone()
    }
}

/// Offset `k` with equal output durations: for `k >= 0` drop the first `k`
/// frames of v1 and keep the matching span of v2; mirrored for `k < 0`.
pub fn inject_offset_fair(pair: &LabeledPair, k: i64) -> Result<LabeledPair> {
    check(pair, k)?;
    let (n1, n2) = (pair.v1.frames(), pair.v2.frames());
    let shift = k.unsigned_abs() as usize;
    let (s1, s2) = if k >= 0 { (shift, 0) } else { (0, shift) };
    let len = (n1 - s1).min(n2 - s2);
    let alpha = pair.positional_weight;
    Ok(with_views(
        pair,
        crop(&pair.v1, s1..s1 + len, alpha)?,
        crop(&pair.v2, s2..s2 + len, alpha)?,
        k,
        Injection::Fair,
    ))
}

/// Offset `k` by cropping only the leading frames of one clip, leaving
/// a duration difference of `|k|`.
pub fn inject_offset_leaky(pair: &LabeledPair, k: i64) -> Result<LabeledPair> {
    check(pair, k)?;
    let (n1, n2) = (pair.v1.frames(), pair.v2.frames());
    let shift = k.unsigned_abs() as usize;
    let alpha = pair.positional_weight;
    let (v1, v2) = if k >= 0 {
        (crop(&pair.v1, shift..n1, alpha)?, pair.v2.clone())
    } else {
        (pair.v1.clone(), crop(&pair.v2, shift..n2, alpha)?)
    };
    Ok(with_views(pair, v1, v2, k, Injection::Leaky))
}

pub fn inject_offset(pair: &LabeledPair, k: i64, how: Injection) -> Result<LabeledPair> {
    match how {
        Injection::Fair => inject_offset_fair(pair, k),
        Injection::Leaky => inject_offset_leaky(pair, k),
        Injection::None if k == 0 => Ok(pair.clone()),
        Injection::None => Err(Error::Argument(format!("offset {k} needs an injection mode"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_latent_pair, gen_positional_biased_pair, SynthConfig};

    fn base() -> LabeledPair {
        gen_latent_pair(&SynthConfig::new(100, 4, 1)).unwrap()
    }

    #[test]
    fn fair_keeps_durations_equal() {
        let p = base();
        for k in [-30, -1, 0, 1, 17, 30] {
            let f = inject_offset_fair(&p, k).unwrap();
            assert_eq!(f.v1.frames(), 100 - k.unsigned_abs() as usize);
            assert_eq!(f.v1.frames(), f.v2.frames());
            assert_eq!((f.true_offset, f.injection), (k, Injection::Fair));
        }
    }

    #[test]
    fn fair_rows_line_up_with_sign_convention() {
        let p = base();
        let f = inject_offset_fair(&p, 5).unwrap();
        // v1' row 0 is original v1 row 5, v2' row 0 is original v2 row 0:
        // the original v2 row 5 sits at v2' index 5 = 0 + offset.
        assert_eq!(f.v1.row(0), p.v1.row(5));
        assert_eq!(f.v2.row(5), p.v2.row(5));
        let g = inject_offset_fair(&p, -4).unwrap();
        assert_eq!(g.v2.row(0), p.v2.row(4));
        assert_eq!(g.v1.row(4), p.v1.row(4));
    }

    #[test]
    fn leaky_duration_difference_is_offset() {
        let p = base();
        for k in [-12, 0, 9] {
            let l = inject_offset_leaky(&p, k).unwrap();
            assert_eq!(l.v2.frames() as i64 - l.v1.frames() as i64, k);
        }
    }

    #[test]
    fn rejects_large_offsets_and_reinjection() {
        let p = base();
        assert!(inject_offset_fair(&p, 99).is_err());
        let f = inject_offset_fair(&p, 3).unwrap();
        assert!(inject_offset_leaky(&f, 3).is_err());
    }

    #[test]
    fn positional_component_follows_clip_end() {
        let cfg = SynthConfig {
            positional_weight: 2.0,
            ..SynthConfig::new(80, 6, 4)
        };
        let plain = gen_latent_pair(&cfg).unwrap();
        let biased = gen_positional_biased_pair(&cfg).unwrap();
        let cropped = inject_offset_leaky(&biased, 10).unwrap();
        let last = cropped.v1.frames() - 1;
        let p0 = super::super::positional_encoding(0, 6);
        for (c, p) in p0.iter().enumerate() {
            let expected = plain.v1.row(79)[c] + 2.0 * p;
            assert!((cropped.v1.row(last)[c] - expected).abs() < 1e-5);
        }
    }
}
