//! Desk-scale frame embedder: grayscale, box-filtered down to a fixed grid.

use std::path::{Path, PathBuf};

use super::{EmbeddingSequence, DEFAULT_FPS};
use crate::error::{Error, Result};

pub const GRID_SIZE: usize = 16;
const CELLS: usize = GRID_SIZE * GRID_SIZE;

/// Embeds every PGM/PPM frame in `frame_dir` (lexicographic filename order)
/// as a 16x16 area-averaged grayscale grid scaled to [0, 1]. With
/// `with_temporal_diff`, each row also carries the per-cell difference from
/// the previous frame (zero for the first frame), giving 512 values.
pub fn extract_pixel_features(
    frame_dir: impl AsRef<Path>,
    with_temporal_diff: bool,
) -> Result<EmbeddingSequence> {
    let dir = frame_dir.as_ref();
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| {
                let e = e.to_ascii_lowercase();
                e == "pgm" || e == "ppm" || e == "pnm"
            })
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Ingest {
            path: dir.to_path_buf(),
            msg: "no PGM/PPM frames found".into(),
        });
    }

    let dim = if with_temporal_diff { 2 * CELLS } else { CELLS };
    let mut values = Vec::with_capacity(files.len() * dim);
    let mut size = None;
    let mut prev: Option<Vec<f64>> = None;
    for file in &files {
        let img = image::open(file).map_err(|e| Error::Ingest {
            path: file.clone(),
            msg: e.to_string(),
        })?;
        let luma = img.to_luma16();
        let (w, h) = luma.dimensions();
        match size {
            None => size = Some((w, h)),
            Some(s) if s != (w, h) => {
                return Err(Error::Ingest {
                    path: file.clone(),
                    msg: format!("frame is {w}x{h}, earlier frames are {}x{}", s.0, s.1),
                })
            }
            _ => {}
        }
        let pixels: Vec<f64> = luma.as_raw().iter().map(|&p| p as f64 / 65535.0).collect();
        let grid = area_downsample(&pixels, w as usize, h as usize);
        values.extend_from_slice(&grid);
        if with_temporal_diff {
            match &prev {
                Some(p) => values.extend(grid.iter().zip(p).map(|(c, p)| c - p)),
                None => values.extend(std::iter::repeat_n(0.0, CELLS)),
            }
        }
        prev = Some(grid);
    }
    EmbeddingSequence::with_meta(
        files.len(),
        dim,
        DEFAULT_FPS,
        values,
        dir.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
    )
}

/// Fractional-overlap weights of each source index for each of the
/// `GRID_SIZE` output cells along one axis; rows sum to one.
fn axis_weights(len: usize) -> Vec<Vec<(usize, f64)>> {
    let cell = len as f64 / GRID_SIZE as f64;
    (0..GRID_SIZE)
        .map(|g| {
            let (lo, hi) = (g as f64 * cell, (g + 1) as f64 * cell);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(len);
            (first..last)
                .filter_map(|p| {
                    let overlap = (hi.min(p as f64 + 1.0) - lo.max(p as f64)).max(0.0);
                    (overlap > 0.0).then_some((p, overlap / cell))
                })
                .collect()
        })
        .collect()
}

pub(crate) fn area_downsample(pixels: &[f64], width: usize, height: usize) -> Vec<f64> {
    let rows = axis_weights(height);
    let cols = axis_weights(width);
    let mut out = Vec::with_capacity(CELLS);
    for rw in &rows {
        for cw in &cols {
            let mut acc = 0.0;
            for &(y, wy) in rw {
                for &(x, wx) in cw {
                    acc += wy * wx * pixels[y * width + x];
                }
            }
            out.push(acc);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, Luma};

    fn write_frames(dir: &Path, frames: &[GrayImage]) {
        for (i, f) in frames.iter().enumerate() {
            f.save(dir.join(format!("frame_{i:03}.pgm"))).unwrap();
        }
    }

    #[test]
    fn uniform_frames_give_equal_rows() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<_> = (0..10).map(|_| GrayImage::from_pixel(40, 30, Luma([128]))).collect();
        write_frames(dir.path(), &frames);
        let s = extract_pixel_features(dir.path(), false).unwrap();
        assert_eq!((s.frames(), s.dim()), (10, 256));
        for r in s.rows() {
            assert_eq!(r, s.row(0));
            for v in r {
                assert!((v - 128.0 / 255.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn first_diff_block_is_zero_and_brightness_shift_is_constant() {
        let dir = tempfile::tempdir().unwrap();
        let base = GrayImage::from_fn(37, 23, |x, y| Luma([((x * 3 + y * 5) % 200) as u8]));
        let delta = 20u8;
        let shifted = GrayImage::from_fn(37, 23, |x, y| Luma([base.get_pixel(x, y)[0] + delta]));
        write_frames(dir.path(), &[base, shifted]);
        let s = extract_pixel_features(dir.path(), true).unwrap();
        assert_eq!(s.dim(), 512);
        assert!(s.row(0)[CELLS..].iter().all(|&v| v == 0.0));
        for v in &s.row(1)[CELLS..] {
            assert!((v - delta as f64 / 255.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn values_stay_in_range() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<_> = (0..4u32)
            .map(|t| GrayImage::from_fn(20, 20, |x, y| Luma([((x * 31 + y * 17 + t * 97) % 256) as u8])))
            .collect();
        write_frames(dir.path(), &frames);
        let s = extract_pixel_features(dir.path(), true).unwrap();
        for r in s.rows() {
            assert!(r[..CELLS].iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(r[CELLS..].iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn mixed_sizes_name_offending_file() {
        let dir = tempfile::tempdir().unwrap();
        write_frames(
            dir.path(),
            &[GrayImage::new(16, 16), GrayImage::new(17, 16)],
        );
        let err = extract_pixel_features(dir.path(), false).unwrap_err().to_string();
        assert!(err.contains("frame_001.pgm"), "{err}");
    }

    #[test]
    fn downsample_matches_block_mean_when_divisible() {
        let (w, h) = (32, 48);
        let px: Vec<f64> = (0..w * h).map(|i| (i % 7) as f64).collect();
        let out = area_downsample(&px, w, h);
        // oracle: plain block means over 2x3 tiles
        for gy in 0..GRID_SIZE {
            for gx in 0..GRID_SIZE {
                let mut acc = 0.0;
                for y in gy * 3..gy * 3 + 3 {
                    for x in gx * 2..gx * 2 + 2 {
                        acc += px[y * w + x];
                    }
                }
                assert!((out[gy * GRID_SIZE + gx] - acc / 6.0).abs() < 1e-12);
            }
        }
    }
}
