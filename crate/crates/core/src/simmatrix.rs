//! Inter-video frame similarity matrices.
//!
//! Orientation: row `i` is frame `i` of the first video, column `j` is frame
//! `j` of the second, and the raw entry is the negative Euclidean distance
//! between the two frame embeddings.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::{write_eseq, EmbeddingSequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    RowSoftmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    normalized: Normalization,
    padded_to: Option<usize>,
}

impl SimilarityMatrix {
    /// Wraps raw row-major values. Entries must be finite.
    pub fn from_raw(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Argument("similarity matrix must be non-empty".into()));
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::Argument(format!(
                "expected {} values for {n_rows}x{n_cols}, got {}",
                n_rows * n_cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("similarity matrix has non-finite entries".into()));
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
            normalized: Normalization::Raw,
            padded_to: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Argument("ragged similarity rows".into()));
        }
        Self::from_raw(rows.len(), n_cols, rows.concat())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn normalized(&self) -> Normalization {
        self.normalized
    }

    pub fn padded_to(&self) -> Option<usize> {
        self.padded_to
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols)
    }

    pub fn transpose(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.n_cols {
            for i in 0..self.n_rows {
                values.push(self.get(i, j));
            }
        }
        Self {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            values,
            normalized: self.normalized,
            padded_to: self.padded_to,
        }
    }

    /// The matrix as an embedding sequence (one frame per row) for ESEQ export.
    pub fn to_sequence(&self) -> Result<EmbeddingSequence> {
        EmbeddingSequence::new(self.n_rows, self.n_cols, self.values.clone())
    }

    pub fn write_eseq(&self, path: impl AsRef<Path>) -> Result<()> {
        write_eseq(&self.to_sequence()?, path)
    }
}

/// `values[i][j] = -‖a_i - b_j‖₂`. Each entry sums squared differences in
/// index order, so the result does not depend on how rows are scheduled.
pub fn pairwise_neg_l2(a: &EmbeddingSequence, b: &EmbeddingSequence) -> Result<SimilarityMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::Argument(format!(
            "embedding dims differ: first video has dim {}, second has dim {}",
            a.dim(),
            b.dim()
        )));
    }
    let mut values = Vec::with_capacity(a.frames() * b.frames());
    for ra in a.rows() {
        for rb in b.rows() {
            let sq: f64 = ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum();
            values.push(-sq.sqrt());
        }
    }
    SimilarityMatrix::from_raw(a.frames(), b.frames(), values)
}

/// Row-wise softmax (temperature 1, max-subtracted).
pub fn row_softmax(m: &SimilarityMatrix) -> Result<SimilarityMatrix> {
    if m.normalized != Normalization::Raw {
        return Err(Error::Argument("row_softmax expects a raw matrix".into()));
    }
    let mut values = m.values.clone();
    for row in values.chunks_exact_mut(m.n_cols) {
        softmax_in_place(row);
    }
    Ok(SimilarityMatrix {
        values,
        normalized: Normalization::RowSoftmax,
        ..m.clone()
    })
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

/// Zero-pads to `size × size` with the original block anchored at (0, 0).
pub fn pad_to_square(m: &SimilarityMatrix, size: usize) -> Result<SimilarityMatrix> {
    if m.n_rows > size || m.n_cols > size {
        return Err(Error::OutOfRange(format!(
            "{}x{} similarity matrix does not fit a {size}x{size} pad",
            m.n_rows, m.n_cols
        )));
    }
    let mut values = vec![0.0; size * size];
    for (i, row) in m.rows().enumerate() {
        values[i * size..i * size + m.n_cols].copy_from_slice(row);
    }
    Ok(SimilarityMatrix {
        n_rows: size,
        n_cols: size,
        values,
        normalized: m.normalized,
        padded_to: Some(size),
    })
}

/// Writes an 8-bit binary PGM with min mapped to 0 and max to 255; a
/// constant matrix renders all black.
pub fn render_pgm(m: &SimilarityMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(m)).map_err(|e| Error::io(path, e))
}

pub(crate) fn encode_pgm(m: &SimilarityMatrix) -> Vec<u8> {
    let (lo, hi) = m
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let mut out = Vec::with_capacity(m.values.len() + 20);
    write!(out, "P5\n{} {}\n255\n", m.n_cols, m.n_rows).unwrap();
    out.extend(m.values.iter().map(|&v| {
        if range > 0.0 {
            ((v - lo) / range * 255.0).round() as u8
        } else {
            0
        }
    }));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(rows: &[&[f64]]) -> EmbeddingSequence {
        EmbeddingSequence::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn hand_l2() {
        let a = seq(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let b = seq(&[&[0.0, 0.0], &[0.0, 1.0]]);
        let m = pairwise_neg_l2(&a, &b).unwrap();
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert!((m.get(1, 1) + std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn dim_mismatch_reports_both() {
        let a = seq(&[&[0.0, 0.0]]);
        let b = seq(&[&[0.0, 0.0, 1.0]]);
        let err = pairwise_neg_l2(&a, &b).unwrap_err().to_string();
        assert!(err.contains('2') && err.contains('3'), "{err}");
    }

    #[test]
    fn softmax_closed_forms() {
        let m = SimilarityMatrix::from_rows(&[
            vec![0.0, 0.0],
            vec![2f64.ln(), 0.0],
            vec![1000.0, 999.0],
        ])
        .unwrap();
        let s = row_softmax(&m).unwrap();
        assert_eq!(s.row(0), &[0.5, 0.5]);
        assert!((s.get(1, 0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.get(1, 1) - 1.0 / 3.0).abs() < 1e-12);
        let e = std::f64::consts::E;
        assert!((s.get(2, 0) - e / (e + 1.0)).abs() < 1e-12);
        assert!((s.get(2, 1) - 1.0 / (e + 1.0)).abs() < 1e-12);
        assert!(row_softmax(&s).is_err());
    }

    #[test]
    fn pad_anchors_top_left() {
        let m = SimilarityMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let p = pad_to_square(&m, 4).unwrap();
        assert_eq!(p.padded_to(), Some(4));
        assert_eq!(
            p.values(),
            &[1.0, 2.0, 0.0, 0.0, 3.0, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(pad_to_square(&m, 2).unwrap().values(), m.values());
    }

    #[test]
    fn pad_rejects_oversize() {
        let m = SimilarityMatrix::from_raw(300, 120, vec![0.0; 300 * 120]).unwrap();
        assert!(matches!(pad_to_square(&m, 256), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn pgm_endpoints_and_header() {
        let m = SimilarityMatrix::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        let bytes = encode_pgm(&m);
        assert!(bytes.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(&bytes[11..], &[255, 0, 0, 255]);

        let c = SimilarityMatrix::from_raw(2, 3, vec![-4.0; 6]).unwrap();
        let bytes = encode_pgm(&c);
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert!(bytes[11..].iter().all(|&b| b == 0));
    }
}
