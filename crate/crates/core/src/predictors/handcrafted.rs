use super::{lower_median, PredictorKind, SyncPrediction};
use crate::error::{Error, Result};
use crate::simmatrix::SimilarityMatrix;

pub fn predict_naive(_m: &SimilarityMatrix) -> SyncPrediction {
    SyncPrediction::new(0, PredictorKind::Naive)
}

/// Median over rows of `argmax_j s[i][j] - i`. Argmax ties resolve to the
/// lowest column.
pub fn predict_argmax(m: &SimilarityMatrix) -> Result<SyncPrediction> {
    let mut offsets: Vec<i64> = m
        .rows()
        .enumerate()
        .map(|(i, row)| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best as i64 - i as i64
        })
        .collect();
    let offset = lower_median(&mut offsets)
        .ok_or_else(|| Error::Argument("empty similarity matrix".into()))?;
    Ok(SyncPrediction::new(offset, PredictorKind::Argmax))
}

/// Minimum-cost monotone path with cost `-s[i][j]` and steps (1,0), (0,1),
/// (1,1), returned from (0,0) to the far corner. Backtracking ties prefer
/// the diagonal, then left, then up.
pub fn dtw_path(m: &SimilarityMatrix) -> Result<Vec<(usize, usize)>> {
    let (rows, cols) = (m.n_rows(), m.n_cols());
    if rows == 0 || cols == 0 {
        return Err(Error::Argument("empty similarity matrix".into()));
    }
    let cost = |i: usize, j: usize| -m.get(i, j);
    let mut acc = vec![0.0f64; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let prev = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => acc[j - 1],
                (_, 0) => acc[(i - 1) * cols],
                _ => acc[(i - 1) * cols + j - 1]
                    .min(acc[i * cols + j - 1])
                    .min(acc[(i - 1) * cols + j]),
            };
            acc[i * cols + j] = cost(i, j) + prev;
        }
    }

    let mut path = Vec::with_capacity(rows + cols);
    let (mut i, mut j) = (rows - 1, cols - 1);
    path.push((i, j));
    while (i, j) != (0, 0) {
        (i, j) = match (i, j) {
            (0, _) => (0, j - 1),
            (_, 0) => (i - 1, 0),
            _ => {
                let diag = acc[(i - 1) * cols + j - 1];
                let left = acc[i * cols + j - 1];
                let up = acc[(i - 1) * cols + j];
                if diag <= left && diag <= up {
                    (i - 1, j - 1)
                } else if left <= up {
                    (i, j - 1)
                } else {
                    (i - 1, j)
                }
            }
        };
        path.push((i, j));
    }
    path.reverse();
    Ok(path)
}

/// Sum of `-s[i][j]` along a path.
pub fn path_cost(m: &SimilarityMatrix, path: &[(usize, usize)]) -> f64 {
    path.iter().map(|&(i, j)| -m.get(i, j)).sum()
}

/// Median of `col - row` over the DTW path.
pub fn predict_dtw(m: &SimilarityMatrix) -> Result<SyncPrediction> {
    let path = dtw_path(m)?;
    let mut offsets: Vec<i64> = path.iter().map(|&(i, j)| j as i64 - i as i64).collect();
    let offset = lower_median(&mut offsets).expect("path is non-empty");
    Ok(SyncPrediction::new(offset, PredictorKind::Dtw))
}
