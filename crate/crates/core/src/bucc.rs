//! Bidirectional top-1 retrieval accuracy over an aligned development set.
//!
//! For each source row the best-matching target row is looked up by cosine
//! and vice versa; accuracy is the fraction of rows whose argmax lands on the
//! diagonal, averaged over both directions. Exact similarity ties go to the
//! lowest index so the metric is deterministic.

use alloc::vec;
use alloc::vec::Vec;

use crate::embedding::{cosine, EmbeddingMatrix};
use crate::error::CoreError;

/// Dense n x n matrix of pairwise similarities, row i = source i.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub n: usize,
    pub values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self, CoreError> {
        if values.len() != n * n {
            return Err(CoreError::MalformedShape {
                len: values.len(),
                dim: n,
            });
        }
        Ok(Self { n, values })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Pairwise cosine matrix of two aligned embedding sets.
pub fn similarity_matrix(
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
) -> Result<SimilarityMatrix, CoreError> {
    if src.rows() != tgt.rows() {
        return Err(CoreError::RowCountMismatch {
            left: src.rows(),
            right: tgt.rows(),
        });
    }
    if src.dim() != tgt.dim() {
        return Err(CoreError::DimMismatch {
            left: src.dim(),
            right: tgt.dim(),
        });
    }
    let n = src.rows();
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            values.push(cosine(src.row(i), tgt.row(j))?);
        }
    }
    Ok(SimilarityMatrix { n, values })
}

#[inline]
fn argmax_update(best: &mut (usize, f64), index: usize, value: f64) {
    // Strictly-greater keeps the lowest index on ties.
    if value > best.1 {
        *best = (index, value);
    }
}

/// Accuracy from row and column argmax indices.
fn accuracy_from_argmax(row_argmax: &[usize], col_argmax: &[usize]) -> f64 {
    let n = row_argmax.len();
    let hits = row_argmax.iter().enumerate().filter(|&(i, &a)| a == i).count()
        + col_argmax.iter().enumerate().filter(|&(j, &a)| a == j).count();
    hits as f64 / (2 * n) as f64
}

/// Bidirectional top-1 accuracy of a materialized similarity matrix.
pub fn bucc_accuracy(s: &SimilarityMatrix) -> Result<f64, CoreError> {
    if s.n == 0 {
        return Err(CoreError::EmptyMatrix);
    }
    let n = s.n;
    let mut row_argmax = vec![0usize; n];
    let mut col_best = vec![(0usize, f64::NEG_INFINITY); n];
    for i in 0..n {
        let mut best = (0usize, f64::NEG_INFINITY);
        for j in 0..n {
            let v = s.at(i, j);
            argmax_update(&mut best, j, v);
            argmax_update(&mut col_best[j], i, v);
        }
        row_argmax[i] = best.0;
    }
    let col_argmax: Vec<usize> = col_best.iter().map(|b| b.0).collect();
    Ok(accuracy_from_argmax(&row_argmax, &col_argmax))
}

/// Bidirectional top-1 accuracy computed in row blocks without storing the
/// full n x n matrix. Used above the materialization cap.
pub fn streaming_accuracy(
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    block: usize,
) -> Result<f64, CoreError> {
    if src.rows() != tgt.rows() {
        return Err(CoreError::RowCountMismatch {
            left: src.rows(),
            right: tgt.rows(),
        });
    }
    if src.dim() != tgt.dim() {
        return Err(CoreError::DimMismatch {
            left: src.dim(),
            right: tgt.dim(),
        });
    }
    let n = src.rows();
    if n == 0 {
        return Err(CoreError::EmptyMatrix);
    }
    let block = block.max(1);
    let mut row_argmax = vec![0usize; n];
    let mut col_best = vec![(0usize, f64::NEG_INFINITY); n];
    let mut start = 0;
    while start < n {
        let end = (start + block).min(n);
        for i in start..end {
            let mut best = (0usize, f64::NEG_INFINITY);
            for j in 0..n {
                let v = cosine(src.row(i), tgt.row(j))?;
                argmax_update(&mut best, j, v);
                argmax_update(&mut col_best[j], i, v);
            }
            row_argmax[i] = best.0;
        }
        start = end;
    }
    let col_argmax: Vec<usize> = col_best.iter().map(|b| b.0).collect();
    Ok(accuracy_from_argmax(&row_argmax, &col_argmax))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn identity_matrix_is_perfect() {
        let s = SimilarityMatrix::from_values(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(bucc_accuracy(&s).unwrap(), 1.0);
    }

    #[test]
    fn fully_swapped_matrix_scores_zero() {
        let s = SimilarityMatrix::from_values(2, vec![0.1, 0.9, 0.8, 0.2]).unwrap();
        assert_eq!(bucc_accuracy(&s).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_dominant_matrix_scores_one() {
        let s = SimilarityMatrix::from_values(2, vec![0.9, 0.1, 0.2, 0.8]).unwrap();
        assert_eq!(bucc_accuracy(&s).unwrap(), 1.0);
    }

    #[test]
    fn empty_matrix_errors() {
        let s = SimilarityMatrix::from_values(0, vec![]).unwrap();
        assert_eq!(bucc_accuracy(&s).unwrap_err(), CoreError::EmptyMatrix);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        // All-equal similarities: every argmax is 0, so only pair 0 scores
        // in each direction.
        let s = SimilarityMatrix::from_values(2, vec![0.5; 4]).unwrap();
        assert_eq!(bucc_accuracy(&s).unwrap(), 0.5);
    }

    #[test]
    fn one_by_one_matrix() {
        let src = EmbeddingMatrix::from_data(vec![3.0, 4.0], 2).unwrap();
        let tgt = EmbeddingMatrix::from_data(vec![4.0, 3.0], 2).unwrap();
        let s = similarity_matrix(&src, &tgt).unwrap();
        assert_eq!(s.n, 1);
        assert!((s.at(0, 0) - 0.96).abs() < 1e-12);
        assert_eq!(bucc_accuracy(&s).unwrap(), 1.0);
    }

    #[test]
    fn streaming_matches_materialized() {
        let src =
            EmbeddingMatrix::from_data(vec![1., 0., 0., 1., 0.7, 0.7, -1., 0.5], 2).unwrap();
        let tgt =
            EmbeddingMatrix::from_data(vec![0.9, 0.1, 0.2, 1., 0.6, 0.8, -0.9, 0.4], 2).unwrap();
        let dense = bucc_accuracy(&similarity_matrix(&src, &tgt).unwrap()).unwrap();
        let streamed = streaming_accuracy(&src, &tgt, 2).unwrap();
        assert_eq!(dense, streamed);
    }
}
