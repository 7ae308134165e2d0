//! Dense sentence-embedding matrices and cosine similarity.
//!
//! Rows are stored as `f32` (the on-disk precision); every dot product and
//! norm accumulates in `f64` so that 1024-dimensional rows do not drift.

use alloc::vec::Vec;

use crate::error::CoreError;

/// A row norm below this is treated as a zero vector.
pub const ZERO_NORM_EPS: f64 = 1e-8;

/// Immutable table of `rows x dim` sentence embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
    normalized: bool,
    zero_rows: Vec<usize>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from row-major data. Fails if `data` is not an exact
    /// multiple of `dim` or either extent is zero.
    pub fn from_data(data: Vec<f32>, dim: usize) -> Result<Self, CoreError> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(CoreError::MalformedShape {
                len: data.len(),
                dim,
            });
        }
        Ok(Self {
            rows: data.len() / dim,
            dim,
            data,
            normalized: false,
            zero_rows: Vec::new(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Indices of rows that were zero vectors at normalization time.
    pub fn zero_rows(&self) -> &[usize] {
        &self.zero_rows
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn try_row(&self, i: usize) -> Result<&[f32], CoreError> {
        if i >= self.rows {
            return Err(CoreError::IndexOutOfRange {
                index: i,
                len: self.rows,
            });
        }
        Ok(self.row(i))
    }

    /// Returns a copy with every non-zero row scaled to unit L2 norm.
    /// Zero rows (norm < 1e-8) are left as-is and recorded in `zero_rows`.
    /// Idempotent up to f32 rounding.
    pub fn normalize_rows(&self) -> EmbeddingMatrix {
        let mut data = self.data.clone();
        let mut zero_rows = Vec::new();
        for i in 0..self.rows {
            let row = &mut data[i * self.dim..(i + 1) * self.dim];
            let norm = l2_norm(row);
            if norm < ZERO_NORM_EPS {
                zero_rows.push(i);
            } else {
                let inv = 1.0 / norm;
                for x in row.iter_mut() {
                    *x = (f64::from(*x) * inv) as f32;
                }
            }
        }
        EmbeddingMatrix {
            rows: self.rows,
            dim: self.dim,
            data,
            normalized: true,
            zero_rows,
        }
    }

    /// Reconstructs a matrix with an explicit `normalized` flag, for loaders
    /// that persist the flag. Zero rows are recomputed when flagged.
    pub fn from_parts(data: Vec<f32>, dim: usize, normalized: bool) -> Result<Self, CoreError> {
        let mut m = Self::from_data(data, dim)?;
        if normalized {
            let mut zero_rows = Vec::new();
            for i in 0..m.rows {
                if l2_norm(m.row(i)) < ZERO_NORM_EPS {
                    zero_rows.push(i);
                }
            }
            m.normalized = true;
            m.zero_rows = zero_rows;
        }
        Ok(m)
    }
}

/// Dot product with `f64` accumulation.
#[inline]
pub fn dot(u: &[f32], v: &[f32]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    // Sixteen independent accumulator chains, written as two 8-lane groups
    // over exact chunks: bounds checks vanish and the lanes map onto wide
    // FMA units while the latency of each chain is hidden.
    let mut acc0 = [0.0f64; 8];
    let mut acc1 = [0.0f64; 8];
    let mut cu = u.chunks_exact(16);
    let mut cv = v.chunks_exact(16);
    for (a, b) in (&mut cu).zip(&mut cv) {
        for j in 0..8 {
            acc0[j] += f64::from(a[j]) * f64::from(b[j]);
            acc1[j] += f64::from(a[j + 8]) * f64::from(b[j + 8]);
        }
    }
    let mut tail = 0.0f64;
    for (&a, &b) in cu.remainder().iter().zip(cv.remainder()) {
        tail += f64::from(a) * f64::from(b);
    }
    let mut sum = tail;
    for j in 0..8 {
        sum += acc0[j] + acc1[j];
    }
    sum
}

/// L2 norm with `f64` accumulation.
#[inline]
pub fn l2_norm(u: &[f32]) -> f64 {
    libm::sqrt(dot(u, u))
}

/// Cosine similarity; 0.0 if either vector has norm below 1e-8.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64, CoreError> {
    if u.len() != v.len() {
        return Err(CoreError::DimMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let nu = l2_norm(u);
    let nv = l2_norm(v);
    if nu < ZERO_NORM_EPS || nv < ZERO_NORM_EPS {
        return Ok(0.0);
    }
    Ok(dot(u, v) / (nu * nv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn from_data_rejects_non_multiple() {
        let err = EmbeddingMatrix::from_data(vec![1.0; 7], 3).unwrap_err();
        assert_eq!(err, CoreError::MalformedShape { len: 7, dim: 3 });
    }

    #[test]
    fn normalize_three_four_five() {
        let m = EmbeddingMatrix::from_data(vec![3.0, 4.0], 2).unwrap();
        let n = m.normalize_rows();
        assert!((n.row(0)[0] - 0.6).abs() < 1e-7);
        assert!((n.row(0)[1] - 0.8).abs() < 1e-7);
        assert!(n.is_normalized());
        assert!(n.zero_rows().is_empty());
    }

    #[test]
    fn normalize_keeps_zero_rows() {
        let m = EmbeddingMatrix::from_data(vec![0.0, 0.0, 1.0, 0.0], 2).unwrap();
        let n = m.normalize_rows();
        assert_eq!(n.row(0), &[0.0, 0.0]);
        assert_eq!(n.zero_rows(), &[0]);
    }

    #[test]
    fn normalize_idempotent() {
        let m = EmbeddingMatrix::from_data(vec![1.5, -2.0, 0.25, 3.0, 0.0, -1.0], 3).unwrap();
        let once = m.normalize_rows();
        let twice = once.normalize_rows();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn cosine_basics() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((cosine(&[3.0, 4.0], &[4.0, 3.0]).unwrap() - 0.96).abs() < 1e-12);
    }

    #[test]
    fn cosine_zero_vector_is_zero() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn cosine_dim_mismatch() {
        assert!(matches!(
            cosine(&[1.0], &[1.0, 2.0]),
            Err(CoreError::DimMismatch { .. })
        ));
    }
}
