use nalgebra::DMatrix;

use super::SparseOperator;
use crate::error::{Error, Result};

/// Default densification cap: `rows * cols <= 2^22`.
pub const DEFAULT_DENSE_CAP: usize = 1 << 22;

/// Row-major dense linear map, used for desk-scale pseudo-inverses.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMap {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    /// Relative singular-value cutoff the map was built with.
    pub truncation_tol: f64,
}

impl DenseMap {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::invalid(format!(
                "dense map expects {} inputs, got {}",
                self.cols,
                x.len()
            )));
        }
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

pub fn dense_pseudo_inverse(op: &SparseOperator, truncation_tol: f64) -> Result<DenseMap> {
    dense_pseudo_inverse_with_cap(op, truncation_tol, DEFAULT_DENSE_CAP)
}

/// Truncated-SVD Moore-Penrose inverse. Singular values below
/// `truncation_tol * sigma_max` are treated as zero.
pub fn dense_pseudo_inverse_with_cap(
    op: &SparseOperator,
    truncation_tol: f64,
    cap: usize,
) -> Result<DenseMap> {
    if !(truncation_tol >= 0.0) {
        return Err(Error::invalid("truncation tolerance must be nonnegative"));
    }
    let (m, n) = (op.rows(), op.cols());
    let dense = op.to_dense(cap)?;
    let a = DMatrix::from_row_slice(m, n, &dense);
    let svd = a.svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = truncation_tol * sigma_max;

    // pinv = V diag(1/s) U^T, an n x m map
    let mut pinv = DMatrix::<f64>::zeros(n, m);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let vk = v_t.row(k).transpose();
        let uk = u.column(k);
        pinv += (vk * uk.transpose()) / s;
    }
    let mut data = Vec::with_capacity(n * m);
    for r in 0..n {
        for c in 0..m {
            data.push(pinv[(r, c)]);
        }
    }
    Ok(DenseMap {
        rows: n,
        cols: m,
        data,
        truncation_tol,
    })
}
