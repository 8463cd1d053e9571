//! Discretized forward map `T` and the dense oracles used to check it.
//!
//! The operator is a compressed-sparse-row matrix. Rows are data samples
//! (angle-major for the Radon builder: all rays of the first angle, then the
//! next angle), columns are pixels in row-major order.

mod dense;
mod radon;
mod sprt;

pub use dense::{dense_pseudo_inverse, dense_pseudo_inverse_with_cap, DenseMap, DEFAULT_DENSE_CAP};
pub use radon::{build_parallel_radon, ParallelBeamGeometry};
pub use sprt::{read_sprt, read_sprt_file, write_sprt, write_sprt_file};

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::types::{Image, Sinogram};
use crate::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<f64>,
    geometry: Option<ParallelBeamGeometry>,
}

impl SparseOperator {
    /// Assembles an operator from raw CSR arrays, validating the structure.
    pub fn from_csr(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1 {
            return Err(Error::invalid(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                rows + 1
            )));
        }
        if row_offsets[0] != 0 || row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("row_offsets must start at 0 and be nondecreasing"));
        }
        if row_offsets[rows] != values.len() || col_indices.len() != values.len() {
            return Err(Error::invalid(format!(
                "row_offsets ends at {}, but {} column indices and {} values are stored",
                row_offsets[rows],
                col_indices.len(),
                values.len()
            )));
        }
        if let Some(&c) = col_indices.iter().find(|&&c| c as usize >= cols) {
            return Err(Error::invalid(format!("column index {c} out of range (cols = {cols})")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("operator values must be finite"));
        }
        Ok(SparseOperator {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
            geometry: None,
        })
    }

    /// Stores every entry of a row-major dense matrix, zeros included.
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "dense data has {} values, expected {rows}x{cols}",
                data.len()
            )));
        }
        let row_offsets = (0..=rows).map(|r| r * cols).collect();
        let col_indices = (0..rows).flat_map(|_| 0..cols as u32).collect();
        Self::from_csr(rows, cols, row_offsets, col_indices, data.to_vec())
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::from_dense(n, n, &data).expect("identity is well formed")
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::from_csr(
            n,
            n,
            (0..=n).collect(),
            (0..n as u32).collect(),
            diag.to_vec(),
        )
    }

    pub(crate) fn with_geometry(mut self, geometry: ParallelBeamGeometry) -> Self {
        self.geometry = Some(geometry);
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn geometry(&self) -> Option<&ParallelBeamGeometry> {
        self.geometry.as_ref()
    }

    /// Column indices and values stored for one row.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    /// Shape of the reconstruction grid: the geometry's pixel grid when the
    /// operator came from the Radon builder, otherwise a `cols x 1` column.
    pub fn image_shape(&self) -> (usize, usize) {
        match &self.geometry {
            Some(g) => (g.n1, g.n2),
            None => (self.cols, 1),
        }
    }

    /// Shape of the data grid as `(rays, angles)`.
    pub fn data_shape(&self) -> (usize, usize) {
        match &self.geometry {
            Some(g) => (g.rays_per_angle, g.num_angles),
            None => (self.rows, 1),
        }
    }

    pub fn zero_image(&self) -> Image {
        let (n1, n2) = self.image_shape();
        Image::zeros(n1, n2)
    }

    pub fn apply(&self, x: &Image) -> Result<Sinogram> {
        if x.len() != self.cols {
            return Err(Error::invalid(format!(
                "apply: image has {} pixels, operator has {} columns",
                x.len(),
                self.cols
            )));
        }
        let (m1, m2) = self.data_shape();
        let mut out = vec![0.0; self.rows];
        self.apply_into(x.data(), &mut out);
        Ok(Sinogram::from_raw(m1, m2, out))
    }

    pub fn apply_adjoint(&self, y: &Sinogram) -> Result<Image> {
        if y.len() != self.rows {
            return Err(Error::invalid(format!(
                "apply_adjoint: sinogram has {} samples, operator has {} rows",
                y.len(),
                self.rows
            )));
        }
        let (n1, n2) = self.image_shape();
        let mut out = vec![0.0; self.cols];
        self.adjoint_into(y.data(), &mut out);
        Ok(Image::from_raw(n1, n2, out))
    }

    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(i, x);
        }
    }

    pub(crate) fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c as usize] += v * yi;
            }
        }
    }

    #[inline]
    pub(crate) fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&c, &v)| v * x[c as usize]).sum()
    }

    /// Forward product restricted to the listed rows.
    pub fn apply_rows(&self, x: &[f64], rows: &[usize]) -> Vec<f64> {
        rows.iter().map(|&i| self.row_dot(i, x)).collect()
    }

    /// Densifies the operator (row-major), refusing when `rows * cols > cap`.
    pub fn to_dense(&self, cap: usize) -> Result<Vec<f64>> {
        let requested = self.rows.saturating_mul(self.cols);
        if requested > cap {
            return Err(Error::Capacity {
                what: "dense operator",
                requested,
                cap,
            });
        }
        let mut dense = vec![0.0; requested];
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                dense[i * self.cols + c as usize] += v;
            }
        }
        Ok(dense)
    }
}

/// Power-method estimate of `||T||^2`, the largest eigenvalue of `T^T T`.
///
/// Returns the Rayleigh quotient after `iterations` multiplications by
/// `T^T T`, starting from a seeded Gaussian vector.
pub fn operator_norm_sq(op: &SparseOperator, iterations: usize, seed: u64) -> f64 {
    let mut rng = Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..op.cols())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let mut tv = vec![0.0; op.rows()];
    let mut w = vec![0.0; op.cols()];
    let mut estimate = 0.0;
    for _ in 0..iterations.max(1) {
        let nv = linalg::norm(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        op.apply_into(&v, &mut tv);
        op.adjoint_into(&tv, &mut w);
        estimate = linalg::dot(&v, &w);
        std::mem::swap(&mut v, &mut w);
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_csr_rejects_bad_offsets() {
        assert!(SparseOperator::from_csr(2, 2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseOperator::from_csr(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(SparseOperator::from_csr(1, 2, vec![0, 2], vec![0], vec![1.0]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_invalid_argument() {
        let op = SparseOperator::identity(3);
        let x = Image::zeros(2, 1);
        assert!(matches!(op.apply(&x), Err(Error::InvalidArgument(_))));
        let y = Sinogram::zeros(4, 1);
        assert!(matches!(op.apply_adjoint(&y), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn norm_of_identity_and_diagonal() {
        let id = SparseOperator::identity(4);
        assert!((operator_norm_sq(&id, 5, 1) - 1.0).abs() < 1e-9);
        let d = SparseOperator::diagonal(&[3.0, 1.0]).unwrap();
        assert!((operator_norm_sq(&d, 60, 2) - 9.0).abs() < 1e-6);
    }

    #[test]
    fn norm_of_zero_operator() {
        let z = SparseOperator::from_csr(3, 3, vec![0; 4], vec![], vec![]).unwrap();
        assert_eq!(operator_norm_sq(&z, 10, 0), 0.0);
    }

    #[test]
    fn rayleigh_quotient_is_nondecreasing() {
        let op = build_parallel_radon(12, 12, 17, 9, 180.0).unwrap();
        let mut last = 0.0;
        for k in 1..30 {
            let est = operator_norm_sq(&op, k, 5);
            assert!(est >= last * (1.0 - 1e-12), "k={k}: {est} < {last}");
            last = est;
        }
    }

    #[test]
    fn to_dense_respects_cap() {
        let op = SparseOperator::identity(10);
        assert!(matches!(op.to_dense(99), Err(Error::Capacity { .. })));
        assert_eq!(op.to_dense(100).unwrap().len(), 100);
    }
}
