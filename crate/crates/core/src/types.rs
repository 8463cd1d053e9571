//! Reconstruction-space and data-space vectors.

use crate::error::{Error, Result};
use crate::linalg;

/// Reconstruction-space vector on an `n1 x n2` pixel grid, stored row-major
/// (`n1` rows of `n2` pixels).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    n1: usize,
    n2: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(n1: usize, n2: usize) -> Self {
        Image {
            n1,
            n2,
            data: vec![0.0; n1 * n2],
        }
    }

    pub fn from_vec(n1: usize, n2: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n1 * n2 {
            return Err(Error::invalid(format!(
                "image data has {} values, expected {}x{} = {}",
                data.len(),
                n1,
                n2,
                n1 * n2
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("image value {i} is not finite")));
        }
        Ok(Image { n1, n2, data })
    }

    /// Builds an image without the finiteness check. Used by iterative
    /// methods that perform their own divergence detection.
    pub(crate) fn from_raw(n1: usize, n2: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n1 * n2);
        Image { n1, n2, data }
    }

    pub fn rows(&self) -> usize {
        self.n1
    }

    pub fn cols(&self) -> usize {
        self.n2
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n2 + c]
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.data)
    }

    pub fn scaled(&self, factor: f64) -> Image {
        Image::from_raw(self.n1, self.n2, self.data.iter().map(|v| v * factor).collect())
    }

    pub fn min_max(&self) -> (f64, f64) {
        linalg::min_max(&self.data)
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.n1 == other.n1 && self.n2 == other.n2
    }

    pub(crate) fn check_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{what}: image shapes differ ({}x{} vs {}x{})",
                self.n1, self.n2, other.n1, other.n2
            )))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Data-space vector: `m1` rays for each of `m2` angles, angle-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    m1: usize,
    m2: usize,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(m1: usize, m2: usize) -> Self {
        Sinogram {
            m1,
            m2,
            data: vec![0.0; m1 * m2],
        }
    }

    pub fn from_vec(m1: usize, m2: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != m1 * m2 {
            return Err(Error::invalid(format!(
                "sinogram data has {} values, expected {}x{} = {}",
                data.len(),
                m1,
                m2,
                m1 * m2
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sinogram value {i} is not finite")));
        }
        Ok(Sinogram { m1, m2, data })
    }

    pub(crate) fn from_raw(m1: usize, m2: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), m1 * m2);
        Sinogram { m1, m2, data }
    }

    pub fn rays(&self) -> usize {
        self.m1
    }

    pub fn angles(&self) -> usize {
        self.m2
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.data)
    }

    pub fn scaled(&self, factor: f64) -> Sinogram {
        Sinogram::from_raw(self.m1, self.m2, self.data.iter().map(|v| v * factor).collect())
    }

    pub fn min_max(&self) -> (f64, f64) {
        linalg::min_max(&self.data)
    }

    pub(crate) fn check_same_shape(&self, other: &Sinogram, what: &str) -> Result<()> {
        if self.m1 == other.m1 && self.m2 == other.m2 {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{what}: sinogram shapes differ ({}x{} vs {}x{})",
                self.m1, self.m2, other.m1, other.m2
            )))
        }
    }
}
