//! Parallel-beam Radon matrix by exact ray/pixel intersection lengths.
//!
//! Pixels have unit side and the image square is centred on the origin:
//! column `c` covers `x in [c - n2/2, c + 1 - n2/2]` and row `r` covers
//! `y in [n1/2 - r - 1, n1/2 - r]` (row 0 at the top). For angle `theta`
//! the ray with detector offset `s` is the line `p . (cos theta, sin theta) = s`.
//! The `m1` detector offsets are centred on zero with spacing
//! `hypot(n1, n2) / m1`, so the detector covers the image diagonal.

use rayon::prelude::*;

use super::SparseOperator;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelBeamGeometry {
    pub n1: usize,
    pub n2: usize,
    pub rays_per_angle: usize,
    pub num_angles: usize,
    /// Projection angles in degrees, equally spaced over `[0, span)`.
    pub angles_deg: Vec<f64>,
}

impl ParallelBeamGeometry {
    pub fn new(n1: usize, n2: usize, m1: usize, m2: usize, angle_span: f64) -> Result<Self> {
        if n1 == 0 || n2 == 0 || m1 == 0 || m2 == 0 {
            return Err(Error::invalid(format!(
                "radon geometry needs positive sizes, got n1={n1} n2={n2} m1={m1} m2={m2}"
            )));
        }
        if !(angle_span.is_finite() && angle_span > 0.0) {
            return Err(Error::invalid(format!("angle span must be positive, got {angle_span}")));
        }
        let angles_deg = (0..m2).map(|k| k as f64 * angle_span / m2 as f64).collect();
        Ok(ParallelBeamGeometry {
            n1,
            n2,
            rays_per_angle: m1,
            num_angles: m2,
            angles_deg,
        })
    }

    pub fn detector_spacing(&self) -> f64 {
        (self.n1 as f64).hypot(self.n2 as f64) / self.rays_per_angle as f64
    }

    pub fn detector_offset(&self, ray: usize) -> f64 {
        (ray as f64 - (self.rays_per_angle as f64 - 1.0) / 2.0) * self.detector_spacing()
    }
}

/// Builds the `(m1*m2) x (n1*n2)` parallel-beam projection matrix.
pub fn build_parallel_radon(
    n1: usize,
    n2: usize,
    m1: usize,
    m2: usize,
    angle_span: f64,
) -> Result<SparseOperator> {
    let geometry = ParallelBeamGeometry::new(n1, n2, m1, m2, angle_span)?;
    let rows: Vec<Vec<(u32, f64)>> = (0..m1 * m2)
        .into_par_iter()
        .map(|row| {
            let angle = geometry.angles_deg[row / m1].to_radians();
            let offset = geometry.detector_offset(row % m1);
            trace_ray(n1, n2, angle, offset)
        })
        .collect();

    let nnz = rows.iter().map(Vec::len).sum();
    let mut row_offsets = Vec::with_capacity(m1 * m2 + 1);
    let mut col_indices = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    row_offsets.push(0);
    for entries in rows {
        for (c, v) in entries {
            col_indices.push(c);
            values.push(v);
        }
        row_offsets.push(values.len());
    }
    Ok(SparseOperator::from_csr(m1 * m2, n1 * n2, row_offsets, col_indices, values)?
        .with_geometry(geometry))
}

/// Siddon-style traversal: collects every parameter where the ray crosses a
/// grid line, then assigns each segment to the pixel holding its midpoint.
fn trace_ray(n1: usize, n2: usize, angle: f64, offset: f64) -> Vec<(u32, f64)> {
    let (sin, cos) = angle.sin_cos();
    let (px, py) = (offset * cos, offset * sin);
    let (ux, uy) = (-sin, cos);
    let (xmin, xmax) = (-(n2 as f64) / 2.0, n2 as f64 / 2.0);
    let (ymin, ymax) = (-(n1 as f64) / 2.0, n1 as f64 / 2.0);
    const EPS: f64 = 1e-12;

    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::INFINITY;
    for (p, u, lo, hi) in [(px, ux, xmin, xmax), (py, uy, ymin, ymax)] {
        if u.abs() < EPS {
            if p < lo || p > hi {
                return Vec::new();
            }
        } else {
            let (a, b) = ((lo - p) / u, (hi - p) / u);
            t_lo = t_lo.max(a.min(b));
            t_hi = t_hi.min(a.max(b));
        }
    }
    if t_hi - t_lo <= EPS {
        return Vec::new();
    }

    let mut ts = Vec::with_capacity(n1 + n2 + 2);
    ts.push(t_lo);
    ts.push(t_hi);
    if ux.abs() >= EPS {
        for k in 0..=n2 {
            let t = (xmin + k as f64 - px) / ux;
            if t > t_lo && t < t_hi {
                ts.push(t);
            }
        }
    }
    if uy.abs() >= EPS {
        for k in 0..=n1 {
            let t = (ymin + k as f64 - py) / uy;
            if t > t_lo && t < t_hi {
                ts.push(t);
            }
        }
    }
    ts.sort_by(f64::total_cmp);

    let mut entries: Vec<(u32, f64)> = Vec::with_capacity(ts.len());
    for w in ts.windows(2) {
        let len = w[1] - w[0];
        if len <= EPS {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let (x, y) = (px + tm * ux, py + tm * uy);
        let c = ((x - xmin).floor() as isize).clamp(0, n2 as isize - 1) as usize;
        let r = ((ymax - y).floor() as isize).clamp(0, n1 as isize - 1) as usize;
        entries.push(((r * n2 + c) as u32, len));
    }
    entries.sort_by_key(|e| e.0);
    entries.dedup_by(|later, earlier| {
        if later.0 == earlier.0 {
            earlier.1 += later.1;
            true
        } else {
            false
        }
    });
    entries
}
