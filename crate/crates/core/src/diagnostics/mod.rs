//! Image-quality metrics and instability indicators.

mod metrics;
mod probe;

pub use metrics::{psnr, ssim, ssim_with_range, PSNR_CAP_DB, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};
pub use probe::{continuity_probe, continuity_probe_with_sigma, Arm, ProbeReport};

use crate::error::Result;
use crate::linalg;
use crate::types::Image;
use crate::unrolled::IterateTrace;

/// `beta ||learned - classical||`.
pub fn direction_norm(classical: &Image, learned: &Image, beta: f64) -> Result<f64> {
    classical.check_same_shape(learned, "direction_norm")?;
    Ok(beta.abs() * linalg::diff_norm(learned.data(), classical.data()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormTrajectory {
    pub iterate_norms: Vec<f64>,
    /// `||x_i|| / ||ground truth||`; present only with a ground truth.
    pub relative_norms: Option<Vec<f64>>,
}

pub fn norm_trajectories(trace: &IterateTrace, ground_truth: Option<&Image>) -> NormTrajectory {
    let iterate_norms: Vec<f64> = trace.records.iter().map(|r| r.iterate_norm).collect();
    let relative_norms = ground_truth.map(|gt| {
        let g = gt.norm();
        iterate_norms.iter().map(|n| if g > 0.0 { n / g } else { 0.0 }).collect()
    });
    NormTrajectory {
        iterate_norms,
        relative_norms,
    }
}

/// Sample Pearson correlation; `None` when either series has zero variance
/// or the lengths differ.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}
