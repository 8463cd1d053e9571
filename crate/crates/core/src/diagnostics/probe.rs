//! Paired-perturbation continuity probe.

use std::fmt;

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::data_pipeline::LeaveOutSplit;
use crate::error::{Error, Result};
use crate::forward_model::SparseOperator;
use crate::linalg;
use crate::types::Sinogram;
use crate::unrolled::{UnrollConfig, Unroller};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Base,
    Perturbed,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Base => "base",
            Arm::Perturbed => "perturbed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    /// `||beta_i d_i(y)||` of the base run.
    pub base: Vec<f64>,
    /// `||beta_i d_i(y) - beta_i' d_i(y')||`.
    pub paired: Vec<f64>,
    /// Standard deviation of the data perturbation.
    pub sigma: f64,
    /// `||y' - y||`.
    pub perturbation_norm: f64,
    pub seed: u64,
}

/// Probe with `sigma = max|y| / 1000`.
pub fn continuity_probe(
    config: &UnrollConfig,
    op: &SparseOperator,
    y_delta: &Sinogram,
    split: &LeaveOutSplit,
    seed: u64,
) -> Result<ProbeReport> {
    let max_abs = y_delta.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    continuity_probe_with_sigma(config, op, y_delta, split, seed, max_abs / 1000.0)
}

/// Runs the configuration on `y` and on `y + eps`, `eps ~ N(0, sigma^2)`
/// drawn from `seed`, in lockstep with the same split and config.
pub fn continuity_probe_with_sigma(
    config: &UnrollConfig,
    op: &SparseOperator,
    y_delta: &Sinogram,
    split: &LeaveOutSplit,
    seed: u64,
    sigma: f64,
) -> Result<ProbeReport> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("probe sigma must be >= 0, got {sigma}")));
    }
    let mut perturbed = y_delta.clone();
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = crate::Rng::seed_from_u64(seed);
        for v in perturbed.data_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let perturbation_norm = linalg::diff_norm(perturbed.data(), y_delta.data());

    let mut a = Unroller::new(config, op, y_delta, split, None)?;
    let mut b = Unroller::new(config, op, &perturbed, split, None)?;
    let mut report = ProbeReport {
        base: Vec::with_capacity(config.steps),
        paired: Vec::with_capacity(config.steps),
        sigma,
        perturbation_norm,
        seed,
    };
    while !a.is_finished() {
        for (arm, run) in [(Arm::Base, &mut a), (Arm::Perturbed, &mut b)] {
            run.step().map_err(|e| match e {
                Error::Divergence { step, context } => Error::Divergence {
                    step,
                    context: format!("{arm} arm: {context}"),
                },
                other => other,
            })?;
        }
        report.base.push(linalg::norm(a.last_direction()));
        report.paired.push(linalg::diff_norm(a.last_direction(), b.last_direction()));
    }
    Ok(report)
}
