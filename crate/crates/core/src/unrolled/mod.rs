//! Unrolled reconstruction: each outer step runs `N0` Landweber steps on the
//! fit rows, applies a denoiser, and blends the two results with a weight
//! `beta` that is either fixed or chosen on the held-out rows.
//!
//! Momentum is applied to the layer input before the Landweber block; its
//! counter advances once per outer step.

mod beta;
mod momentum;

use std::fmt;
use std::str::FromStr;

pub use beta::{select_beta, BetaObjective, GRID_POINTS, REFINE_WIDTH};
pub use momentum::{momentum_update, MomentumState};

use crate::classical_reg::{convex_combination_unchecked, landweber, LandweberState};
use crate::data_pipeline::LeaveOutSplit;
use crate::denoiser::{apply_denoiser, DenoiserSpec};
use crate::diagnostics::{psnr, ssim};
use crate::error::{Error, Result};
use crate::forward_model::SparseOperator;
use crate::linalg;
use crate::types::{Image, Sinogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    /// `D(L(x))`: the denoiser acts on the Landweber output.
    Composition,
    /// `L(x) + D(x)`: the denoiser acts on the layer input.
    Addition,
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "composition" => Ok(Structure::Composition),
            "addition" => Ok(Structure::Addition),
            other => Err(Error::invalid(format!("unknown structure `{other}`"))),
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Structure::Composition => "composition",
            Structure::Addition => "addition",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaMode {
    Fixed(f64),
    CrossValidation,
}

impl FromStr for BetaMode {
    type Err = Error;

    /// `cv` or a number in `[0, 1]`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "cv" {
            return Ok(BetaMode::CrossValidation);
        }
        let b: f64 = s
            .parse()
            .map_err(|_| Error::invalid(format!("beta must be `cv` or a number, got `{s}`")))?;
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::invalid(format!("fixed beta must be in [0, 1], got {b}")));
        }
        Ok(BetaMode::Fixed(b))
    }
}

impl fmt::Display for BetaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BetaMode::Fixed(b) => write!(f, "{b}"),
            BetaMode::CrossValidation => f.write_str("cv"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnrollConfig {
    /// Outer steps `N`.
    pub steps: usize,
    /// Landweber steps per layer `N0`.
    pub inner_steps: usize,
    pub tau: f64,
    pub structure: Structure,
    pub beta_mode: BetaMode,
    pub momentum: bool,
    pub nonneg: bool,
    pub denoiser: DenoiserSpec,
    pub leaveout_fraction: f64,
    pub seed: u64,
}

impl Default for UnrollConfig {
    fn default() -> Self {
        UnrollConfig {
            steps: 100,
            inner_steps: 100,
            tau: 1e-5,
            structure: Structure::Composition,
            beta_mode: BetaMode::CrossValidation,
            momentum: true,
            nonneg: false,
            denoiser: DenoiserSpec::Identity,
            leaveout_fraction: 0.01,
            seed: 0,
        }
    }
}

impl UnrollConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.inner_steps == 0 {
            return Err(Error::invalid("steps and inner_steps must be >= 1"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be > 0, got {}", self.tau)));
        }
        if let BetaMode::Fixed(b) = self.beta_mode {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::invalid(format!("fixed beta must be in [0, 1], got {b}")));
            }
        }
        if !(0.0..1.0).contains(&self.leaveout_fraction) {
            return Err(Error::invalid(format!(
                "leave-out fraction must be in [0, 1), got {}",
                self.leaveout_fraction
            )));
        }
        self.denoiser.validate()
    }
}

/// Diagnostics of one outer step. `step` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub iterate_norm: f64,
    pub relative_norm: Option<f64>,
    pub beta: f64,
    /// `beta * ||learned - classical||`.
    pub direction_norm: f64,
    /// `||(T x)_s - y_s||` over the held-out rows `s`.
    pub leaveout_residual: f64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterateTrace {
    pub records: Vec<StepRecord>,
}

impl IterateTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Index into `records` of the smallest held-out residual (first on ties).
    pub fn s0_index(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in self.records.iter().enumerate() {
            if best.is_none_or(|(_, v)| r.leaveout_residual < v) {
                best = Some((i, r.leaveout_residual));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }
}

/// Everything one outer step produced, before it is folded into the run.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub iterate: Image,
    pub classical: Image,
    pub learned: Image,
    pub beta: f64,
}

/// One outer step from the (already extrapolated) layer input.
pub fn unroll_step(
    input: &Image,
    config: &UnrollConfig,
    op: &SparseOperator,
    y_delta: &Sinogram,
    split: &LeaveOutSplit,
    fit_mask: &[bool],
) -> Result<StepOutput> {
    let mut lw = LandweberState::new(op, y_delta, input, config.tau, Some(fit_mask))?;
    for _ in 0..config.inner_steps {
        lw.step()?;
    }
    let classical = lw.into_image(input);
    let learned = match config.structure {
        Structure::Composition => apply_denoiser(&config.denoiser, &classical)?,
        Structure::Addition => apply_denoiser(&config.denoiser, input)?,
    };
    if !learned.is_finite() {
        return Err(Error::Divergence {
            step: 0,
            context: "denoiser produced non-finite values".into(),
        });
    }
    let beta = match config.beta_mode {
        BetaMode::Fixed(b) => b,
        BetaMode::CrossValidation => select_beta(op, &classical, &learned, y_delta, split)?,
    };
    let mut iterate = if learned.data() == classical.data() {
        classical.clone()
    } else {
        convex_combination_unchecked(&classical, &learned, beta)
    };
    if config.nonneg {
        iterate.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    }
    if !iterate.is_finite() {
        return Err(Error::Divergence {
            step: 0,
            context: "non-finite combined iterate".into(),
        });
    }
    Ok(StepOutput {
        iterate,
        classical,
        learned,
        beta,
    })
}

/// Drives an unrolled run one outer step at a time.
pub struct Unroller<'a> {
    config: &'a UnrollConfig,
    op: &'a SparseOperator,
    y_delta: &'a Sinogram,
    split: &'a LeaveOutSplit,
    ground_truth: Option<&'a Image>,
    fit_mask: Vec<bool>,
    momentum: Option<MomentumState>,
    current: Image,
    best: Option<Image>,
    direction: Vec<f64>,
    trace: IterateTrace,
}

impl<'a> Unroller<'a> {
    pub fn new(
        config: &'a UnrollConfig,
        op: &'a SparseOperator,
        y_delta: &'a Sinogram,
        split: &'a LeaveOutSplit,
        ground_truth: Option<&'a Image>,
    ) -> Result<Self> {
        config.validate()?;
        if y_delta.len() != op.rows() || split.total() != op.rows() {
            return Err(Error::invalid(format!(
                "operator has {} rows, data has {}, split covers {}",
                op.rows(),
                y_delta.len(),
                split.total()
            )));
        }
        if matches!(config.beta_mode, BetaMode::CrossValidation) && split.is_empty() {
            return Err(Error::invalid("cross-validated beta needs a non-empty leave-out split"));
        }
        let x0 = op.zero_image();
        if let Some(gt) = ground_truth {
            gt.check_same_shape(&x0, "ground truth")?;
        }
        Ok(Unroller {
            config,
            op,
            y_delta,
            split,
            ground_truth,
            fit_mask: split.fit_mask(),
            momentum: config.momentum.then(|| MomentumState::new(x0.clone())),
            direction: vec![0.0; x0.len()],
            current: x0,
            best: None,
            trace: IterateTrace::default(),
        })
    }

    pub fn steps_done(&self) -> usize {
        self.trace.len()
    }

    pub fn is_finished(&self) -> bool {
        self.steps_done() >= self.config.steps
    }

    pub fn current(&self) -> &Image {
        &self.current
    }

    /// `beta (learned - classical)` from the last completed step.
    pub fn last_direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn trace(&self) -> &IterateTrace {
        &self.trace
    }

    /// Runs the next outer step. On divergence the error carries the 1-based
    /// outer step and the state keeps the completed steps.
    pub fn step(&mut self) -> Result<&StepRecord> {
        let step = self.steps_done() + 1;
        let input = match self.momentum.take() {
            Some(state) => {
                let (x, next) = momentum_update(state, &self.current);
                self.momentum = Some(next);
                x
            }
            None => self.current.clone(),
        };
        let out = unroll_step(&input, self.config, self.op, self.y_delta, self.split, &self.fit_mask).map_err(
            |e| match e {
                Error::Divergence { context, .. } => Error::Divergence { step, context },
                other => other,
            },
        )?;

        for ((d, l), c) in self.direction.iter_mut().zip(out.learned.data()).zip(out.classical.data()) {
            *d = out.beta * (l - c);
        }
        let held = self.split.held_out();
        let tx = self.op.apply_rows(out.iterate.data(), held);
        let leaveout_residual = tx
            .iter()
            .zip(held)
            .map(|(t, &i)| (t - self.y_delta.data()[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let iterate_norm = out.iterate.norm();
        let (relative_norm, psnr_v, ssim_v) = match self.ground_truth {
            Some(gt) => {
                let gn = gt.norm();
                (
                    (gn > 0.0).then(|| iterate_norm / gn),
                    psnr(&out.iterate, gt).ok(),
                    ssim(&out.iterate, gt).ok(),
                )
            }
            None => (None, None, None),
        };
        let record = StepRecord {
            step,
            iterate_norm,
            relative_norm,
            beta: out.beta,
            direction_norm: linalg::norm(&self.direction),
            leaveout_residual,
            psnr: psnr_v,
            ssim: ssim_v,
        };
        let improves = self
            .trace
            .s0_index()
            .is_none_or(|i| leaveout_residual < self.trace.records[i].leaveout_residual);
        if improves {
            self.best = Some(out.iterate.clone());
        }
        self.current = out.iterate;
        self.trace.records.push(record);
        Ok(self.trace.records.last().expect("just pushed"))
    }

    pub fn finish(self) -> UnrollOutcome {
        UnrollOutcome {
            s0_pick: self.best.unwrap_or_else(|| self.current.clone()),
            final_image: self.current,
            trace: self.trace,
        }
    }

    pub fn into_trace(self) -> IterateTrace {
        self.trace
    }
}

#[derive(Debug, Clone)]
pub struct UnrollOutcome {
    pub final_image: Image,
    /// The iterate with the smallest held-out residual.
    pub s0_pick: Image,
    pub trace: IterateTrace,
}

/// `N` outer steps from `x0 = 0`. A breakdown returns
/// [`Error::RunDiverged`] with the steps completed before it.
pub fn run_unrolled(
    config: &UnrollConfig,
    op: &SparseOperator,
    y_delta: &Sinogram,
    split: &LeaveOutSplit,
    ground_truth: Option<&Image>,
) -> Result<UnrollOutcome> {
    let mut run = Unroller::new(config, op, y_delta, split, ground_truth)?;
    while !run.is_finished() {
        if let Err(e) = run.step() {
            return Err(match e {
                Error::Divergence { step, .. } => Error::RunDiverged {
                    step,
                    trace: Box::new(run.into_trace()),
                },
                other => other,
            });
        }
    }
    Ok(run.finish())
}

/// One classical recovery followed by one denoiser pass, moved a fraction
/// `beta` along the learned direction: `c + beta (D(c) - c)`.
pub fn post_process_reconstruct(
    op: &SparseOperator,
    y_delta: &Sinogram,
    alpha_steps: usize,
    tau: f64,
    denoiser: &DenoiserSpec,
    beta_mode: BetaMode,
    split: &LeaveOutSplit,
) -> Result<Image> {
    if split.total() != op.rows() {
        return Err(Error::invalid("split does not match the operator"));
    }
    let mask = split.fit_mask();
    let classical = landweber(op, y_delta, &op.zero_image(), alpha_steps, tau, Some(&mask))?;
    let learned = apply_denoiser(denoiser, &classical)?;
    let beta = match beta_mode {
        BetaMode::Fixed(b) if (0.0..=1.0).contains(&b) => b,
        BetaMode::Fixed(b) => return Err(Error::invalid(format!("fixed beta must be in [0, 1], got {b}"))),
        BetaMode::CrossValidation => select_beta(op, &classical, &learned, y_delta, split)?,
    };
    if learned.data() == classical.data() {
        return Ok(classical);
    }
    Ok(convex_combination_unchecked(&classical, &learned, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_pipeline::make_leaveout_split;
    use rand::{Rng as _, SeedableRng};

    fn problem(seed: u64) -> (SparseOperator, Sinogram, LeaveOutSplit, Image) {
        let mut rng = crate::Rng::seed_from_u64(seed);
        let (m, n1, n2) = (40, 4, 5);
        let dense: Vec<f64> = (0..m * n1 * n2).map(|_| rng.random_range(0.0..1.0)).collect();
        let op = SparseOperator::from_dense(m, n1 * n2, &dense).unwrap();
        let truth = Image::from_vec(n1 * n2, 1, (0..n1 * n2).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let mut y = op.apply(&truth).unwrap();
        for v in y.data_mut() {
            *v += rng.random_range(-0.05..0.05);
        }
        let split = make_leaveout_split(m, 0.2, seed).unwrap();
        (op, y, split, truth)
    }

    fn config(op: &SparseOperator) -> UnrollConfig {
        let norm = crate::forward_model::operator_norm_sq(op, 200, 1);
        UnrollConfig {
            steps: 6,
            inner_steps: 3,
            tau: 1.0 / norm,
            ..UnrollConfig::default()
        }
    }

    #[test]
    fn collapse_to_plain_landweber() {
        let (op, y, split, _) = problem(1);
        let mask = split.fit_mask();
        for (structure, beta_mode) in [
            (Structure::Composition, BetaMode::CrossValidation),
            (Structure::Composition, BetaMode::Fixed(0.3)),
            (Structure::Addition, BetaMode::Fixed(0.0)),
        ] {
            let cfg = UnrollConfig {
                momentum: false,
                structure,
                beta_mode,
                ..config(&op)
            };
            let out = run_unrolled(&cfg, &op, &y, &split, None).unwrap();
            let direct = landweber(&op, &y, &op.zero_image(), 18, cfg.tau, Some(&mask)).unwrap();
            assert_eq!(out.final_image, direct, "{structure} {beta_mode}");
        }
    }

    #[test]
    fn fixed_beta_endpoints() {
        let (op, y, split, _) = problem(2);
        let mask = split.fit_mask();
        let x = Image::from_vec(20, 1, vec![0.1; 20]).unwrap();
        let cfg = UnrollConfig {
            denoiser: DenoiserSpec::Gaussian { sigma: 1.0 },
            beta_mode: BetaMode::Fixed(0.0),
            ..config(&op)
        };
        let out = unroll_step(&x, &cfg, &op, &y, &split, &mask).unwrap();
        assert_eq!(out.iterate, out.classical);
        let cfg = UnrollConfig {
            beta_mode: BetaMode::Fixed(1.0),
            ..cfg
        };
        let out = unroll_step(&x, &cfg, &op, &y, &split, &mask).unwrap();
        let direct = apply_denoiser(&cfg.denoiser, &landweber(&op, &y, &x, 3, cfg.tau, Some(&mask)).unwrap()).unwrap();
        assert_eq!(out.iterate, direct);
    }

    #[test]
    fn step_is_affine_in_beta() {
        let (op, y, split, _) = problem(3);
        let mask = split.fit_mask();
        let x = Image::from_vec(20, 1, (0..20).map(|i| i as f64 * 0.05).collect()).unwrap();
        for structure in [Structure::Composition, Structure::Addition] {
            let at = |b: f64| {
                let cfg = UnrollConfig {
                    structure,
                    denoiser: DenoiserSpec::Median { window: 3 },
                    beta_mode: BetaMode::Fixed(b),
                    ..config(&op)
                };
                unroll_step(&x, &cfg, &op, &y, &split, &mask).unwrap().iterate
            };
            let (x0, x1) = (at(0.0), at(1.0));
            for b in [0.1, 0.25, 0.5, 0.9] {
                let xb = at(b);
                for ((v, a), c) in xb.data().iter().zip(x0.data()).zip(x1.data()) {
                    assert!((v - ((1.0 - b) * a + b * c)).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn poisoned_held_out_row_only_moves_criterion() {
        let (op, y, split, _) = problem(4);
        let mut poisoned = y.clone();
        poisoned.data_mut()[split.held_out()[0]] += 1e3;
        let cfg = UnrollConfig {
            beta_mode: BetaMode::Fixed(0.5),
            denoiser: DenoiserSpec::Gain { gain: 0.9 },
            ..config(&op)
        };
        let a = run_unrolled(&cfg, &op, &y, &split, None).unwrap();
        let b = run_unrolled(&cfg, &op, &poisoned, &split, None).unwrap();
        assert_eq!(a.final_image, b.final_image);
        for (ra, rb) in a.trace.records.iter().zip(&b.trace.records) {
            assert_eq!(ra.iterate_norm, rb.iterate_norm);
            assert_ne!(ra.leaveout_residual, rb.leaveout_residual);
        }
    }

    #[test]
    fn nonneg_iterates() {
        let (op, y, split, truth) = problem(5);
        let cfg = UnrollConfig {
            nonneg: true,
            denoiser: DenoiserSpec::Gain { gain: -0.5 },
            beta_mode: BetaMode::Fixed(0.7),
            ..config(&op)
        };
        let mut run = Unroller::new(&cfg, &op, &y, &split, Some(&truth)).unwrap();
        while !run.is_finished() {
            run.step().unwrap();
            assert!(run.current().data().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let (op, _, split, _) = problem(6);
        let y = Sinogram::zeros(op.rows(), 1);
        let out = run_unrolled(&config(&op), &op, &y, &split, None).unwrap();
        assert!(out.final_image.data().iter().all(|&v| v == 0.0));
        assert_eq!(out.trace.len(), 6);
    }

    #[test]
    fn s0_pick_matches_trace() {
        let (op, y, split, truth) = problem(7);
        let cfg = UnrollConfig {
            denoiser: DenoiserSpec::Gain { gain: 1.3 },
            beta_mode: BetaMode::Fixed(1.0),
            steps: 12,
            ..config(&op)
        };
        let mut run = Unroller::new(&cfg, &op, &y, &split, Some(&truth)).unwrap();
        let mut iterates = Vec::new();
        while !run.is_finished() {
            run.step().unwrap();
            iterates.push(run.current().clone());
        }
        let out = run.finish();
        let i = out.trace.s0_index().unwrap();
        assert_eq!(out.s0_pick, iterates[i]);
        for (rec, x) in out.trace.records.iter().zip(&iterates) {
            assert!((rec.relative_norm.unwrap() - x.norm() / truth.norm()).abs() <= 1e-12);
        }
    }

    #[test]
    fn divergence_keeps_partial_trace() {
        let (op, y, split, _) = problem(8);
        let cfg = UnrollConfig {
            denoiser: DenoiserSpec::Gain { gain: 1e200 },
            beta_mode: BetaMode::Fixed(1.0),
            ..config(&op)
        };
        match run_unrolled(&cfg, &op, &y, &split, None) {
            Err(Error::RunDiverged { step, trace }) => {
                assert_eq!(trace.len(), step - 1);
                assert!(step >= 2);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn post_process_cases() {
        let (op, y, split, _) = problem(9);
        let tau = config(&op).tau;
        let mask = split.fit_mask();
        let c = landweber(&op, &y, &op.zero_image(), 7, tau, Some(&mask)).unwrap();
        let id = post_process_reconstruct(&op, &y, 7, tau, &DenoiserSpec::Identity, BetaMode::Fixed(0.4), &split).unwrap();
        assert_eq!(id, c);
        let g = DenoiserSpec::Gain { gain: 1.7 };
        let zero = post_process_reconstruct(&op, &y, 7, tau, &g, BetaMode::Fixed(0.0), &split).unwrap();
        assert_eq!(zero, c);
        let b = 0.35;
        let out = post_process_reconstruct(&op, &y, 7, tau, &g, BetaMode::Fixed(b), &split).unwrap();
        for (v, cv) in out.data().iter().zip(c.data()) {
            assert!((v - (1.0 + b * 0.7) * cv).abs() <= 1e-12 * cv.abs().max(1.0));
        }
    }

    #[test]
    fn config_validation() {
        let ok = UnrollConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            UnrollConfig { steps: 0, ..ok.clone() },
            UnrollConfig { inner_steps: 0, ..ok.clone() },
            UnrollConfig { tau: 0.0, ..ok.clone() },
            UnrollConfig { beta_mode: BetaMode::Fixed(1.5), ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
        assert_eq!("cv".parse::<BetaMode>().unwrap(), BetaMode::CrossValidation);
        assert_eq!("0.25".parse::<BetaMode>().unwrap(), BetaMode::Fixed(0.25));
        assert!("2".parse::<BetaMode>().is_err());
        assert_eq!("addition".parse::<Structure>().unwrap(), Structure::Addition);
    }
}
