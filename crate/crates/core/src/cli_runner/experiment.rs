//! Scenario orchestration: data synthesis, runs, artifacts and summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::config::{ExperimentConfig, TauChoice};
use super::plot::line_chart;
use super::trace::{emit_trace, format_probe};
use crate::data_pipeline::io::{write_imgf, write_pgm};
use crate::data_pipeline::{add_poisson_noise, make_leaveout_split, make_phantom, synthesize_clean, NoiseModel};
use crate::diagnostics::{continuity_probe, continuity_probe_with_sigma, psnr, ProbeReport};
use crate::error::{Error, Result};
use crate::forward_model::{build_parallel_radon, operator_norm_sq, SparseOperator};
use crate::types::{Image, Sinogram};
use crate::unrolled::{run_unrolled, BetaMode, IterateTrace};

/// Power-method iterations used for `scheme.tau = auto`.
pub const AUTO_TAU_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub n0: usize,
    pub i0: f64,
    pub views: usize,
    pub beta: BetaMode,
}

impl SweepPoint {
    pub fn label(&self) -> String {
        format!("n0-{}_i0-{:e}_views-{}_beta-{}", self.n0, self.i0, self.views, self.beta)
    }
}

/// Sweep points in row-major order over `n0, i0, views, beta`.
pub fn sweep_points(cfg: &ExperimentConfig) -> Vec<SweepPoint> {
    let s = &cfg.sweep;
    let mut out = Vec::new();
    for &n0 in &s.n0 {
        for &i0 in &s.i0 {
            for &views in &s.views {
                for &beta in &s.beta {
                    out.push(SweepPoint { n0, i0, views, beta });
                }
            }
        }
    }
    out
}

/// The point described by the scheme, noise and geometry blocks alone.
pub fn base_point(cfg: &ExperimentConfig) -> SweepPoint {
    SweepPoint {
        n0: cfg.scheme.inner_steps,
        i0: cfg.noise_i0,
        views: cfg.geometry.m2,
        beta: cfg.scheme.beta,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Ok,
    Diverged { step: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub point: SweepPoint,
    pub status: RunStatus,
    pub steps_completed: usize,
    pub final_psnr: Option<f64>,
    pub final_ssim: Option<f64>,
    /// 1-based step of the held-out-criterion pick.
    pub s0_step: Option<usize>,
    pub s0_psnr: Option<f64>,
    pub final_relative_norm: Option<f64>,
}

/// Synthetic data for one geometry and noise setting.
pub struct Scenario {
    pub op: Arc<SparseOperator>,
    pub phantom: Image,
    pub clean: Sinogram,
    pub noisy: Sinogram,
    pub tau: f64,
}

pub fn build_operator(cfg: &ExperimentConfig, views: usize) -> Result<SparseOperator> {
    let g = &cfg.geometry;
    build_parallel_radon(g.n1, g.n2, g.m1, views, g.angle_span)
}

pub fn resolve_tau(cfg: &ExperimentConfig, op: &SparseOperator) -> f64 {
    match cfg.scheme.tau {
        TauChoice::Fixed(t) => t,
        TauChoice::Auto => 1.0 / operator_norm_sq(op, AUTO_TAU_ITERATIONS, 0),
    }
}

pub fn build_scenario(cfg: &ExperimentConfig, op: Arc<SparseOperator>, i0: f64) -> Result<Scenario> {
    let phantom = make_phantom(cfg.phantom, cfg.geometry.n1, cfg.geometry.n2, cfg.phantom_seed)?;
    let clean = synthesize_clean(&op, &phantom)?;
    let noisy = add_poisson_noise(&clean, &NoiseModel::poisson(i0, cfg.noise_seed))?;
    let tau = resolve_tau(cfg, &op);
    Ok(Scenario {
        op,
        phantom,
        clean,
        noisy,
        tau,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_image_pair(img: &Image, dir: &Path, stem: &str) -> Result<()> {
    write_pgm(img, &dir.join(format!("{stem}.pgm")))?;
    write_imgf(img, &dir.join(format!("{stem}.imgf")))
}

/// Runs one sweep point into `dir`: trace CSV, final and criterion-pick
/// images, optional probe report and plots.
pub fn run_point(cfg: &ExperimentConfig, scenario: &Scenario, point: SweepPoint, dir: &Path, plot: bool) -> Result<RunSummary> {
    create_dir(dir)?;
    let ucfg = cfg.unroll_config(point.n0, point.beta, scenario.tau);
    let split = make_leaveout_split(scenario.op.rows(), ucfg.leaveout_fraction, ucfg.seed)?;
    let outcome = run_unrolled(&ucfg, &scenario.op, &scenario.noisy, &split, Some(&scenario.phantom));
    let (trace, status, images) = match outcome {
        Ok(o) => (o.trace, RunStatus::Ok, Some((o.final_image, o.s0_pick))),
        Err(Error::RunDiverged { step, trace }) => (*trace, RunStatus::Diverged { step }, None),
        Err(e) => return Err(e),
    };
    let diverged_at = match status {
        RunStatus::Diverged { step } => Some(step),
        RunStatus::Ok => None,
    };
    emit_trace(&trace, diverged_at, &dir.join("trace.csv"))?;

    let s0 = trace.s0_index();
    let mut s0_psnr = None;
    if let Some((final_image, s0_pick)) = &images {
        write_image_pair(final_image, dir, "final")?;
        write_image_pair(s0_pick, dir, "s0")?;
        s0_psnr = psnr(s0_pick, &scenario.phantom).ok();
    }
    if cfg.probe.enabled && images.is_some() {
        match run_probe(cfg, scenario, point) {
            Ok(report) => {
                write_text(&dir.join("probe.csv"), &format_probe(&report))?;
                if plot {
                    write_text(
                        &dir.join("probe.svg"),
                        &line_chart("g(i)", &[("base", &report.base), ("paired", &report.paired)], true),
                    )?;
                }
            }
            Err(Error::Divergence { step, context }) => {
                write_text(&dir.join("probe.csv"), &format!("# probe diverged at step {step}: {context}\n"))?;
            }
            Err(e) => return Err(e),
        }
    }
    if plot {
        write_trace_plots(&trace, dir)?;
    }
    let last = trace.last();
    Ok(RunSummary {
        point,
        status,
        steps_completed: trace.len(),
        final_psnr: images.as_ref().and(last.and_then(|r| r.psnr)),
        final_ssim: images.as_ref().and(last.and_then(|r| r.ssim)),
        s0_step: s0.map(|i| trace.records[i].step),
        s0_psnr,
        final_relative_norm: last.and_then(|r| r.relative_norm),
    })
}

pub fn run_probe(cfg: &ExperimentConfig, scenario: &Scenario, point: SweepPoint) -> Result<ProbeReport> {
    let ucfg = cfg.unroll_config(point.n0, point.beta, scenario.tau);
    let split = make_leaveout_split(scenario.op.rows(), ucfg.leaveout_fraction, ucfg.seed)?;
    match cfg.probe.sigma {
        Some(s) => continuity_probe_with_sigma(&ucfg, &scenario.op, &scenario.noisy, &split, cfg.probe.seed, s),
        None => continuity_probe(&ucfg, &scenario.op, &scenario.noisy, &split, cfg.probe.seed),
    }
}

fn write_trace_plots(trace: &IterateTrace, dir: &Path) -> Result<()> {
    let col = |f: &dyn Fn(&crate::unrolled::StepRecord) -> Option<f64>| -> Vec<f64> {
        trace.records.iter().map(|r| f(r).unwrap_or(f64::NAN)).collect()
    };
    let r = col(&|r| r.relative_norm);
    let beta = col(&|r| Some(r.beta));
    let g = col(&|r| Some(r.direction_norm));
    write_text(&dir.join("norms.svg"), &line_chart("relative norm and beta", &[("r_i", &r), ("beta_i", &beta)], false))?;
    write_text(&dir.join("direction.svg"), &line_chart("direction norm", &[("g(i)", &g)], true))
}

pub const SUMMARY_HEADER: &str = "label,n0,i0,views,beta,status,steps,final_psnr,final_ssim,s0_step,s0_psnr,final_relative_norm";

pub fn format_summary(rows: &[RunSummary]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        let status = match r.status {
            RunStatus::Ok => "ok".to_string(),
            RunStatus::Diverged { step } => format!("diverged@{step}"),
        };
        let _ = writeln!(
            s,
            "{},{},{:e},{},{},{},{},{},{},{},{},{}",
            r.point.label(),
            r.point.n0,
            r.point.i0,
            r.point.views,
            r.point.beta,
            status,
            r.steps_completed,
            opt(r.final_psnr),
            opt(r.final_ssim),
            r.s0_step.map(|v| v.to_string()).unwrap_or_default(),
            opt(r.s0_psnr),
            opt(r.final_relative_norm)
        );
    }
    s
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub runs: Vec<RunSummary>,
    pub output_dir: PathBuf,
}

impl ExperimentReport {
    pub fn all_diverged(&self) -> bool {
        !self.runs.is_empty() && self.runs.iter().all(|r| matches!(r.status, RunStatus::Diverged { .. }))
    }
}

/// Runs every sweep point, up to `jobs` at a time, and writes `summary.csv`
/// and `run.log` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize, plot: bool) -> Result<ExperimentReport> {
    let out = cfg.output_dir.clone();
    create_dir(&out)?;
    let started = unix_time();
    let points = sweep_points(cfg);

    let mut ops: BTreeMap<usize, Arc<SparseOperator>> = BTreeMap::new();
    for p in &points {
        if let std::collections::btree_map::Entry::Vacant(e) = ops.entry(p.views) {
            e.insert(Arc::new(build_operator(cfg, p.views)?));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<RunSummary>> = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let scenario = build_scenario(cfg, Arc::clone(&ops[&p.views]), p.i0)?;
                run_point(cfg, &scenario, *p, &out.join(p.label()), plot)
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    write_text(&out.join("summary.csv"), &format_summary(&runs))?;

    let mut log = format!("started {started}\n");
    for r in &runs {
        let _ = writeln!(log, "{} {:?}", r.point.label(), r.status);
    }
    let _ = writeln!(log, "finished {}", unix_time());
    write_text(&out.join("run.log"), &log)?;
    Ok(ExperimentReport { runs, output_dir: out })
}

fn unix_time() -> String {
    match std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH) {
        Ok(d) => format!("{}.{:03}", d.as_secs(), d.subsec_millis()),
        Err(_) => "unknown".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::super::config::parse_config_str;
    use super::*;

    fn cfg(dir: &Path, extra: &str) -> ExperimentConfig {
        let text = format!(
            "geometry.n1 = 16\ngeometry.n2 = 16\ngeometry.m1 = 23\ngeometry.m2 = 12\n\
             scheme.steps = 4\nscheme.tau = auto\nscheme.leaveout = 0.05\n\
             output.dir = {}\n{extra}",
            dir.display()
        );
        parse_config_str(&text, None).unwrap()
    }

    #[test]
    fn grid_sweep_produces_one_row_per_point() {
        let tmp = tempfile::tempdir().unwrap();
        let c = cfg(tmp.path(), "sweep.n0 = 1, 10, 50, 100\nsweep.beta = 1, cv\nscheme.denoiser = gain(1.5)\n");
        let report = run_experiment(&c, 2, false).unwrap();
        assert_eq!(report.runs.len(), 8);
        let summary = std::fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 9);
        let traces = std::fs::read_dir(tmp.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().join("trace.csv").exists())
            .count();
        assert_eq!(traces, 8);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let extra = "sweep.beta = 1, cv\nprobe.enabled = true\n";
        run_experiment(&cfg(a.path(), extra), 1, false).unwrap();
        run_experiment(&cfg(b.path(), extra), 3, false).unwrap();
        for p in sweep_points(&cfg(a.path(), extra)) {
            for f in ["trace.csv", "probe.csv", "final.imgf"] {
                let x = std::fs::read(a.path().join(p.label()).join(f)).unwrap();
                let y = std::fs::read(b.path().join(p.label()).join(f)).unwrap();
                assert_eq!(x, y, "{f}");
            }
        }
        assert_eq!(
            std::fs::read(a.path().join("summary.csv")).unwrap(),
            std::fs::read(b.path().join("summary.csv")).unwrap()
        );
    }

    #[test]
    fn divergence_recorded_not_fatal() {
        let tmp = tempfile::tempdir().unwrap();
        let c = cfg(tmp.path(), "scheme.denoiser = gain(1e200)\nscheme.beta = 1\nsweep.beta = 1, 0\n");
        let report = run_experiment(&c, 1, true).unwrap();
        assert!(matches!(report.runs[0].status, RunStatus::Diverged { .. }));
        assert_eq!(report.runs[1].status, RunStatus::Ok);
        assert!(!report.all_diverged());
        let label = report.runs[0].point.label();
        let trace = std::fs::read_to_string(tmp.path().join(label).join("trace.csv")).unwrap();
        assert!(trace.trim_end().lines().last().unwrap().starts_with("# diverged at step"));
        let summary = std::fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
        assert!(summary.contains(",diverged@"));
    }
}
