//! Trace and probe CSV files.

use std::fmt::Write as _;
use std::path::Path;

use crate::diagnostics::ProbeReport;
use crate::error::{Error, Result};
use crate::unrolled::{IterateTrace, StepRecord};

pub const TRACE_HEADER: &str = "step,iterate_norm,relative_norm,beta,direction_norm,leaveout_residual,psnr,ssim";
const DIVERGED_PREFIX: &str = "# diverged at step ";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Renders a trace; `diverged_at` adds the footer for a broken-down run.
pub fn format_trace(trace: &IterateTrace, diverged_at: Option<usize>) -> String {
    let mut s = String::with_capacity(64 * (trace.len() + 2));
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.step,
            num(r.iterate_norm),
            opt(r.relative_norm),
            num(r.beta),
            num(r.direction_norm),
            num(r.leaveout_residual),
            opt(r.psnr),
            opt(r.ssim)
        );
    }
    if let Some(k) = diverged_at {
        let _ = writeln!(s, "{DIVERGED_PREFIX}{k}");
    }
    s
}

pub fn emit_trace(trace: &IterateTrace, diverged_at: Option<usize>, path: &Path) -> Result<()> {
    std::fs::write(path, format_trace(trace, diverged_at)).map_err(|e| Error::io(path, e))
}

/// Parses [`format_trace`] output. Returns the records and the divergence
/// step from the footer, if any.
pub fn parse_trace(text: &str) -> Result<(IterateTrace, Option<usize>)> {
    let bad = |line: usize, msg: String| Error::Config {
        line,
        key: "trace".into(),
        message: msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TRACE_HEADER => {}
        _ => return Err(bad(1, "missing trace header".into())),
    }
    let mut trace = IterateTrace::default();
    let mut diverged = None;
    for (i, line) in lines {
        let lineno = i + 1;
        if let Some(rest) = line.strip_prefix(DIVERGED_PREFIX) {
            diverged = Some(rest.trim().parse().map_err(|_| bad(lineno, "bad divergence footer".into()))?);
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad(lineno, format!("expected 8 fields, got {}", f.len())));
        }
        let req = |s: &str| s.parse::<f64>().map_err(|_| bad(lineno, format!("bad number `{s}`")));
        let opt = |s: &str| if s.is_empty() { Ok(None) } else { req(s).map(Some) };
        trace.records.push(StepRecord {
            step: f[0].parse().map_err(|_| bad(lineno, format!("bad step `{}`", f[0])))?,
            iterate_norm: req(f[1])?,
            relative_norm: opt(f[2])?,
            beta: req(f[3])?,
            direction_norm: req(f[4])?,
            leaveout_residual: req(f[5])?,
            psnr: opt(f[6])?,
            ssim: opt(f[7])?,
        });
    }
    Ok((trace, diverged))
}

pub fn format_probe(report: &ProbeReport) -> String {
    let mut s = String::from("step,base,paired\n");
    for (i, (b, p)) in report.base.iter().zip(&report.paired).enumerate() {
        let _ = writeln!(s, "{},{},{}", i + 1, num(*b), num(*p));
    }
    let _ = writeln!(s, "# sigma = {}", num(report.sigma));
    let _ = writeln!(s, "# perturbation_norm = {}", num(report.perturbation_norm));
    let _ = writeln!(s, "# seed = {}", report.seed);
    s
}
