//! Line-oriented experiment configuration.
//!
//! Each non-blank line is `section.key = value`; `#` starts a comment.
//! Keys may appear once. List values are comma separated.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::data_pipeline::PhantomKind;
use crate::denoiser::DenoiserSpec;
use crate::error::{Error, Result};
use crate::unrolled::{BetaMode, Structure, UnrollConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub n1: usize,
    pub n2: usize,
    /// Rays per angle.
    pub m1: usize,
    /// Number of angles (views).
    pub m2: usize,
    pub angle_span: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauChoice {
    Fixed(f64),
    /// `1 / ||T||^2` from the power method.
    Auto,
}

#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub steps: usize,
    pub inner_steps: usize,
    pub tau: TauChoice,
    pub structure: Structure,
    pub beta: BetaMode,
    pub momentum: bool,
    pub nonneg: bool,
    pub denoiser: DenoiserSpec,
    pub leaveout: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n0: Vec<usize>,
    pub i0: Vec<f64>,
    pub views: Vec<usize>,
    pub beta: Vec<BetaMode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub enabled: bool,
    pub seed: u64,
    /// Perturbation std; `None` uses `max|y| / 1000`.
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub noise_i0: f64,
    pub noise_seed: u64,
    pub phantom: PhantomKind,
    pub phantom_seed: u64,
    pub scheme: SchemeConfig,
    pub sweep: SweepConfig,
    pub probe: ProbeConfig,
    pub output_dir: PathBuf,
    pub plot: bool,
}

impl ExperimentConfig {
    /// Overrides every seed in the configuration.
    pub fn set_seed(&mut self, seed: u64) {
        self.noise_seed = seed;
        self.phantom_seed = seed;
        self.scheme.seed = seed;
        self.probe.seed = seed;
    }

    /// The unrolling parameters for one sweep point; `tau` must be resolved.
    pub fn unroll_config(&self, inner_steps: usize, beta: BetaMode, tau: f64) -> UnrollConfig {
        let s = &self.scheme;
        UnrollConfig {
            steps: s.steps,
            inner_steps,
            tau,
            structure: s.structure,
            beta_mode: beta,
            momentum: s.momentum,
            nonneg: s.nonneg,
            denoiser: s.denoiser.clone(),
            leaveout_fraction: s.leaveout,
            seed: s.seed,
        }
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path.parent())
}

/// Parses config text; relative weight paths resolve against `base`.
pub fn parse_config_str(text: &str, base: Option<&Path>) -> Result<ExperimentConfig> {
    let mut b = Builder::default();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            key: content.to_string(),
            message: "expected `section.key = value`".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(Error::Config {
                line,
                key: key.into(),
                message: "duplicate key".into(),
            });
        }
        b.set(key, value, base).map_err(|e| match e {
            Error::Config { .. } | Error::Io { .. } | Error::Format { .. } => e,
            other => Error::Config {
                line,
                key: key.into(),
                message: other.to_string(),
            },
        })?;
    }
    b.finish()
}

#[derive(Default)]
struct Builder {
    n1: Option<usize>,
    n2: Option<usize>,
    m1: Option<usize>,
    m2: Option<usize>,
    angle_span: Option<f64>,
    i0: Option<f64>,
    noise_seed: Option<u64>,
    phantom: Option<PhantomKind>,
    phantom_seed: Option<u64>,
    steps: Option<usize>,
    inner_steps: Option<usize>,
    tau: Option<TauChoice>,
    structure: Option<Structure>,
    beta: Option<BetaMode>,
    momentum: Option<bool>,
    nonneg: Option<bool>,
    denoiser: Option<DenoiserSpec>,
    leaveout: Option<f64>,
    scheme_seed: Option<u64>,
    sweep_n0: Option<Vec<usize>>,
    sweep_i0: Option<Vec<f64>>,
    sweep_views: Option<Vec<usize>>,
    sweep_beta: Option<Vec<BetaMode>>,
    probe_enabled: Option<bool>,
    probe_seed: Option<u64>,
    probe_sigma: Option<Option<f64>>,
    output_dir: Option<PathBuf>,
    plot: Option<bool>,
}

fn parse<T: std::str::FromStr>(v: &str, what: &str) -> Result<T> {
    v.parse().map_err(|_| Error::invalid(format!("expected {what}, got `{v}`")))
}

fn positive(v: &str) -> Result<usize> {
    let n: usize = parse(v, "a positive integer")?;
    if n == 0 {
        return Err(Error::invalid("must be >= 1"));
    }
    Ok(n)
}

fn positive_real(v: &str) -> Result<f64> {
    let x: f64 = parse(v, "a number")?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::invalid(format!("must be > 0, got {x}")));
    }
    Ok(x)
}

fn boolean(v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(Error::invalid(format!("expected true or false, got `{v}`"))),
    }
}

fn list<T>(v: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::invalid("sweep list is empty"));
    }
    items.into_iter().map(item).collect()
}

impl Builder {
    fn set(&mut self, key: &str, v: &str, base: Option<&Path>) -> Result<()> {
        match key {
            "geometry.n1" => self.n1 = Some(positive(v)?),
            "geometry.n2" => self.n2 = Some(positive(v)?),
            "geometry.m1" => self.m1 = Some(positive(v)?),
            "geometry.m2" => self.m2 = Some(positive(v)?),
            "geometry.angle_span" => self.angle_span = Some(positive_real(v)?),
            "noise.i0" => self.i0 = Some(positive_real(v)?),
            "noise.seed" => self.noise_seed = Some(parse(v, "an integer seed")?),
            "phantom.kind" => self.phantom = Some(v.parse()?),
            "phantom.seed" => self.phantom_seed = Some(parse(v, "an integer seed")?),
            "scheme.steps" => self.steps = Some(positive(v)?),
            "scheme.inner_steps" => self.inner_steps = Some(positive(v)?),
            "scheme.tau" => {
                self.tau = Some(if v == "auto" {
                    TauChoice::Auto
                } else {
                    TauChoice::Fixed(positive_real(v)?)
                })
            }
            "scheme.structure" => self.structure = Some(v.parse()?),
            "scheme.beta" => self.beta = Some(v.parse()?),
            "scheme.momentum" => self.momentum = Some(boolean(v)?),
            "scheme.nonneg" => self.nonneg = Some(boolean(v)?),
            "scheme.denoiser" => self.denoiser = Some(DenoiserSpec::parse(v, base)?),
            "scheme.leaveout" => {
                let f: f64 = parse(v, "a fraction")?;
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::invalid(format!("leave-out fraction must be in (0, 1), got {f}")));
                }
                self.leaveout = Some(f);
            }
            "scheme.seed" => self.scheme_seed = Some(parse(v, "an integer seed")?),
            "sweep.n0" => self.sweep_n0 = Some(list(v, positive)?),
            "sweep.i0" => self.sweep_i0 = Some(list(v, positive_real)?),
            "sweep.views" => self.sweep_views = Some(list(v, positive)?),
            "sweep.beta" => self.sweep_beta = Some(list(v, |s| s.parse())?),
            "probe.enabled" => self.probe_enabled = Some(boolean(v)?),
            "probe.seed" => self.probe_seed = Some(parse(v, "an integer seed")?),
            "probe.sigma" => {
                self.probe_sigma = Some(if v == "auto" {
                    None
                } else {
                    let s: f64 = parse(v, "a number")?;
                    if !(s >= 0.0 && s.is_finite()) {
                        return Err(Error::invalid(format!("probe sigma must be >= 0, got {s}")));
                    }
                    Some(s)
                })
            }
            "output.dir" => self.output_dir = Some(PathBuf::from(v)),
            "output.plot" => self.plot = Some(boolean(v)?),
            _ => return Err(Error::invalid("unknown key")),
        }
        Ok(())
    }

    fn finish(self) -> Result<ExperimentConfig> {
        let missing = |key: &str| Error::Config {
            line: 0,
            key: key.into(),
            message: "required key is missing".into(),
        };
        let geometry = GeometryConfig {
            n1: self.n1.ok_or_else(|| missing("geometry.n1"))?,
            n2: self.n2.ok_or_else(|| missing("geometry.n2"))?,
            m1: self.m1.ok_or_else(|| missing("geometry.m1"))?,
            m2: self.m2.ok_or_else(|| missing("geometry.m2"))?,
            angle_span: self.angle_span.unwrap_or(180.0),
        };
        let scheme = SchemeConfig {
            steps: self.steps.unwrap_or(100),
            inner_steps: self.inner_steps.unwrap_or(100),
            tau: self.tau.unwrap_or(TauChoice::Fixed(1e-5)),
            structure: self.structure.unwrap_or(Structure::Composition),
            beta: self.beta.unwrap_or(BetaMode::CrossValidation),
            momentum: self.momentum.unwrap_or(true),
            nonneg: self.nonneg.unwrap_or(false),
            denoiser: match self.denoiser {
                Some(d) => d,
                None => DenoiserSpec::builtin_conv(),
            },
            leaveout: self.leaveout.unwrap_or(0.01),
            seed: self.scheme_seed.unwrap_or(0),
        };
        let noise_i0 = self.i0.unwrap_or(1e6);
        let sweep = SweepConfig {
            n0: self.sweep_n0.unwrap_or_else(|| vec![scheme.inner_steps]),
            i0: self.sweep_i0.unwrap_or_else(|| vec![noise_i0]),
            views: self.sweep_views.unwrap_or_else(|| vec![geometry.m2]),
            beta: self.sweep_beta.unwrap_or_else(|| vec![scheme.beta]),
        };
        Ok(ExperimentConfig {
            geometry,
            noise_i0,
            noise_seed: self.noise_seed.unwrap_or(0),
            phantom: self.phantom.unwrap_or(PhantomKind::SheppLogan),
            phantom_seed: self.phantom_seed.unwrap_or(0),
            scheme,
            sweep,
            probe: ProbeConfig {
                enabled: self.probe_enabled.unwrap_or(false),
                seed: self.probe_seed.unwrap_or(0),
                sigma: self.probe_sigma.unwrap_or(None),
            },
            output_dir: self.output_dir.unwrap_or_else(|| PathBuf::from("out")),
            plot: self.plot.unwrap_or(false),
        })
    }
}
