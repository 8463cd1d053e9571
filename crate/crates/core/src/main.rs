use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use unrollreg::cli_runner::{
    base_point, build_operator, build_scenario, format_probe, format_summary, parse_config, run_experiment,
    run_point, run_probe, ExperimentConfig, RunStatus,
};
use unrollreg::cli_runner::plot::line_chart;
use unrollreg::data_pipeline::io::{write_imgf, write_pgm};
use unrollreg::data_pipeline::make_phantom;
use unrollreg::forward_model::write_sprt_file;
use unrollreg::Error;

#[derive(Parser)]
#[command(name = "unrollreg", version, about = "Stabilized unrolled CT reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (`section.key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write SVG line charts.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured phantom.
    Phantom(Common),
    /// Write clean and noisy sinograms.
    Sinogram {
        #[command(flatten)]
        common: Common,
        /// Also write the forward operator as `operator.sprt`.
        #[arg(long)]
        operator: bool,
    },
    /// Run the scheme block once.
    Reconstruct(Common),
    /// Continuity probe for the scheme block.
    Probe(Common),
    /// Run every sweep point.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Sweep points run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = parse_config(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    cfg.plot |= common.plot;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::Io {
        path: cfg.output_dir.clone(),
        source: e,
    })?;
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Phantom(common) => {
            let cfg = load(&common)?;
            let img = make_phantom(cfg.phantom, cfg.geometry.n1, cfg.geometry.n2, cfg.phantom_seed)?;
            write_pgm(&img, &cfg.output_dir.join("phantom.pgm"))?;
            write_imgf(&img, &cfg.output_dir.join("phantom.imgf"))?;
        }
        Command::Sinogram { common, operator } => {
            let cfg = load(&common)?;
            let op = Arc::new(build_operator(&cfg, cfg.geometry.m2)?);
            let sc = build_scenario(&cfg, Arc::clone(&op), cfg.noise_i0)?;
            let dir = &cfg.output_dir;
            write_pgm(&sc.clean, &dir.join("clean.pgm"))?;
            write_imgf(&sc.clean, &dir.join("clean.imgf"))?;
            write_pgm(&sc.noisy, &dir.join("noisy.pgm"))?;
            write_imgf(&sc.noisy, &dir.join("noisy.imgf"))?;
            if operator {
                write_sprt_file(&op, &dir.join("operator.sprt"))?;
            }
        }
        Command::Reconstruct(common) => {
            let cfg = load(&common)?;
            let point = base_point(&cfg);
            let op = Arc::new(build_operator(&cfg, point.views)?);
            let sc = build_scenario(&cfg, op, point.i0)?;
            let summary = run_point(&cfg, &sc, point, &cfg.output_dir, cfg.plot)?;
            write(&cfg.output_dir.join("summary.csv"), &format_summary(std::slice::from_ref(&summary)))?;
            if let RunStatus::Diverged { step } = summary.status {
                eprintln!("run diverged at step {step}");
                return Ok(ExitCode::from(3));
            }
        }
        Command::Probe(common) => {
            let cfg = load(&common)?;
            let point = base_point(&cfg);
            let op = Arc::new(build_operator(&cfg, point.views)?);
            let sc = build_scenario(&cfg, op, point.i0)?;
            match run_probe(&cfg, &sc, point) {
                Ok(report) => {
                    write(&cfg.output_dir.join("probe.csv"), &format_probe(&report))?;
                    if cfg.plot {
                        let chart = line_chart("g(i)", &[("base", &report.base), ("paired", &report.paired)], true);
                        write(&cfg.output_dir.join("probe.svg"), &chart)?;
                    }
                }
                Err(Error::Divergence { step, context }) => {
                    eprintln!("probe diverged at step {step}: {context}");
                    return Ok(ExitCode::from(3));
                }
                Err(e) => return Err(e),
            }
        }
        Command::Sweep { common, jobs } => {
            let cfg = load(&common)?;
            let report = run_experiment(&cfg, jobs, cfg.plot)?;
            if report.all_diverged() {
                eprintln!("all {} runs diverged", report.runs.len());
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } | Error::Format { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
