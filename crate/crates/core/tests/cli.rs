use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_unrollreg");

const SMALL: &str = "\
geometry.n1 = 16
geometry.n2 = 16
geometry.m1 = 23
geometry.m2 = 12
noise.seed = 2
scheme.steps = 5
scheme.inner_steps = 3
scheme.tau = auto
";

fn config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("exp.cfg");
    std::fs::write(&path, format!("{SMALL}{extra}output.dir = {}\n", dir.join("out").display())).unwrap();
    path
}

fn run(args: &[&str], cfg: &Path) -> std::process::Output {
    Command::new(BIN).args(args).arg("--config").arg(cfg).output().unwrap()
}

#[test]
fn reconstruct_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "scheme.denoiser = gaussian(1)\n");
    let out = run(&["reconstruct", "--plot"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    for f in ["summary.csv", "trace.csv", "final.pgm", "final.imgf", "norms.svg"] {
        assert!(o.join(f).exists(), "{f}");
    }
    let trace = std::fs::read_to_string(o.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 6);
}

#[test]
fn phantom_and_sinogram_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    assert_eq!(run(&["phantom"], &cfg).status.code(), Some(0));
    assert_eq!(run(&["sinogram", "--operator"], &cfg).status.code(), Some(0));
    let o = dir.path().join("out");
    for f in ["phantom.pgm", "phantom.imgf", "clean.imgf", "noisy.imgf", "operator.sprt"] {
        assert!(o.join(f).exists(), "{f}");
    }
}

#[test]
fn sweep_runs_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "sweep.n0 = 1, 3\nsweep.beta = 1, cv\nprobe.enabled = true\n");
    let out = run(&["sweep", "--jobs", "2"], &cfg);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
}

#[test]
fn seed_flag_changes_noise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let o = dir.path().join("out");
    run(&["sinogram"], &cfg);
    let a = std::fs::read(o.join("noisy.imgf")).unwrap();
    run(&["sinogram", "--seed", "9"], &cfg);
    let b = std::fs::read(o.join("noisy.imgf")).unwrap();
    run(&["sinogram"], &cfg);
    let c = std::fs::read(o.join("noisy.imgf")).unwrap();
    assert_ne!(a, b);
    assert_eq!(a, c);
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "scheme.stepsize = 3\n");
    let out = run(&["reconstruct"], &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scheme.stepsize"));
}

#[test]
fn missing_files_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["reconstruct"], &dir.path().join("nope.cfg"));
    assert_eq!(out.status.code(), Some(2));

    let cfg = config(dir.path(), "scheme.denoiser = conv(missing.dnwt)\n");
    assert_eq!(run(&["reconstruct"], &cfg).status.code(), Some(2));
}

#[test]
fn divergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "scheme.denoiser = gain(1e80)\nscheme.beta = 1\n");
    let out = run(&["reconstruct"], &cfg);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    assert!(trace.lines().last().unwrap().starts_with("# diverged at step"));
}
