//! Python bindings: images, the projection operator, denoisers and the
//! unrolled scheme. Arrays cross the boundary as flat row-major lists.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyIOError, PyMemoryError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use unrollreg::classical_reg;
use unrollreg::data_pipeline::{self, LeaveOutSplit, NoiseModel, PhantomKind};
use unrollreg::denoiser::{apply_denoiser, DenoiserSpec};
use unrollreg::diagnostics;
use unrollreg::forward_model::{self, build_parallel_radon};
use unrollreg::unrolled::{self, BetaMode, IterateTrace, Structure, UnrollConfig};
use unrollreg::{Error, SparseOperator};

create_exception!(unrollreg, DivergenceError, PyArithmeticError);

fn err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Divergence { .. } | Error::RunDiverged { .. } => DivergenceError::new_err(msg),
        Error::Io { .. } | Error::Format { .. } => PyIOError::new_err(msg),
        Error::Capacity { .. } => PyMemoryError::new_err(msg),
        Error::ConvergenceFailure { .. } => PyRuntimeError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

#[pyclass(name = "Image", module = "unrollreg", from_py_object)]
#[derive(Clone)]
struct PyImage(unrollreg::Image);

#[pymethods]
impl PyImage {
    #[new]
    fn new(rows: usize, cols: usize, data: Vec<f64>) -> PyResult<Self> {
        unrollreg::Image::from_vec(rows, cols, data).map(PyImage).map_err(err)
    }

    #[staticmethod]
    fn zeros(rows: usize, cols: usize) -> Self {
        PyImage(unrollreg::Image::zeros(rows, cols))
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.0.rows(), self.0.cols())
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.0.data().to_vec()
    }

    fn norm(&self) -> f64 {
        self.0.norm()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.0.rows(), self.0.cols())
    }
}

#[pyclass(name = "Sinogram", module = "unrollreg", from_py_object)]
#[derive(Clone)]
struct PySinogram(unrollreg::Sinogram);

#[pymethods]
impl PySinogram {
    #[new]
    fn new(rays: usize, angles: usize, data: Vec<f64>) -> PyResult<Self> {
        unrollreg::Sinogram::from_vec(rays, angles, data).map(PySinogram).map_err(err)
    }

    /// `(rays, angles)`; data is angle-major.
    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.0.rays(), self.0.angles())
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.0.data().to_vec()
    }

    fn norm(&self) -> f64 {
        self.0.norm()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Sinogram({} rays x {} angles)", self.0.rays(), self.0.angles())
    }
}

#[pyclass(name = "Operator", module = "unrollreg", frozen)]
struct PyOperator(Arc<SparseOperator>);

#[pymethods]
impl PyOperator {
    /// Parallel-beam projection matrix for an `n1 x n2` image.
    #[staticmethod]
    #[pyo3(signature = (n1, n2, m1, m2, angle_span = 180.0))]
    fn radon(n1: usize, n2: usize, m1: usize, m2: usize, angle_span: f64) -> PyResult<Self> {
        build_parallel_radon(n1, n2, m1, m2, angle_span)
            .map(|op| PyOperator(Arc::new(op)))
            .map_err(err)
    }

    #[staticmethod]
    fn from_dense(rows: usize, cols: usize, data: Vec<f64>) -> PyResult<Self> {
        SparseOperator::from_dense(rows, cols, &data)
            .map(|op| PyOperator(Arc::new(op)))
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        forward_model::read_sprt_file(&path)
            .map(|op| PyOperator(Arc::new(op)))
            .map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        forward_model::write_sprt_file(&self.0, &path).map_err(err)
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.0.rows(), self.0.cols())
    }

    #[getter]
    fn image_shape(&self) -> (usize, usize) {
        self.0.image_shape()
    }

    #[getter]
    fn data_shape(&self) -> (usize, usize) {
        self.0.data_shape()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.0.nnz()
    }

    fn apply(&self, x: &PyImage) -> PyResult<PySinogram> {
        self.0.apply(&x.0).map(PySinogram).map_err(err)
    }

    fn adjoint(&self, y: &PySinogram) -> PyResult<PyImage> {
        self.0.apply_adjoint(&y.0).map(PyImage).map_err(err)
    }

    /// Power-method estimate of the squared spectral norm.
    #[pyo3(signature = (iterations = 100, seed = 0))]
    fn norm_sq(&self, iterations: usize, seed: u64) -> f64 {
        forward_model::operator_norm_sq(&self.0, iterations, seed)
    }

    fn __repr__(&self) -> String {
        format!("Operator({}x{}, nnz={})", self.0.rows(), self.0.cols(), self.0.nnz())
    }
}

#[pyclass(name = "Split", module = "unrollreg", frozen)]
struct PySplit(LeaveOutSplit);

#[pymethods]
impl PySplit {
    /// Holds out `fraction` of `total` data rows, chosen by `seed`.
    #[new]
    #[pyo3(signature = (total, fraction = 0.01, seed = 0))]
    fn new(total: usize, fraction: f64, seed: u64) -> PyResult<Self> {
        data_pipeline::make_leaveout_split(total, fraction, seed)
            .map(PySplit)
            .map_err(err)
    }

    #[staticmethod]
    fn from_indices(total: usize, held_out: Vec<usize>) -> PyResult<Self> {
        LeaveOutSplit::from_indices(total, held_out).map(PySplit).map_err(err)
    }

    #[getter]
    fn held_out(&self) -> Vec<usize> {
        self.0.held_out().to_vec()
    }

    #[getter]
    fn total(&self) -> usize {
        self.0.total()
    }

    fn fit_mask(&self) -> Vec<bool> {
        self.0.fit_mask()
    }
}

#[pyclass(name = "Denoiser", module = "unrollreg", frozen)]
struct PyDenoiser(DenoiserSpec);

#[pymethods]
impl PyDenoiser {
    /// Parses `identity`, `gaussian(s)`, `median(k)`, `gain(g)`,
    /// `conv(builtin|path)` or `conv_raw(path)`.
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        DenoiserSpec::parse(spec, None).map(PyDenoiser).map_err(err)
    }

    fn __call__(&self, x: &PyImage) -> PyResult<PyImage> {
        apply_denoiser(&self.0, &x.0).map(PyImage).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Denoiser({})", self.0)
    }
}

#[pyclass(name = "Scheme", module = "unrollreg", frozen)]
struct PyScheme(UnrollConfig);

#[pymethods]
impl PyScheme {
    /// `beta` is `"cv"` or a number in `[0, 1]`.
    #[new]
    #[pyo3(signature = (
        tau, steps = 100, inner_steps = 100, structure = "composition", beta = "cv",
        momentum = true, nonneg = false, denoiser = "identity", leaveout = 0.01, seed = 0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        tau: f64,
        steps: usize,
        inner_steps: usize,
        structure: &str,
        beta: &str,
        momentum: bool,
        nonneg: bool,
        denoiser: &str,
        leaveout: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let config = UnrollConfig {
            steps,
            inner_steps,
            tau,
            structure: structure.parse::<Structure>().map_err(err)?,
            beta_mode: beta.parse::<BetaMode>().map_err(err)?,
            momentum,
            nonneg,
            denoiser: DenoiserSpec::parse(denoiser, None).map_err(err)?,
            leaveout_fraction: leaveout,
            seed,
        };
        config.validate().map_err(err)?;
        Ok(PyScheme(config))
    }

    fn __repr__(&self) -> String {
        let c = &self.0;
        format!(
            "Scheme(steps={}, inner_steps={}, tau={:e}, structure={}, beta={:?}, denoiser={})",
            c.steps, c.inner_steps, c.tau, c.structure, c.beta_mode, c.denoiser
        )
    }
}

#[pyfunction]
#[pyo3(signature = (kind, n1, n2, seed = 0))]
fn phantom(kind: &str, n1: usize, n2: usize, seed: u64) -> PyResult<PyImage> {
    let kind: PhantomKind = kind.parse().map_err(err)?;
    data_pipeline::make_phantom(kind, n1, n2, seed).map(PyImage).map_err(err)
}

#[pyfunction]
fn project(op: &PyOperator, x: &PyImage) -> PyResult<PySinogram> {
    data_pipeline::synthesize_clean(&op.0, &x.0).map(PySinogram).map_err(err)
}

/// Poisson transmission noise at source intensity `i0`.
#[pyfunction]
#[pyo3(signature = (y, i0, seed = 0))]
fn add_noise(y: &PySinogram, i0: f64, seed: u64) -> PyResult<PySinogram> {
    data_pipeline::add_poisson_noise(&y.0, &NoiseModel::poisson(i0, seed))
        .map(PySinogram)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (op, y, steps, tau, x0 = None, split = None))]
fn landweber(
    op: &PyOperator,
    y: &PySinogram,
    steps: usize,
    tau: f64,
    x0: Option<&PyImage>,
    split: Option<&PySplit>,
) -> PyResult<PyImage> {
    let start = x0.map(|x| x.0.clone()).unwrap_or_else(|| op.0.zero_image());
    let mask = split.map(|s| s.0.fit_mask());
    classical_reg::landweber(&op.0, &y.0, &start, steps, tau, mask.as_deref())
        .map(PyImage)
        .map_err(err)
}

#[pyfunction]
fn tikhonov(op: &PyOperator, y: &PySinogram, alpha: f64) -> PyResult<PyImage> {
    classical_reg::tikhonov_solve(&op.0, &y.0, alpha).map(PyImage).map_err(err)
}

#[pyfunction]
fn psnr(x: &PyImage, reference: &PyImage) -> PyResult<f64> {
    diagnostics::psnr(&x.0, &reference.0).map_err(err)
}

#[pyfunction]
fn ssim(x: &PyImage, reference: &PyImage) -> PyResult<f64> {
    diagnostics::ssim(&x.0, &reference.0).map_err(err)
}

/// Cross-validated weight for combining `classical` and `learned`.
#[pyfunction]
fn select_beta(
    op: &PyOperator,
    classical: &PyImage,
    learned: &PyImage,
    y: &PySinogram,
    split: &PySplit,
) -> PyResult<f64> {
    unrolled::select_beta(&op.0, &classical.0, &learned.0, &y.0, &split.0).map_err(err)
}

fn trace_dicts<'py>(py: Python<'py>, trace: &IterateTrace) -> PyResult<Vec<Bound<'py, PyDict>>> {
    trace
        .records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("step", r.step)?;
            d.set_item("iterate_norm", r.iterate_norm)?;
            d.set_item("relative_norm", r.relative_norm)?;
            d.set_item("beta", r.beta)?;
            d.set_item("direction_norm", r.direction_norm)?;
            d.set_item("leaveout_residual", r.leaveout_residual)?;
            d.set_item("psnr", r.psnr)?;
            d.set_item("ssim", r.ssim)?;
            Ok(d)
        })
        .collect()
}

/// Runs the scheme. A broken-down run returns `final = None` and the
/// 1-based `diverged_at` step with the trace up to it.
#[pyfunction]
#[pyo3(signature = (scheme, op, y, split, ground_truth = None))]
fn reconstruct<'py>(
    py: Python<'py>,
    scheme: &PyScheme,
    op: &PyOperator,
    y: &PySinogram,
    split: &PySplit,
    ground_truth: Option<&PyImage>,
) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    match unrolled::run_unrolled(&scheme.0, &op.0, &y.0, &split.0, ground_truth.map(|g| &g.0)) {
        Ok(o) => {
            out.set_item("final", PyImage(o.final_image))?;
            out.set_item("s0_pick", PyImage(o.s0_pick))?;
            out.set_item("s0_step", o.trace.s0_index().map(|i| i + 1))?;
            out.set_item("trace", trace_dicts(py, &o.trace)?)?;
            out.set_item("diverged_at", py.None())?;
        }
        Err(Error::RunDiverged { step, trace }) => {
            out.set_item("final", py.None())?;
            out.set_item("s0_pick", py.None())?;
            out.set_item("s0_step", py.None())?;
            out.set_item("trace", trace_dicts(py, &trace)?)?;
            out.set_item("diverged_at", step)?;
        }
        Err(e) => return Err(err(e)),
    }
    Ok(out)
}

/// Continuity probe; `sigma = None` uses the default noise scale.
#[pyfunction]
#[pyo3(signature = (scheme, op, y, split, seed = 0, sigma = None))]
fn probe<'py>(
    py: Python<'py>,
    scheme: &PyScheme,
    op: &PyOperator,
    y: &PySinogram,
    split: &PySplit,
    seed: u64,
    sigma: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let report = match sigma {
        Some(s) => diagnostics::continuity_probe_with_sigma(&scheme.0, &op.0, &y.0, &split.0, seed, s),
        None => diagnostics::continuity_probe(&scheme.0, &op.0, &y.0, &split.0, seed),
    }
    .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("base", report.base)?;
    out.set_item("paired", report.paired)?;
    out.set_item("sigma", report.sigma)?;
    out.set_item("perturbation_norm", report.perturbation_norm)?;
    out.set_item("seed", report.seed)?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "unrollreg")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DivergenceError", m.py().get_type::<DivergenceError>())?;
    m.add_class::<PyImage>()?;
    m.add_class::<PySinogram>()?;
    m.add_class::<PyOperator>()?;
    m.add_class::<PySplit>()?;
    m.add_class::<PyDenoiser>()?;
    m.add_class::<PyScheme>()?;
    m.add_function(wrap_pyfunction!(phantom, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(landweber, m)?)?;
    m.add_function(wrap_pyfunction!(tikhonov, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(select_beta, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(probe, m)?)?;
    Ok(())
}
