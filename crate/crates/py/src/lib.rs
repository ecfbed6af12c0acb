//! Python bindings. Reports come back as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use qgraph_core::graph::{self, PerturbationPoint};
use qgraph_core::perturbation;
use qgraph_core::prescriber::{self, MultiplicityTarget, NewtonConfig};
use qgraph_core::robin::{self, Robin, RobinInterval, WeightedForm1D};
use qgraph_core::secular::{self, reference};
use qgraph_core::spectral_distance;
use qgraph_core::{Error, MetricGraph, ScanConfig, VertexCondition};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidGraph(_)
        | Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. }
        | Error::NonPositiveMetric { .. }
        | Error::Json(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for qgraph_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

// serde -> json text -> python objects, through the stdlib decoder
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn scan(scan_step: f64) -> ScanConfig {
    ScanConfig { scan_step, ..ScanConfig::default() }
}

fn condition(name: &str) -> PyResult<VertexCondition> {
    match name {
        "dirichlet" => Ok(VertexCondition::Dirichlet),
        "neumann" => Ok(VertexCondition::Neumann),
        other => Err(PyValueError::new_err(format!("end condition must be dirichlet or neumann, got {other}"))),
    }
}

fn robin_end(rho: Option<f64>) -> Robin {
    rho.map_or(Robin::Dirichlet, Robin::Finite)
}

/// A metric graph with Dirichlet, Neumann or Kirchhoff vertices.
#[pyclass(name = "Graph", module = "qgraph", frozen)]
struct PyGraph {
    inner: MetricGraph,
}

#[pymethods]
impl PyGraph {
    /// Complete graph on N vertices with one Dirichlet pendant per vertex, unit lengths.
    #[staticmethod]
    fn complete_pendant(n: usize) -> PyResult<Self> {
        Ok(Self { inner: graph::complete_pendant(n).py()? })
    }

    #[staticmethod]
    fn cut_star(n: usize) -> PyResult<Self> {
        Ok(Self { inner: graph::cut_star(n).py()? })
    }

    #[staticmethod]
    #[pyo3(signature = (length, left = "dirichlet", right = "dirichlet"))]
    fn interval(length: f64, left: &str, right: &str) -> PyResult<Self> {
        Ok(Self { inner: graph::interval(length, condition(left)?, condition(right)?).py()? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: MetricGraph::from_json(text).py()? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().py()
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    #[getter]
    fn lengths(&self) -> Vec<f64> {
        self.inner.lengths()
    }

    fn scaled(&self, c: f64) -> PyResult<Self> {
        Ok(Self { inner: self.inner.scaled(c).py()? })
    }

    /// Eigenvalues up to `lambda_max` as dicts with `eigenvalue`, `multiplicity`, `raw`.
    #[pyo3(signature = (lambda_max, scan_step = 0.1))]
    fn eigenvalues(&self, py: Python<'_>, lambda_max: f64, scan_step: f64) -> PyResult<Py<PyAny>> {
        let c = secular::find_eigenvalues(&self.inner, lambda_max, &scan(scan_step)).py()?;
        to_py(py, &c.entries)
    }

    /// The lowest `count` eigenvalues repeated by multiplicity.
    #[pyo3(signature = (count, scan_step = 0.1))]
    fn lowest(&self, count: usize, scan_step: f64) -> PyResult<Vec<f64>> {
        let c = secular::lowest_eigenvalues(&self.inner, count, &scan(scan_step)).py()?;
        Ok(c.expanded().into_iter().take(count).collect())
    }

    fn __repr__(&self) -> String {
        format!("Graph(vertices={}, edges={})", self.inner.vertex_count(), self.inner.edge_count())
    }
}

/// Edge-length perturbation of G_N: interior edges first, then pendants.
#[pyclass(name = "Perturbation", module = "qgraph", frozen)]
struct PyPerturbation {
    inner: PerturbationPoint,
}

#[pymethods]
impl PyPerturbation {
    #[new]
    fn new(n: usize, x: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: PerturbationPoint::from_vector(n, x).py()? })
    }

    #[staticmethod]
    fn pendant(n: usize, k: usize) -> PyResult<Self> {
        Ok(Self { inner: PerturbationPoint::pendant_direction(n, k).py()? })
    }

    #[staticmethod]
    fn interior(n: usize, i: usize, j: usize) -> PyResult<Self> {
        Ok(Self { inner: PerturbationPoint::interior_direction(n, i, j).py()? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x().to_vec()
    }

    fn scaled(&self, s: f64) -> PyResult<Self> {
        Ok(Self { inner: self.inner.scaled(s).py()? })
    }

    fn graph(&self) -> PyResult<PyGraph> {
        Ok(PyGraph { inner: self.inner.graph().py()? })
    }

    fn __repr__(&self) -> String {
        format!("Perturbation(n={}, x={:?})", self.inner.n(), self.inner.x())
    }
}

/// Closed-form low spectrum of G_N: k1, k2, lambda1, lambda2, multiplicity2.
#[pyfunction]
fn lemma21(py: Python<'_>, n: usize) -> PyResult<Py<PyAny>> {
    #[derive(Serialize)]
    struct Out {
        n: usize,
        k1: f64,
        k2: f64,
        lambda1: f64,
        lambda2: f64,
        multiplicity2: usize,
    }
    let r = reference::lemma21_reference(n).py()?;
    to_py(py, &Out { n, k1: r.k1, k2: r.k2, lambda1: r.lambda1, lambda2: r.lambda2, multiplicity2: r.multiplicity2 })
}

#[pyfunction]
fn cut_star_mu2(n: usize) -> PyResult<f64> {
    reference::cut_star_mu2(n).py()
}

/// Form derivative on psi_1..psi_{N-1} with its Gram matrix.
#[pyfunction]
fn qdot(py: Python<'_>, direction: &PyPerturbation) -> PyResult<Py<PyAny>> {
    to_py(py, &perturbation::qdot_matrix(&direction.inner).py()?)
}

#[pyfunction]
fn rank_certificate(py: Python<'_>, n: usize) -> PyResult<Py<PyAny>> {
    to_py(py, &perturbation::basis_vectors(n).py()?)
}

#[pyfunction]
fn lambda1_slope(direction: &PyPerturbation) -> PyResult<f64> {
    perturbation::lambda1_slope(&direction.inner).py()
}

#[pyfunction]
fn first_order_cluster(py: Python<'_>, direction: &PyPerturbation, s: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &perturbation::first_order_cluster(&direction.inner, s).py()?)
}

/// N-spectral differences between the second cluster of G_N and that of G_N at `s x`.
#[pyfunction]
fn cluster_sweep(py: Python<'_>, direction: &PyPerturbation, steps: Vec<f64>) -> PyResult<Py<PyAny>> {
    to_py(py, &spectral_distance::cluster_sweep(&direction.inner, &steps).py()?)
}

#[pyfunction]
fn choose_n(a: Vec<f64>) -> PyResult<usize> {
    prescriber::choose_n(&a).py()
}

/// Scaled union whose leading eigenvalues are `a`; returns `(graph, report)`.
#[pyfunction]
#[pyo3(signature = (a, scan_step = 0.1))]
fn prescribe_distinct(py: Python<'_>, a: Vec<f64>, scan_step: f64) -> PyResult<(PyGraph, Py<PyAny>)> {
    let (g, rep) = prescriber::prescribe_distinct(&a, &scan(scan_step)).py()?;
    Ok((PyGraph { inner: g }, to_py(py, &rep)?))
}

/// Lengths of G_N whose second cluster groups as `pattern`; returns `(perturbation, report)`.
#[pyfunction]
#[pyo3(signature = (n, pattern, gap = 0.02, max_iterations = 50))]
fn prescribe_multiplicities(
    py: Python<'_>,
    n: usize,
    pattern: Vec<usize>,
    gap: f64,
    max_iterations: usize,
) -> PyResult<(PyPerturbation, Py<PyAny>)> {
    let newton = NewtonConfig { max_iterations, ..NewtonConfig::default() };
    let (x, rep) = prescriber::prescribe_multiplicities(n, &MultiplicityTarget::new(pattern, gap), &newton).py()?;
    Ok((PyPerturbation { inner: x }, to_py(py, &rep)?))
}

/// Robin eigenvalues on `[0, length]`; `None` at an end means Dirichlet.
#[pyfunction]
#[pyo3(signature = (length, rho_left, rho_right, count))]
fn robin_spectrum(length: f64, rho_left: Option<f64>, rho_right: Option<f64>, count: usize) -> PyResult<Vec<f64>> {
    let iv = RobinInterval::new(length, robin_end(rho_left), robin_end(rho_right)).py()?;
    Ok(robin::robin_spectrum(&iv, count).py()?.iter().map(|p| p.eigenvalue).collect())
}

#[pyfunction]
#[pyo3(signature = (length, ladder, k_max = 3))]
fn robin_dirichlet_sweep(py: Python<'_>, length: f64, ladder: Vec<f64>, k_max: usize) -> PyResult<Py<PyAny>> {
    let rep = robin::robin_dirichlet_sweep(length, &ladder, k_max).py()?;
    let passed = rep.passed();
    let out = to_py(py, &rep)?;
    out.bind(py).set_item("passed", passed)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (length, rho, n_cluster = 3))]
fn overlap_bounds(py: Python<'_>, length: f64, rho: f64, n_cluster: usize) -> PyResult<Py<PyAny>> {
    to_py(py, &robin::overlap_bounds(&RobinInterval::symmetric(length, rho).py()?, n_cluster).py()?)
}

/// FEM spectrum of the collar-weighted form (uniform profile when `epsilon` is None).
#[pyfunction]
#[pyo3(signature = (n, length, rho, rho_bar, epsilon = None, count = 3))]
fn weighted_form_spectrum(
    n: u32,
    length: f64,
    rho: f64,
    rho_bar: f64,
    epsilon: Option<f64>,
    count: usize,
) -> PyResult<Vec<f64>> {
    let wf = match epsilon {
        Some(eps) => WeightedForm1D::collar(n, length, rho, rho_bar, eps).py()?,
        None => WeightedForm1D::new(n, length, robin::Profile::Uniform, [rho_bar, rho_bar]).py()?,
    };
    Ok(wf.spectrum(count).py()?.eigenvalues)
}

#[pyfunction]
#[pyo3(signature = (n, length, rho, rho_bar, epsilons, count = 1))]
fn collar_convergence(
    py: Python<'_>,
    n: u32,
    length: f64,
    rho: f64,
    rho_bar: f64,
    epsilons: Vec<f64>,
    count: usize,
) -> PyResult<Py<PyAny>> {
    to_py(py, &robin::collar_convergence(n, length, rho, rho_bar, &epsilons, count).py()?)
}

#[pymodule]
fn qgraph(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyPerturbation>()?;
    m.add_function(wrap_pyfunction!(lemma21, m)?)?;
    m.add_function(wrap_pyfunction!(cut_star_mu2, m)?)?;
    m.add_function(wrap_pyfunction!(qdot, m)?)?;
    m.add_function(wrap_pyfunction!(rank_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(lambda1_slope, m)?)?;
    m.add_function(wrap_pyfunction!(first_order_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(choose_n, m)?)?;
    m.add_function(wrap_pyfunction!(prescribe_distinct, m)?)?;
    m.add_function(wrap_pyfunction!(prescribe_multiplicities, m)?)?;
    m.add_function(wrap_pyfunction!(robin_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(robin_dirichlet_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(overlap_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_form_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(collar_convergence, m)?)?;
    Ok(())
}
