//! Python bindings: graphs, the planted generator, model fitting and scoring.

use ndarray::Array2;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use maskcp::graph::{load_edge_list, parse_edge_list, Directedness};
use maskcp::synthetic::{equal_pair_sizes, generate_overlapping};
use maskcp::{nmf, Error, FitOptions, MaskPrior};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn directedness(directed: bool) -> Directedness {
    if directed {
        Directedness::Directed
    } else {
        Directedness::Undirected
    }
}

#[pyclass(name = "Graph", module = "pymaskcp")]
struct PyGraph {
    inner: maskcp::Graph,
}

#[pymethods]
impl PyGraph {
    /// Builds a graph from a square list of rows; nodes are named `0..n`.
    #[new]
    fn new(adjacency: Vec<Vec<f64>>) -> PyResult<Self> {
        let n = adjacency.len();
        let flat: Vec<f64> = adjacency.iter().flatten().copied().collect();
        let m = Array2::from_shape_vec((n, if n == 0 { 0 } else { flat.len() / n }), flat)
            .map_err(|e| PyValueError::new_err(format!("adjacency rows differ in length: {e}")))?;
        if adjacency.iter().any(|r| r.len() != m.ncols()) {
            return Err(PyValueError::new_err("adjacency rows differ in length"));
        }
        Ok(Self { inner: maskcp::Graph::from_adjacency(m).map_err(to_py)? })
    }

    #[staticmethod]
    #[pyo3(signature = (text, directed = false))]
    fn from_edge_list(text: &str, directed: bool) -> PyResult<Self> {
        Ok(Self { inner: parse_edge_list(text, directedness(directed)).map_err(to_py)? })
    }

    #[staticmethod]
    #[pyo3(signature = (path, directed = false))]
    fn load(path: &str, directed: bool) -> PyResult<Self> {
        Ok(Self { inner: load_edge_list(path, directedness(directed)).map_err(to_py)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn node_ids(&self) -> Vec<String> {
        self.inner.node_ids().to_vec()
    }

    fn adjacency(&self) -> Vec<Vec<f64>> {
        rows(self.inner.adjacency())
    }

    fn degrees(&self) -> Vec<f64> {
        self.inner.degrees()
    }

    fn density(&self) -> PyResult<f64> {
        self.inner.density().map_err(to_py)
    }

    fn to_edge_list(&self) -> String {
        self.inner.to_edge_list()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save_edge_list(path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={})", self.inner.n())
    }
}

#[pyclass(name = "Hyperparameters", module = "pymaskcp", get_all, set_all, from_py_object)]
#[derive(Clone)]
struct PyHyperparameters {
    a: f64,
    b: f64,
    sigma_bar: f64,
    sigma_hat: f64,
    mu_hat: f64,
    k: usize,
    iters: usize,
    tol: f64,
    seed: u64,
    eps: f64,
    prune_threshold: f64,
    /// `"quadratic"` or `"signed"`.
    mask_prior: String,
    restarts: usize,
}

#[pymethods]
impl PyHyperparameters {
    #[new]
    #[pyo3(signature = (
        *, a = 5.0, b = 10.0, sigma_bar = 1.0, sigma_hat = 1.0, mu_hat = 0.5, k = 32,
        iters = 500, tol = 1e-6, seed = 0, eps = 1e-12, prune_threshold = 1e-3,
        mask_prior = "quadratic".to_owned(), restarts = 1
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        a: f64,
        b: f64,
        sigma_bar: f64,
        sigma_hat: f64,
        mu_hat: f64,
        k: usize,
        iters: usize,
        tol: f64,
        seed: u64,
        eps: f64,
        prune_threshold: f64,
        mask_prior: String,
        restarts: usize,
    ) -> PyResult<Self> {
        let hp = Self {
            a,
            b,
            sigma_bar,
            sigma_hat,
            mu_hat,
            k,
            iters,
            tol,
            seed,
            eps,
            prune_threshold,
            mask_prior,
            restarts,
        };
        hp.to_core()?;
        Ok(hp)
    }

    fn __repr__(&self) -> String {
        format!(
            "Hyperparameters(a={}, b={}, sigma_bar={}, sigma_hat={}, mu_hat={}, k={}, iters={}, tol={}, seed={}, eps={}, prune_threshold={}, mask_prior={:?}, restarts={})",
            self.a, self.b, self.sigma_bar, self.sigma_hat, self.mu_hat, self.k, self.iters,
            self.tol, self.seed, self.eps, self.prune_threshold, self.mask_prior, self.restarts
        )
    }
}

impl PyHyperparameters {
    fn to_core(&self) -> PyResult<maskcp::Hyperparameters> {
        let mask_prior = match self.mask_prior.as_str() {
            "quadratic" => MaskPrior::Quadratic,
            "signed" => MaskPrior::Signed,
            other => return Err(PyValueError::new_err(format!("unknown mask prior {other:?}"))),
        };
        let hp = maskcp::Hyperparameters {
            a: self.a,
            b: self.b,
            sigma_bar: self.sigma_bar,
            sigma_hat: self.sigma_hat,
            mu_hat: self.mu_hat,
            k_init: self.k,
            n_iter: self.iters,
            tol: self.tol,
            seed: self.seed,
            eps: self.eps,
            prune_threshold: self.prune_threshold,
            mask_prior,
            restarts: self.restarts,
        };
        hp.validate().map_err(to_py)?;
        Ok(hp)
    }
}

#[pyclass(name = "GroundTruth", module = "pymaskcp", frozen, get_all)]
struct PyGroundTruth {
    pair_labels: Vec<usize>,
    core_flags: Vec<bool>,
    /// `(pair, core)` memberships per node; overlapping nodes have two.
    memberships: Vec<Vec<(usize, bool)>>,
}

#[pyclass(name = "DetectionResult", module = "pymaskcp", frozen, get_all)]
struct PyDetectionResult {
    pair_labels: Vec<usize>,
    core_flags: Vec<bool>,
    active_pairs: Vec<usize>,
    low_confidence: Vec<bool>,
    objective_trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    restart: usize,
    w: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    m: Vec<Vec<f64>>,
    beta: Vec<f64>,
    mu: Vec<f64>,
    core_scores: Vec<Vec<f64>>,
}

#[pymethods]
impl PyDetectionResult {
    fn __repr__(&self) -> String {
        format!(
            "DetectionResult(n={}, active_pairs={:?}, iterations={}, converged={})",
            self.pair_labels.len(),
            self.active_pairs,
            self.iterations,
            self.converged
        )
    }
}

/// Samples a planted network; `n` is split evenly unless `pair_sizes` is given.
#[pyfunction]
#[pyo3(signature = (
    *, n = 200, pairs = 2, pair_sizes = None, core_fraction = 0.5, p_cc = 0.6, p_cp = 0.6,
    p_pp = 0.05, p_cross = 0.05, overlap = 0, seed = 0
))]
#[allow(clippy::too_many_arguments)]
fn generate(
    n: usize,
    pairs: usize,
    pair_sizes: Option<Vec<usize>>,
    core_fraction: f64,
    p_cc: f64,
    p_cp: f64,
    p_pp: f64,
    p_cross: f64,
    overlap: usize,
    seed: u64,
) -> PyResult<(PyGraph, PyGroundTruth)> {
    let pair_sizes = match pair_sizes {
        Some(s) => s,
        None => equal_pair_sizes(n, pairs).map_err(to_py)?,
    };
    let cfg = maskcp::PlantedConfig {
        pair_sizes,
        core_fraction,
        p_core_core: p_cc,
        p_core_periph: p_cp,
        p_periph_periph: p_pp,
        p_cross,
        seed,
    };
    let (graph, truth) = if overlap > 0 {
        generate_overlapping(&cfg, overlap)
    } else {
        maskcp::synthetic::generate(&cfg)
    }
    .map_err(to_py)?;
    let memberships = truth
        .memberships
        .iter()
        .map(|ms| ms.iter().map(|m| (m.pair, m.core)).collect())
        .collect();
    Ok((
        PyGraph { inner: graph },
        PyGroundTruth { pair_labels: truth.pair_labels, core_flags: truth.core_flags, memberships },
    ))
}

/// Fits the model to `graph`. The GIL is released while fitting.
#[pyfunction]
#[pyo3(signature = (graph, hyperparameters = None, threads = 1))]
fn fit(
    py: Python<'_>,
    graph: &PyGraph,
    hyperparameters: Option<PyHyperparameters>,
    threads: usize,
) -> PyResult<PyDetectionResult> {
    let hp = match hyperparameters {
        Some(h) => h.to_core()?,
        None => maskcp::Hyperparameters::default(),
    };
    let v = graph.inner.adjacency().clone();
    let r = py
        .detach(|| nmf::fit_with(&v, &hp, &FitOptions { threads }))
        .map_err(to_py)?;
    Ok(PyDetectionResult {
        w: rows(&r.state.w),
        h: rows(&r.state.h),
        m: rows(&r.state.m),
        beta: r.state.beta.to_vec(),
        mu: r.state.mu.to_vec(),
        core_scores: rows(&r.core_scores),
        pair_labels: r.pair_labels,
        core_flags: r.core_flags,
        active_pairs: r.active_pairs,
        low_confidence: r.low_confidence,
        objective_trace: r.objective_trace,
        iterations: r.iterations,
        converged: r.converged,
        restart: r.restart,
    })
}

/// Normalized mutual information between two labelings.
#[pyfunction]
fn nmi(y: Vec<i64>, c: Vec<i64>) -> PyResult<f64> {
    maskcp::eval::nmi(&y, &c).map_err(to_py)
}

/// Returns `(nmi_pairs, nmi_core, nmi_cp)`.
#[pyfunction]
fn nmi_cp(r: Vec<i64>, r_hat: Vec<i64>, c: Vec<bool>, c_hat: Vec<bool>) -> PyResult<(f64, f64, f64)> {
    let s = maskcp::eval::nmi_cp(&r, &r_hat, &c, &c_hat).map_err(to_py)?;
    Ok((s.nmi_pairs, s.nmi_core, s.nmi_cp))
}

/// Single-pair labeling with above-mean-degree nodes as core.
#[pyfunction]
fn degree_rank(graph: &PyGraph) -> (Vec<usize>, Vec<bool>) {
    maskcp::baseline::degree_rank(&graph.inner)
}

#[pymodule]
fn pymaskcp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyHyperparameters>()?;
    m.add_class::<PyGroundTruth>()?;
    m.add_class::<PyDetectionResult>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(nmi, m)?)?;
    m.add_function(wrap_pyfunction!(nmi_cp, m)?)?;
    m.add_function(wrap_pyfunction!(degree_rank, m)?)?;
    Ok(())
}
