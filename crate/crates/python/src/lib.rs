use engine::analysis::{self, ProbeConfig};
use engine::decoupler;
use engine::embedding::{self, ViewTriple};
use engine::encoder;
use engine::graph::{self, TextAttributedGraph};
use engine::objectives::{self, Negatives};
use engine::synthetic::{self, PlantConfig, SbmConfig};
use engine::trainer::{self, TrainConfig};
use ndarray::Array2;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Matrix = Vec<Vec<f64>>;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_array(rows: Matrix) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("matrix rows have unequal lengths"));
    }
    Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect()).map_err(err)
}

fn to_rows(m: &Array2<f64>) -> Matrix {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn views(ori: Matrix, rel: Matrix, irr: Matrix) -> PyResult<ViewTriple> {
    ViewTriple::new(to_array(ori)?, to_array(rel)?, to_array(irr)?).map_err(err)
}

/// Undirected text-attributed graph.
#[pyclass(name = "Graph", frozen)]
struct PyGraph {
    inner: TextAttributedGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (num_nodes, edges, texts=None, labels=None))]
    fn new(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        texts: Option<Vec<String>>,
        labels: Option<Vec<usize>>,
    ) -> PyResult<Self> {
        let texts = texts.unwrap_or_else(|| vec![String::new(); num_nodes]);
        let labels = labels.unwrap_or_else(|| vec![0; num_nodes]);
        let inner = TextAttributedGraph::new(num_nodes, &edges, texts, labels).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: graph::graph_from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        graph::graph_to_json(&self.inner)
    }

    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn texts(&self) -> Vec<String> {
        self.inner.texts().to_vec()
    }

    fn degree(&self, node: usize) -> PyResult<usize> {
        self.check(node)?;
        Ok(self.inner.degree(node))
    }

    fn neighbors(&self, node: usize) -> PyResult<Vec<usize>> {
        self.check(node)?;
        Ok(self.inner.neighbors(node).to_vec())
    }

    /// Dense `D^-1/2 (A + I) D^-1/2`.
    fn normalized_adjacency(&self) -> PyResult<Matrix> {
        Ok(to_rows(&self.inner.normalized_adjacency().to_dense().map_err(err)?))
    }

    fn edge_homophily(&self) -> f64 {
        synthetic::edge_homophily(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(num_nodes={}, num_edges={})",
            self.inner.num_nodes(),
            self.inner.num_edges()
        )
    }
}

impl PyGraph {
    fn check(&self, node: usize) -> PyResult<()> {
        if node >= self.inner.num_nodes() {
            return Err(PyValueError::new_err(format!(
                "node {node} out of range for {} nodes",
                self.inner.num_nodes()
            )));
        }
        Ok(())
    }
}

/// Trained GCN encoder, or the identity map.
#[pyclass(name = "Encoder", frozen)]
struct PyEncoder {
    inner: encoder::Encoder,
}

#[pymethods]
impl PyEncoder {
    #[staticmethod]
    fn identity() -> Self {
        Self {
            inner: encoder::Encoder::Identity,
        }
    }

    #[getter]
    fn is_identity(&self) -> bool {
        matches!(self.inner, encoder::Encoder::Identity)
    }

    fn encode(&self, graph: &PyGraph, x: Matrix) -> PyResult<Matrix> {
        let adj = graph.inner.normalized_adjacency();
        Ok(to_rows(&self.inner.encode(&adj, &to_array(x)?).map_err(err)?))
    }
}

#[pyfunction]
#[pyo3(signature = (classes=3, per_class=100, p=0.5, q=0.05, seed=0, heterophily=false))]
fn generate_sbm(
    classes: usize,
    per_class: usize,
    p: f64,
    q: f64,
    seed: u64,
    heterophily: bool,
) -> PyResult<PyGraph> {
    let cfg = SbmConfig {
        num_classes: classes,
        per_class,
        p_intra: p,
        q_inter: q,
        seed,
        heterophily,
    };
    Ok(PyGraph {
        inner: synthetic::generate_sbm(&cfg).map_err(err)?,
    })
}

/// Planted views and their ground-truth parts as a dict of row lists.
#[pyfunction]
#[pyo3(signature = (graph, dim=64, seed=0, sigma_noise=1.0, sigma_residual=0.3, sigma_leak=0.3, sigma_jitter=0.05))]
#[allow(clippy::too_many_arguments)]
fn plant_views<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    dim: usize,
    seed: u64,
    sigma_noise: f64,
    sigma_residual: f64,
    sigma_leak: f64,
    sigma_jitter: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = PlantConfig {
        dim,
        sigma_jitter,
        sigma_noise,
        sigma_residual,
        sigma_leak,
        seed,
    };
    let (planted, v) = synthetic::plant_views(&graph.inner, &cfg).map_err(err)?;
    let out = PyDict::new(py);
    for (k, m) in [
        ("ori", &v.ori),
        ("rel", &v.rel),
        ("irr", &v.irr),
        ("signal", &planted.signal),
        ("noise", &planted.noise),
    ] {
        out.set_item(k, to_rows(m))?;
    }
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (text, dim=64))]
fn hash_embed(text: &str, dim: usize) -> PyResult<Vec<f64>> {
    Ok(embedding::hash_embed(text, dim).map_err(err)?.to_vec())
}

#[pyfunction]
fn mock_decouple(text: &str, lexicon: Vec<String>) -> (String, String) {
    decoupler::mock_decouple(text, &lexicon)
}

#[pyfunction]
fn parse_response(raw: &str) -> PyResult<(String, String)> {
    decoupler::parse_response(raw).map_err(err)
}

#[pyfunction]
fn cosine_sim(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    if a.len() != b.len() {
        return Err(PyValueError::new_err("vectors differ in length"));
    }
    Ok(objectives::cosine_sim(
        ndarray::ArrayView1::from(&a),
        ndarray::ArrayView1::from(&b),
    ))
}

#[pyfunction]
#[pyo3(signature = (ori, rel, irr, tau=0.5))]
fn sdm_loss(ori: Matrix, rel: Matrix, irr: Matrix, tau: f64) -> PyResult<f64> {
    let v = views(ori, rel, irr)?;
    Ok(objectives::sdm_loss(&v.ori, &v.rel, &v.irr, tau, Negatives::All)
        .map_err(err)?
        .0)
}

#[pyfunction]
fn scr_loss(rel: Matrix, graph: &PyGraph) -> PyResult<f64> {
    Ok(objectives::scr_loss(&to_array(rel)?, &graph.inner).map_err(err)?.0)
}

#[pyfunction]
#[pyo3(signature = (ori, rel, irr, graph, lam=0.8, tau=0.5))]
fn combined_loss<'py>(
    py: Python<'py>,
    ori: Matrix,
    rel: Matrix,
    irr: Matrix,
    graph: &PyGraph,
    lam: f64,
    tau: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let v = views(ori, rel, irr)?;
    let (r, _) = objectives::combined_loss(&v.ori, &v.rel, &v.irr, &graph.inner, lam, tau, Negatives::All)
        .map_err(err)?;
    report_dict(py, &r)
}

fn report_dict<'py>(py: Python<'py>, r: &objectives::LossReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("l_sdm", r.l_sdm)?;
    d.set_item("l_scr", r.l_scr)?;
    d.set_item("l_total", r.l_total)?;
    d.set_item("lambda", r.lambda)?;
    d.set_item("tau", r.tau)?;
    Ok(d)
}

/// Trains the shared encoder; returns the encoder and per-epoch loss reports.
#[pyfunction]
#[pyo3(signature = (graph, ori, rel, irr, epochs=200, lam=0.8, tau=0.5, lr=1e-3, seed=0, identity_encoder=false))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    ori: Matrix,
    rel: Matrix,
    irr: Matrix,
    epochs: usize,
    lam: f64,
    tau: f64,
    lr: f64,
    seed: u64,
    identity_encoder: bool,
) -> PyResult<(PyEncoder, Vec<Bound<'py, PyDict>>)> {
    let v = views(ori, rel, irr)?;
    let cfg = TrainConfig {
        epochs,
        lambda: lam,
        tau,
        learning_rate: lr,
        seed,
        identity_encoder,
        ..Default::default()
    };
    let outcome = py
        .detach(|| trainer::train(&graph.inner, &v, &cfg))
        .map_err(err)?;
    let history = outcome
        .history
        .iter()
        .map(|r| report_dict(py, r))
        .collect::<PyResult<_>>()?;
    Ok((PyEncoder { inner: outcome.encoder }, history))
}

#[pyfunction]
#[pyo3(signature = (z, labels, train_frac=0.5, repeats=5, seed=0))]
fn linear_probe<'py>(
    py: Python<'py>,
    z: Matrix,
    labels: Vec<usize>,
    train_frac: f64,
    repeats: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ProbeConfig {
        train_frac,
        repeats,
        seed,
        ..Default::default()
    };
    let r = analysis::linear_probe(&to_array(z)?, &labels, &cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("accuracy", r.accuracy)?;
    d.set_item("std", r.std)?;
    d.set_item("per_repeat", r.per_repeat)?;
    Ok(d)
}

/// Rayleigh quotient of `f` under `I - Â`.
#[pyfunction]
fn rayleigh(graph: &PyGraph, f: Vec<f64>) -> PyResult<f64> {
    analysis::rayleigh(&graph.inner.normalized_adjacency(), &f).map_err(err)
}

/// Rows of `(degree, nodes, empirical, predicted)`.
#[pyfunction]
#[pyo3(signature = (graph, sigma=1.0, trials=1000, seed=0))]
fn variance_reduction(
    graph: &PyGraph,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> PyResult<Vec<(usize, usize, f64, f64)>> {
    let rows = analysis::variance_reduction_experiment(&graph.inner, sigma, trials, seed).map_err(err)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.degree, r.nodes, r.empirical, r.predicted))
        .collect())
}

#[pymodule]
fn sdmscr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyEncoder>()?;
    m.add_function(wrap_pyfunction!(generate_sbm, m)?)?;
    m.add_function(wrap_pyfunction!(plant_views, m)?)?;
    m.add_function(wrap_pyfunction!(hash_embed, m)?)?;
    m.add_function(wrap_pyfunction!(mock_decouple, m)?)?;
    m.add_function(wrap_pyfunction!(parse_response, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_sim, m)?)?;
    m.add_function(wrap_pyfunction!(sdm_loss, m)?)?;
    m.add_function(wrap_pyfunction!(scr_loss, m)?)?;
    m.add_function(wrap_pyfunction!(combined_loss, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(linear_probe, m)?)?;
    m.add_function(wrap_pyfunction!(rayleigh, m)?)?;
    m.add_function(wrap_pyfunction!(variance_reduction, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
