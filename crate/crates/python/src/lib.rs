//! Python bindings. Matrices cross the boundary as lists of rows; configs,
//! theory contexts and reports as plain dicts (via the `json` module).

use std::path::PathBuf;

use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

use netblock::admm::{self, AdmmConfig, Problem, SolveResult};
use netblock::baseline;
use netblock::cluster::{self, ClusterOptions, Engine};
use netblock::experiment::{self, presets, ExperimentConfig};
use netblock::io::{self, IngestOptions};
use netblock::model::{average_layers, AveragedAdjacency, Layer, MembershipMatrix, NetworkSample};
use netblock::multilayer::{self, LambdaChoice, MultiSettings};
use netblock::theory::{self, TheoryContext};
use netblock::tuning::{CvKind, CvSpec, DEFAULT_FLOOR_RATIO, DEFAULT_FOLDS, DEFAULT_GRID_COUNT};
use netblock::NetError;

create_exception!(pynetblock, NetblockError, PyException);

fn err(e: NetError) -> PyErr {
    NetblockError::new_err(e.to_string())
}

type Rows = Vec<Vec<f64>>;

fn rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Dense matrix from a list of equal-length rows.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, String> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(format!("row {i} has {} entries, expected {ncols}", r.len()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn py_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    matrix_from_rows(rows).map_err(NetblockError::new_err)
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| NetblockError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = if let Ok(s) = obj.extract::<String>() {
        s
    } else {
        py.import("json")?.call_method1("dumps", (obj,))?.extract()?
    };
    serde_json::from_str(&text).map_err(|e| NetblockError::new_err(e.to_string()))
}

/// Parses `gmm` / `kmeans`.
pub fn parse_engine(name: &str) -> Result<Engine, String> {
    match name {
        "gmm" => Ok(Engine::Gmm),
        "kmeans" => Ok(Engine::Kmeans),
        other => Err(format!("unknown clustering engine `{other}`; use `gmm` or `kmeans`")),
    }
}

fn engine(name: &str) -> PyResult<Engine> {
    parse_engine(name).map_err(NetblockError::new_err)
}

/// Community memberships of `n` nodes in `K` communities (0-based labels).
#[pyclass(name = "Membership", module = "pynetblock", frozen)]
pub struct PyMembership {
    inner: MembershipMatrix,
}

#[pymethods]
impl PyMembership {
    #[new]
    fn new(labels: Vec<usize>, k: usize) -> PyResult<Self> {
        Ok(Self { inner: MembershipMatrix::new(labels, k).map_err(err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: io::read_labels(&path).map_err(err)? })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::write_labels(&path, &self.inner).map_err(err)
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.inner.sizes().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Membership(n={}, K={})", self.inner.n(), self.inner.k())
    }
}

/// `L` undirected layers on a shared node set with sparsity factor `rho`.
#[pyclass(name = "Sample", module = "pynetblock", frozen)]
pub struct PySample {
    inner: NetworkSample,
}

#[pymethods]
impl PySample {
    /// Each layer is a list of `(i, j)` pairs; either orientation is accepted.
    #[staticmethod]
    #[pyo3(signature = (n, layers, rho, group_labels=None))]
    fn from_edges(
        n: usize,
        layers: Vec<Vec<(usize, usize)>>,
        rho: f64,
        group_labels: Option<Vec<usize>>,
    ) -> PyResult<Self> {
        let layers = layers
            .into_iter()
            .map(|edges| Layer::from_edges(n, edges))
            .collect::<netblock::Result<Vec<_>>>()
            .map_err(err)?;
        Ok(Self { inner: NetworkSample::new(n, layers, rho, group_labels).map_err(err)? })
    }

    /// Layers as dense symmetric 0/1 matrices.
    #[staticmethod]
    #[pyo3(signature = (layers, rho, group_labels=None))]
    fn from_dense(layers: Vec<Vec<Vec<f64>>>, rho: f64, group_labels: Option<Vec<usize>>) -> PyResult<Self> {
        let mut out = Vec::with_capacity(layers.len());
        for a in &layers {
            out.push(Layer::from_dense(&py_matrix(a)?).map_err(err)?);
        }
        let n = out.first().map_or(0, Layer::n);
        Ok(Self { inner: NetworkSample::new(n, out, rho, group_labels).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (manifest, no_self_loops=false))]
    fn load(manifest: PathBuf, no_self_loops: bool) -> PyResult<Self> {
        let inner = io::ingest_sample(&manifest, IngestOptions { no_self_loops }).map_err(err)?;
        Ok(Self { inner })
    }

    /// Writes layer files and `manifest.json` into `dir`; returns the
    /// manifest path.
    fn save(&self, dir: PathBuf) -> PyResult<PathBuf> {
        io::write_sample(&dir, &self.inner).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn num_layers(&self) -> usize {
        self.inner.num_layers()
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho()
    }

    #[getter]
    fn group_labels(&self) -> Option<Vec<usize>> {
        self.inner.group_labels().map(<[usize]>::to_vec)
    }

    fn without_self_loops(&self) -> Self {
        Self { inner: self.inner.without_self_loops() }
    }

    fn edges(&self, layer: usize) -> PyResult<Vec<(u32, u32)>> {
        let l = self
            .inner
            .layers()
            .get(layer)
            .ok_or_else(|| NetblockError::new_err(format!("layer {layer} out of range")))?;
        Ok(l.edges().to_vec())
    }

    /// Mean adjacency matrix over all layers.
    fn average(&self) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(average_layers(&self.inner, None).map_err(err)?.matrix()))
    }

    fn __repr__(&self) -> String {
        format!("Sample(n={}, L={}, rho={})", self.inner.n(), self.inner.num_layers(), self.inner.rho())
    }
}

fn solve_dict<'py>(py: Python<'py>, s: &SolveResult, lambda_max: f64) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("b_hat", rows(s.b_hat.entries()))?;
    d.set_item("b_unclipped", rows(&s.b_unclipped))?;
    d.set_item("d_hat", s.d_hat)?;
    d.set_item("lambda", s.lambda_used)?;
    d.set_item("lambda_max", lambda_max)?;
    d.set_item("iterations", s.iterations)?;
    d.set_item("converged", s.converged)?;
    d.set_item("objective", s.objective_value)?;
    d.set_item("clipped_entries", s.clipped_entries)?;
    Ok(d)
}

fn cv_spec(folds: usize, train_size: Option<usize>, grid_count: usize, floor_ratio: f64, seed: u64) -> CvSpec {
    CvSpec {
        kind: match train_size {
            Some(t) => CvKind::Repeated { train_size: t },
            None => CvKind::Mfold { folds },
        },
        grid_count,
        floor_ratio,
        seed,
    }
}

/// Largest useful tuning parameter: any lambda at or above it gives `B_hat = 0`.
#[pyfunction]
fn lambda_max(sample: &PySample, z: &PyMembership) -> PyResult<f64> {
    let avg = average_layers(&sample.inner, None).map_err(err)?;
    let p = Problem::from_membership(&avg, &z.inner, AdmmConfig::new(1.0).scaling).map_err(err)?;
    Ok(p.lambda_max())
}

/// Nuclear-norm penalized estimate of the connectivity matrix. With `lam`
/// absent, lambda is chosen by cross-validation over layers and the CV
/// report is included under `"cv"`.
#[pyfunction]
#[pyo3(signature = (sample, z, lam=None, folds=DEFAULT_FOLDS, train_size=None, grid_count=DEFAULT_GRID_COUNT, floor_ratio=DEFAULT_FLOOR_RATIO, seed=0))]
#[allow(clippy::too_many_arguments)]
fn estimate<'py>(
    py: Python<'py>,
    sample: &PySample,
    z: &PyMembership,
    lam: Option<f64>,
    folds: usize,
    train_size: Option<usize>,
    grid_count: usize,
    floor_ratio: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let (s, zm) = (&sample.inner, &z.inner);
    let cfg = AdmmConfig::new(1.0);
    let (solve, lmax, cv) = py
        .detach(|| -> netblock::Result<_> {
            let avg = average_layers(s, None)?;
            match lam {
                Some(l) => {
                    let c = cfg.with_lambda(l);
                    c.validate()?;
                    let lmax = Problem::from_membership(&avg, zm, c.scaling)?.lambda_max();
                    Ok((admm::admm_solve(&avg, zm, s.rho(), &c)?, lmax, None))
                }
                None => {
                    let run = cv_spec(folds, train_size, grid_count, floor_ratio, seed).run(s, zm, &cfg)?;
                    Ok((run.refit, run.lambda_max, Some(run.report)))
                }
            }
        })
        .map_err(err)?;
    let d = solve_dict(py, &solve, lmax)?;
    d.set_item("cv", cv.map(|r| to_py(py, &r)).transpose()?)?;
    Ok(d)
}

/// Solves the penalized problem for a given mean adjacency `y` (n x n).
#[pyfunction]
fn admm_solve<'py>(
    py: Python<'py>,
    y: Vec<Vec<f64>>,
    z: &PyMembership,
    rho: f64,
    lam: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let avg = AveragedAdjacency::from_matrix(py_matrix(&y)?, 1).map_err(err)?;
    let cfg = AdmmConfig::new(lam);
    let lmax = Problem::from_membership(&avg, &z.inner, cfg.scaling).map_err(err)?.lambda_max();
    let solve = admm::admm_solve(&avg, &z.inner, rho, &cfg).map_err(err)?;
    solve_dict(py, &solve, lmax)
}

/// Blockwise averaging estimate; `rank` truncates it to its leading
/// eigenpairs.
#[pyfunction]
#[pyo3(signature = (sample, z, rank=None))]
fn averaging_estimator<'py>(
    py: Python<'py>,
    sample: &PySample,
    z: &PyMembership,
    rank: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let avg = average_layers(&sample.inner, None).map_err(err)?;
    let rho = sample.inner.rho();
    let r = match rank {
        Some(r) => baseline::avg_lowrank(&avg, &z.inner, rho, r),
        None => baseline::averaging_estimator(&avg, &z.inner, rho),
    }
    .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("b_hat", rows(r.b_hat.entries()))?;
    d.set_item("d_hat", r.d_hat)?;
    Ok(d)
}

/// Spectral clustering of the mean adjacency.
#[pyfunction]
#[pyo3(signature = (sample, k, engine="gmm", embed_dim=None, seed=0))]
fn spectral_cluster(
    py: Python<'_>,
    sample: &PySample,
    k: usize,
    engine: &str,
    embed_dim: Option<usize>,
    seed: u64,
) -> PyResult<PyMembership> {
    let e = self::engine(engine)?;
    let s = &sample.inner;
    let a = py
        .detach(|| {
            let avg = average_layers(s, None)?;
            cluster::spectral_cluster_with(&avg, k, embed_dim.unwrap_or(k), &ClusterOptions::new(e, seed))
        })
        .map_err(err)?;
    Ok(PyMembership { inner: a.membership().map_err(err)? })
}

/// Spectral clustering of the debiased sum of squared adjacencies.
#[pyfunction]
#[pyo3(signature = (sample, k, seed=0))]
fn bias_adjusted_cluster(py: Python<'_>, sample: &PySample, k: usize, seed: u64) -> PyResult<PyMembership> {
    let defaults = MultiSettings::default();
    let opts = ClusterOptions { scaled: defaults.node_scaled, ..ClusterOptions::new(defaults.node_engine, seed) };
    let s = &sample.inner;
    let a = py.detach(|| cluster::bias_adjusted_spectral(s, k, &opts)).map_err(err)?;
    Ok(PyMembership { inner: a.membership().map_err(err)? })
}

/// Best relabeling of `estimated` against `truth`.
#[pyfunction]
fn align_labels(py: Python<'_>, estimated: Vec<usize>, truth: Vec<usize>, k: usize) -> PyResult<Py<PyAny>> {
    to_py(py, &cluster::align_labels(&estimated, &truth, k).map_err(err)?)
}

#[pyfunction]
fn adjusted_rand_index(a: Vec<usize>, b: Vec<usize>) -> PyResult<f64> {
    cluster::adjusted_rand_index(&a, &b).map_err(err)
}

/// Two-stage multilayer estimation: node clustering, layer grouping, then
/// one penalized estimate per layer group.
#[pyfunction]
#[pyo3(signature = (sample, k, l_tilde=None, lam=None, layer_engine="gmm", seed=0))]
fn multisbm_estimate<'py>(
    py: Python<'py>,
    sample: &PySample,
    k: usize,
    l_tilde: Option<usize>,
    lam: Option<f64>,
    layer_engine: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let settings = MultiSettings {
        lambda: match lam {
            Some(l) => LambdaChoice::Fixed(l),
            None => LambdaChoice::CrossValidated(CvSpec { seed, ..CvSpec::default() }),
        },
        layer_engine: engine(layer_engine)?,
        seed,
        ..MultiSettings::default()
    };
    let s = &sample.inner;
    let r = py.detach(|| multilayer::multisbm_estimate(s, k, l_tilde, &settings)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("membership", to_py(py, &r.membership)?)?;
    d.set_item("grouping", to_py(py, &r.grouping)?)?;
    d.set_item("scree", r.scree.as_ref().map(|s| to_py(py, s)).transpose()?)?;
    d.set_item("between_layer_error", r.between_layer_error)?;
    let groups = r
        .groups
        .iter()
        .map(|g| -> PyResult<Bound<'py, PyDict>> {
            let gd = solve_dict(py, &g.solve, g.lambda_max)?;
            gd.set_item("layers", g.layers.clone())?;
            gd.set_item("no_cv", g.no_cv)?;
            gd.set_item("averaging_b_hat", rows(g.averaging.b_hat.entries()))?;
            gd.set_item("averaging_d_hat", g.averaging.d_hat)?;
            Ok(gd)
        })
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("groups", groups)?;
    Ok(d)
}

/// Built-in experiment config as a dict.
#[pyfunction]
#[pyo3(signature = (name, full_scale=false))]
fn preset(py: Python<'_>, name: &str, full_scale: bool) -> PyResult<Py<PyAny>> {
    let cfg = presets::by_name(name, full_scale).ok_or_else(|| {
        NetblockError::new_err(format!("unknown preset `{name}`; known: {}", presets::NAMES.join(", ")))
    })?;
    to_py(py, &cfg)
}

/// Draws one replicate from a config (dict or JSON string). Returns
/// `(sample, membership, true matrices)`.
#[pyfunction]
#[pyo3(signature = (config, seed=None))]
fn simulate(
    py: Python<'_>,
    config: &Bound<'_, PyAny>,
    seed: Option<u64>,
) -> PyResult<(PySample, PyMembership, Vec<Rows>)> {
    let cfg: ExperimentConfig = from_py(py, config)?;
    cfg.validate().map_err(err)?;
    let seed = seed.unwrap_or(cfg.seed);
    let sim = py.detach(|| experiment::simulate(&cfg, seed)).map_err(err)?;
    let truth = sim.truth.iter().map(|b| rows(b.entries())).collect();
    Ok((PySample { inner: sim.sample }, PyMembership { inner: sim.membership }, truth))
}

/// Monte-Carlo run of a config; returns the full report as a dict.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
    let cfg: ExperimentConfig = from_py(py, config)?;
    let report = py.detach(|| experiment::run_experiment(&cfg)).map_err(err)?;
    to_py(py, &report)
}

/// Error-bound quantities for a context dict with keys n, k, layers, rho,
/// d, c1, c2, misclustered, b_op, b_max (and optionally c_prime,
/// c_double_prime).
#[pyfunction]
#[pyo3(signature = (context, window_constant=10.0))]
fn theory_report(py: Python<'_>, context: &Bound<'_, PyAny>, window_constant: f64) -> PyResult<Py<PyAny>> {
    let ctx: TheoryContext = from_py(py, context)?;
    to_py(py, &theory::theory_report(&ctx, window_constant).map_err(err)?)
}

#[pyfunction]
fn lower_bound_check(py: Python<'_>, z: &PyMembership, b: Vec<Vec<f64>>, c2: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &theory::lower_bound_check(&z.inner, &py_matrix(&b)?, c2).map_err(err)?)
}

#[pymodule]
pub fn pynetblock(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NetblockError", m.py().get_type::<NetblockError>())?;
    m.add_class::<PyMembership>()?;
    m.add_class::<PySample>()?;
    m.add_function(wrap_pyfunction!(lambda_max, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(admm_solve, m)?)?;
    m.add_function(wrap_pyfunction!(averaging_estimator, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(bias_adjusted_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(align_labels, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_rand_index, m)?)?;
    m.add_function(wrap_pyfunction!(multisbm_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(theory_report, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_check, m)?)?;
    Ok(())
}
