//! Python bindings: parameter and config objects, network sampling,
//! flooding, and the experiment drivers. Structured results come back as
//! plain dicts and lists.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use cogperc::cli::{execute, Command, CommonArgs};
use cogperc::config::RunConfig;
use cogperc::delay::flood as run_flood;
use cogperc::experiments::{estimate_critical_density, fit_diameter_tail, single_hop_delay_test};
use cogperc::opportunity::local_region;
use cogperc::{
    build_topo_graph, estimate_p0 as run_p0, sample_secondary_network, theta_estimate, BoxRegion,
    LinkGraph, SecondaryNetwork, SeededRng, SimulationParams, TopoGraph,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn square(half_side: f64) -> PyResult<BoxRegion> {
    BoxRegion::centered_square(half_side).map_err(value_err)
}

/// Physical model scalars. Densities in km⁻², lengths in km, times in s.
#[pyclass(name = "Params", from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: SimulationParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (primary_density=10.0, propagation_delay=0.0, secondary_density=700.0))]
    fn new(primary_density: f64, propagation_delay: f64, secondary_density: f64) -> PyResult<Self> {
        let inner = SimulationParams {
            secondary_density,
            ..SimulationParams::reference(primary_density, propagation_delay)
        };
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn secondary_density(&self) -> f64 {
        self.inner.secondary_density
    }

    #[getter]
    fn primary_density(&self) -> f64 {
        self.inner.primary_density
    }

    #[getter]
    fn secondary_range(&self) -> f64 {
        self.inner.secondary_range
    }

    #[getter]
    fn propagation_delay(&self) -> f64 {
        self.inner.propagation_delay
    }

    #[getter]
    fn slot_length(&self) -> f64 {
        self.inner.slot_length
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(secondary_density={}, primary_density={}, propagation_delay={})",
            self.inner.secondary_density, self.inner.primary_density, self.inner.propagation_delay
        )
    }
}

/// Run configuration, as read by the command-line tool.
#[pyclass(name = "Config")]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (preset="fig5a"))]
    fn new(preset: &str) -> PyResult<Self> {
        Ok(Self {
            inner: RunConfig::preset(preset).map_err(value_err)?,
        })
    }

    /// Sets one field from its textual form, e.g. `set("bands", "0.5,1,2")`.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.set(key, value).map_err(value_err)
    }

    fn params(&self) -> PyParams {
        PyParams {
            inner: self.inner.params(),
        }
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.to_json())
    }

    /// Runs a command and returns its output files as `{name: contents}`.
    #[pyo3(signature = (command, workers=None))]
    fn run(
        &self,
        py: Python<'_>,
        command: &str,
        workers: Option<usize>,
    ) -> PyResult<Vec<(String, String)>> {
        self.inner.validate().map_err(value_err)?;
        let args = CommonArgs::default();
        let cmd = match command {
            "flood" => Command::Flood(args),
            "phase" => Command::Phase(args),
            "critical" => Command::Critical(args),
            "tail" => Command::Tail(args),
            "hopdelay" => Command::Hopdelay(args),
            other => return Err(PyValueError::new_err(format!("unknown command {other:?}"))),
        };
        let cfg = &self.inner;
        py.detach(|| execute(&cmd, cfg, workers)).map_err(value_err)
    }
}

/// A secondary network with its static disk graph.
#[pyclass(name = "Network")]
struct PyNetwork {
    topo: TopoGraph,
}

#[pymethods]
impl PyNetwork {
    /// Poisson secondaries in the square of half side `half_side` km.
    #[staticmethod]
    fn sample(params: &PyParams, half_side: f64, seed: u64) -> PyResult<Self> {
        let region = square(half_side)?;
        let net = Arc::new(sample_secondary_network(
            &params.inner,
            &region,
            &SeededRng::new(seed),
        ));
        Ok(Self {
            topo: build_topo_graph(net, params.inner.secondary_range),
        })
    }

    #[staticmethod]
    fn from_points(points: Vec<(f64, f64)>, half_side: f64, range: f64) -> PyResult<Self> {
        let pts = points
            .into_iter()
            .map(|(x, y)| cogperc::Point2D::try_new(x, y))
            .collect::<Result<Vec<_>, _>>()
            .map_err(value_err)?;
        let net =
            SecondaryNetwork::from_points(pts, square(half_side)?, range).map_err(value_err)?;
        Ok(Self {
            topo: build_topo_graph(Arc::new(net), range),
        })
    }

    fn __len__(&self) -> usize {
        self.topo.node_count()
    }

    fn points(&self) -> Vec<(f64, f64)> {
        self.topo
            .network()
            .points()
            .iter()
            .map(|p| (p.x, p.y))
            .collect()
    }

    fn edges(&self) -> Vec<(u32, u32)> {
        self.topo.edges().to_vec()
    }

    fn edge_count(&self) -> usize {
        self.topo.edge_count()
    }

    fn component_sizes(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self
            .topo
            .components()
            .sizes()
            .into_iter()
            .map(|(_, s)| s)
            .collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    fn nearest(&self, x: f64, y: f64) -> Option<u32> {
        self.topo.network().nearest(&cogperc::Point2D { x, y })
    }

    /// Floods from `source`; returns arrival times (None if unreached),
    /// per-node status and the number of slots simulated.
    fn flood(
        &self,
        py: Python<'_>,
        source: u32,
        params: &PyParams,
        horizon: u64,
        seed: u64,
    ) -> PyResult<Py<PyAny>> {
        let r = py
            .detach(|| {
                run_flood(
                    &self.topo,
                    source,
                    &params.inner,
                    horizon,
                    &SeededRng::new(seed),
                )
            })
            .map_err(value_err)?;
        let status: Vec<&str> = r.status.iter().map(|s| s.as_str()).collect();
        let out = serde_json::json!({
            "source": r.source,
            "arrival_time": r.arrival_time,
            "arrival_slot": r.arrival_slot,
            "status": status,
            "slots_used": r.slots_used,
            "reached": r.reached(),
        });
        to_py(py, &out)
    }
}

/// Probability that a pair `hop_length` km apart has a bidirectional
/// opportunity in one slot, as `(estimate, stderr)`.
#[pyfunction]
fn estimate_p0(
    py: Python<'_>,
    hop_length: f64,
    params: &PyParams,
    trials: u64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    if trials == 0 {
        return Err(PyValueError::new_err("trials must be positive"));
    }
    let region = local_region(&params.inner, hop_length);
    let p = py.detach(|| {
        run_p0(
            hop_length,
            &params.inner,
            &region,
            trials,
            &SeededRng::new(seed),
        )
    });
    Ok((p.estimate, p.stderr))
}

/// Mean giant-component fraction over independent draws.
#[pyfunction]
fn theta(
    py: Python<'_>,
    params: &PyParams,
    half_side: f64,
    draws: u64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    if draws == 0 {
        return Err(PyValueError::new_err("draws must be positive"));
    }
    let region = square(half_side)?;
    let t = py.detach(|| theta_estimate(&params.inner, &region, draws, &SeededRng::new(seed)));
    to_py(py, &t)
}

#[pyfunction]
fn critical_density(
    py: Python<'_>,
    range: f64,
    windows: Vec<f64>,
    densities: Vec<f64>,
    trials: u64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let r = py
        .detach(|| {
            estimate_critical_density(range, &windows, &densities, trials, &SeededRng::new(seed))
        })
        .map_err(value_err)?;
    to_py(py, &r)
}

#[pyfunction]
fn diameter_tail(
    py: Python<'_>,
    params: &PyParams,
    h_values: Vec<f64>,
    trials: u64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let r = py
        .detach(|| fit_diameter_tail(&params.inner, &h_values, trials, &SeededRng::new(seed)))
        .map_err(value_err)?;
    to_py(py, &r)
}

#[pyfunction]
fn hop_delay(
    py: Python<'_>,
    hop_length: f64,
    params: &PyParams,
    trials: u64,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let r = py
        .detach(|| single_hop_delay_test(hop_length, &params.inner, trials, &SeededRng::new(seed)))
        .map_err(value_err)?;
    to_py(py, &r)
}

#[pymodule]
fn cogperc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(estimate_p0, m)?)?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(critical_density, m)?)?;
    m.add_function(wrap_pyfunction!(diameter_tail, m)?)?;
    m.add_function(wrap_pyfunction!(hop_delay, m)?)?;
    Ok(())
}
