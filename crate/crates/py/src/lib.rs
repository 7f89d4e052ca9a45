//! Python bindings. Structured results come back as plain dicts and lists.

use std::collections::BTreeSet;

use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;

use snm_core::decision::{self, UserQuery};
use snm_core::kpi;
use snm_core::model;
use snm_core::netsim::{self, Scenario};
use snm_core::sla::{self, SlaSpec};
use snm_core::telemetry::{self, AnalysisPeriod, EstimatedAttributes, RecordKind, TelemetryRecord};
use snm_core::{fixtures, SnmError};

fn err(e: SnmError) -> PyErr {
    match e {
        SnmError::Io { .. } => PyIOError::new_err(e.to_string()),
        SnmError::NotFound { .. } => PyKeyError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Converts any serializable value to Python objects via `json.loads`.
fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(json_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn period(start_ms: i64, end_ms: i64) -> PyResult<AnalysisPeriod> {
    AnalysisPeriod::new(start_ms, end_ms).map_err(err)
}

#[pyclass(name = "ServiceNetwork", module = "snm")]
struct PyServiceNetwork {
    inner: model::ServiceNetwork,
}

#[pymethods]
impl PyServiceNetwork {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: model::ServiceNetwork::load(path).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: model::ServiceNetwork::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Violation lines; empty when the network is valid.
    fn validate(&self) -> Vec<String> {
        self.inner.validate().violations.iter().map(ToString::to_string).collect()
    }

    fn resolve_node(&self, node_id: &str) -> PyResult<Vec<String>> {
        let members = self.inner.resolve_node(node_id).map_err(err)?;
        Ok(members.into_iter().map(|s| s.service_id.clone()).collect())
    }

    #[getter]
    fn service_ids(&self) -> Vec<String> {
        self.inner.services.iter().map(|s| s.service_id.clone()).collect()
    }

    #[getter]
    fn node_ids(&self) -> Vec<String> {
        self.inner.nodes.iter().map(|n| n.node_id.clone()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "ServiceNetwork({:?}, {} services, {} nodes)",
            self.inner.domain.domain_id,
            self.inner.services.len(),
            self.inner.nodes.len()
        )
    }
}

#[pyclass(name = "TelemetryDb", module = "snm")]
#[derive(Default)]
struct PyTelemetryDb {
    inner: telemetry::TelemetryDb,
}

fn parse_kind(kind: Option<&str>) -> PyResult<Option<RecordKind>> {
    kind.map(|k| k.parse().map_err(PyValueError::new_err)).transpose()
}

#[pymethods]
impl PyTelemetryDb {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    #[staticmethod]
    fn load(paths: Vec<String>) -> PyResult<Self> {
        Ok(Self {
            inner: telemetry::TelemetryDb::load_logs(&paths).map_err(err)?,
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: telemetry::TelemetryDb::parse_log(text).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save_log(path).map_err(err)
    }

    fn to_log(&self) -> String {
        self.inner.to_log_string()
    }

    /// Appends one log line; returns its index.
    fn append_line(&mut self, line: &str) -> PyResult<usize> {
        let record = TelemetryRecord::from_log_line(line).map_err(PyValueError::new_err)?;
        self.inner.append(record).map_err(err)
    }

    #[pyo3(signature = (timestamp_ms, service_id, response_time_ms, success, bytes_transferred, data_blocks))]
    fn append_invocation(
        &mut self,
        timestamp_ms: i64,
        service_id: &str,
        response_time_ms: u64,
        success: bool,
        bytes_transferred: u64,
        data_blocks: u64,
    ) -> PyResult<usize> {
        let r = TelemetryRecord::invocation(
            timestamp_ms,
            service_id,
            response_time_ms,
            success,
            bytes_transferred,
            data_blocks,
        );
        self.inner.append(r).map_err(err)
    }

    fn append_probe(&mut self, timestamp_ms: i64, service_id: &str, up: bool) -> PyResult<usize> {
        self.inner
            .append(TelemetryRecord::probe(timestamp_ms, service_id, up))
            .map_err(err)
    }

    fn append_server_sample(
        &mut self,
        timestamp_ms: i64,
        server_id: &str,
        cpu_load: f64,
        network_load: f64,
        free_ram_bytes: u64,
        free_disk_bytes: u64,
    ) -> PyResult<usize> {
        let attrs = EstimatedAttributes {
            cpu_load,
            network_load,
            free_ram_bytes,
            free_disk_bytes,
        };
        self.inner
            .append(TelemetryRecord::server_sample(timestamp_ms, server_id, attrs))
            .map_err(err)
    }

    /// Records of one subject in `[start_ms, end_ms)` as log lines.
    #[pyo3(signature = (subject_id, start_ms, end_ms, kind=None))]
    fn query(&self, subject_id: &str, start_ms: i64, end_ms: i64, kind: Option<&str>) -> PyResult<Vec<String>> {
        let p = period(start_ms, end_ms)?;
        let kind = parse_kind(kind)?;
        Ok(self
            .inner
            .query(subject_id, &p, kind)
            .into_iter()
            .map(TelemetryRecord::to_log_line)
            .collect())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Metric class of a KPI name, e.g. "TIME_BASED".
#[pyfunction]
fn classify(kpi_name: &str) -> PyResult<&'static str> {
    Ok(kpi::classify(kpi_name).map_err(err)?.as_str())
}

/// Matching set record of a service or node as a dict.
#[pyfunction]
fn compute_kpis<'py>(
    py: Python<'py>,
    network: &PyServiceNetwork,
    db: &PyTelemetryDb,
    subject_id: &str,
    start_ms: i64,
    end_ms: i64,
) -> PyResult<Bound<'py, PyAny>> {
    let p = period(start_ms, end_ms)?;
    let record = sla::build_matching_set(&db.inner, &network.inner, subject_id, &p).map_err(err)?;
    to_py(py, &record)
}

/// Availability report of one service: availability, downtime and uptime.
#[pyfunction]
fn availability<'py>(
    py: Python<'py>,
    db: &PyTelemetryDb,
    service_id: &str,
    start_ms: i64,
    end_ms: i64,
) -> PyResult<Bound<'py, PyAny>> {
    let p = period(start_ms, end_ms)?;
    let probes = db.inner.query(service_id, &p, Some(RecordKind::StatusProbe));
    to_py(py, &kpi::compute_availability(&probes, &p).map_err(err)?)
}

#[pyfunction]
fn reliability(db: &PyTelemetryDb, service_id: &str, start_ms: i64, end_ms: i64) -> PyResult<f64> {
    let p = period(start_ms, end_ms)?;
    let inv = db.inner.query(service_id, &p, Some(RecordKind::Invocation));
    Ok(kpi::compute_reliability(&inv, &p).map_err(err)?.value)
}

#[pyfunction]
fn throughput(db: &PyTelemetryDb, service_id: &str, start_ms: i64, end_ms: i64) -> PyResult<f64> {
    let p = period(start_ms, end_ms)?;
    let inv = db.inner.query(service_id, &p, Some(RecordKind::Invocation));
    Ok(kpi::compute_throughput(&inv, &p).map_err(err)?.value)
}

#[pyfunction]
fn mean_response_time(db: &PyTelemetryDb, service_id: &str, start_ms: i64, end_ms: i64) -> PyResult<f64> {
    let p = period(start_ms, end_ms)?;
    let inv = db.inner.query(service_id, &p, Some(RecordKind::Invocation));
    Ok(kpi::compute_response_time(&inv, &p).map_err(err)?.mean_ms)
}

/// Synthetic telemetry. `scenario_json` defaults to nominal traffic.
#[pyfunction]
#[pyo3(signature = (network, seed=0, duration_ms=60_000, rate=5.0, scenario_json=None))]
fn generate(
    network: &PyServiceNetwork,
    seed: u64,
    duration_ms: i64,
    rate: f64,
    scenario_json: Option<&str>,
) -> PyResult<PyTelemetryDb> {
    let scenario = match scenario_json {
        Some(text) => serde_json::from_str(text).map_err(json_err)?,
        None => Scenario::Nominal,
    };
    let inner = netsim::generate(&network.inner, &scenario, seed, duration_ms, rate).map_err(err)?;
    Ok(PyTelemetryDb { inner })
}

#[pyfunction]
fn default_profiles(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &netsim::default_profiles())
}

/// Runs the decision procedure; returns the decision as a dict.
#[pyfunction]
#[pyo3(signature = (network, db, query_json, sla_json=None))]
fn decide<'py>(
    py: Python<'py>,
    network: &PyServiceNetwork,
    db: &PyTelemetryDb,
    query_json: &str,
    sla_json: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let query: UserQuery = serde_json::from_str(query_json).map_err(json_err)?;
    let spec: SlaSpec = match sla_json {
        Some(text) => serde_json::from_str(text).map_err(json_err)?,
        None => SlaSpec::default(),
    };
    let d = decision::decide_with_sla(&network.inner, &query, &spec, &db.inner).map_err(err)?;
    to_py(py, &d)
}

/// Capabilities resolve to a node or ad-hoc composition id, or None.
#[pyfunction]
fn find_composition(network: &PyServiceNetwork, capabilities: Vec<String>) -> Option<String> {
    let required: BTreeSet<String> = capabilities.into_iter().collect();
    decision::check_services_for_composition(&network.inner, &required, &BTreeSet::new()).map(|s| s.id())
}

#[pyfunction]
fn loan_network() -> PyServiceNetwork {
    PyServiceNetwork {
        inner: fixtures::loan_network(),
    }
}

#[pymodule]
fn snm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyServiceNetwork>()?;
    m.add_class::<PyTelemetryDb>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(compute_kpis, m)?)?;
    m.add_function(wrap_pyfunction!(availability, m)?)?;
    m.add_function(wrap_pyfunction!(reliability, m)?)?;
    m.add_function(wrap_pyfunction!(throughput, m)?)?;
    m.add_function(wrap_pyfunction!(mean_response_time, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(default_profiles, m)?)?;
    m.add_function(wrap_pyfunction!(decide, m)?)?;
    m.add_function(wrap_pyfunction!(find_composition, m)?)?;
    m.add_function(wrap_pyfunction!(loan_network, m)?)?;
    Ok(())
}
