//! Python bindings over the synthesis core: AIG parsing and simulation,
//! pass flows, LUT mapping, equivalence checking and mock evolution runs.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use evosyn::agents::{default_specs, BackendKind, Gateway, LlmConfig};
use evosyn::aig::{parse_aiger, write_aiger, Aig};
use evosyn::corpus;
use evosyn::engine::{Engine, EnginePolicy, IterationRecord};
use evosyn::equiv::{self, EquivStatus, DEFAULT_CONFLICT_LIMIT};
use evosyn::mapper::{map, verify_mapping};
use evosyn::passes::{run_flow, FlowScript, PassDelta};
use evosyn::rulebase::default_rulebase;
use evosyn::target::{default_suite, parse_builtin_params, Target, TargetSource};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Aig", module = "evosyn_py", skip_from_py_object)]
#[derive(Clone)]
struct PyAig {
    inner: Aig,
}

#[pymethods]
impl PyAig {
    /// Parses ASCII AIGER text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<PyAig> {
        Ok(PyAig { inner: parse_aiger(text).map_err(value_err)? })
    }

    fn to_aiger(&self) -> String {
        write_aiger(&self.inner)
    }

    #[getter]
    fn num_inputs(&self) -> usize {
        self.inner.num_inputs()
    }

    #[getter]
    fn num_latches(&self) -> usize {
        self.inner.num_latches()
    }

    #[getter]
    fn num_outputs(&self) -> usize {
        self.inner.num_outputs()
    }

    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let m = self.inner.metrics();
        let d = PyDict::new(py);
        d.set_item("and_count", m.and_count)?;
        d.set_item("edge_count", m.edge_count)?;
        d.set_item("depth", m.depth)?;
        d.set_item("num_inputs", self.inner.num_inputs())?;
        d.set_item("num_latches", self.inner.num_latches())?;
        d.set_item("num_outputs", self.inner.num_outputs())?;
        Ok(d)
    }

    /// One step of simulation; `latches` defaults to all-zero state.
    #[pyo3(signature = (inputs, latches=None))]
    fn simulate(
        &self,
        inputs: Vec<bool>,
        latches: Option<Vec<bool>>,
    ) -> PyResult<(Vec<bool>, Vec<bool>)> {
        let latches = latches.unwrap_or_else(|| vec![false; self.inner.num_latches()]);
        self.inner.simulate(&inputs, &latches).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        let m = self.inner.metrics();
        format!(
            "Aig(inputs={}, latches={}, outputs={}, ands={}, depth={})",
            self.inner.num_inputs(),
            self.inner.num_latches(),
            self.inner.num_outputs(),
            m.and_count,
            m.depth
        )
    }
}

fn delta_dict<'py>(py: Python<'py>, d: &PassDelta) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("pass_name", d.pass_name.clone())?;
    out.set_item("and_count_before", d.and_count_before)?;
    out.set_item("and_count_after", d.and_count_after)?;
    out.set_item("depth_before", d.depth_before)?;
    out.set_item("depth_after", d.depth_after)?;
    Ok(out)
}

/// Runs a pass script over the graph. `params` uses the params.cfg text
/// format; omitted keys keep their defaults.
#[pyfunction]
#[pyo3(signature = (aig, script, params=None))]
fn optimize<'py>(
    py: Python<'py>,
    aig: &PyAig,
    script: &str,
    params: Option<&str>,
) -> PyResult<(PyAig, Bound<'py, PyList>)> {
    let (pp, _) = parse_builtin_params(params.unwrap_or("")).map_err(value_err)?;
    let flow = FlowScript::parse_with(script, &pp).map_err(value_err)?;
    let (opt, deltas) = run_flow(&aig.inner, &flow).map_err(value_err)?;
    let list = PyList::empty(py);
    for d in &deltas {
        list.append(delta_dict(py, d)?)?;
    }
    Ok((PyAig { inner: opt }, list))
}

/// Maps the graph to k-input LUTs and checks the cover. `params` uses the
/// params.cfg text format (`mapper.` keys).
#[pyfunction]
#[pyo3(signature = (aig, params=None))]
fn map_luts<'py>(py: Python<'py>, aig: &PyAig, params: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let (_, mp) = parse_builtin_params(params.unwrap_or("")).map_err(value_err)?;
    let (mapping, stats) = map(&aig.inner, &mp);
    let d = PyDict::new(py);
    d.set_item("lut_count", mapping.lut_count)?;
    d.set_item("lut_depth", mapping.lut_depth)?;
    d.set_item("mapper_area", mapping.mapper_area)?;
    d.set_item("mapper_delay", mapping.mapper_delay)?;
    d.set_item("cut_total", stats.total_cuts)?;
    d.set_item("cut_pruned", stats.pruned_cuts)?;
    d.set_item("max_cut_size", stats.max_cut_size)?;
    d.set_item("mean_cut_size", stats.mean_cut_size)?;
    d.set_item("verified", verify_mapping(&aig.inner, &mapping))?;
    Ok(d)
}

/// SAT equivalence check. Returns status, counterexample and effort.
#[pyfunction]
#[pyo3(signature = (a, b, conflict_limit=None))]
fn check_equiv<'py>(
    py: Python<'py>,
    a: &PyAig,
    b: &PyAig,
    conflict_limit: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let limit = conflict_limit.unwrap_or(DEFAULT_CONFLICT_LIMIT);
    let verdict = equiv::check_equiv(&a.inner, &b.inner, limit).map_err(value_err)?;
    let d = PyDict::new(py);
    let status = match verdict.status {
        EquivStatus::Equivalent => "equivalent",
        EquivStatus::NotEquivalent => "not_equivalent",
        EquivStatus::ResourceOut => "resource_out",
    };
    d.set_item("status", status)?;
    d.set_item("counterexample", verdict.counterexample)?;
    d.set_item("conflicts_used", verdict.conflicts_used)?;
    Ok(d)
}

#[pyfunction]
fn ripple_adder(bits: usize) -> PyAig {
    PyAig { inner: corpus::ripple_adder(bits) }
}

#[pyfunction]
fn parity(width: usize) -> PyAig {
    PyAig { inner: corpus::parity(width) }
}

#[pyfunction]
fn random_aig(seed: u64, inputs: usize, max_ands: usize) -> PyAig {
    PyAig { inner: corpus::random_aig(seed, inputs, max_ands) }
}

/// The stock benchmark set as (name, graph) pairs.
#[pyfunction]
fn default_corpus() -> Vec<(String, PyAig)> {
    corpus::default_corpus()
        .into_iter()
        .map(|(id, aig)| (id, PyAig { inner: aig }))
        .collect()
}

fn record_dict<'py>(py: Python<'py>, r: &IterationRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("cycle", r.cycle)?;
    d.set_item("status", r.status.as_str())?;
    d.set_item("changesets", r.changesets.clone())?;
    d.set_item("reward", r.reward)?;
    d.set_item("qor_delta", r.qor_delta.clone())?;
    d.set_item("revision_id", r.revision_id.clone())?;
    d.set_item("duration", r.duration)?;
    d.set_item("note", r.note.clone())?;
    Ok(d)
}

/// Runs the evolution engine with mock agents on the stock corpus and
/// flow suite. Returns the journal plus the champion summary.
#[pyfunction]
#[pyo3(signature = (cycles, seed=0, workers=1, corpus_size=None))]
fn mock_evolution<'py>(
    py: Python<'py>,
    cycles: usize,
    seed: u64,
    workers: usize,
    corpus_size: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut designs = corpus::default_corpus();
    if let Some(n) = corpus_size {
        designs.truncate(n.max(1));
    }
    let policy = EnginePolicy { seed, workers: workers.max(1), ..EnginePolicy::default() };
    let mut engine = Engine::new(
        default_specs(BackendKind::Mock, "mock"),
        Gateway::new(LlmConfig::default()),
        Target::builtin(TargetSource::builtin_default(), default_suite()),
        designs,
        default_rulebase(),
        policy,
    )
    .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    engine.run(cycles);
    let journal = PyList::empty(py);
    for r in &engine.journal {
        journal.append(record_dict(py, r)?)?;
    }
    let d = PyDict::new(py);
    d.set_item("journal", journal)?;
    d.set_item("champion_revision", engine.registry.champion_revision.clone())?;
    d.set_item("champion_qor", engine.registry.champion_qor)?;
    d.set_item("halted", engine.halted())?;
    Ok(d)
}

#[pymodule]
fn _native(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAig>()?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(map_luts, m)?)?;
    m.add_function(wrap_pyfunction!(check_equiv, m)?)?;
    m.add_function(wrap_pyfunction!(ripple_adder, m)?)?;
    m.add_function(wrap_pyfunction!(parity, m)?)?;
    m.add_function(wrap_pyfunction!(random_aig, m)?)?;
    m.add_function(wrap_pyfunction!(default_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(mock_evolution, m)?)?;
    m.add("DEFAULT_CONFLICT_LIMIT", DEFAULT_CONFLICT_LIMIT)?;
    Ok(())
}
