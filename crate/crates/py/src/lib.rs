//! Python bindings. Structured results cross the boundary as plain dicts and
//! lists built from the same JSON the CLI and HTTP API emit.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use ifcnav_core::agent::{Agent, AgentConfig, Conversation, HttpChatBackend, LlmBackend, ScriptedBackend};
use ifcnav_core::app::{
    build_scene, compute_metrics, ingest as ingest_model, load_transcripts, run_eval, Bindings, HighlightSpec,
    IngestError, LoadedModel, ScenarioSuite,
};
use ifcnav_core::geometry::Tolerance;
use ifcnav_core::graph::{run_graph_query, GraphConfig, GraphQuery, NodeRef, PathWeight};
use pyo3::exceptions::{PyFileNotFoundError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

pyo3::create_exception!(ifcnav, IfcnavError, pyo3::exceptions::PyException);

fn fail(e: impl std::fmt::Display) -> PyErr {
    IfcnavError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(fail)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Builds the database, graph and report files; returns the report.
#[pyfunction]
#[pyo3(signature = (ifc_path, out_dir, eps = Tolerance::DEFAULT.get(), door_expand = ifcnav_core::graph::DEFAULT_DOOR_EXPAND))]
fn ingest<'py>(
    py: Python<'py>,
    ifc_path: PathBuf,
    out_dir: PathBuf,
    eps: f64,
    door_expand: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let eps = Tolerance::new(eps).map_err(|e| PyValueError::new_err(e.to_string()))?;
    match ingest_model(&ifc_path, &out_dir, GraphConfig { eps, door_expand }) {
        Ok((_, report)) => to_py(py, &report),
        Err(e @ IngestError::NotFound(_)) => Err(PyFileNotFoundError::new_err(e.to_string())),
        Err(e) => Err(fail(e)),
    }
}

/// Runs the shipped scenario suite over scripted transcripts; returns the report.
#[pyfunction]
fn evaluate<'py>(py: Python<'py>, db_path: PathBuf, transcripts: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let model = LoadedModel::open(&db_path).map_err(fail)?;
    let scenarios = ScenarioSuite::builtin().bind(&Bindings::fzk()).map_err(fail)?;
    let set = load_transcripts(transcripts).map_err(fail)?;
    let traces = run_eval(&scenarios, model.stores(), &set, &AgentConfig::default());
    to_py(py, &compute_metrics(&traces))
}

struct Inner {
    model: LoadedModel,
    conversation: Conversation,
}

/// An ingested model opened from its `.db` file.
#[pyclass]
struct Model {
    inner: Mutex<Inner>,
}

impl Model {
    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }
}

#[pymethods]
impl Model {
    #[new]
    fn new(db_path: PathBuf) -> PyResult<Self> {
        if !db_path.exists() {
            return Err(PyFileNotFoundError::new_err(db_path.display().to_string()));
        }
        let model = LoadedModel::open(&db_path).map_err(fail)?;
        Ok(Model { inner: Mutex::new(Inner { model, conversation: Conversation::default() }) })
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.lock().model.store.summarize().map_err(fail)?)
    }

    /// Read-only SQL; returns `{"columns": [...], "rows": [[...]]}`.
    fn sql<'py>(&self, py: Python<'py>, query: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.lock().model.store.execute_sql(query).map_err(fail)?)
    }

    /// A graph command as JSON or shorthand text.
    fn graph<'py>(&self, py: Python<'py>, query: &str) -> PyResult<Bound<'py, PyAny>> {
        let query = GraphQuery::from_text(query).map_err(fail)?;
        to_py(py, &run_graph_query(&self.lock().model.graph, &query).map_err(fail)?)
    }

    #[pyo3(signature = (start = None, end = None, weight = "hops", meshes = false))]
    fn scene<'py>(
        &self,
        py: Python<'py>,
        start: Option<String>,
        end: Option<String>,
        weight: &str,
        meshes: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let weight: PathWeight = serde_json::from_value(serde_json::Value::String(weight.to_owned()))
            .map_err(|_| PyValueError::new_err(format!("unknown weight '{weight}'")))?;
        let highlight = match (start, end) {
            (Some(from), Some(to)) => Some(HighlightSpec { from: NodeRef::Text(from), to: NodeRef::Text(to), weight }),
            (None, None) => None,
            _ => return Err(PyValueError::new_err("give both start and end, or neither")),
        };
        let inner = self.lock();
        let store = meshes.then_some(&inner.model.store);
        to_py(py, &build_scene(&inner.model.graph, highlight.as_ref(), store).map_err(fail)?)
    }

    /// One conversational turn. Pass `responses` to replay scripted model
    /// replies, or `endpoint` and `model` for a live chat-completions server.
    #[pyo3(signature = (text, responses = None, endpoint = None, model = None))]
    fn ask<'py>(
        &self,
        py: Python<'py>,
        text: &str,
        responses: Option<Vec<String>>,
        endpoint: Option<String>,
        model: Option<String>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let backend: Arc<dyn LlmBackend> = match (responses, endpoint, model) {
            (Some(r), None, _) => Arc::new(ScriptedBackend::new("scripted", r)),
            (None, Some(url), Some(m)) => Arc::new(HttpChatBackend::new(url, m, None)),
            _ => return Err(PyValueError::new_err("pass responses, or endpoint with model")),
        };
        let agent = Agent::new(AgentConfig::default(), backend);
        let mut inner = self.lock();
        let Inner { model, conversation } = &mut *inner;
        match agent.run(model.stores(), conversation, text) {
            Ok(run) => to_py(py, &run),
            Err(f) => Err(fail(f.error)),
        }
    }

    /// Forgets the chat history.
    fn reset(&self) {
        self.lock().conversation = Conversation::default();
    }
}

#[pymodule]
pub fn ifcnav(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(ingest, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_class::<Model>()?;
    m.add("IfcnavError", m.py().get_type::<IfcnavError>())?;
    Ok(())
}
