//! Ingest, scene export and evaluation, shared by the CLI, the HTTP service
//! and the Python bindings.

pub mod eval;
pub mod ingest;
pub mod scene;

pub use eval::{
    compute_metrics, load_transcripts, read_traces, run_eval, run_scenario, write_traces, Attempt, BackendSource,
    Bindings, Category, CategoryMetrics, EvalError, EvalReport, FixedBackends, Scenario, ScenarioScript, ScenarioSuite,
    ScenarioTemplate, ScenarioTrace, TranscriptSet,
};
pub use ingest::{ingest, ArtifactPaths, IngestError, IngestReport, LoadError, LoadedModel};
pub use scene::{build_scene, highlight_path, HighlightSpec, SceneBox, SceneDocument, SceneError, SceneMesh};
