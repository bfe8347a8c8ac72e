use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::graph::{build_model_graph, GraphConfig, GraphError, TopoGraph};
use crate::semantics::{extract_model, IngestWarning, SemanticsError};
use crate::step::{StepError, StepFile};
use crate::store::{table_names, RelationalStore, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("input file not found: {0}")]
    NotFound(PathBuf),
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: StepError },
    #[error("model contains no IfcBuilding")]
    NoBuilding,
    #[error("cannot interpret model: {0}")]
    Semantics(SemanticsError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            IngestError::NotFound(_) | IngestError::Store(_) | IngestError::Io(_) => 1,
            IngestError::Parse { .. } | IngestError::Semantics(_) => 2,
            IngestError::NoBuilding => 3,
        }
    }
}

/// Written next to the database and graph, also on semantic failures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub source: String,
    /// Rows per table, all seventeen tables listed.
    pub counts: BTreeMap<String, usize>,
    pub nodes: usize,
    pub edges: usize,
    /// Parse, extraction and database write.
    pub rdb_seconds: f64,
    /// Adjacency detection and graph file write.
    pub gdb_seconds: f64,
    pub warnings: Vec<IngestWarning>,
    #[serde(default)]
    pub graph_warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArtifactPaths {
    pub db: PathBuf,
    pub graph: PathBuf,
    pub report: PathBuf,
}

impl ArtifactPaths {
    /// `<dir>/<name>.db`, `<dir>/<name>.graph.json`, `<dir>/<name>.report.json`.
    pub fn new(dir: impl AsRef<Path>, name: &str) -> Self {
        let dir = dir.as_ref();
        ArtifactPaths {
            db: dir.join(format!("{name}.db")),
            graph: dir.join(format!("{name}.graph.json")),
            report: dir.join(format!("{name}.report.json")),
        }
    }

    /// Paths sharing the stem of a `.db` file.
    pub fn from_db(db: impl AsRef<Path>) -> Self {
        let db = db.as_ref();
        let name = db.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
        Self::new(db.parent().unwrap_or(Path::new(".")), &name)
    }
}

fn write_report(path: &Path, report: &IngestReport) -> std::io::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(report).expect("report serializes"))
}

/// Parses `ifc_path` and writes the three artifacts into `out_dir`.
pub fn ingest(
    ifc_path: &Path,
    out_dir: &Path,
    config: GraphConfig,
) -> Result<(ArtifactPaths, IngestReport), IngestError> {
    if !ifc_path.is_file() {
        return Err(IngestError::NotFound(ifc_path.to_owned()));
    }
    let name = ifc_path.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
    let paths = ArtifactPaths::new(out_dir, &name);
    let mut report = IngestReport {
        source: ifc_path.display().to_string(),
        counts: BTreeMap::new(),
        nodes: 0,
        edges: 0,
        rdb_seconds: 0.0,
        gdb_seconds: 0.0,
        warnings: Vec::new(),
        graph_warnings: Vec::new(),
        error: None,
    };

    let started = Instant::now();
    let file = match StepFile::open(ifc_path) {
        Ok(f) => f,
        Err(StepError::Io(e)) => return Err(IngestError::Io(e)),
        Err(source) => {
            let err = IngestError::Parse { path: ifc_path.to_owned(), source };
            std::fs::create_dir_all(out_dir)?;
            report.error = Some(err.to_string());
            write_report(&paths.report, &report)?;
            return Err(err);
        }
    };
    let model = match extract_model(&file) {
        Ok(m) => m,
        Err(e) => {
            let err = match e {
                SemanticsError::NoBuilding => IngestError::NoBuilding,
                other => IngestError::Semantics(other),
            };
            std::fs::create_dir_all(out_dir)?;
            report.error = Some(err.to_string());
            write_report(&paths.report, &report)?;
            return Err(err);
        }
    };
    drop(file);
    std::fs::create_dir_all(out_dir)?;
    let store = RelationalStore::build(&model, &paths.db)?;
    report.rdb_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let built = build_model_graph(&model, config);
    std::fs::write(&paths.graph, built.graph.to_json())?;
    report.gdb_seconds = started.elapsed().as_secs_f64();

    for table in table_names() {
        report.counts.insert(table.to_owned(), store.count(table)?);
    }
    report.nodes = built.graph.node_count();
    report.edges = built.graph.edge_count();
    report.warnings = model.warnings;
    report.graph_warnings = built.warnings;
    write_report(&paths.report, &report)?;
    Ok((paths, report))
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("artifact not found: {0}")]
    Missing(PathBuf),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An ingested model opened for querying.
pub struct LoadedModel {
    pub paths: ArtifactPaths,
    pub store: RelationalStore,
    pub graph: TopoGraph,
}

impl LoadedModel {
    /// Opens `<name>.db` and the graph file next to it.
    pub fn open(db: impl AsRef<Path>) -> Result<Self, LoadError> {
        let paths = ArtifactPaths::from_db(db);
        for p in [&paths.db, &paths.graph] {
            if !p.is_file() {
                return Err(LoadError::Missing(p.clone()));
            }
        }
        let store = RelationalStore::open(&paths.db)?;
        let graph = TopoGraph::from_json(&std::fs::read_to_string(&paths.graph)?)?;
        Ok(LoadedModel { paths, store, graph })
    }

    pub fn stores(&self) -> crate::agent::Stores<'_> {
        crate::agent::Stores { relational: &self.store, graph: &self.graph }
    }
}
