//! Viewer payload: navigable boxes, optional meshes and a highlighted path.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::graph::{bfs_path, dijkstra_path, GraphError, NodeRef, PathWeight, TopoGraph};
use crate::store::{CellValue, RelationalStore, StoreError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneBox {
    pub id: String,
    #[serde(rename = "type")]
    pub node_type: String,
    pub name: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
    /// Styling role; the viewer picks the actual colour.
    pub color_class: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneMesh {
    pub id: String,
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[u32; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDocument {
    pub units: String,
    pub boxes: Vec<SceneBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meshes: Option<Vec<SceneMesh>>,
    /// Node ids, start to end.
    pub highlights: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("stored geometry of {id} is unreadable: {message}")]
    BadGeometry { id: String, message: String },
    #[error("invalid scene: {0}")]
    Invalid(String),
}

/// Path to highlight between two nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HighlightSpec {
    pub from: NodeRef,
    pub to: NodeRef,
    #[serde(default)]
    pub weight: PathWeight,
}

impl SceneDocument {
    pub fn validate(&self) -> Result<(), SceneError> {
        let ids: HashSet<&str> = self.boxes.iter().map(|b| b.id.as_str()).collect();
        if let Some(h) = self.highlights.iter().find(|h| !ids.contains(h.as_str())) {
            return Err(SceneError::Invalid(format!("highlight {h} is not a box")));
        }
        if let Some(b) = self.boxes.iter().find(|b| (0..3).any(|k| b.min[k] > b.max[k])) {
            return Err(SceneError::Invalid(format!("box {} has min above max", b.id)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }
}

/// Highlighted node ids for `spec`.
pub fn highlight_path(graph: &TopoGraph, spec: &HighlightSpec) -> Result<Vec<String>, GraphError> {
    let from = graph.resolve(&spec.from)?;
    let to = graph.resolve(&spec.to)?;
    let path = match spec.weight {
        PathWeight::Hops => bfs_path(graph, from, to),
        PathWeight::Distance => dijkstra_path(graph, from, to),
    }
    .ok_or_else(|| GraphError::NoPath { from: spec.from.to_string(), to: spec.to.to_string() })?;
    Ok(path.nodes.iter().map(|&i| graph.node(i).id.as_str().to_owned()).collect())
}

/// One box per graph node, ordered like the graph; meshes come from the store.
pub fn build_scene(
    graph: &TopoGraph,
    highlight: Option<&HighlightSpec>,
    meshes_from: Option<&RelationalStore>,
) -> Result<SceneDocument, SceneError> {
    let boxes = graph
        .nodes()
        .iter()
        .map(|n| SceneBox {
            id: n.id.as_str().to_owned(),
            node_type: n.node_type.as_str().to_owned(),
            name: n.name.clone(),
            min: n.aabb.min.to_array(),
            max: n.aabb.max.to_array(),
            color_class: n.node_type.as_str().to_owned(),
        })
        .collect();
    let highlights = match highlight {
        Some(spec) => highlight_path(graph, spec)?,
        None => Vec::new(),
    };
    let meshes = match meshes_from {
        Some(store) => Some(load_meshes(graph, store)?),
        None => None,
    };
    let scene = SceneDocument { units: "meters".into(), boxes, meshes, highlights };
    scene.validate()?;
    Ok(scene)
}

fn load_meshes(graph: &TopoGraph, store: &RelationalStore) -> Result<Vec<SceneMesh>, SceneError> {
    let mut out = Vec::new();
    for node in graph.nodes() {
        let id = node.id.as_str();
        // GUIDs are base64 without quotes, so inlining is safe
        let sql = format!("SELECT vertices, faces FROM real_geometry WHERE element_id = '{}'", id.replace('\'', "''"));
        let table = store.execute_sql(&sql)?;
        for row in &table.rows {
            let parse = |cell: &CellValue| cell.as_text().unwrap_or("[]").to_owned();
            let bad = |e: serde_json::Error| SceneError::BadGeometry { id: id.to_owned(), message: e.to_string() };
            out.push(SceneMesh {
                id: id.to_owned(),
                vertices: serde_json::from_str(&parse(&row[0])).map_err(bad)?,
                faces: serde_json::from_str(&parse(&row[1])).map_err(bad)?,
            });
        }
    }
    Ok(out)
}
