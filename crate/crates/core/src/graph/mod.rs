//! Connectivity graph over rooms, doors, stairs and ramps.

mod export;
mod query;
mod search;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use export::{export_graph, DocumentEdge, ExportFormat, GraphDocument};
pub use query::{run_graph_query, GraphQuery, NodeRef, PathWeight};
pub use search::{bfs_path, dijkstra_path, Path};

use crate::geometry::{boxes_adjacent, Aabb, Point3, Tolerance};
use crate::semantics::{ElementClass, ElementRecord, ExtractedModel, Guid};

/// Endpoints further apart than this vertically make an edge vertical, meters.
pub const VERTICAL_THRESHOLD: f64 = 1.0;
/// Default growth of a door box across the wall, meters per side.
pub const DEFAULT_DOOR_EXPAND: f64 = 0.1;
/// Fraction of a door's width removed, split over both ends.
pub const DOOR_SHRINK: f64 = 0.1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeType {
    Room,
    Door,
    Stair,
    Ramp,
}

impl NodeType {
    pub const ALL: [NodeType; 4] = [NodeType::Door, NodeType::Ramp, NodeType::Room, NodeType::Stair];

    pub fn from_class(class: ElementClass) -> Option<Self> {
        match class {
            ElementClass::Room => Some(NodeType::Room),
            ElementClass::Door => Some(NodeType::Door),
            ElementClass::Stair => Some(NodeType::Stair),
            ElementClass::Ramp => Some(NodeType::Ramp),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::Room => "room",
            NodeType::Door => "door",
            NodeType::Stair => "stair",
            NodeType::Ramp => "ramp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().trim_end_matches('s') {
            "room" | "space" => Some(NodeType::Room),
            "door" => Some(NodeType::Door),
            "stair" => Some(NodeType::Stair),
            "ramp" => Some(NodeType::Ramp),
            _ => None,
        }
    }
}

/// Accepts the plural and `space` spellings as well.
impl<'de> Deserialize<'de> for NodeType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        NodeType::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown node type '{s}'")))
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopoNode {
    pub id: Guid,
    #[serde(rename = "type")]
    pub node_type: NodeType,
    pub name: String,
    pub centroid: Point3,
    pub storey_id: Guid,
    /// Unadjusted element box.
    pub aabb: Aabb,
}

/// Undirected edge; `a < b` index into the node list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopoEdge {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    /// Endpoint types, sorted and dash-joined.
    pub edge_type: String,
    pub is_vertical: bool,
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct GraphConfig {
    pub eps: Tolerance,
    pub door_expand: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { eps: Tolerance::DEFAULT, door_expand: DEFAULT_DOOR_EXPAND }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("node not found: {0}")]
    NodeNotFound(String),
    #[error("node reference '{reference}' is ambiguous: {candidates}")]
    AmbiguousNode { reference: String, candidates: String },
    #[error("no path from {from} to {to}")]
    NoPath { from: String, to: String },
    #[error("invalid graph query: {0}")]
    InvalidQuery(String),
    #[error("invalid graph document: {0}")]
    InvalidDocument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable, undirected graph. Nodes are sorted by id.
#[derive(Clone, Debug, PartialEq)]
pub struct TopoGraph {
    nodes: Vec<TopoNode>,
    edges: Vec<TopoEdge>,
    /// Per node: (neighbour, edge index), ascending by neighbour.
    adjacency: Vec<Vec<(usize, usize)>>,
    index: HashMap<Guid, usize>,
    storey_names: BTreeMap<Guid, String>,
}

/// Output of [`build_graph`].
#[derive(Debug)]
pub struct BuiltGraph {
    pub graph: TopoGraph,
    pub pairs_visited: usize,
    pub warnings: Vec<String>,
}

/// Door box grown across the wall and trimmed along its width.
///
/// Returns the adjusted box and whether the footprint was square, in which
/// case x is taken as the wall-thickness axis.
pub fn adjust_door_box(door: &Aabb, x_expand: f64) -> (Aabb, bool) {
    let e = door.extent();
    let tie = (e.x - e.y).abs() < 1e-6;
    let (thick, long) = if tie || e.x < e.y { (0, 1) } else { (1, 0) };
    let mut min = door.min.to_array();
    let mut max = door.max.to_array();
    min[thick] -= x_expand;
    max[thick] += x_expand;
    let trim = (max[long] - min[long]) * DOOR_SHRINK / 2.0;
    min[long] += trim;
    max[long] -= trim;
    let b = Aabb { min: Point3::from_slice(&min), max: Point3::from_slice(&max) };
    (b, tie)
}

fn edge_type(a: NodeType, b: NodeType) -> String {
    let (lo, hi) = if a.as_str() <= b.as_str() { (a, b) } else { (b, a) };
    format!("{lo}-{hi}")
}

/// Connects every pair of navigable elements whose boxes intersect or touch.
///
/// Non-navigable records are ignored and repeated ids keep the first record.
/// Input order does not affect the result.
pub fn build_graph(elements: &[ElementRecord], config: GraphConfig) -> BuiltGraph {
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();
    let mut nodes: Vec<TopoNode> = Vec::new();
    for e in elements {
        let Some(node_type) = NodeType::from_class(e.class) else { continue };
        if !seen.insert(e.id.clone()) {
            warnings.push(format!("duplicate element {} ignored", e.id));
            continue;
        }
        nodes.push(TopoNode {
            id: e.id.clone(),
            node_type,
            name: e.name.clone().unwrap_or_default(),
            centroid: e.centroid,
            storey_id: e.storey_id.clone(),
            aabb: e.aabb,
        });
    }
    nodes.sort_by(|a, b| a.id.as_str().cmp(b.id.as_str()));

    let boxes: Vec<Aabb> = nodes
        .iter()
        .map(|n| {
            if n.node_type != NodeType::Door {
                return n.aabb;
            }
            let (b, tie) = adjust_door_box(&n.aabb, config.door_expand);
            if tie {
                let msg = format!("door {} has a square footprint, expanded along x", n.id);
                log::warn!("{msg}");
                warnings.push(msg);
            }
            b
        })
        .collect();

    let mut edges = Vec::new();
    let mut pairs_visited = 0;
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            pairs_visited += 1;
            if !boxes_adjacent(&boxes[i], &boxes[j], config.eps, true).adjacent {
                continue;
            }
            let (ci, cj) = (nodes[i].centroid, nodes[j].centroid);
            edges.push(TopoEdge {
                a: i,
                b: j,
                distance: ci.distance(cj),
                edge_type: edge_type(nodes[i].node_type, nodes[j].node_type),
                is_vertical: (ci.z - cj.z).abs() > VERTICAL_THRESHOLD,
            });
        }
    }
    BuiltGraph { graph: TopoGraph::from_parts(nodes, edges, BTreeMap::new()), pairs_visited, warnings }
}

/// [`build_graph`] over a whole model, with storey names attached.
pub fn build_model_graph(model: &ExtractedModel, config: GraphConfig) -> BuiltGraph {
    let mut built = build_graph(&model.elements, config);
    built.graph.storey_names =
        model.storeys.iter().map(|s| (s.id.clone(), s.name.clone().unwrap_or_default())).collect();
    built
}

impl TopoGraph {
    /// Assembles a graph; edges are normalized to `a < b` and sorted.
    pub(crate) fn from_parts(
        nodes: Vec<TopoNode>,
        mut edges: Vec<TopoEdge>,
        storey_names: BTreeMap<Guid, String>,
    ) -> Self {
        for e in &mut edges {
            if e.a > e.b {
                std::mem::swap(&mut e.a, &mut e.b);
            }
        }
        edges.sort_by_key(|e| (e.a, e.b));
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (k, e) in edges.iter().enumerate() {
            adjacency[e.a].push((e.b, k));
            adjacency[e.b].push((e.a, k));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let index = nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
        TopoGraph { nodes, edges, adjacency, index, storey_names }
    }

    pub fn nodes(&self) -> &[TopoNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[TopoEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, i: usize) -> &TopoNode {
        &self.nodes[i]
    }

    pub fn index_of(&self, id: &Guid) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// (neighbour, edge) pairs of node `i`, ascending by neighbour.
    pub fn neighbours(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<&TopoEdge> {
        self.adjacency[a].iter().find(|(n, _)| *n == b).map(|&(_, k)| &self.edges[k])
    }

    pub fn storey_name(&self, id: &Guid) -> Option<&str> {
        self.storey_names.get(id).map(String::as_str)
    }

    pub fn storey_names(&self) -> &BTreeMap<Guid, String> {
        &self.storey_names
    }

    /// Node counts, edge counts by type and node names, for prompts.
    pub fn summary_text(&self) -> String {
        let mut out = format!(
            "Undirected graph of {} nodes and {} CONNECTS edges.\n\
             Node properties: id, type, name, storey, centroid.\n\
             Edge properties: distance (meters between centroids), type (e.g. door-room), is_vertical.\n",
            self.node_count(),
            self.edge_count()
        );
        out.push_str("NODE TYPES:\n");
        for t in NodeType::ALL {
            let mut names: Vec<&str> =
                self.nodes.iter().filter(|n| n.node_type == t).map(|n| n.name.as_str()).collect();
            if names.is_empty() {
                continue;
            }
            names.sort_unstable();
            let shown = &names[..names.len().min(20)];
            let more = if names.len() > shown.len() { ", ..." } else { "" };
            out.push_str(&format!("- {t}: {} (names: {}{more})\n", names.len(), shown.join(", ")));
        }
        let mut by_type: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &self.edges {
            *by_type.entry(e.edge_type.as_str()).or_default() += 1;
        }
        out.push_str("EDGE TYPES:\n");
        if by_type.is_empty() {
            out.push_str("(none)\n");
        }
        for (t, n) in by_type {
            out.push_str(&format!("- {t}: {n}\n"));
        }
        if !self.storey_names.is_empty() {
            let names: Vec<&str> = self.storey_names.values().map(String::as_str).collect();
            out.push_str(&format!("STOREYS: {}\n", names.join(", ")));
        }
        out
    }
}
