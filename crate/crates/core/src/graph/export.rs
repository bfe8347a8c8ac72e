use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{GraphError, TopoEdge, TopoGraph, TopoNode};
use crate::semantics::Guid;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Cypher,
    GraphMl,
    Json,
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Cypher => "cypher",
            ExportFormat::GraphMl => "graphml",
            ExportFormat::Json => "json",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cypher" => Ok(ExportFormat::Cypher),
            "graphml" => Ok(ExportFormat::GraphMl),
            "json" => Ok(ExportFormat::Json),
            other => Err(GraphError::InvalidDocument(format!("unknown export format '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentEdge {
    pub source: Guid,
    pub target: Guid,
    pub distance: f64,
    #[serde(rename = "type")]
    pub edge_type: String,
    pub is_vertical: bool,
}

/// JSON form of a graph; edges reference nodes by id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub nodes: Vec<TopoNode>,
    pub edges: Vec<DocumentEdge>,
    #[serde(default)]
    pub storeys: BTreeMap<Guid, String>,
}

impl From<&TopoGraph> for GraphDocument {
    fn from(g: &TopoGraph) -> Self {
        GraphDocument {
            nodes: g.nodes.clone(),
            edges: g
                .edges
                .iter()
                .map(|e| DocumentEdge {
                    source: g.nodes[e.a].id.clone(),
                    target: g.nodes[e.b].id.clone(),
                    distance: e.distance,
                    edge_type: e.edge_type.clone(),
                    is_vertical: e.is_vertical,
                })
                .collect(),
            storeys: g.storey_names.clone(),
        }
    }
}

impl TryFrom<GraphDocument> for TopoGraph {
    type Error = GraphError;

    fn try_from(doc: GraphDocument) -> Result<Self, GraphError> {
        let mut nodes = doc.nodes;
        nodes.sort_by(|a, b| a.id.as_str().cmp(b.id.as_str()));
        let index: HashMap<&Guid, usize> = nodes.iter().enumerate().map(|(i, n)| (&n.id, i)).collect();
        if index.len() != nodes.len() {
            return Err(GraphError::InvalidDocument("duplicate node id".into()));
        }
        let lookup = |id: &Guid| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| GraphError::InvalidDocument(format!("edge references unknown node {id}")))
        };
        let mut edges = Vec::with_capacity(doc.edges.len());
        for e in &doc.edges {
            let (a, b) = (lookup(&e.source)?, lookup(&e.target)?);
            if a == b {
                return Err(GraphError::InvalidDocument(format!("self-loop on {}", e.source)));
            }
            edges.push(TopoEdge {
                a: a.min(b),
                b: a.max(b),
                distance: e.distance,
                edge_type: e.edge_type.clone(),
                is_vertical: e.is_vertical,
            });
        }
        let before = edges.len();
        edges.sort_by_key(|e| (e.a, e.b));
        edges.dedup_by_key(|e| (e.a, e.b));
        if edges.len() != before {
            return Err(GraphError::InvalidDocument("parallel edges".into()));
        }
        Ok(TopoGraph::from_parts(nodes, edges, doc.storeys))
    }
}

impl TopoGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphDocument::from(self)).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, GraphError> {
        let doc: GraphDocument = serde_json::from_str(s).map_err(|e| GraphError::InvalidDocument(e.to_string()))?;
        doc.try_into()
    }
}

fn cypher_str(s: &str) -> String {
    format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn cypher(g: &TopoGraph) -> String {
    let mut out = String::from("// CONNECTS graph: one CREATE per node, then one per relationship\n");
    for (i, n) in g.nodes.iter().enumerate() {
        writeln!(
            out,
            "CREATE (n{i}:Element {{id: {}, type: {}, name: {}, storey_id: {}, centroid_x: {:?}, centroid_y: {:?}, centroid_z: {:?}}});",
            cypher_str(n.id.as_str()),
            cypher_str(n.node_type.as_str()),
            cypher_str(&n.name),
            cypher_str(n.storey_id.as_str()),
            n.centroid.x,
            n.centroid.y,
            n.centroid.z
        )
        .unwrap();
    }
    for e in &g.edges {
        writeln!(
            out,
            "MATCH (a:Element {{id: {}}}), (b:Element {{id: {}}}) CREATE (a)-[:CONNECTS {{distance: {:?}, type: {}, is_vertical: {}}}]->(b);",
            cypher_str(g.nodes[e.a].id.as_str()),
            cypher_str(g.nodes[e.b].id.as_str()),
            e.distance,
            cypher_str(&e.edge_type),
            e.is_vertical
        )
        .unwrap();
    }
    out
}

fn graphml(g: &TopoGraph) -> String {
    let mut out = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n\
         <key id=\"type\" for=\"node\" attr.name=\"type\" attr.type=\"string\"/>\n\
         <key id=\"name\" for=\"node\" attr.name=\"name\" attr.type=\"string\"/>\n\
         <key id=\"storey_id\" for=\"node\" attr.name=\"storey_id\" attr.type=\"string\"/>\n\
         <key id=\"centroid_x\" for=\"node\" attr.name=\"centroid_x\" attr.type=\"double\"/>\n\
         <key id=\"centroid_y\" for=\"node\" attr.name=\"centroid_y\" attr.type=\"double\"/>\n\
         <key id=\"centroid_z\" for=\"node\" attr.name=\"centroid_z\" attr.type=\"double\"/>\n\
         <key id=\"distance\" for=\"edge\" attr.name=\"distance\" attr.type=\"double\"/>\n\
         <key id=\"edge_type\" for=\"edge\" attr.name=\"type\" attr.type=\"string\"/>\n\
         <key id=\"is_vertical\" for=\"edge\" attr.name=\"is_vertical\" attr.type=\"boolean\"/>\n\
         <graph id=\"connectivity\" edgedefault=\"undirected\">\n",
    );
    for n in &g.nodes {
        writeln!(
            out,
            "  <node id=\"{}\"><data key=\"type\">{}</data><data key=\"name\">{}</data><data key=\"storey_id\">{}</data>\
             <data key=\"centroid_x\">{:?}</data><data key=\"centroid_y\">{:?}</data><data key=\"centroid_z\">{:?}</data></node>",
            xml_escape(n.id.as_str()),
            n.node_type,
            xml_escape(&n.name),
            xml_escape(n.storey_id.as_str()),
            n.centroid.x,
            n.centroid.y,
            n.centroid.z
        )
        .unwrap();
    }
    for e in &g.edges {
        writeln!(
            out,
            "  <edge source=\"{}\" target=\"{}\"><data key=\"distance\">{:?}</data><data key=\"edge_type\">{}</data>\
             <data key=\"is_vertical\">{}</data></edge>",
            xml_escape(g.nodes[e.a].id.as_str()),
            xml_escape(g.nodes[e.b].id.as_str()),
            e.distance,
            xml_escape(&e.edge_type),
            e.is_vertical
        )
        .unwrap();
    }
    out.push_str("</graph>\n</graphml>\n");
    out
}

/// Serializes the graph; node and edge order follow the graph.
pub fn export_graph(graph: &TopoGraph, format: ExportFormat) -> String {
    match format {
        ExportFormat::Cypher => cypher(graph),
        ExportFormat::GraphMl => graphml(graph),
        ExportFormat::Json => graph.to_json(),
    }
}
