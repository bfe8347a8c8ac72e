//! Structured graph commands, the in-process stand-in for Cypher.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::search::{bfs_path, components, dijkstra_path};
use super::{GraphError, NodeType, TopoGraph};
use crate::store::{CellValue, ResultTable};

/// A node by GUID or name, or by type and name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeRef {
    Text(String),
    Typed {
        #[serde(rename = "type")]
        node_type: NodeType,
        name: String,
    },
    Id {
        id: String,
    },
}

impl std::fmt::Display for NodeRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NodeRef::Text(s) | NodeRef::Id { id: s } => f.write_str(s),
            NodeRef::Typed { node_type, name } => write!(f, "{node_type} '{name}'"),
        }
    }
}

impl From<&str> for NodeRef {
    fn from(s: &str) -> Self {
        NodeRef::Text(s.to_owned())
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathWeight {
    #[default]
    Hops,
    Distance,
}

/// One graph command. Serialized as a JSON object tagged by `command`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphQuery {
    MatchNodes {
        #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
        node_type: Option<NodeType>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        storey: Option<String>,
    },
    /// Adjacent nodes; with `via_type`, nodes two hops away through a node of that type.
    Neighbors {
        node: NodeRef,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        type_filter: Option<NodeType>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        via_type: Option<NodeType>,
    },
    PathExists {
        from: NodeRef,
        to: NodeRef,
    },
    ShortestPath {
        from: NodeRef,
        to: NodeRef,
        #[serde(default)]
        weight: PathWeight,
    },
    /// Nodes of `type` with no path to any other node of that type.
    Isolated {
        #[serde(rename = "type")]
        node_type: NodeType,
    },
    /// Nodes of `type` by degree, counting only `via_type` neighbours if given.
    DegreeRanking {
        #[serde(rename = "type")]
        node_type: NodeType,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        via_type: Option<NodeType>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        limit: Option<usize>,
    },
    Count {
        #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
        node_type: Option<NodeType>,
    },
}

impl GraphQuery {
    /// Parses the first JSON object in `text`, tolerating code fences and prose.
    ///
    /// Besides the `command`-tagged form, a single-key object naming the
    /// command (`{"neighbors": {...}}`) is accepted.
    pub fn from_text(text: &str) -> Result<Self, GraphError> {
        let invalid = |e: serde_json::Error| GraphError::InvalidQuery(e.to_string());
        let start = text.find('{').ok_or_else(|| GraphError::InvalidQuery("expected a JSON object".into()))?;
        let mut de = serde_json::Deserializer::from_str(&text[start..]);
        let mut value = serde_json::Value::deserialize(&mut de).map_err(invalid)?;
        if let serde_json::Value::Object(map) = &value {
            if !map.contains_key("command") && map.len() == 1 {
                let (name, body) = map.iter().next().expect("one entry");
                if let serde_json::Value::Object(args) = body {
                    let mut args = args.clone();
                    args.insert("command".into(), serde_json::Value::String(name.clone()));
                    value = serde_json::Value::Object(args);
                }
            }
        }
        GraphQuery::deserialize(value).map_err(invalid)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("query serializes")
    }
}

fn text(s: impl Into<String>) -> CellValue {
    CellValue::Text(s.into())
}

fn flag(b: bool) -> CellValue {
    text(if b { "true" } else { "false" })
}

fn columns(names: &[&str]) -> ResultTable {
    ResultTable::new(names.iter().map(|s| (*s).to_owned()).collect())
}

impl TopoGraph {
    /// Resolves a reference: GUID first, then a case-insensitive name.
    pub fn resolve(&self, r: &NodeRef) -> Result<usize, GraphError> {
        let (wanted_type, name) = match r {
            NodeRef::Id { id } => {
                return self
                    .nodes
                    .iter()
                    .position(|n| n.id.as_str() == id)
                    .ok_or_else(|| GraphError::NodeNotFound(id.clone()))
            }
            NodeRef::Text(s) => {
                if let Some(i) = self.nodes.iter().position(|n| n.id.as_str() == s) {
                    return Ok(i);
                }
                (None, s.as_str())
            }
            NodeRef::Typed { node_type, name } => (Some(*node_type), name.as_str()),
        };
        let name = name.trim();
        let hits: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| {
                let n = &self.nodes[i];
                wanted_type.is_none_or(|t| n.node_type == t) && n.name.trim().eq_ignore_ascii_case(name)
            })
            .collect();
        match hits.as_slice() {
            [] => Err(GraphError::NodeNotFound(r.to_string())),
            [one] => Ok(*one),
            many => Err(GraphError::AmbiguousNode {
                reference: r.to_string(),
                candidates: many
                    .iter()
                    .map(|&i| format!("{} {} ({})", self.nodes[i].node_type, self.nodes[i].name, self.nodes[i].id))
                    .collect::<Vec<_>>()
                    .join(", "),
            }),
        }
    }

    fn node_cells(&self, i: usize) -> [CellValue; 3] {
        let n = &self.nodes[i];
        [text(n.id.as_str()), text(n.node_type.as_str()), text(n.name.clone())]
    }

    fn by_name(&self, a: usize, b: usize) -> std::cmp::Ordering {
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        na.name.cmp(&nb.name).then_with(|| na.id.as_str().cmp(nb.id.as_str()))
    }
}

/// Executes `query`; results are deterministic for a fixed graph.
pub fn run_graph_query(graph: &TopoGraph, query: &GraphQuery) -> Result<ResultTable, GraphError> {
    match query {
        GraphQuery::MatchNodes { node_type, name, storey } => {
            let mut t = columns(&["id", "type", "name", "storey", "centroid_x", "centroid_y", "centroid_z"]);
            let mut hits: Vec<usize> = (0..graph.node_count())
                .filter(|&i| {
                    let n = graph.node(i);
                    let storey_name = graph.storey_name(&n.storey_id).unwrap_or("");
                    node_type.is_none_or(|ty| n.node_type == ty)
                        && name.as_deref().is_none_or(|w| n.name.trim().eq_ignore_ascii_case(w.trim()))
                        && storey
                            .as_deref()
                            .is_none_or(|s| n.storey_id.as_str() == s || storey_name.eq_ignore_ascii_case(s.trim()))
                })
                .collect();
            hits.sort_by(|&a, &b| graph.node(a).node_type.cmp(&graph.node(b).node_type).then(graph.by_name(a, b)));
            for i in hits {
                let n = graph.node(i);
                let [id, ty, nm] = graph.node_cells(i);
                let storey = graph.storey_name(&n.storey_id).unwrap_or(n.storey_id.as_str()).to_owned();
                t.rows.push(vec![
                    id,
                    ty,
                    nm,
                    text(storey),
                    CellValue::Real(n.centroid.x),
                    CellValue::Real(n.centroid.y),
                    CellValue::Real(n.centroid.z),
                ]);
            }
            Ok(t)
        }
        GraphQuery::Neighbors { node, type_filter, via_type } => {
            let start = graph.resolve(node)?;
            let keep = |i: usize| type_filter.is_none_or(|t| graph.node(i).node_type == t);
            match via_type {
                None => {
                    let mut t = columns(&["id", "type", "name", "distance", "edge_type", "is_vertical"]);
                    let mut hits: Vec<(usize, usize)> =
                        graph.neighbours(start).iter().copied().filter(|&(v, _)| keep(v)).collect();
                    hits.sort_by(|a, b| graph.by_name(a.0, b.0));
                    for (v, k) in hits {
                        let e = &graph.edges()[k];
                        let [id, ty, nm] = graph.node_cells(v);
                        t.rows.push(vec![
                            id,
                            ty,
                            nm,
                            CellValue::Real(e.distance),
                            text(e.edge_type.clone()),
                            flag(e.is_vertical),
                        ]);
                    }
                    Ok(t)
                }
                Some(via) => {
                    let mut t = columns(&["id", "type", "name", "via", "distance"]);
                    // target -> (best distance, via names)
                    let mut reached: BTreeMap<usize, (f64, Vec<String>)> = BTreeMap::new();
                    for &(mid, k1) in graph.neighbours(start) {
                        if graph.node(mid).node_type != *via {
                            continue;
                        }
                        for &(v, k2) in graph.neighbours(mid) {
                            if v == start || !keep(v) {
                                continue;
                            }
                            let d = graph.edges()[k1].distance + graph.edges()[k2].distance;
                            let entry = reached.entry(v).or_insert((f64::INFINITY, Vec::new()));
                            entry.0 = entry.0.min(d);
                            entry.1.push(graph.node(mid).name.clone());
                        }
                    }
                    let mut hits: Vec<usize> = reached.keys().copied().collect();
                    hits.sort_by(|&a, &b| graph.by_name(a, b));
                    for v in hits {
                        let (d, vias) = &reached[&v];
                        let mut vias = vias.clone();
                        vias.sort();
                        vias.dedup();
                        let [id, ty, nm] = graph.node_cells(v);
                        t.rows.push(vec![id, ty, nm, text(vias.join(", ")), CellValue::Real(*d)]);
                    }
                    Ok(t)
                }
            }
        }
        GraphQuery::PathExists { from, to } => {
            let (a, b) = (graph.resolve(from)?, graph.resolve(to)?);
            let path = bfs_path(graph, a, b);
            let mut t = columns(&["from", "to", "path_exists", "hops"]);
            t.rows.push(vec![
                text(graph.node(a).name.clone()),
                text(graph.node(b).name.clone()),
                flag(path.is_some()),
                path.map_or(CellValue::Null, |p| CellValue::Integer(p.hops() as i64)),
            ]);
            Ok(t)
        }
        GraphQuery::ShortestPath { from, to, weight } => {
            let (a, b) = (graph.resolve(from)?, graph.resolve(to)?);
            let path = match weight {
                PathWeight::Hops => bfs_path(graph, a, b),
                PathWeight::Distance => dijkstra_path(graph, a, b),
            }
            .ok_or_else(|| GraphError::NoPath { from: from.to_string(), to: to.to_string() })?;
            let mut t = columns(&["step", "id", "type", "name", "leg_distance", "total_distance"]);
            let legs = path.legs(graph);
            let mut total = 0.0;
            for (step, &i) in path.nodes.iter().enumerate() {
                let leg = if step == 0 { 0.0 } else { legs[step - 1] };
                total += leg;
                let [id, ty, nm] = graph.node_cells(i);
                t.rows.push(vec![
                    CellValue::Integer(step as i64),
                    id,
                    ty,
                    nm,
                    CellValue::Real(leg),
                    CellValue::Real(total),
                ]);
            }
            Ok(t)
        }
        GraphQuery::Isolated { node_type } => {
            let label = components(graph);
            let mut per_component: BTreeMap<usize, usize> = BTreeMap::new();
            for i in 0..graph.node_count() {
                if graph.node(i).node_type == *node_type {
                    *per_component.entry(label[i]).or_default() += 1;
                }
            }
            let mut hits: Vec<usize> = (0..graph.node_count())
                .filter(|&i| graph.node(i).node_type == *node_type && per_component[&label[i]] == 1)
                .collect();
            hits.sort_by(|&a, &b| graph.by_name(a, b));
            let mut t = columns(&["id", "type", "name"]);
            t.rows.extend(hits.into_iter().map(|i| graph.node_cells(i).to_vec()));
            Ok(t)
        }
        GraphQuery::DegreeRanking { node_type, via_type, limit } => {
            let mut ranked: Vec<(usize, usize)> = (0..graph.node_count())
                .filter(|&i| graph.node(i).node_type == *node_type)
                .map(|i| {
                    let degree = graph
                        .neighbours(i)
                        .iter()
                        .filter(|&&(v, _)| via_type.is_none_or(|t| graph.node(v).node_type == t))
                        .count();
                    (i, degree)
                })
                .collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(graph.by_name(a.0, b.0)));
            ranked.truncate(limit.unwrap_or(usize::MAX));
            let mut t = columns(&["id", "type", "name", "degree"]);
            for (i, d) in ranked {
                let mut row = graph.node_cells(i).to_vec();
                row.push(CellValue::Integer(d as i64));
                t.rows.push(row);
            }
            Ok(t)
        }
        GraphQuery::Count { node_type } => {
            let n = graph.nodes().iter().filter(|n| node_type.is_none_or(|t| n.node_type == t)).count();
            let mut t = columns(&["type", "count"]);
            t.rows.push(vec![node_type.map_or(text("all"), |ty| text(ty.as_str())), CellValue::Integer(n as i64)]);
            Ok(t)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dialect_round_trips() {
        let queries = [
            r#"{"command":"match_nodes","type":"room"}"#,
            r#"{"command":"neighbors","node":"1","type_filter":"room","via_type":"door"}"#,
            r#"{"command":"neighbors","node":{"type":"room","name":"1"}}"#,
            r#"{"command":"path_exists","from":"1","to":"7"}"#,
            r#"{"command":"shortest_path","from":"6","to":"7","weight":"distance"}"#,
            r#"{"command":"isolated","type":"room"}"#,
            r#"{"command":"degree_ranking","type":"room","via_type":"door"}"#,
            r#"{"command":"count","type":"door"}"#,
        ];
        for q in queries {
            let parsed = GraphQuery::from_text(q).unwrap();
            assert_eq!(parsed.to_json(), q);
        }
    }

    #[test]
    fn lenient_text() {
        let q = GraphQuery::from_text("```json\n{\"command\": \"count\", \"type\": \"Rooms\"}\n```").unwrap();
        assert_eq!(q, GraphQuery::Count { node_type: Some(NodeType::Room) });
        let q = GraphQuery::from_text(r#"{"command":"shortest_path","from":"a","to":"b"}"#).unwrap();
        assert!(matches!(q, GraphQuery::ShortestPath { weight: PathWeight::Hops, .. }));
        let q = GraphQuery::from_text(r#"{"neighbors": {"node": "1", "type_filter": "room"}}"#).unwrap();
        assert!(matches!(q, GraphQuery::Neighbors { type_filter: Some(NodeType::Room), .. }));
        assert!(GraphQuery::from_text(r#"{"neighbors": {"node": "1", "extra": 1}}"#).is_err());
    }

    #[test]
    fn rejects_bad_commands() {
        assert!(GraphQuery::from_text("MATCH (n) RETURN n").is_err());
        assert!(GraphQuery::from_text(r#"{"command":"teleport"}"#).is_err());
        assert!(GraphQuery::from_text(r#"{"command":"count","type":"wall"}"#).is_err());
        assert!(GraphQuery::from_text(r#"{"command":"isolated"}"#).is_err());
    }
}
