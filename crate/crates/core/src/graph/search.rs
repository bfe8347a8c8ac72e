use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use super::TopoGraph;

/// A walk through the graph; `nodes` starts at the source and ends at the target.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub nodes: Vec<usize>,
    /// Sum of edge distances, meters.
    pub distance: f64,
}

impl Path {
    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    /// Distances of each leg, in order.
    pub fn legs(&self, graph: &TopoGraph) -> Vec<f64> {
        self.nodes.windows(2).map(|w| graph.edge_between(w[0], w[1]).expect("path follows edges").distance).collect()
    }
}

fn unwind(pred: &[Option<usize>], from: usize, to: usize, distance: f64) -> Path {
    let mut nodes = vec![to];
    let mut cur = to;
    while cur != from {
        cur = pred[cur].expect("reached nodes have predecessors");
        nodes.push(cur);
    }
    nodes.reverse();
    Path { nodes, distance }
}

/// Fewest-hop path; among those, the shortest by distance.
pub fn bfs_path(graph: &TopoGraph, from: usize, to: usize) -> Option<Path> {
    let n = graph.node_count();
    let mut hops: Vec<Option<usize>> = vec![None; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    hops[from] = Some(0);
    dist[from] = 0.0;
    let mut queue = VecDeque::from([from]);
    // a node's distance is final once dequeued: only the previous layer updates it
    while let Some(u) = queue.pop_front() {
        let next = hops[u].expect("queued nodes have hops") + 1;
        for &(v, k) in graph.neighbours(u) {
            let d = dist[u] + graph.edges()[k].distance;
            match hops[v] {
                None => {
                    hops[v] = Some(next);
                    dist[v] = d;
                    pred[v] = Some(u);
                    queue.push_back(v);
                }
                Some(h) if h == next && d < dist[v] => {
                    dist[v] = d;
                    pred[v] = Some(u);
                }
                _ => {}
            }
        }
    }
    hops[to]?;
    Some(unwind(&pred, from, to, dist[to]))
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    // reversed for a min-heap; ties on the lower index
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum total distance path.
pub fn dijkstra_path(graph: &TopoGraph, from: usize, to: usize) -> Option<Path> {
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    let mut done = vec![false; n];
    dist[from] = 0.0;
    let mut heap = BinaryHeap::from([Entry(0.0, from)]);
    while let Some(Entry(d, u)) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        if u == to {
            break;
        }
        for &(v, k) in graph.neighbours(u) {
            let nd = d + graph.edges()[k].distance;
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = Some(u);
                heap.push(Entry(nd, v));
            }
        }
    }
    dist[to].is_finite().then(|| unwind(&pred, from, to, dist[to]))
}

/// Connected component label per node, numbered in node order.
pub(super) fn components(graph: &TopoGraph) -> Vec<usize> {
    let n = graph.node_count();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &(v, _) in graph.neighbours(u) {
                if label[v] == usize::MAX {
                    label[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    label
}
