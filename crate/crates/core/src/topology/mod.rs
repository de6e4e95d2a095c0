//! Network graphs: construction, text serialization, degree statistics and
//! all-pairs shortest paths.
//!
//! A [`Topology`] is a connected simple undirected graph over dense node ids
//! `0..N`. Every undirected link yields two [`DirectedEdge`]s. A node's ports are
//! numbered `0..d` in ascending neighbor-id order, so `(from, port)` order and
//! `(from, to)` order coincide.

mod graphml;
mod paths;
mod weibull;

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

pub use graphml::{load_graphml, to_graphml, GraphmlLoad};
pub use paths::{all_pairs_shortest_paths, mean_path_length, Path, PathSet};
pub use weibull::{gen_weibull_topology, DiscreteWeibull, MAX_SEQUENCE_ATTEMPTS};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("topology needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("link ({u}, {v}) references a node outside 0..{n}")]
    UnknownNode { u: NodeId, v: NodeId, n: usize },
    #[error("topology is not connected ({components} components)")]
    Disconnected { components: usize },
    #[error("malformed graphml: {0}")]
    GraphmlParse(String),
    #[error("graph is empty after cleanup")]
    EmptyAfterCleanup,
    #[error("malformed topology text at line {line}: {reason}")]
    TextParse { line: usize, reason: String },
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
    #[error("no feasible degree sequence after {attempts} attempts (n={n}, shape={shape}, scale={scale})")]
    InfeasibleDegrees { attempts: usize, n: usize, shape: f64, scale: f64 },
}

/// One direction of an undirected link, identified by the sending node's port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct DirectedEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub port: usize,
}

impl std::fmt::Display for DirectedEdge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    name: String,
    adj: Vec<Vec<NodeId>>,
    links: Vec<(NodeId, NodeId)>,
    /// `offsets[v]` is the global index of `v`'s port 0 among all directed edges.
    offsets: Vec<usize>,
}

impl Topology {
    /// Builds a topology from `n` nodes and undirected links. Parallel links are
    /// collapsed; self-loops, unknown nodes and disconnected graphs are errors.
    pub fn new(
        name: impl Into<String>,
        n: usize,
        links: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, TopologyError> {
        if n < 2 {
            return Err(TopologyError::TooFewNodes(n));
        }
        let mut norm = Vec::new();
        for (u, v) in links {
            if u >= n || v >= n {
                return Err(TopologyError::UnknownNode { u, v, n });
            }
            if u == v {
                return Err(TopologyError::SelfLoop(u));
            }
            norm.push((u.min(v), u.max(v)));
        }
        norm.sort_unstable();
        norm.dedup();

        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &norm {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        let components = components(&adj).len();
        if components != 1 {
            return Err(TopologyError::Disconnected { components });
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0;
        for a in &adj {
            offsets.push(acc);
            acc += a.len();
        }
        offsets.push(acc);
        Ok(Topology { name: name.into(), adj, links: norm, offsets })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn nodes(&self) -> std::ops::Range<NodeId> {
        0..self.adj.len()
    }

    /// Undirected links as `(u, v)` with `u < v`, sorted.
    pub fn links(&self) -> &[(NodeId, NodeId)] {
        &self.links
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    /// Neighbors of `v` in port order.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.adj[v]
    }

    pub fn directed_edge_count(&self) -> usize {
        2 * self.links.len()
    }

    /// Port on `from` that leads to `to`, if the two are adjacent.
    pub fn port_of(&self, from: NodeId, to: NodeId) -> Option<usize> {
        self.adj.get(from)?.binary_search(&to).ok()
    }

    pub fn directed_edge(&self, from: NodeId, to: NodeId) -> Option<DirectedEdge> {
        self.port_of(from, to).map(|port| DirectedEdge { from, to, port })
    }

    /// The edge leaving `node` through `port`.
    pub fn edge_at(&self, node: NodeId, port: usize) -> DirectedEdge {
        DirectedEdge { from: node, to: self.adj[node][port], port }
    }

    /// Position of `e` in (node-id, port) order over all directed edges.
    pub fn edge_index(&self, e: &DirectedEdge) -> usize {
        self.offsets[e.from] + e.port
    }

    /// All directed edges in (node-id, port) order.
    pub fn directed_edges(&self) -> impl Iterator<Item = DirectedEdge> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(from, ns)| ns.iter().enumerate().map(move |(port, &to)| DirectedEdge { from, to, port }))
    }

    /// Eccentricity maximum, by BFS from every node.
    pub fn diameter(&self) -> usize {
        self.nodes().map(|s| bfs_depths(&self.adj, s).into_iter().max().unwrap_or(0)).max().unwrap_or(0)
    }

    /// Line-oriented text: `N <count>` then one `u v` line per link.
    pub fn to_text(&self) -> String {
        let mut out = format!("N {}\n", self.node_count());
        for (u, v) in &self.links {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn from_text(name: impl Into<String>, text: &str) -> Result<Self, TopologyError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hline, header) = lines.next().ok_or(TopologyError::TextParse { line: 1, reason: "missing `N <count>` header".into() })?;
        let mut parts = header.split_whitespace();
        let n = match (parts.next(), parts.next().map(str::parse::<usize>), parts.next()) {
            (Some("N"), Some(Ok(n)), None) => n,
            _ => return Err(TopologyError::TextParse { line: hline + 1, reason: format!("expected `N <count>`, got {header:?}") }),
        };
        let mut links = Vec::new();
        for (i, l) in lines {
            let nums: Vec<_> = l.split_whitespace().map(str::parse::<usize>).collect();
            match nums.as_slice() {
                [Ok(u), Ok(v)] => links.push((*u, *v)),
                _ => return Err(TopologyError::TextParse { line: i + 1, reason: format!("expected `u v`, got {l:?}") }),
            }
        }
        Topology::new(name, n, links)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeStats {
    pub degrees: Vec<usize>,
    pub max: usize,
    pub mean: f64,
}

pub fn degree_stats(topo: &Topology) -> DegreeStats {
    let degrees: Vec<usize> = topo.nodes().map(|v| topo.degree(v)).collect();
    let max = degrees.iter().copied().max().unwrap_or(0);
    let mean = degrees.iter().sum::<usize>() as f64 / degrees.len() as f64;
    DegreeStats { degrees, max, mean }
}

/// Connected components as sorted node lists, ordered by smallest member.
pub(crate) fn components(adj: &[Vec<NodeId>]) -> Vec<Vec<NodeId>> {
    let mut seen = vec![false; adj.len()];
    let mut out = Vec::new();
    for s in 0..adj.len() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn bfs_depths(adj: &[Vec<NodeId>], s: NodeId) -> Vec<usize> {
    let mut depth = vec![usize::MAX; adj.len()];
    depth[s] = 0;
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for &w in &adj[u] {
            if depth[w] == usize::MAX {
                depth[w] = depth[u] + 1;
                queue.push_back(w);
            }
        }
    }
    depth
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::Topology;

    pub fn line3() -> Topology {
        Topology::new("line3", 3, [(0, 1), (1, 2)]).unwrap()
    }

    pub fn cycle4() -> Topology {
        Topology::new("cycle4", 4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap()
    }

    pub fn complete(n: usize) -> Topology {
        let links = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Topology::new(format!("k{n}"), n, links).unwrap()
    }

    pub fn star(leaves: usize) -> Topology {
        Topology::new(format!("star{leaves}"), leaves + 1, (1..=leaves).map(|l| (0, l))).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn ports_follow_neighbor_order() {
        let t = Topology::new("t", 4, [(2, 0), (0, 3), (0, 1)]).unwrap();
        assert_eq!(t.neighbors(0), &[1, 2, 3]);
        assert_eq!(t.port_of(0, 3), Some(2));
        assert_eq!(t.port_of(1, 3), None);
        let edges: Vec<_> = t.directed_edges().collect();
        assert_eq!(edges.len(), 6);
        for (i, e) in edges.iter().enumerate() {
            assert_eq!(t.edge_index(e), i);
        }
    }

    #[test]
    fn parallel_links_collapse() {
        let t = Topology::new("dup", 2, [(0, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(t.links(), &[(0, 1)]);
        assert_eq!(t.directed_edge_count(), 2);
    }

    #[test]
    fn invalid_graphs_rejected() {
        assert_eq!(Topology::new("x", 1, []), Err(TopologyError::TooFewNodes(1)));
        assert_eq!(Topology::new("x", 3, [(0, 0), (1, 2)]), Err(TopologyError::SelfLoop(0)));
        assert_eq!(Topology::new("x", 4, [(0, 1), (2, 3)]), Err(TopologyError::Disconnected { components: 2 }));
        assert!(matches!(Topology::new("x", 2, [(0, 5)]), Err(TopologyError::UnknownNode { .. })));
    }

    #[test]
    fn degree_stats_examples() {
        let s = degree_stats(&line3());
        assert_eq!(s.degrees, vec![1, 2, 1]);
        assert_eq!(s.max, 2);
        let s = degree_stats(&complete(4));
        assert_eq!(s.degrees, vec![3; 4]);
        assert_eq!(s.mean, 3.0);
    }

    #[test]
    fn text_round_trip_and_errors() {
        let t = cycle4();
        let back = Topology::from_text("cycle4", &t.to_text()).unwrap();
        assert_eq!(back, t);
        assert!(matches!(Topology::from_text("x", "M 3\n"), Err(TopologyError::TextParse { line: 1, .. })));
        assert!(matches!(Topology::from_text("x", "N 3\n0 1\n1\n"), Err(TopologyError::TextParse { line: 3, .. })));
    }

    #[test]
    fn diameter_of_line_and_complete() {
        assert_eq!(line3().diameter(), 2);
        assert_eq!(complete(5).diameter(), 1);
        assert_eq!(star(4).diameter(), 2);
    }
}
