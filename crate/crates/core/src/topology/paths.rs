use std::collections::VecDeque;

use super::{DirectedEdge, NodeId, Topology};

/// A simple path `⟨s, …, t⟩` together with the directed edges it crosses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<DirectedEdge>,
}

impl Path {
    pub fn source(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn target(&self) -> NodeId {
        *self.nodes.last().expect("path has nodes")
    }

    /// Hop count, `|nodes| - 1`.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Hop-count shortest paths for every ordered node pair.
///
/// Stored as one BFS predecessor array per source; [`PathSet::path`] walks it
/// back, so the memory cost is `O(N²)` integers rather than `O(N² · ℓ)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSet {
    n: usize,
    pred: Vec<u32>,
    pred_port: Vec<u32>,
    dist: Vec<u32>,
}

const NONE: u32 = u32::MAX;

/// BFS from every source with neighbors visited in ascending id order. The first
/// discoverer of a node is its lexicographically smallest shortest-path
/// predecessor, which makes the whole path the lexicographically smallest
/// shortest node sequence.
pub fn all_pairs_shortest_paths(topo: &Topology) -> PathSet {
    let n = topo.node_count();
    let mut pred = vec![NONE; n * n];
    let mut pred_port = vec![NONE; n * n];
    let mut dist = vec![NONE; n * n];
    let mut queue = VecDeque::with_capacity(n);
    for s in 0..n {
        let row = s * n;
        dist[row + s] = 0;
        queue.clear();
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for (port, &w) in topo.neighbors(u).iter().enumerate() {
                if dist[row + w] == NONE {
                    dist[row + w] = dist[row + u] + 1;
                    pred[row + w] = u as u32;
                    pred_port[row + w] = port as u32;
                    queue.push_back(w);
                }
            }
        }
    }
    PathSet { n, pred, pred_port, dist }
}

impl PathSet {
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of ordered pairs, `N(N-1)`.
    pub fn len(&self) -> usize {
        self.n * (self.n - 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Hop count of the path `s → t`.
    pub fn length(&self, s: NodeId, t: NodeId) -> usize {
        self.dist[s * self.n + t] as usize
    }

    pub fn path(&self, s: NodeId, t: NodeId) -> Path {
        assert!(s != t && s < self.n && t < self.n, "path({s}, {t}) undefined");
        let row = s * self.n;
        let len = self.dist[row + t] as usize;
        let mut nodes = vec![0; len + 1];
        let mut edges = Vec::with_capacity(len);
        let mut cur = t;
        for i in (1..=len).rev() {
            nodes[i] = cur;
            let p = self.pred[row + cur] as usize;
            edges.push(DirectedEdge { from: p, to: cur, port: self.pred_port[row + cur] as usize });
            cur = p;
        }
        nodes[0] = s;
        edges.reverse();
        Path { nodes, edges }
    }

    /// Ordered pairs `(s, t)`, `s ≠ t`, in row-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |s| (0..n).filter(move |&t| t != s).map(move |t| (s, t)))
    }

    pub fn iter(&self) -> impl Iterator<Item = Path> + '_ {
        self.pairs().map(|(s, t)| self.path(s, t))
    }

    /// Sum of all path lengths.
    pub fn total_length(&self) -> u64 {
        self.pairs().map(|(s, t)| self.length(s, t) as u64).sum()
    }

    /// Nodes on `s → t` that forward the packet: every node except `t`.
    pub(crate) fn for_each_forwarding_node(&self, s: NodeId, t: NodeId, mut f: impl FnMut(NodeId)) {
        let row = s * self.n;
        let mut cur = t;
        while cur != s {
            cur = self.pred[row + cur] as usize;
            f(cur);
        }
    }
}

/// `Σ ℓ(c) / (N(N-1))` over all ordered pairs.
pub fn mean_path_length(paths: &PathSet) -> f64 {
    paths.total_length() as f64 / paths.len() as f64
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    /// Exhaustive simple-path enumeration; returns the lexicographically smallest
    /// among the shortest node sequences from `s` to `t`.
    fn brute_force_path(topo: &Topology, s: NodeId, t: NodeId) -> Vec<NodeId> {
        fn dfs(topo: &Topology, cur: &mut Vec<NodeId>, t: NodeId, best: &mut Option<Vec<NodeId>>) {
            let u = *cur.last().unwrap();
            if u == t {
                let better = match best {
                    None => true,
                    Some(b) => cur.len() < b.len() || (cur.len() == b.len() && *cur < *b),
                };
                if better {
                    *best = Some(cur.clone());
                }
                return;
            }
            for &w in topo.neighbors(u) {
                if !cur.contains(&w) {
                    cur.push(w);
                    dfs(topo, cur, t, best);
                    cur.pop();
                }
            }
        }
        let mut best = None;
        dfs(topo, &mut vec![s], t, &mut best);
        best.unwrap()
    }

    #[test]
    fn line_path_unique() {
        let t = line3();
        let ps = all_pairs_shortest_paths(&t);
        let p = ps.path(0, 2);
        assert_eq!(p.nodes, vec![0, 1, 2]);
        assert_eq!(p.len(), 2);
        assert_eq!(p.edges, vec![t.directed_edge(0, 1).unwrap(), t.directed_edge(1, 2).unwrap()]);
    }

    #[test]
    fn cycle_tie_break_prefers_smaller_id() {
        let ps = all_pairs_shortest_paths(&cycle4());
        assert_eq!(ps.path(0, 2).nodes, vec![0, 1, 2]);
        assert_eq!(ps.path(1, 3).nodes, vec![1, 0, 3]);
    }

    #[test]
    fn complete_graph_paths_are_single_hops() {
        let ps = all_pairs_shortest_paths(&complete(4));
        assert_eq!(ps.len(), 12);
        assert!(ps.iter().all(|p| p.len() == 1));
        assert_eq!(mean_path_length(&ps), 1.0);
    }

    #[test]
    fn mean_path_length_examples() {
        // line: lengths 1,1,1,1,2,2 over 6 pairs
        let ps = all_pairs_shortest_paths(&line3());
        assert!((mean_path_length(&ps) - 4.0 / 3.0).abs() < 1e-15);
        // star K_{1,4}: 8 center/leaf pairs at 1 hop, 12 leaf/leaf pairs at 2 hops
        let ps = all_pairs_shortest_paths(&star(4));
        assert!((mean_path_length(&ps) - 1.6).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force_on_small_graphs() {
        let graphs = [
            cycle4(),
            complete(5),
            star(3),
            Topology::new("ladder", 6, [(0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5)]).unwrap(),
            Topology::new("petersen", 10, [
                (0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 5), (1, 6), (2, 7), (3, 8), (4, 9),
                (5, 7), (7, 9), (9, 6), (6, 8), (8, 5),
            ])
            .unwrap(),
        ];
        for g in &graphs {
            let ps = all_pairs_shortest_paths(g);
            for (s, t) in ps.pairs() {
                assert_eq!(ps.path(s, t).nodes, brute_force_path(g, s, t), "{} {s}->{t}", g.name());
            }
        }
    }
}
