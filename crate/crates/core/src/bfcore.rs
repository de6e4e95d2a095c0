//! Link identifiers, forwarding identifiers and the Bloom-filter membership test.
//!
//! Every directed edge gets a [`Lid`]. A path or tree is encoded as the bitwise
//! OR of its edge Lids, the [`Fid`] carried in the packet. A switch forwards on an
//! outgoing edge iff all bits of that edge's Lid are present in the Fid.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bits::{Bits, BitsError};
use crate::topology::{DirectedEdge, NodeId, Path, PathSet, Topology};

pub const DEFAULT_WIDTH: usize = 256;
/// IPv6 flow label + source + destination.
pub const IPV6_WIDTH: usize = 276;
pub const DEFAULT_RANDOM_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LidError {
    #[error("exclusive LIDs need one bit per directed edge: {edges} edges need width >= {edges}, have {width}")]
    Capacity { edges: usize, width: usize },
    #[error("random-k needs 1 <= k < width, got k={k}, width={width}")]
    InvalidK { k: usize, width: usize },
    #[error("edge {0} has no LID")]
    MissingEdge(DirectedEdge),
    #[error("LID for edge {0} is zero")]
    ZeroLid(DirectedEdge),
    #[error("LID strategy {0} cannot be generated, build the map with LidMap::from_entries")]
    NotGenerated(LidStrategy),
    #[error("cannot OR an empty FID list")]
    EmptyFidList,
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error(transparent)]
    Bits(#[from] BitsError),
}

/// Identifier of one directed edge. Never zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Lid(Bits);

/// In-packet Bloom filter: the OR of the Lids of an edge set. Zero encodes nothing.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Fid(Bits);

impl Lid {
    pub fn new(bits: Bits) -> Option<Lid> {
        (!bits.is_zero()).then_some(Lid(bits))
    }

    pub fn bits(&self) -> &Bits {
        &self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }
}

impl Fid {
    pub fn zero(width: usize) -> Result<Fid, BitsError> {
        Bits::zeros(width).map(Fid)
    }

    pub fn from_bits(bits: Bits) -> Fid {
        Fid(bits)
    }

    pub fn bits(&self) -> &Bits {
        &self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn popcount(&self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn from_hex(width: usize, text: &str) -> Result<Fid, BitsError> {
        Bits::from_hex(width, text).map(Fid)
    }

    pub fn to_hex(&self) -> String {
        self.0.to_hex()
    }

    /// Adds `lid` to the encoded set.
    pub fn insert(&mut self, lid: &Lid) {
        self.0 = self.0 | lid.0;
    }
}

impl From<Lid> for Fid {
    fn from(l: Lid) -> Fid {
        Fid(l.0)
    }
}

impl fmt::Display for Lid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Debug for Lid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Lid({})", self.0)
    }
}

impl fmt::Display for Fid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Debug for Fid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fid({})", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LidStrategy {
    /// Bit `i` for the `i`-th directed edge in (node-id, port) order.
    Exclusive,
    /// `k` distinct uniformly chosen bits per edge.
    RandomK { k: usize },
    /// Supplied by the caller via [`LidMap::from_entries`].
    Custom,
}

impl fmt::Display for LidStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LidStrategy::Exclusive => f.write_str("exclusive"),
            LidStrategy::RandomK { k } => write!(f, "random-{k}"),
            LidStrategy::Custom => f.write_str("custom"),
        }
    }
}

/// Lids for every directed edge of a topology, kept in (node-id, port) order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LidMap {
    width: usize,
    strategy: LidStrategy,
    entries: Vec<(DirectedEdge, Lid)>,
}

impl LidMap {
    /// Builds a map from explicit assignments, e.g. to give both directions of
    /// a link the same Lid.
    pub fn from_entries(width: usize, entries: impl IntoIterator<Item = (DirectedEdge, Bits)>) -> Result<LidMap, LidError> {
        let mut out = Vec::new();
        for (e, bits) in entries {
            if bits.width() != width {
                return Err(BitsError::WidthMismatch { left: width, right: bits.width() }.into());
            }
            out.push((e, Lid::new(bits).ok_or(LidError::ZeroLid(e))?));
        }
        out.sort_by_key(|(e, _)| *e);
        Ok(LidMap { width, strategy: LidStrategy::Custom, entries: out })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn strategy(&self) -> LidStrategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, e: &DirectedEdge) -> Option<&Lid> {
        self.entries.binary_search_by_key(&(e.from, e.to), |(x, _)| (x.from, x.to)).ok().map(|i| &self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(DirectedEdge, Lid)> {
        self.entries.iter()
    }

    /// Lids of `node`'s outgoing edges in port order.
    pub fn port_lids(&self, node: NodeId) -> Vec<Lid> {
        let lo = self.entries.partition_point(|(e, _)| e.from < node);
        let hi = self.entries.partition_point(|(e, _)| e.from <= node);
        self.entries[lo..hi].iter().map(|(_, l)| *l).collect()
    }

    /// True when every directed edge of `topo` has a Lid.
    pub fn covers(&self, topo: &Topology) -> bool {
        topo.directed_edges().all(|e| self.get(&e).is_some())
    }
}

/// Assigns a Lid to every directed edge of `topo`.
pub fn assign_lids(topo: &Topology, width: usize, strategy: LidStrategy, seed: u64) -> Result<LidMap, LidError> {
    Bits::zeros(width)?;
    let edges = topo.directed_edge_count();
    let entries = match strategy {
        LidStrategy::Exclusive => {
            if edges > width {
                return Err(LidError::Capacity { edges, width });
            }
            topo.directed_edges()
                .enumerate()
                .map(|(i, e)| Ok((e, Lid(Bits::with_bits(width, [i])?))))
                .collect::<Result<Vec<_>, LidError>>()?
        }
        LidStrategy::RandomK { k } => {
            if k == 0 || k >= width {
                return Err(LidError::InvalidK { k, width });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            topo.directed_edges()
                .map(|e| {
                    let chosen = index::sample(&mut rng, width, k);
                    Ok((e, Lid(Bits::with_bits(width, chosen.iter())?)))
                })
                .collect::<Result<Vec<_>, LidError>>()?
        }
        LidStrategy::Custom => return Err(LidError::NotGenerated(strategy)),
    };
    Ok(LidMap { width, strategy, entries })
}

/// Bloom-filter membership: every bit of `lid` is set in `fid`.
#[inline]
pub fn lid_match(lid: &Lid, fid: &Fid) -> bool {
    fid.0.contains(&lid.0)
}

fn fid_of_edges<'a>(edges: impl IntoIterator<Item = &'a DirectedEdge>, lids: &LidMap) -> Result<Fid, LidError> {
    let mut fid = Fid::zero(lids.width)?;
    for e in edges {
        fid.insert(lids.get(e).ok_or(LidError::MissingEdge(*e))?);
    }
    Ok(fid)
}

pub fn fid_of_path(path: &Path, lids: &LidMap) -> Result<Fid, LidError> {
    fid_of_edges(&path.edges, lids)
}

pub fn fid_of_tree(tree: &Tree, lids: &LidMap) -> Result<Fid, LidError> {
    fid_of_edges(&tree.edges, lids)
}

/// Union of the encoded edge sets, e.g. several unicast Fids from one source
/// merged into a multicast Fid.
pub fn or_fids(fids: &[Fid]) -> Result<Fid, LidError> {
    let (first, rest) = fids.split_first().ok_or(LidError::EmptyFidList)?;
    let mut acc = first.0;
    for f in rest {
        acc = acc.try_or(&f.0)?;
    }
    Ok(Fid(acc))
}

/// Edges from `root` towards a set of destinations.
///
/// The edge set is acyclic and every edge lies on some root→destination walk.
/// A union of shortest paths from one root always satisfies this, even when it is
/// not an arborescence; [`Tree::is_arborescence`] tells the two apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    pub root: NodeId,
    pub edges: BTreeSet<DirectedEdge>,
    pub destinations: BTreeSet<NodeId>,
}

impl Tree {
    pub fn new(root: NodeId, edges: BTreeSet<DirectedEdge>, destinations: BTreeSet<NodeId>) -> Result<Tree, LidError> {
        let tree = Tree { root, edges, destinations };
        tree.validate()?;
        Ok(tree)
    }

    /// Union of paths that all start at the same node.
    pub fn from_paths(paths: &[Path]) -> Result<Tree, LidError> {
        let root = paths.first().ok_or_else(|| LidError::InvalidTree("no paths".into()))?.source();
        if let Some(p) = paths.iter().find(|p| p.source() != root) {
            return Err(LidError::InvalidTree(format!("path starts at {} but root is {root}", p.source())));
        }
        let edges = paths.iter().flat_map(|p| p.edges.iter().copied()).collect();
        let destinations = paths.iter().map(Path::target).collect();
        Tree::new(root, edges, destinations)
    }

    /// Tree of `paths.path(root, t)` for every destination `t`.
    pub fn from_path_set(paths: &PathSet, root: NodeId, destinations: &[NodeId]) -> Result<Tree, LidError> {
        let ps: Vec<Path> = destinations.iter().filter(|&&t| t != root).map(|&t| paths.path(root, t)).collect();
        if ps.is_empty() {
            return Err(LidError::InvalidTree("no destination other than the root".into()));
        }
        Tree::from_paths(&ps)
    }

    /// Every non-root node has at most one incoming tree edge and the root none.
    pub fn is_arborescence(&self) -> bool {
        let mut indeg: BTreeMap<NodeId, usize> = BTreeMap::new();
        for e in &self.edges {
            *indeg.entry(e.to).or_default() += 1;
        }
        indeg.get(&self.root).is_none() && indeg.values().all(|&d| d == 1)
    }

    fn validate(&self) -> Result<(), LidError> {
        let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        let mut inc: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for e in &self.edges {
            out.entry(e.from).or_default().push(e.to);
            inc.entry(e.to).or_default().push(e.from);
        }
        // forward reachability from the root
        let reach = walk(self.root, &out);
        if let Some(d) = self.destinations.iter().find(|d| !reach.contains(d)) {
            return Err(LidError::InvalidTree(format!("destination {d} unreachable from root {}", self.root)));
        }
        // every edge must lead back from some destination
        let mut coreach = BTreeSet::new();
        for &d in &self.destinations {
            coreach.extend(walk(d, &inc));
        }
        if let Some(e) = self.edges.iter().find(|e| !reach.contains(&e.from) || !coreach.contains(&e.to)) {
            return Err(LidError::InvalidTree(format!("edge {e} is not on a root-to-destination path")));
        }
        if has_cycle(&out) {
            return Err(LidError::InvalidTree("edge set contains a cycle".into()));
        }
        Ok(())
    }
}

fn walk(start: NodeId, next: &BTreeMap<NodeId, Vec<NodeId>>) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &w in next.get(&u).into_iter().flatten() {
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen
}

fn has_cycle(out: &BTreeMap<NodeId, Vec<NodeId>>) -> bool {
    // 0 unvisited, 1 on stack, 2 done
    let mut state: BTreeMap<NodeId, u8> = BTreeMap::new();
    for &start in out.keys() {
        if state.get(&start).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        state.insert(start, 1);
        while let Some(&mut (u, ref mut i)) = stack.last_mut() {
            let succ = out.get(&u).map(Vec::as_slice).unwrap_or(&[]);
            if *i < succ.len() {
                let w = succ[*i];
                *i += 1;
                match state.get(&w).copied().unwrap_or(0) {
                    1 => return true,
                    0 => {
                        state.insert(w, 1);
                        stack.push((w, 0));
                    }
                    _ => {}
                }
            } else {
                state.insert(u, 2);
                stack.pop();
            }
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathFalsePositives {
    pub source: NodeId,
    pub target: NodeId,
    pub popcount: u32,
    /// Off-path directed edges whose Lid matches the path Fid.
    pub false_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FalsePositiveAudit {
    pub per_path: Vec<PathFalsePositives>,
    pub total_false_positives: usize,
    /// Number of (path, off-path edge) tests performed.
    pub tests: usize,
    pub paths_with_false_positives: usize,
}

impl FalsePositiveAudit {
    pub fn rate(&self) -> f64 {
        if self.tests == 0 {
            0.0
        } else {
            self.total_false_positives as f64 / self.tests as f64
        }
    }
}

/// Tests every off-path directed edge against every path Fid.
pub fn false_positive_audit(topo: &Topology, lids: &LidMap, paths: &PathSet) -> Result<FalsePositiveAudit, LidError> {
    let all: Vec<(DirectedEdge, Lid)> = topo
        .directed_edges()
        .map(|e| lids.get(&e).map(|l| (e, *l)).ok_or(LidError::MissingEdge(e)))
        .collect::<Result<_, _>>()?;
    // An edge can only match a Fid that contains its lowest Lid bit, so bucket by it.
    let mut by_low_bit: Vec<Vec<usize>> = vec![Vec::new(); lids.width()];
    for (i, (_, l)) in all.iter().enumerate() {
        let low = l.bits().ones_iter().next().expect("lids are non-zero");
        by_low_bit[low].push(i);
    }
    let mut per_path = Vec::with_capacity(paths.len());
    let mut tests = 0;
    for (s, t) in paths.pairs() {
        let path = paths.path(s, t);
        let fid = fid_of_path(&path, lids)?;
        let mut fp = 0;
        for b in fid.bits().ones_iter() {
            for &i in &by_low_bit[b] {
                let (e, l) = &all[i];
                if lid_match(l, &fid) && !path.edges.contains(e) {
                    fp += 1;
                }
            }
        }
        tests += all.len() - path.len();
        per_path.push(PathFalsePositives { source: s, target: t, popcount: fid.popcount(), false_positives: fp });
    }
    let total_false_positives = per_path.iter().map(|p| p.false_positives).sum();
    let paths_with_false_positives = per_path.iter().filter(|p| p.false_positives > 0).count();
    Ok(FalsePositiveAudit { per_path, total_false_positives, tests, paths_with_false_positives })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{all_pairs_shortest_paths, fixtures::*};
    use proptest::prelude::*;

    fn bits(width: usize, v: u128) -> Bits {
        Bits::from_u128(width, v).unwrap()
    }

    fn lid(width: usize, v: u128) -> Lid {
        Lid::new(bits(width, v)).unwrap()
    }

    fn fid(width: usize, v: u128) -> Fid {
        Fid::from_bits(bits(width, v))
    }

    #[test]
    fn exclusive_assignment_order() {
        let t = line3();
        let m = assign_lids(&t, 8, LidStrategy::Exclusive, 0).unwrap();
        let got: Vec<_> = m.iter().map(|(e, l)| ((e.from, e.to), l.bits().extract(0, 8))).collect();
        assert_eq!(got, vec![((0, 1), 0b0001), ((1, 0), 0b0010), ((1, 2), 0b0100), ((2, 1), 0b1000)]);
    }

    #[test]
    fn exclusive_capacity_error() {
        // directed edge counts are even, so 130 is the first count over 128
        let t = Topology::new("path66", 66, (0..65).map(|i| (i, i + 1))).unwrap();
        assert_eq!(t.directed_edge_count(), 130);
        assert_eq!(assign_lids(&t, 128, LidStrategy::Exclusive, 0), Err(LidError::Capacity { edges: 130, width: 128 }));
        let t = Topology::new("path65", 65, (0..64).map(|i| (i, i + 1))).unwrap();
        assert!(assign_lids(&t, 128, LidStrategy::Exclusive, 0).is_ok());
    }

    #[test]
    fn random_k_is_seeded_and_has_k_bits() {
        let t = complete(5);
        let a = assign_lids(&t, 256, LidStrategy::RandomK { k: 5 }, 9).unwrap();
        let b = assign_lids(&t, 256, LidStrategy::RandomK { k: 5 }, 9).unwrap();
        let c = assign_lids(&t, 256, LidStrategy::RandomK { k: 5 }, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|(_, l)| l.bits().count_ones() == 5));
        assert!(matches!(assign_lids(&t, 8, LidStrategy::RandomK { k: 8 }, 0), Err(LidError::InvalidK { .. })));
        assert!(matches!(assign_lids(&t, 8, LidStrategy::RandomK { k: 0 }, 0), Err(LidError::InvalidK { .. })));
    }

    #[test]
    fn lid_match_examples() {
        assert!(lid_match(&lid(4, 0b0010), &fid(4, 0b0111)));
        assert!(!lid_match(&lid(4, 0b1000), &fid(4, 0b0111)));
        assert!(!lid_match(&lid(4, 0b0110), &fid(4, 0b0100)));
    }

    #[test]
    fn fid_of_path_is_or() {
        let t = Topology::new("p", 4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let e = |a, b| t.directed_edge(a, b).unwrap();
        let m = LidMap::from_entries(4, [(e(0, 1), bits(4, 0b0001)), (e(1, 2), bits(4, 0b0010)), (e(2, 3), bits(4, 0b0100))]).unwrap();
        let ps = all_pairs_shortest_paths(&t);
        assert_eq!(fid_of_path(&ps.path(0, 3), &m).unwrap(), fid(4, 0b0111));
        // reverse edges are absent from this custom map
        assert_eq!(fid_of_path(&ps.path(1, 0), &m), Err(LidError::MissingEdge(e(1, 0))));
    }

    #[test]
    fn single_edge_and_two_edge_paths() {
        let t = line3();
        let m = assign_lids(&t, 8, LidStrategy::Exclusive, 0).unwrap();
        let ps = all_pairs_shortest_paths(&t);
        let one = fid_of_path(&ps.path(2, 1), &m).unwrap();
        assert_eq!(one, fid(8, 0b1000));
        assert_eq!(fid_of_path(&ps.path(0, 2), &m).unwrap().popcount(), 2);
    }

    #[test]
    fn tree_fids() {
        // 0 - 1 - {2, 3}: paths 0→2 and 0→3 share edge 0→1
        let t = Topology::new("y", 4, [(0, 1), (1, 2), (1, 3)]).unwrap();
        let m = assign_lids(&t, 16, LidStrategy::Exclusive, 0).unwrap();
        let ps = all_pairs_shortest_paths(&t);
        let tree = Tree::from_path_set(&ps, 0, &[2, 3]).unwrap();
        assert!(tree.is_arborescence());
        let f1 = fid_of_path(&ps.path(0, 2), &m).unwrap();
        let f2 = fid_of_path(&ps.path(0, 3), &m).unwrap();
        assert_eq!(fid_of_tree(&tree, &m).unwrap(), or_fids(&[f1, f2]).unwrap());
        let single = Tree::from_path_set(&ps, 0, &[2]).unwrap();
        assert_eq!(fid_of_tree(&single, &m).unwrap(), f1);

        let s = star(3);
        let m = assign_lids(&s, 16, LidStrategy::Exclusive, 0).unwrap();
        let tree = Tree::from_path_set(&all_pairs_shortest_paths(&s), 0, &[1, 2, 3]).unwrap();
        assert_eq!(fid_of_tree(&tree, &m).unwrap().popcount(), 3);
    }

    #[test]
    fn invalid_trees_rejected() {
        let t = line3();
        let e = |a, b| t.directed_edge(a, b).unwrap();
        assert!(Tree::new(0, [e(0, 1)].into(), [2].into()).is_err());
        // dangling edge 1→0 does not lead to a destination
        assert!(Tree::new(0, [e(0, 1), e(1, 2), e(1, 0)].into(), [2].into()).is_err());
        let c = cycle4();
        let e = |a, b| c.directed_edge(a, b).unwrap();
        assert!(Tree::new(0, [e(0, 1), e(1, 2), e(2, 3), e(3, 0)].into(), [3].into()).is_err());
        assert!(Tree::new(0, [e(0, 1), e(1, 2)].into(), [2].into()).is_ok());
    }

    #[test]
    fn or_fids_examples() {
        assert_eq!(or_fids(&[fid(4, 0b0011), fid(4, 0b0101)]).unwrap(), fid(4, 0b0111));
        let f = fid(4, 0b1010);
        assert_eq!(or_fids(&[f, f]).unwrap(), f);
        assert_eq!(or_fids(&[]), Err(LidError::EmptyFidList));
        assert!(matches!(or_fids(&[fid(4, 1), fid(8, 1)]), Err(LidError::Bits(BitsError::WidthMismatch { .. }))));
    }

    #[test]
    fn zero_lid_rejected() {
        let t = line3();
        let e = t.directed_edge(0, 1).unwrap();
        assert_eq!(LidMap::from_entries(8, [(e, bits(8, 0))]), Err(LidError::ZeroLid(e)));
    }

    #[test]
    fn exclusive_audit_is_clean() {
        for t in [line3(), cycle4(), complete(6), star(7)] {
            let m = assign_lids(&t, 256, LidStrategy::Exclusive, 0).unwrap();
            let a = false_positive_audit(&t, &m, &all_pairs_shortest_paths(&t)).unwrap();
            assert_eq!(a.total_false_positives, 0);
            assert_eq!(a.per_path.len(), t.node_count() * (t.node_count() - 1));
        }
    }

    #[test]
    fn pigeonhole_collision_is_reported() {
        // line3 has 4 directed edges; W=2 random-1 forces shared bits
        let t = line3();
        let m = assign_lids(&t, 2, LidStrategy::RandomK { k: 1 }, 3).unwrap();
        let a = false_positive_audit(&t, &m, &all_pairs_shortest_paths(&t)).unwrap();
        assert!(a.total_false_positives >= 1);
        assert!(a.paths_with_false_positives >= 1);
    }

    /// Brute-force audit: test every edge against every path without bucketing.
    fn audit_oracle(topo: &Topology, lids: &LidMap, paths: &PathSet) -> usize {
        let mut total = 0;
        for p in paths.iter() {
            let f = fid_of_path(&p, lids).unwrap();
            total += topo.directed_edges().filter(|e| !p.edges.contains(e) && lid_match(lids.get(e).unwrap(), &f)).count();
        }
        total
    }

    #[test]
    fn bucketed_audit_matches_brute_force() {
        for seed in 0..20 {
            let t = crate::topology::gen_weibull_topology(12, 0.42, 2.0, seed).unwrap();
            let m = assign_lids(&t, 32, LidStrategy::RandomK { k: 2 }, seed).unwrap();
            let ps = all_pairs_shortest_paths(&t);
            assert_eq!(false_positive_audit(&t, &m, &ps).unwrap().total_false_positives, audit_oracle(&t, &m, &ps));
        }
    }

    /// Monte Carlo over 100 seeds: the false-positive rate grows with Fid density.
    #[test]
    fn random_k_fp_rate_grows_with_popcount() {
        let mut sums = [(0usize, 0usize); 3];
        for seed in 0..100 {
            let t = crate::topology::gen_weibull_topology(16, 0.42, 2.0, 1000 + seed).unwrap();
            let m = assign_lids(&t, 64, LidStrategy::RandomK { k: 3 }, seed).unwrap();
            let ps = all_pairs_shortest_paths(&t);
            let off_path = t.directed_edge_count();
            for p in false_positive_audit(&t, &m, &ps).unwrap().per_path {
                let bin = match p.popcount {
                    0..=4 => 0,
                    5..=8 => 1,
                    _ => 2,
                };
                sums[bin].0 += p.false_positives;
                sums[bin].1 += off_path;
            }
        }
        let rates: Vec<f64> = sums.iter().map(|(fp, n)| *fp as f64 / (*n).max(1) as f64).collect();
        assert!(rates[0] <= rates[1] && rates[1] <= rates[2], "{rates:?}");
    }

    proptest! {
        #[test]
        fn match_survives_supersets(l in 1u128..(1 << 16), f in any::<u16>(), x in any::<u16>()) {
            let l = lid(16, l);
            let f = fid(16, f as u128);
            let fx = or_fids(&[f, fid(16, x as u128)]).unwrap();
            if lid_match(&l, &f) {
                prop_assert!(lid_match(&l, &fx));
            }
        }

        #[test]
        fn or_popcount_subadditive(vals in proptest::collection::vec(any::<u32>(), 1..6)) {
            let fids: Vec<Fid> = vals.iter().map(|&v| fid(32, v as u128)).collect();
            let or = or_fids(&fids).unwrap();
            let sum: u32 = fids.iter().map(Fid::popcount).sum();
            prop_assert!(or.popcount() <= sum);
            let disjoint = vals.iter().enumerate().all(|(i, a)| vals[i + 1..].iter().all(|b| a & b == 0));
            prop_assert_eq!(or.popcount() == sum, disjoint);
        }

        #[test]
        fn exclusive_lids_match_iff_on_path(seed in 0u64..200) {
            let t = crate::topology::gen_weibull_topology(10, 0.42, 2.0, seed).unwrap();
            prop_assume!(t.directed_edge_count() <= 256);
            let m = assign_lids(&t, 256, LidStrategy::Exclusive, 0).unwrap();
            let ps = all_pairs_shortest_paths(&t);
            for p in ps.iter() {
                let f = fid_of_path(&p, &m).unwrap();
                for e in t.directed_edges() {
                    prop_assert_eq!(lid_match(m.get(&e).unwrap(), &f), p.edges.contains(&e));
                }
            }
        }
    }
}
