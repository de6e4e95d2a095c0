//! Packet forwarding over a network of compiled switches.
//!
//! Injection is breadth-first. Copies of the packet that sit at the same node,
//! arrived over the same port, after the same number of hops are
//! indistinguishable, so each hop level keeps one state per `(node, arrival
//! port)` with a multiplicity. That keeps looping false-positive traffic
//! polynomial while still counting every copy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::bfcore::{Fid, LidMap, Tree};
use crate::flowcomp::{select_and_act, CompileError, FlowTablePipeline, PortNo, Scheme};
use crate::topology::{DirectedEdge, NodeId, Topology};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("LID map has no entry for {0}")]
    IncompleteLids(DirectedEdge),
    #[error("LID width {lids} differs from FID width {fid}")]
    WidthMismatch { lids: usize, fid: usize },
    #[error("node {node} is not in the topology ({n} nodes)")]
    UnknownNode { node: NodeId, n: usize },
    #[error(transparent)]
    Compile(#[from] CompileError),
}

/// Every switch of a topology with its compiled rules. Nothing in here depends
/// on which flows are carried.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledNetwork {
    topology: Topology,
    width: usize,
    scheme: Scheme,
    pipelines: Vec<FlowTablePipeline>,
}

impl CompiledNetwork {
    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pipeline(&self, node: NodeId) -> &FlowTablePipeline {
        &self.pipelines[node]
    }

    pub fn pipelines(&self) -> &[FlowTablePipeline] {
        &self.pipelines
    }

    pub fn total_entries(&self) -> usize {
        self.pipelines.iter().map(FlowTablePipeline::entry_count).sum()
    }
}

/// Compiles every node with its own ports' Lids. For [`Scheme::Bridged`] the
/// bridge count is capped at each node's degree.
pub fn build_network(topo: &Topology, lids: &LidMap, scheme: Scheme, limit: usize) -> Result<CompiledNetwork, NetworkError> {
    if let Some(e) = topo.directed_edges().find(|e| lids.get(e).is_none()) {
        return Err(NetworkError::IncompleteLids(e));
    }
    let pipelines = topo
        .nodes()
        .map(|v| {
            let port_lids = lids.port_lids(v);
            let scheme = match scheme {
                Scheme::Bridged(x) => Scheme::Bridged(x.min(port_lids.len())),
                s => s,
            };
            FlowTablePipeline::compile(v, &port_lids, scheme, limit)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CompiledNetwork { topology: topo.clone(), width: lids.width(), scheme, pipelines })
}

/// Outcome of one injection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeliveryReport {
    pub source: NodeId,
    pub fid: Fid,
    pub traversed_edges: BTreeSet<DirectedEdge>,
    /// Includes the source.
    pub delivered_nodes: BTreeSet<NodeId>,
    /// Arrivals beyond the first at each node (saturating).
    pub duplicate_deliveries: u64,
    /// Copies that would have been forwarded past the hop limit (saturating).
    pub dropped_by_hop_limit: u64,
}

/// Default hop limit for a network of `n` nodes.
pub fn default_hop_limit(n: usize) -> u32 {
    (2 * n) as u32
}

/// Injects a packet carrying `fid` at `source` and follows every copy until it
/// stops being forwarded or has made `hop_limit` hops.
pub fn inject(network: &CompiledNetwork, source: NodeId, fid: &Fid, hop_limit: u32) -> Result<DeliveryReport, NetworkError> {
    let topo = &network.topology;
    let n = topo.node_count();
    if source >= n {
        return Err(NetworkError::UnknownNode { node: source, n });
    }
    if fid.width() != network.width {
        return Err(NetworkError::WidthMismatch { lids: network.width, fid: fid.width() });
    }
    // Forwarding ignores the arrival port except for excluding it, so the
    // output set of each node is computed once.
    let mut outputs: Vec<Option<Vec<PortNo>>> = vec![None; n];
    let mut report = DeliveryReport {
        source,
        fid: *fid,
        traversed_edges: BTreeSet::new(),
        delivered_nodes: BTreeSet::from([source]),
        duplicate_deliveries: 0,
        dropped_by_hop_limit: 0,
    };
    let mut level: BTreeMap<(NodeId, Option<PortNo>), u64> = BTreeMap::from([((source, None), 1)]);
    let mut hops = 0u32;
    while !level.is_empty() {
        let mut next: BTreeMap<(NodeId, Option<PortNo>), u64> = BTreeMap::new();
        for (&(node, in_port), &count) in &level {
            let out = outputs[node]
                .get_or_insert_with(|| select_and_act(&network.pipelines[node], fid.bits(), None));
            let ports = out.iter().filter(|&&p| Some(p) != in_port);
            if hops >= hop_limit {
                let copies = ports.count() as u64;
                report.dropped_by_hop_limit = report.dropped_by_hop_limit.saturating_add(count.saturating_mul(copies));
                continue;
            }
            for &p in ports {
                let edge = topo.edge_at(node, p as usize - 1);
                report.traversed_edges.insert(edge);
                let back = topo.port_of(edge.to, node).expect("links are symmetric") as PortNo + 1;
                let slot = next.entry((edge.to, Some(back))).or_insert(0);
                *slot = slot.saturating_add(count);
                let dup = if report.delivered_nodes.insert(edge.to) { count - 1 } else { count };
                report.duplicate_deliveries = report.duplicate_deliveries.saturating_add(dup);
            }
        }
        level = next;
        hops += 1;
    }
    Ok(report)
}

/// Comparison of a delivery against the intended tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    /// Traversed edges not in the tree.
    pub extra_links: Vec<DirectedEdge>,
    /// Destinations not delivered.
    pub missing: Vec<NodeId>,
    /// Tree edges the packet never crossed.
    pub unused_links: Vec<DirectedEdge>,
}

impl Verdict {
    /// Traversed edges equal the tree edges and every destination was reached.
    pub fn is_exact(&self) -> bool {
        self.extra_links.is_empty() && self.missing.is_empty() && self.unused_links.is_empty()
    }
}

fn edge_list(f: &mut fmt::Formatter<'_>, edges: &[DirectedEdge]) -> fmt::Result {
    for (i, e) in edges.iter().enumerate() {
        if i > 0 {
            f.write_str(" ")?;
        }
        write!(f, "{e}")?;
    }
    Ok(())
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_exact() {
            return f.write_str("exact");
        }
        let mut parts = 0;
        if !self.extra_links.is_empty() {
            f.write_str("extra_links(")?;
            edge_list(f, &self.extra_links)?;
            f.write_str(")")?;
            parts += 1;
        }
        if !self.missing.is_empty() {
            if parts > 0 {
                f.write_str(" ")?;
            }
            let ids: Vec<String> = self.missing.iter().map(ToString::to_string).collect();
            write!(f, "missing({})", ids.join(" "))?;
            parts += 1;
        }
        if !self.unused_links.is_empty() {
            if parts > 0 {
                f.write_str(" ")?;
            }
            f.write_str("unused_links(")?;
            edge_list(f, &self.unused_links)?;
            f.write_str(")")?;
        }
        Ok(())
    }
}

pub fn verify_delivery(report: &DeliveryReport, intended: &Tree) -> Verdict {
    Verdict {
        extra_links: report.traversed_edges.difference(&intended.edges).copied().collect(),
        missing: intended.destinations.difference(&report.delivered_nodes).copied().collect(),
        unused_links: intended.edges.difference(&report.traversed_edges).copied().collect(),
    }
}

/// One CSV row per report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeliveryRow {
    pub source: NodeId,
    pub fid: String,
    pub delivered: usize,
    pub traversed: usize,
    pub extra: usize,
    pub missing: usize,
    pub duplicates: u64,
    pub dropped: u64,
}

impl DeliveryRow {
    pub fn new(report: &DeliveryReport, verdict: &Verdict) -> Self {
        DeliveryRow {
            source: report.source,
            fid: report.fid.to_hex(),
            delivered: report.delivered_nodes.len(),
            traversed: report.traversed_edges.len(),
            extra: verdict.extra_links.len(),
            missing: verdict.missing.len(),
            duplicates: report.duplicate_deliveries,
            dropped: report.dropped_by_hop_limit,
        }
    }
}
