//! Compiling per-switch Bloom-filter forwarding into flow tables.
//!
//! Three layouts are supported:
//!
//! * **multi-table**: one table per port. Table `i` holds a wide entry matching
//!   `L_i/L_i` that outputs on port `i` and continues to table `i+1`, plus a
//!   catch-all that only continues. `2d` entries in total.
//! * **single-table**: one entry per non-empty port subset `S`, matching the OR
//!   of the subset's Lids and outputting on every port of `S`. Larger subsets
//!   get higher priority so the maximal matching subset wins. `2^d - 1` entries.
//! * **bridged(x)**: the ports are spread over `x` bridges, each compiled as a
//!   single table over its own ports. Every bridge sees every packet.
//!
//! Port numbers follow OpenFlow and start at 1: port `i` carries the `i`-th Lid
//! of the switch (its port index `i - 1` in the topology).

mod header;
mod tcam;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::bfcore::Lid;
use crate::bits::Bits;
use crate::topology::NodeId;

pub use header::{decode_header, encode_header, HeaderError, HeaderLayout, OverlayHeader};
use tcam::TcamIndex;

/// Largest degree compiled as a single table (about a million entries).
pub const DEFAULT_EXPLOSION_LIMIT: usize = 20;

pub const MULTITABLE_PRIORITY: u32 = 100;
pub const SINGLETABLE_BASE_PRIORITY: u32 = 1000;

pub type PortNo = u32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("switch {node} has no ports")]
    NoPorts { node: NodeId },
    #[error(
        "single-table compilation of switch {node} with degree {degree} needs 2^{degree} - 1 = {} entries; \
         degrees above {limit} are refused",
        fmt_required(*.degree)
    )]
    ExplosionLimit { node: NodeId, degree: usize, limit: usize },
    #[error("bridge count {bridges} is outside 1..={degree} for switch {node}")]
    InvalidBridgeCount { node: NodeId, bridges: usize, degree: usize },
    #[error("port LIDs of switch {node} have mixed widths")]
    MixedWidths { node: NodeId },
    #[error("match value {value} has bits outside mask {mask}")]
    ValueOutsideMask { value: Bits, mask: Bits },
}

fn fmt_required(degree: usize) -> String {
    if degree < 128 {
        ((1u128 << degree) - 1).to_string()
    } else {
        format!("~{:e}", 2f64.powi(degree as i32))
    }
}

impl CompileError {
    /// Entries a refused single-table compilation would have needed.
    pub fn required_entries(&self) -> Option<f64> {
        match self {
            CompileError::ExplosionLimit { degree, .. } => Some(2f64.powi(*degree as i32) - 1.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Output(PortNo),
    GotoTable(u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowEntry {
    pub priority: u32,
    pub match_value: Bits,
    pub match_mask: Bits,
    pub actions: Vec<Action>,
}

impl FlowEntry {
    pub fn new(priority: u32, match_value: Bits, match_mask: Bits, actions: Vec<Action>) -> Result<Self, CompileError> {
        if match_value.try_and(&match_mask).ok() != Some(match_value) {
            return Err(CompileError::ValueOutsideMask { value: match_value, mask: match_mask });
        }
        Ok(FlowEntry { priority, match_value, match_mask, actions })
    }

    /// Wide BF entry: value and mask both equal a Lid or an OR of Lids.
    fn bloom(priority: u32, pattern: Bits, actions: Vec<Action>) -> Self {
        FlowEntry { priority, match_value: pattern, match_mask: pattern, actions }
    }

    fn catch_all(priority: u32, width: usize, actions: Vec<Action>) -> Self {
        let z = Bits::zeros(width).expect("width validated by caller");
        FlowEntry { priority, match_value: z, match_mask: z, actions }
    }

    pub fn is_catch_all(&self) -> bool {
        self.match_mask.is_zero()
    }
}

/// TCAM decision: `value == header AND mask`.
#[inline]
pub fn tcam_match(header: &Bits, entry: &FlowEntry) -> bool {
    header.width() == entry.match_mask.width() && header.masked_eq(&entry.match_mask, &entry.match_value)
}

/// One flow table. Entries are held highest priority first; equal priorities
/// keep insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowTable {
    entries: Vec<FlowEntry>,
    index: TcamIndex,
}

impl FlowTable {
    pub fn new(mut entries: Vec<FlowEntry>) -> Self {
        entries.sort_by(|a, b| b.priority.cmp(&a.priority));
        let index = TcamIndex::build(entries.iter().map(|e| (&e.match_value, &e.match_mask)));
        FlowTable { entries, index }
    }

    pub fn entries(&self) -> &[FlowEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Highest-priority entry matching `header`.
    pub fn lookup(&self, header: &Bits) -> Option<&FlowEntry> {
        if self.entries.first().is_some_and(|e| e.match_mask.width() != header.width()) {
            return None;
        }
        self.index.lookup(header).map(|i| &self.entries[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scheme {
    MultiTable,
    SingleTable,
    Bridged(usize),
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::MultiTable => f.write_str("multitable"),
            Scheme::SingleTable => f.write_str("singletable"),
            Scheme::Bridged(x) => write!(f, "bridged({x})"),
        }
    }
}

/// Compiled rules of one switch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowTablePipeline {
    pub node: NodeId,
    pub scheme: Scheme,
    pub tables: Vec<FlowTable>,
    /// For bridged pipelines, the ports of each bridge; table `i` is bridge `i`.
    pub bridge_ports: Vec<Vec<PortNo>>,
}

fn check_ports(node: NodeId, port_lids: &[Lid]) -> Result<usize, CompileError> {
    let first = port_lids.first().ok_or(CompileError::NoPorts { node })?;
    if port_lids.iter().any(|l| l.width() != first.width()) {
        return Err(CompileError::MixedWidths { node });
    }
    Ok(first.width())
}

/// One table per port, two entries per table.
pub fn compile_multitable(node: NodeId, port_lids: &[Lid]) -> Result<FlowTablePipeline, CompileError> {
    let width = check_ports(node, port_lids)?;
    let d = port_lids.len();
    let tables = port_lids
        .iter()
        .enumerate()
        .map(|(i, lid)| {
            let next: Vec<Action> = if i + 1 < d { vec![Action::GotoTable(i as u32 + 1)] } else { vec![] };
            let mut hit = vec![Action::Output(i as PortNo + 1)];
            hit.extend(&next);
            FlowTable::new(vec![
                FlowEntry::bloom(MULTITABLE_PRIORITY, *lid.bits(), hit),
                FlowEntry::catch_all(MULTITABLE_PRIORITY - 1, width, next),
            ])
        })
        .collect();
    Ok(FlowTablePipeline { node, scheme: Scheme::MultiTable, tables, bridge_ports: vec![] })
}

/// Entries for every non-empty subset of `ports` (given as (port number, Lid)),
/// ordered by subset size, then lexicographically. Priorities increase along
/// that order.
fn subset_entries(ports: &[(PortNo, Lid)]) -> Vec<FlowEntry> {
    let d = ports.len();
    let mut out = Vec::with_capacity((1usize << d) - 1);
    let mut priority = SINGLETABLE_BASE_PRIORITY;
    let mut combo: Vec<usize> = Vec::with_capacity(d);
    for size in 1..=d {
        combo.clear();
        combo.extend(0..size);
        loop {
            let mut pattern = *ports[combo[0]].1.bits();
            for &i in &combo[1..] {
                pattern = pattern | *ports[i].1.bits();
            }
            let actions = combo.iter().map(|&i| Action::Output(ports[i].0)).collect();
            out.push(FlowEntry::bloom(priority, pattern, actions));
            priority += 1;
            // next combination in lexicographic order
            let Some(pos) = (0..size).rev().find(|&p| combo[p] < d - size + p) else { break };
            combo[pos] += 1;
            for p in pos + 1..size {
                combo[p] = combo[p - 1] + 1;
            }
        }
    }
    out
}

/// One entry per non-empty port subset in a single table.
pub fn compile_singletable(node: NodeId, port_lids: &[Lid], limit: usize) -> Result<FlowTablePipeline, CompileError> {
    check_ports(node, port_lids)?;
    let d = port_lids.len();
    if d > limit {
        return Err(CompileError::ExplosionLimit { node, degree: d, limit });
    }
    let ports: Vec<(PortNo, Lid)> = port_lids.iter().enumerate().map(|(i, l)| (i as PortNo + 1, *l)).collect();
    Ok(FlowTablePipeline {
        node,
        scheme: Scheme::SingleTable,
        tables: vec![FlowTable::new(subset_entries(&ports))],
        bridge_ports: vec![],
    })
}

/// Splits `d` ports into `x` contiguous groups, the first `d mod x` of size
/// `ceil(d/x)` and the rest of size `floor(d/x)`.
pub fn bridge_sizes(d: usize, x: usize) -> Vec<usize> {
    let (q, r) = (d / x, d % x);
    (0..x).map(|i| if i < r { q + 1 } else { q }).collect()
}

/// Splits the switch into `x` single-table bridges.
pub fn compile_bridged(node: NodeId, port_lids: &[Lid], x: usize, limit: usize) -> Result<FlowTablePipeline, CompileError> {
    check_ports(node, port_lids)?;
    let d = port_lids.len();
    if x == 0 || x > d {
        return Err(CompileError::InvalidBridgeCount { node, bridges: x, degree: d });
    }
    let sizes = bridge_sizes(d, x);
    if sizes[0] > limit {
        return Err(CompileError::ExplosionLimit { node, degree: sizes[0], limit });
    }
    let mut start = 0;
    let mut tables = Vec::with_capacity(x);
    let mut bridge_ports = Vec::with_capacity(x);
    for size in sizes {
        let ports: Vec<(PortNo, Lid)> =
            (start..start + size).map(|i| (i as PortNo + 1, port_lids[i])).collect();
        bridge_ports.push(ports.iter().map(|(p, _)| *p).collect());
        tables.push(FlowTable::new(subset_entries(&ports)));
        start += size;
    }
    Ok(FlowTablePipeline { node, scheme: Scheme::Bridged(x), tables, bridge_ports })
}

impl FlowTablePipeline {
    pub fn compile(node: NodeId, port_lids: &[Lid], scheme: Scheme, limit: usize) -> Result<Self, CompileError> {
        match scheme {
            Scheme::MultiTable => compile_multitable(node, port_lids),
            Scheme::SingleTable => compile_singletable(node, port_lids, limit),
            Scheme::Bridged(x) => compile_bridged(node, port_lids, x, limit),
        }
    }

    pub fn entry_count(&self) -> usize {
        self.tables.iter().map(FlowTable::len).sum()
    }
}

/// Runs `header` through the pipeline and returns the output ports, sorted and
/// without `in_port`.
///
/// Multi- and single-table pipelines start at table 0 and follow `goto_table`;
/// in each table only the highest-priority matching entry acts, and a table
/// without a match ends processing. Bridged pipelines evaluate every bridge's
/// table independently and merge their outputs.
pub fn select_and_act(pipeline: &FlowTablePipeline, header: &Bits, in_port: Option<PortNo>) -> Vec<PortNo> {
    let mut out = Vec::new();
    match pipeline.scheme {
        Scheme::Bridged(_) => {
            for t in &pipeline.tables {
                if let Some(e) = t.lookup(header) {
                    apply(&e.actions, &mut out);
                }
            }
        }
        Scheme::MultiTable | Scheme::SingleTable => {
            let mut current = 0usize;
            while let Some(table) = pipeline.tables.get(current) {
                let Some(e) = table.lookup(header) else { break };
                match apply(&e.actions, &mut out) {
                    Some(next) if next > current => current = next,
                    _ => break,
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    if let Some(p) = in_port {
        out.retain(|&q| q != p);
    }
    out
}

fn apply(actions: &[Action], out: &mut Vec<PortNo>) -> Option<usize> {
    let mut goto = None;
    for a in actions {
        match *a {
            Action::Output(p) => out.push(p),
            Action::GotoTable(t) => goto = Some(t as usize),
        }
    }
    goto
}

/// Physical TCAM cost per entry kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotCost {
    /// Entries with a non-empty mask over the wide overloaded field.
    pub wide: u64,
    pub catch_all: u64,
}

impl Default for SlotCost {
    fn default() -> Self {
        SlotCost { wide: 2, catch_all: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EntryCounts {
    pub logical: u64,
    pub tcam_slots: u64,
}

pub fn entry_counts(pipeline: &FlowTablePipeline) -> EntryCounts {
    entry_counts_with(pipeline, SlotCost::default())
}

pub fn entry_counts_with(pipeline: &FlowTablePipeline, cost: SlotCost) -> EntryCounts {
    let mut counts = EntryCounts { logical: 0, tcam_slots: 0 };
    for e in pipeline.tables.iter().flat_map(|t| t.entries()) {
        counts.logical += 1;
        counts.tcam_slots += if e.is_catch_all() { cost.catch_all } else { cost.wide };
    }
    counts
}

#[derive(Serialize)]
struct RuleDoc<'a> {
    switch: NodeId,
    scheme: String,
    tables: Vec<TableDoc<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bridge_ports: Option<&'a [Vec<PortNo>]>,
}

#[derive(Serialize)]
struct TableDoc<'a> {
    index: usize,
    entries: Vec<EntryDoc<'a>>,
}

#[derive(Serialize)]
struct EntryDoc<'a> {
    priority: u32,
    #[serde(rename = "match")]
    match_value: String,
    mask: String,
    actions: &'a [Action],
}

impl FlowTablePipeline {
    /// Rule document: `{switch, scheme, tables: [{index, entries: [{priority, match, mask, actions}]}]}`
    /// with match and mask in fixed-width hex.
    pub fn to_json(&self) -> String {
        let doc = RuleDoc {
            switch: self.node,
            scheme: self.scheme.to_string(),
            tables: self
                .tables
                .iter()
                .enumerate()
                .map(|(index, t)| TableDoc {
                    index,
                    entries: t
                        .entries()
                        .iter()
                        .map(|e| EntryDoc {
                            priority: e.priority,
                            match_value: e.match_value.to_hex(),
                            mask: e.match_mask.to_hex(),
                            actions: &e.actions,
                        })
                        .collect(),
                })
                .collect(),
            bridge_ports: matches!(self.scheme, Scheme::Bridged(_)).then_some(self.bridge_ports.as_slice()),
        };
        serde_json::to_string(&doc).expect("rule document serializes")
    }
}
