//! Everything done to one topology: Lids, compilation, delivery checks and
//! state counts.

use bfswitch::bfcore::{
    assign_lids, false_positive_audit, fid_of_tree, FalsePositiveAudit, LidMap, LidStrategy, Tree,
};
use bfswitch::dataplane::{build_network, default_hop_limit, inject, verify_delivery, CompiledNetwork};
use bfswitch::flowcomp::{Scheme, DEFAULT_EXPLOSION_LIMIT};
use bfswitch::stateanal::{count_scheme, StateScheme, TcamReport};
use bfswitch::topology::{all_pairs_shortest_paths, degree_stats, DegreeStats, NodeId, PathSet, Topology};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::LidChoice;
use crate::CliError;

/// Largest multicast group drawn for random tree checks.
pub const MAX_TREE_DESTINATIONS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub topology: Topology,
    pub width: usize,
    pub lid: LidChoice,
    pub schemes: Vec<StateScheme>,
    pub trees: usize,
    pub seed: u64,
}

/// One `verification.csv` row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationRow {
    pub topology: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub links: usize,
    pub max_degree: usize,
    pub mean_degree: f64,
    pub lid_strategy: String,
    pub width: usize,
    pub unicast_checked: usize,
    pub trees_checked: usize,
    pub non_exact: usize,
    pub extra_links: usize,
    pub duplicates: u64,
    pub dropped: u64,
    pub audit_fp_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyResult {
    pub topology: Topology,
    pub degrees: DegreeStats,
    pub reports: Vec<TcamReport>,
    pub verification: VerificationRow,
    pub audit: Option<FalsePositiveAudit>,
}

/// Lids for `topo`. Exclusive bits are used when asked for and they fit;
/// otherwise random-k, which is what a network with more directed edges than
/// Fid bits has to fall back to.
pub fn choose_lids(topo: &Topology, width: usize, lid: LidChoice, seed: u64) -> Result<LidMap, CliError> {
    let strategy = match lid {
        LidChoice::Exclusive if topo.directed_edge_count() <= width => LidStrategy::Exclusive,
        LidChoice::Exclusive => LidStrategy::RandomK { k: bfswitch::bfcore::DEFAULT_RANDOM_K },
        LidChoice::RandomK(k) => LidStrategy::RandomK { k },
    };
    assign_lids(topo, width, strategy, seed).map_err(|e| CliError::Input(format!("{}: {e}", topo.name())))
}

/// A random multicast tree from `paths`: uniform root, 2..=8 distinct
/// destinations (fewer on tiny networks).
pub fn random_tree(paths: &PathSet, rng: &mut impl Rng) -> Tree {
    let n = paths.node_count();
    let root = rng.random_range(0..n);
    let max_k = (n - 1).min(MAX_TREE_DESTINATIONS);
    let k = rng.random_range(max_k.min(2)..=max_k);
    let dests: Vec<NodeId> = sample(rng, n - 1, k).iter().map(|i| if i >= root { i + 1 } else { i }).collect();
    Tree::from_path_set(paths, root, &dests).expect("shortest-path unions from one root are valid trees")
}

/// Injects every unicast path Fid and `trees` random tree Fids. Under
/// exclusive Lids any inexact delivery is an error; otherwise inexact
/// deliveries are counted.
pub fn verify_network(
    network: &CompiledNetwork,
    lids: &LidMap,
    paths: &PathSet,
    trees: usize,
    seed: u64,
    row: &mut VerificationRow,
) -> Result<(), CliError> {
    let topo = network.topology();
    let exclusive = lids.strategy() == LidStrategy::Exclusive;
    let hop = default_hop_limit(topo.node_count());
    let mut check = |tree: &Tree, what: &dyn Fn() -> String| -> Result<(), CliError> {
        let fid = fid_of_tree(tree, lids).map_err(|e| CliError::Input(e.to_string()))?;
        let report = inject(network, tree.root, &fid, hop).map_err(|e| CliError::Input(e.to_string()))?;
        let verdict = verify_delivery(&report, tree);
        row.duplicates = row.duplicates.saturating_add(report.duplicate_deliveries);
        row.dropped = row.dropped.saturating_add(report.dropped_by_hop_limit);
        if !verdict.is_exact() {
            if exclusive {
                return Err(CliError::Verification(format!(
                    "{}: {} with fid {} under exclusive LIDs: {verdict}",
                    topo.name(),
                    what(),
                    fid.to_hex()
                )));
            }
            row.non_exact += 1;
            row.extra_links += verdict.extra_links.len();
        }
        Ok(())
    };
    for p in paths.iter() {
        let (s, t) = (p.source(), p.target());
        let tree = Tree::from_paths(std::slice::from_ref(&p)).expect("a shortest path is a tree");
        check(&tree, &|| format!("path {s}->{t}"))?;
        row.unicast_checked += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7ee5);
    for i in 0..trees {
        let tree = random_tree(paths, &mut rng);
        check(&tree, &|| format!("tree #{i} rooted at {} to {:?}", tree.root, tree.destinations))?;
        row.trees_checked += 1;
    }
    Ok(())
}

pub fn analyze(job: &Job) -> Result<TopologyResult, CliError> {
    let topo = &job.topology;
    let degrees = degree_stats(topo);
    let paths = all_pairs_shortest_paths(topo);
    let lids = choose_lids(topo, job.width, job.lid, job.seed)?;
    let network = build_network(topo, &lids, Scheme::MultiTable, DEFAULT_EXPLOSION_LIMIT)
        .map_err(|e| CliError::Input(format!("{}: {e}", topo.name())))?;
    let audit = match lids.strategy() {
        LidStrategy::Exclusive => None,
        _ => Some(false_positive_audit(topo, &lids, &paths).map_err(|e| CliError::Input(e.to_string()))?),
    };
    let mut verification = VerificationRow {
        topology: topo.name().to_string(),
        n: topo.node_count(),
        links: topo.links().len(),
        max_degree: degrees.max,
        mean_degree: degrees.mean,
        lid_strategy: lids.strategy().to_string(),
        width: job.width,
        unicast_checked: 0,
        trees_checked: 0,
        non_exact: 0,
        extra_links: 0,
        duplicates: 0,
        dropped: 0,
        audit_fp_rate: audit.as_ref().map(FalsePositiveAudit::rate),
    };
    verify_network(&network, &lids, &paths, job.trees, job.seed, &mut verification)?;
    let reports = job.schemes.iter().map(|&s| count_scheme(topo, &paths, s)).collect();
    Ok(TopologyResult { topology: topo.clone(), degrees, reports, verification, audit })
}
