//! One function per subcommand. Each returns the text meant for stdout;
//! warnings go to stderr directly.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bfswitch::bfcore::{false_positive_audit, fid_of_path, or_fids, Fid, Tree};
use bfswitch::dataplane::{build_network, default_hop_limit, inject, verify_delivery, DeliveryReport};
use bfswitch::flowcomp::{encode_header, HeaderLayout, Scheme, DEFAULT_EXPLOSION_LIMIT};
use bfswitch::stateanal::{fit_discrete_weibull, nap_state_note, StateScheme, TcamReport};
use bfswitch::topology::{all_pairs_shortest_paths, gen_weibull_topology, load_graphml, NodeId, Topology};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, LidChoice};
use crate::output::write_artifacts;
use crate::pipeline::{analyze, choose_lids, Job, TopologyResult};
use crate::CliError;

/// A topology file and the names of its nodes.
#[derive(Debug, Clone)]
pub struct LoadedTopology {
    pub topology: Topology,
    pub node_names: Vec<String>,
}

impl LoadedTopology {
    /// Resolves a node by its file name, falling back to the dense index.
    pub fn resolve(&self, name: &str) -> Result<NodeId, CliError> {
        if let Some(i) = self.node_names.iter().position(|n| n == name) {
            return Ok(i);
        }
        name.parse::<NodeId>()
            .ok()
            .filter(|&i| i < self.topology.node_count())
            .ok_or_else(|| CliError::Input(format!("no node {name:?} in {}", self.topology.name())))
    }
}

/// Reads GraphML (`.graphml`, `.xml`) or the line-oriented text form.
pub fn load_topology(path: &Path) -> Result<LoadedTopology, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("topology").to_string();
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let bad = |e: &dyn std::fmt::Display| CliError::Input(format!("{}: {e}", path.display()));
    if ext == "graphml" || ext == "xml" {
        let load = load_graphml(&bytes).map_err(|e| bad(&e))?;
        Ok(LoadedTopology { topology: load.topology.with_name(stem), node_names: load.node_ids })
    } else {
        let text = String::from_utf8(bytes).map_err(|e| bad(&e))?;
        let topology = Topology::from_text(stem, &text).map_err(|e| bad(&e))?;
        let node_names = topology.nodes().map(|v| v.to_string()).collect();
        Ok(LoadedTopology { topology, node_names })
    }
}

/// Seed of repeat `r` at size `n`.
pub fn topology_seed(seed: u64, n: usize, r: usize) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ ((n as u64) << 32) ^ r as u64
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub results: Vec<TopologyResult>,
    pub artifacts: Vec<PathBuf>,
    pub text: String,
}

fn run_jobs(jobs: Vec<Job>) -> Result<Vec<TopologyResult>, CliError> {
    jobs.par_iter().map(analyze).collect()
}

fn l2_utilization(results: &[TopologyResult]) -> Vec<f64> {
    results
        .iter()
        .flat_map(|r| &r.reports)
        .filter(|r| r.scheme == StateScheme::L2Switch)
        .filter_map(TcamReport::bound_utilization)
        .collect()
}

/// Plain-text digest of a run.
fn digest(results: &[TopologyResult], schemes: &[StateScheme], groups: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "topologies: {}", results.len());
    for &s in schemes {
        let means: Vec<f64> = results.iter().flat_map(|r| &r.reports).filter(|r| r.scheme == s).map(|r| r.mean).collect();
        let maxes = results.iter().flat_map(|r| &r.reports).filter(|r| r.scheme == s).map(|r| r.max);
        if means.is_empty() {
            continue;
        }
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let top = maxes.fold(f64::NEG_INFINITY, f64::max);
        let label = s.to_string();
        let _ = writeln!(out, "{label:>16}: mean per topology {lo:.2}..{hi:.2}, largest node {top}");
    }
    let util = l2_utilization(results);
    if !util.is_empty() {
        let mean = util.iter().sum::<f64>() / util.len() as f64;
        let max = util.iter().copied().fold(0.0, f64::max);
        let _ = writeln!(out, "l2switch max / N(N-1): mean {mean:.3}, max {max:.3}");
    }
    let checked: usize = results.iter().map(|r| r.verification.unicast_checked + r.verification.trees_checked).sum();
    let inexact: usize = results.iter().map(|r| r.verification.non_exact).sum();
    let fallback = results.iter().filter(|r| r.verification.lid_strategy != "exclusive").count();
    let _ = writeln!(out, "deliveries checked: {checked}, inexact: {inexact} ({fallback} topologies on random-k LIDs)");
    let pooled: Vec<usize> = results.iter().flat_map(|r| r.degrees.degrees.iter().copied()).collect();
    match fit_discrete_weibull(&pooled) {
        Ok(f) => {
            let _ = writeln!(out, "pooled degree Weibull fit: shape {:.3}, scale {:.3}", f.shape, f.scale);
        }
        Err(e) => {
            let _ = writeln!(out, "pooled degree Weibull fit: {e}");
        }
    }
    let _ = writeln!(out, "{}", nap_state_note(groups));
    out
}

fn finish(cfg: &ExperimentConfig, results: Vec<TopologyResult>) -> Result<RunOutput, CliError> {
    let artifacts = write_artifacts(&cfg.out, &results)?;
    let mut text = digest(&results, &cfg.schemes, cfg.trees);
    for a in &artifacts {
        let _ = writeln!(text, "wrote {}", a.display());
    }
    Ok(RunOutput { results, artifacts, text })
}

/// Weibull topologies for every size in the sweep and every repeat.
pub fn run_synthetic(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let specs: Vec<(usize, usize)> = cfg.n_sweep.iter().flat_map(|&n| (0..cfg.repeats).map(move |r| (n, r))).collect();
    let jobs = specs
        .par_iter()
        .map(|&(n, r)| {
            let seed = topology_seed(cfg.seed, n, r);
            let topology = gen_weibull_topology(n, cfg.shape, cfg.scale, seed).map_err(|e| CliError::Input(e.to_string()))?;
            Ok(Job { topology, width: cfg.width, lid: cfg.lid, schemes: cfg.schemes.clone(), trees: cfg.trees, seed })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    finish(cfg, run_jobs(jobs)?)
}

/// Every GraphML file in `dir`, in file-name order. Unreadable files are
/// skipped with a warning.
pub fn run_itz(dir: &Path, cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    cfg.validate()?;
    let entries = fs::read_dir(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("graphml")))
        .collect();
    files.sort();
    let mut jobs = Vec::new();
    for (i, f) in files.iter().enumerate() {
        match load_topology(f) {
            Ok(t) => jobs.push(Job {
                topology: t.topology,
                width: cfg.width,
                lid: cfg.lid,
                schemes: cfg.schemes.clone(),
                trees: cfg.trees,
                seed: topology_seed(cfg.seed, 0, i),
            }),
            Err(e) => eprintln!("warning: skipping {e}"),
        }
    }
    if jobs.is_empty() {
        return Err(CliError::Input(format!("no readable GraphML files in {}", dir.display())));
    }
    finish(cfg, run_jobs(jobs)?)
}

#[derive(Debug, Clone)]
pub struct DemoArgs {
    pub topology: PathBuf,
    pub source: String,
    pub destinations: Vec<String>,
    /// Inject this Fid instead of the tree's own.
    pub fid: Option<String>,
    pub width: usize,
    pub lid: LidChoice,
    pub scheme: Scheme,
    pub layout: Option<HeaderLayout>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct DemoOutput {
    pub tree: Tree,
    pub fid: Fid,
    pub unicast_fids: Vec<Fid>,
    pub report: DeliveryReport,
    pub exact: bool,
    pub text: String,
}

/// Builds the tree from `source` to the destinations, injects its Fid (or the
/// one given) and shows what every involved switch does.
pub fn run_demo(args: &DemoArgs) -> Result<DemoOutput, CliError> {
    let loaded = load_topology(&args.topology)?;
    let topo = &loaded.topology;
    let source = loaded.resolve(&args.source)?;
    let dests: BTreeSet<NodeId> = args.destinations.iter().map(|d| loaded.resolve(d)).collect::<Result<_, _>>()?;
    if dests.is_empty() || dests.contains(&source) {
        return Err(CliError::Input("destinations must be non-empty and exclude the source".into()));
    }
    let paths = all_pairs_shortest_paths(topo);
    let lids = choose_lids(topo, args.width, args.lid, args.seed)?;
    let unicast: Vec<_> = dests.iter().map(|&t| paths.path(source, t)).collect();
    let unicast_fids: Vec<Fid> = unicast.iter().map(|p| fid_of_path(p, &lids)).collect::<Result<_, _>>().map_err(|e| CliError::Input(e.to_string()))?;
    let tree = Tree::from_paths(&unicast).map_err(|e| CliError::Input(e.to_string()))?;
    let fid = match &args.fid {
        Some(hex) => Fid::from_hex(args.width, hex).map_err(|e| CliError::Input(format!("--fid: {e}")))?,
        None => or_fids(&unicast_fids).map_err(|e| CliError::Input(e.to_string()))?,
    };
    let network = build_network(topo, &lids, args.scheme, DEFAULT_EXPLOSION_LIMIT).map_err(|e| CliError::Input(e.to_string()))?;
    let report = inject(&network, source, &fid, default_hop_limit(topo.node_count())).map_err(|e| CliError::Input(e.to_string()))?;
    let verdict = verify_delivery(&report, &tree);

    let name = |v: NodeId| loaded.node_names[v].as_str();
    let mut text = String::new();
    let _ = writeln!(text, "topology {} ({} nodes, {} links), LIDs {} x {} bits, scheme {}", topo.name(), topo.node_count(), topo.links().len(), lids.strategy(), lids.width(), args.scheme);
    for (p, f) in unicast.iter().zip(&unicast_fids) {
        let hops: Vec<&str> = p.nodes.iter().map(|&v| name(v)).collect();
        let _ = writeln!(text, "path {}  fid {}", hops.join(" -> "), f.to_hex());
    }
    let edges: Vec<String> = tree.edges.iter().map(|e| format!("{}->{}", name(e.from), name(e.to))).collect();
    let _ = writeln!(text, "tree edges: {}", edges.join(" "));
    let _ = writeln!(text, "fid {} ({} bits set)", fid.to_hex(), fid.popcount());
    if let Some(layout) = args.layout {
        let h = encode_header(&fid, layout).map_err(|e| CliError::Input(e.to_string()))?.with_nap(source as u64);
        let _ = writeln!(
            text,
            "header ({layout}): eth_dst {:012x} eth_src {:012x} vlan {:03x} ipv6_src {:032x} ipv6_dst {:032x} flow_label {:05x}",
            h.eth_dst, h.eth_src, h.vlan_id, h.ipv6_src, h.ipv6_dst, h.flow_label
        );
    }
    let _ = writeln!(text, "rules of reached switches:");
    for &v in &report.delivered_nodes {
        let _ = writeln!(text, "{}", network.pipeline(v).to_json());
    }
    let delivered: Vec<&str> = report.delivered_nodes.iter().map(|&v| name(v)).collect();
    let _ = writeln!(text, "delivered: {}", delivered.join(" "));
    let _ = writeln!(text, "duplicates {} dropped {}", report.duplicate_deliveries, report.dropped_by_hop_limit);
    let _ = writeln!(text, "verdict: {verdict}");
    Ok(DemoOutput { exact: verdict.is_exact(), tree, fid, unicast_fids, report, text })
}

/// Rule JSON of every switch, one document per line.
pub fn run_compile(topology: &Path, width: usize, lid: LidChoice, scheme: Scheme, seed: u64) -> Result<String, CliError> {
    let loaded = load_topology(topology)?;
    let lids = choose_lids(&loaded.topology, width, lid, seed)?;
    let network = build_network(&loaded.topology, &lids, scheme, DEFAULT_EXPLOSION_LIMIT).map_err(|e| CliError::Input(e.to_string()))?;
    let mut out = String::new();
    for p in network.pipelines() {
        out.push_str(&p.to_json());
        out.push('\n');
    }
    Ok(out)
}

#[derive(serde::Serialize)]
struct AuditRow {
    source: NodeId,
    target: NodeId,
    popcount: u32,
    false_positives: usize,
}

/// False-positive audit of every unicast path Fid. Per-path rows go to `csv_out` if given.
pub fn run_audit(topology: &Path, width: usize, lid: LidChoice, seed: u64, csv_out: Option<&Path>) -> Result<String, CliError> {
    let loaded = load_topology(topology)?;
    let topo = &loaded.topology;
    let lids = choose_lids(topo, width, lid, seed)?;
    let paths = all_pairs_shortest_paths(topo);
    let audit = false_positive_audit(topo, &lids, &paths).map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(path) = csv_out {
        let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        for p in &audit.per_path {
            w.serialize(AuditRow { source: p.source, target: p.target, popcount: p.popcount, false_positives: p.false_positives })
                .map_err(csv_err)?;
        }
        w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    }
    let mut out = String::new();
    let _ = writeln!(out, "topology {} ({} nodes, {} directed edges)", topo.name(), topo.node_count(), topo.directed_edge_count());
    let _ = writeln!(out, "LIDs: {} x {} bits", lids.strategy(), lids.width());
    let _ = writeln!(out, "paths: {}, with false positives: {}", audit.per_path.len(), audit.paths_with_false_positives);
    let _ = writeln!(out, "false positives: {} of {} tests (rate {:.3e})", audit.total_false_positives, audit.tests, audit.rate());
    Ok(out)
}

/// `multitable`, `singletable` or `bridged(x)`.
pub fn parse_compile_scheme(s: &str) -> Result<Scheme, CliError> {
    match s {
        "multitable" => Ok(Scheme::MultiTable),
        "singletable" => Ok(Scheme::SingleTable),
        other => other
            .strip_prefix("bridged(")
            .and_then(|r| r.strip_suffix(')'))
            .and_then(|x| x.parse().ok())
            .filter(|&x| x > 0)
            .map(Scheme::Bridged)
            .ok_or_else(|| CliError::Input(format!("unknown scheme {other:?} (multitable, singletable, bridged(x))"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_file(dir: &Path) -> PathBuf {
        let p = dir.join("line.txt");
        fs::write(&p, "N 3\n0 1\n1 2\n").unwrap();
        p
    }

    fn demo(dir: &Path, dests: &[&str], fid: Option<String>) -> DemoOutput {
        run_demo(&DemoArgs {
            topology: line_file(dir),
            source: "0".into(),
            destinations: dests.iter().map(|s| s.to_string()).collect(),
            fid,
            width: 256,
            lid: LidChoice::Exclusive,
            scheme: Scheme::MultiTable,
            layout: Some(HeaderLayout::Fid276),
            seed: 0,
        })
        .unwrap()
    }

    #[test]
    fn demo_line_unicast_and_multicast() {
        let dir = tempfile::tempdir().unwrap();
        let d = demo(dir.path(), &["2"], None);
        assert!(d.exact, "{}", d.text);
        assert!(d.text.contains("verdict: exact"));
        assert!(d.text.contains("\"scheme\":\"multitable\""));
        let m = demo(dir.path(), &["1", "2"], None);
        assert!(m.exact);
        assert_eq!(m.report.delivered_nodes, BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn demo_reinjected_or_of_unicast_fids() {
        let dir = tempfile::tempdir().unwrap();
        let star = dir.path().join("star.txt");
        fs::write(&star, "N 5\n0 1\n0 2\n0 3\n0 4\n").unwrap();
        let run = |dests: &[&str], fid: Option<String>| {
            run_demo(&DemoArgs {
                topology: star.clone(),
                source: "1".into(),
                destinations: dests.iter().map(|s| s.to_string()).collect(),
                fid,
                width: 256,
                lid: LidChoice::Exclusive,
                scheme: Scheme::Bridged(2),
                layout: None,
                seed: 0,
            })
            .unwrap()
        };
        let a = run(&["3"], None);
        let b = run(&["4"], None);
        let ored = or_fids(&[a.fid, b.fid]).unwrap();
        let both = run(&["3", "4"], Some(ored.to_hex()));
        let separate: BTreeSet<NodeId> = a.report.delivered_nodes.union(&b.report.delivered_nodes).copied().collect();
        assert_eq!(both.report.delivered_nodes, separate);
        assert!(both.exact);
    }

    #[test]
    fn demo_rejects_unknown_nodes() {
        let dir = tempfile::tempdir().unwrap();
        let args = DemoArgs {
            topology: line_file(dir.path()),
            source: "0".into(),
            destinations: vec!["7".into()],
            fid: None,
            width: 256,
            lid: LidChoice::Exclusive,
            scheme: Scheme::MultiTable,
            layout: None,
            seed: 0,
        };
        assert_eq!(run_demo(&args).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn compile_and_audit() {
        let dir = tempfile::tempdir().unwrap();
        let f = line_file(dir.path());
        let json = run_compile(&f, 256, LidChoice::Exclusive, Scheme::SingleTable, 0).unwrap();
        assert_eq!(json.lines().count(), 3);
        let csv = dir.path().join("audit.csv");
        let text = run_audit(&f, 256, LidChoice::Exclusive, 0, Some(&csv)).unwrap();
        assert!(text.contains("false positives: 0"), "{text}");
        assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 7);
        assert_eq!(parse_compile_scheme("bridged(3)").unwrap(), Scheme::Bridged(3));
        assert!(parse_compile_scheme("bridged(0)").is_err());
    }

    #[test]
    fn small_synthetic_run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig { n_sweep: vec![20, 30], repeats: 2, trees: 10, out: dir.path().to_path_buf(), ..Default::default() };
        let run = run_synthetic(&cfg).unwrap();
        assert_eq!(run.results.len(), 4);
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().next().unwrap(), "topology,N,scheme,mean,max,p50,p90,p95,p99");
        assert_eq!(summary.lines().count(), 1 + 4 * 4);
        let per_node = fs::read_to_string(dir.path().join("per_node.csv")).unwrap();
        assert_eq!(per_node.lines().count(), 1 + 4 * (20 + 20 + 30 + 30));
        assert!(run.text.contains("NAP state"));
    }

    #[test]
    fn itz_dir_skips_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let t = Topology::new("tri", 3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        fs::write(dir.path().join("a.graphml"), bfswitch::topology::to_graphml(&t)).unwrap();
        fs::write(dir.path().join("b.graphml"), "<not xml").unwrap();
        let out = dir.path().join("out");
        let cfg = ExperimentConfig { trees: 5, out, ..Default::default() };
        let run = run_itz(dir.path(), &cfg).unwrap();
        assert_eq!(run.results.len(), 1);
        assert_eq!(run.results[0].topology.name(), "a");
        let empty = tempfile::tempdir().unwrap();
        assert_eq!(run_itz(empty.path(), &cfg).unwrap_err().exit_code(), 3);
    }
}
