//! Per-switch TCAM state for Bloom-filter switching and the per-path baselines.
//!
//! Counts are `f64`: a single-table bridge on a high-degree node needs
//! `2^(d+1)` slots, far past any integer type, and the statistics are real
//! valued anyway. Integer counts below 2^53 are represented exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::flowcomp::SlotCost;
use crate::topology::{degree_stats, mean_path_length, PathSet, Topology};

/// Switch state models that can be compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum StateScheme {
    /// One entry per path at every forwarding node. Also covers MPLS without
    /// label merging, which needs the same entries.
    L2Switch,
    /// MPLS with label merging: one label per destination.
    MplsLm,
    /// Bloom-filter switching with native multi-table support.
    BfNative,
    /// Bloom-filter switching on `x` single-table bridges per switch.
    BfBridged(usize),
}

impl fmt::Display for StateScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateScheme::L2Switch => f.write_str("l2switch"),
            StateScheme::MplsLm => f.write_str("mpls-lm"),
            StateScheme::BfNative => f.write_str("bf-native"),
            StateScheme::BfBridged(x) => write!(f, "bf-bridged({x})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown scheme {0:?} (expected l2switch, mpls-nm, mpls-lm, bf-native, bf-bridged or bf-bridged(x))")]
pub struct UnknownScheme(pub String);

impl StateScheme {
    /// Parses a scheme label; a bare `bf-bridged` takes `default_bridges`.
    pub fn parse_with_default(s: &str, default_bridges: usize) -> Result<Self, UnknownScheme> {
        let bad = || UnknownScheme(s.to_string());
        match s.trim() {
            "l2switch" | "mpls-nm" => Ok(StateScheme::L2Switch),
            "mpls-lm" => Ok(StateScheme::MplsLm),
            "bf-native" => Ok(StateScheme::BfNative),
            "bf-bridged" => Ok(StateScheme::BfBridged(default_bridges)),
            other => {
                let x = other
                    .strip_prefix("bf-bridged(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|x| x.parse::<usize>().ok())
                    .ok_or_else(bad)?;
                if x == 0 {
                    return Err(bad());
                }
                Ok(StateScheme::BfBridged(x))
            }
        }
    }
}

impl FromStr for StateScheme {
    type Err = UnknownScheme;
    fn from_str(s: &str) -> Result<Self, UnknownScheme> {
        StateScheme::parse_with_default(s, DEFAULT_BRIDGES)
    }
}

/// Bridge count used when none is given.
pub const DEFAULT_BRIDGES: usize = 8;

/// Per-node entry counts of one scheme on one topology, with summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TcamReport {
    pub scheme: StateScheme,
    pub topology: String,
    pub counts: Vec<f64>,
    pub mean: f64,
    pub max: f64,
    pub p50: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
    /// `(count, fraction of nodes with at most that count)` for each distinct count.
    pub cdf: Vec<(f64, f64)>,
    /// Analytic expectation of the mean, where one exists.
    pub expected: Option<f64>,
    /// Analytic bound on the max, where one exists.
    pub bound: Option<f64>,
}

/// Nearest-rank percentile of sorted data: the smallest value with at least
/// `p` percent of the data at or below it.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl TcamReport {
    pub fn new(scheme: StateScheme, topology: impl Into<String>, counts: Vec<f64>) -> Self {
        let mut sorted = counts.clone();
        sorted.sort_by(f64::total_cmp);
        let n = counts.len() as f64;
        let mut cdf: Vec<(f64, f64)> = Vec::new();
        for (i, &c) in sorted.iter().enumerate() {
            let frac = (i + 1) as f64 / n;
            match cdf.last_mut() {
                Some(last) if last.0 == c => last.1 = frac,
                _ => cdf.push((c, frac)),
            }
        }
        TcamReport {
            scheme,
            topology: topology.into(),
            mean: counts.iter().sum::<f64>() / n,
            max: sorted.last().copied().unwrap_or(f64::NAN),
            p50: percentile(&sorted, 50.0),
            p90: percentile(&sorted, 90.0),
            p95: percentile(&sorted, 95.0),
            p99: percentile(&sorted, 99.0),
            cdf,
            counts,
            expected: None,
            bound: None,
        }
    }

    fn with_analytics(mut self, expected: Option<f64>, bound: Option<f64>) -> Self {
        self.expected = expected;
        self.bound = bound;
        self
    }

    /// `max / bound`, when a bound is known.
    pub fn bound_utilization(&self) -> Option<f64> {
        self.bound.map(|b| self.max / b)
    }

    pub fn variance(&self) -> f64 {
        self.counts.iter().map(|c| (c - self.mean).powi(2)).sum::<f64>() / self.counts.len() as f64
    }
}

/// One entry per path at every node of the path except its destination.
pub fn count_l2switch(topo: &Topology, paths: &PathSet) -> TcamReport {
    let n = topo.node_count();
    let mut counts = vec![0u64; n];
    for (s, t) in paths.pairs() {
        paths.for_each_forwarding_node(s, t, |v| counts[v] += 1);
    }
    let bounds = analytic_bounds(topo, paths, None);
    TcamReport::new(StateScheme::L2Switch, topo.name(), counts.into_iter().map(|c| c as f64).collect())
        .with_analytics(Some(bounds.expected_tl), Some(bounds.max_tl_bound))
}

/// One label per destination at every node.
pub fn count_mpls_lm(topo: &Topology) -> TcamReport {
    let n = topo.node_count();
    let v = (n - 1) as f64;
    TcamReport::new(StateScheme::MplsLm, topo.name(), vec![v; n]).with_analytics(Some(v), Some(v))
}

/// TCAM slots of a degree-`d` switch split into `x` single-table bridges
/// (x capped at `d`): `(x + d mod x) · 2^(⌊d/x⌋+1) − 2x`.
pub fn bridged_slots(d: usize, x: usize) -> f64 {
    bridged_slots_with(d, x, SlotCost::default())
}

pub fn bridged_slots_with(d: usize, x: usize, cost: SlotCost) -> f64 {
    if d == 0 {
        return 0.0;
    }
    let x = x.clamp(1, d);
    let (q, r) = (d / x, d % x);
    let logical = (x + r) as f64 * 2f64.powi(q as i32) - x as f64;
    logical * cost.wide as f64
}

/// TCAM slots of a degree-`d` switch with native tables: one wide entry and one
/// catch-all per port.
pub fn native_slots_with(d: usize, cost: SlotCost) -> f64 {
    (d as u64 * (cost.wide + cost.catch_all)) as f64
}

/// Bloom-filter state. Depends only on node degrees.
pub fn count_bf(topo: &Topology, scheme: StateScheme) -> TcamReport {
    count_bf_with(topo, scheme, SlotCost::default())
}

/// # Panics
/// If `scheme` is not a Bloom-filter scheme.
pub fn count_bf_with(topo: &Topology, scheme: StateScheme, cost: SlotCost) -> TcamReport {
    let per_node = |d: usize| match scheme {
        StateScheme::BfNative => native_slots_with(d, cost),
        StateScheme::BfBridged(x) => bridged_slots_with(d, x, cost),
        other => panic!("{other} is not a Bloom-filter scheme"),
    };
    let counts = topo.nodes().map(|v| per_node(topo.degree(v))).collect();
    let max_d = degree_stats(topo).max;
    TcamReport::new(scheme, topo.name(), counts).with_analytics(None, Some(per_node(max_d)))
}

/// Report for any scheme. `paths` is needed for [`StateScheme::L2Switch`] only.
pub fn count_scheme(topo: &Topology, paths: &PathSet, scheme: StateScheme) -> TcamReport {
    match scheme {
        StateScheme::L2Switch => count_l2switch(topo, paths),
        StateScheme::MplsLm => count_mpls_lm(topo),
        bf => count_bf(topo, bf),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticBounds {
    /// `N(N−1)`: one node carries every path.
    pub max_tl_bound: f64,
    /// `E[ℓ]·(N−1)`.
    pub expected_tl: f64,
    /// Native Bloom-filter bound `2·max(d)`.
    pub max_tb_native: f64,
    /// Bridged bound at the maximum degree, when a bridge count was given.
    pub max_tb_bridged: Option<f64>,
}

pub fn analytic_bounds(topo: &Topology, paths: &PathSet, bridges: Option<usize>) -> AnalyticBounds {
    let n = topo.node_count() as f64;
    let max_d = degree_stats(topo).max;
    AnalyticBounds {
        max_tl_bound: n * (n - 1.0),
        expected_tl: mean_path_length(paths) * (n - 1.0),
        max_tb_native: native_slots_with(max_d, SlotCost::default()),
        max_tb_bridged: bridges.map(|x| bridged_slots(max_d, x)),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {min} degree samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("all degree samples equal {0}; the survival curve is a step and the shape is undetermined")]
    Degenerate(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeibullFit {
    pub shape: f64,
    pub scale: f64,
    /// Weighted sum of squared survival residuals at the optimum.
    pub residual: f64,
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Fits `P(D ≥ k) = exp(−(k/scale)^shape)` to the empirical survival function
/// of `degrees` over `k = 1..=max`, by least squares with weights `exp(−k)`.
///
/// Levenberg–Marquardt on `(ln shape, ln scale)`, started from a log-log
/// linear regression.
pub fn fit_discrete_weibull(degrees: &[usize]) -> Result<WeibullFit, FitError> {
    if degrees.len() < MIN_FIT_SAMPLES {
        return Err(FitError::TooFewSamples { min: MIN_FIT_SAMPLES, got: degrees.len() });
    }
    let max = *degrees.iter().max().expect("non-empty");
    if degrees.iter().all(|&d| d == max) {
        return Err(FitError::Degenerate(max));
    }
    // histogram then survival: surv[k] = #{d ≥ k} / n
    let n = degrees.len() as f64;
    let mut hist = vec![0usize; max + 2];
    for &d in degrees {
        hist[d] += 1;
    }
    let mut at_least = vec![0usize; max + 2];
    for k in (0..=max).rev() {
        at_least[k] = at_least[k + 1] + hist[k];
    }
    let data: Vec<(f64, f64, f64)> =
        (1..=max).map(|k| (k as f64, at_least[k] as f64 / n, (-(k as f64)).exp())).collect();

    let cost = |p: [f64; 2]| -> f64 {
        let (shape, scale) = (p[0].exp(), p[1].exp());
        data.iter().map(|&(k, s, w)| w * ((-(k / scale).powf(shape)).exp() - s).powi(2)).sum()
    };

    let mut p = initial_guess(&data);
    let mut c = cost(p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let (shape, scale_ln) = (p[0].exp(), p[1]);
        // normal equations J^T W J and J^T W r
        let (mut a, mut g) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        for &(k, s, w) in &data {
            let u = (shape * (k.ln() - scale_ln)).exp();
            let model = (-u).exp();
            let r = model - s;
            // d model / d ln shape, d model / d ln scale
            let j = [-model * u * shape * (k.ln() - scale_ln), model * u * shape];
            for i in 0..2 {
                g[i] += w * j[i] * r;
                for l in 0..2 {
                    a[i][l] += w * j[i] * j[l];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let m = [[a[0][0] * (1.0 + lambda), a[0][1]], [a[1][0], a[1][1] * (1.0 + lambda)]];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det.abs() < f64::MIN_POSITIVE {
                lambda *= 10.0;
                continue;
            }
            let step = [-(m[1][1] * g[0] - m[0][1] * g[1]) / det, -(m[0][0] * g[1] - m[1][0] * g[0]) / det];
            let trial = [p[0] + step[0], p[1] + step[1]];
            let tc = cost(trial);
            if tc.is_finite() && tc < c {
                let rel = (c - tc) / c.max(f64::MIN_POSITIVE);
                p = trial;
                c = tc;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-14;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok(WeibullFit { shape: p[0].exp(), scale: p[1].exp(), residual: c })
}

/// Weighted regression of `ln(−ln S)` on `ln k`, which is linear for an exact
/// Weibull survival curve.
fn initial_guess(data: &[(f64, f64, f64)]) -> [f64; 2] {
    let pts: Vec<(f64, f64, f64)> = data
        .iter()
        .filter(|&&(_, s, _)| s > 0.0 && s < 1.0)
        .map(|&(k, s, w)| (k.ln(), (-s.ln()).ln(), w))
        .collect();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    if pts.len() < 2 || sw <= 0.0 {
        return [0.0, 0.0];
    }
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 || sxy <= 0.0 {
        // a single interior point: assume shape 1 through it
        let (x, y) = (pts[0].0, pts[0].1);
        return [0.0, x - y];
    }
    let shape = sxy / sxx;
    // y = shape·ln k − shape·ln scale
    let ln_scale = mx - my / shape;
    [shape.ln(), ln_scale]
}

/// Networks are aggregated by node count rounded to the nearest ten (halves up).
pub fn size_group(n: usize) -> usize {
    (n + 5) / 10 * 10
}

/// Aggregate over the networks of one size group and scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: usize,
    pub scheme: StateScheme,
    pub networks: usize,
    pub mean: f64,
    pub max: f64,
    /// Mean over networks of each network's max.
    pub mean_max: f64,
    /// Mean over networks of `max / bound`, where bounds exist.
    pub mean_bound_utilization: Option<f64>,
}

/// Groups reports by [`size_group`] of their node count and scheme.
pub fn summarize<'a>(reports: impl IntoIterator<Item = &'a TcamReport>) -> Vec<GroupSummary> {
    let mut groups: BTreeMap<(usize, StateScheme), Vec<&TcamReport>> = BTreeMap::new();
    for r in reports {
        groups.entry((size_group(r.counts.len()), r.scheme)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((group, scheme), rs)| {
            let k = rs.len() as f64;
            let util: Vec<f64> = rs.iter().filter_map(|r| r.bound_utilization()).collect();
            GroupSummary {
                group,
                scheme,
                networks: rs.len(),
                mean: rs.iter().map(|r| r.mean).sum::<f64>() / k,
                max: rs.iter().map(|r| r.max).fold(f64::NEG_INFINITY, f64::max),
                mean_max: rs.iter().map(|r| r.max).sum::<f64>() / k,
                mean_bound_utilization: (!util.is_empty()).then(|| util.iter().sum::<f64>() / util.len() as f64),
            }
        })
        .collect()
}

/// Attachment-point state is per multicast group and identical for every
/// switching scheme, so it is reported beside the switch counts, never in them.
pub fn nap_state_note(groups: usize) -> String {
    format!("NAP state: {groups} group-to-FID mappings, O(g); excluded from switch TCAM counts")
}

/// `per_node.csv` row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerNodeRow<'a> {
    pub topology: &'a str,
    pub scheme: String,
    pub node: usize,
    pub count: f64,
}

/// `summary.csv` row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow<'a> {
    pub topology: &'a str,
    #[serde(rename = "N")]
    pub n: usize,
    pub scheme: String,
    pub mean: f64,
    pub max: f64,
    pub p50: f64,
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
}

/// `cdf.csv` row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfRow<'a> {
    pub topology: &'a str,
    pub scheme: String,
    pub count: f64,
    pub cum_fraction: f64,
}

impl TcamReport {
    pub fn per_node_rows(&self) -> impl Iterator<Item = PerNodeRow<'_>> {
        self.counts.iter().enumerate().map(move |(node, &count)| PerNodeRow {
            topology: &self.topology,
            scheme: self.scheme.to_string(),
            node,
            count,
        })
    }

    pub fn summary_row(&self) -> SummaryRow<'_> {
        SummaryRow {
            topology: &self.topology,
            n: self.counts.len(),
            scheme: self.scheme.to_string(),
            mean: self.mean,
            max: self.max,
            p50: self.p50,
            p90: self.p90,
            p95: self.p95,
            p99: self.p99,
        }
    }

    pub fn cdf_rows(&self) -> impl Iterator<Item = CdfRow<'_>> {
        self.cdf.iter().map(move |&(count, cum_fraction)| CdfRow {
            topology: &self.topology,
            scheme: self.scheme.to_string(),
            count,
            cum_fraction,
        })
    }
}
