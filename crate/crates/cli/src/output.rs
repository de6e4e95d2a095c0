//! CSV artifacts. Rows follow the job order, then the configured scheme
//! order, then node id, so re-runs produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use bfswitch::stateanal::{summarize, TcamReport};
use serde::Serialize;

use crate::pipeline::TopologyResult;
use crate::CliError;

pub const PER_NODE: &str = "per_node.csv";
pub const SUMMARY: &str = "summary.csv";
pub const CDF: &str = "cdf.csv";
pub const GROUPS: &str = "groups.csv";
pub const VERIFICATION: &str = "verification.csv";

pub const ARTIFACTS: [&str; 5] = [PER_NODE, SUMMARY, CDF, GROUPS, VERIFICATION];

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Flattened `groups.csv` row.
#[derive(Serialize)]
struct GroupRow {
    group: usize,
    scheme: String,
    networks: usize,
    mean: f64,
    max: f64,
    mean_max: f64,
    mean_bound_utilization: Option<f64>,
}

/// Writes every artifact into `dir` (created if needed) and returns their paths.
pub fn write_artifacts(dir: &Path, results: &[TopologyResult]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let reports: Vec<&TcamReport> = results.iter().flat_map(|r| &r.reports).collect();
    let path = |name: &str| dir.join(name);

    write_rows(&path(PER_NODE), reports.iter().flat_map(|r| r.per_node_rows()))?;
    write_rows(&path(SUMMARY), reports.iter().map(|r| r.summary_row()))?;
    write_rows(&path(CDF), reports.iter().flat_map(|r| r.cdf_rows()))?;
    write_rows(
        &path(GROUPS),
        summarize(reports.iter().copied()).into_iter().map(|g| GroupRow {
            group: g.group,
            scheme: g.scheme.to_string(),
            networks: g.networks,
            mean: g.mean,
            max: g.max,
            mean_max: g.mean_max,
            mean_bound_utilization: g.mean_bound_utilization,
        }),
    )?;
    write_rows(&path(VERIFICATION), results.iter().map(|r| &r.verification))?;
    Ok(ARTIFACTS.iter().map(|n| path(n)).collect())
}
