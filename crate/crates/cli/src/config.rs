use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use bfswitch::bfcore::{LidStrategy, DEFAULT_RANDOM_K};
use bfswitch::stateanal::{StateScheme, DEFAULT_BRIDGES};

use crate::CliError;

/// Fid widths accepted on the command line.
pub const WIDTHS: [usize; 3] = [256, 276, 384];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LidChoice {
    Exclusive,
    RandomK(usize),
}

impl LidChoice {
    pub fn strategy(self) -> LidStrategy {
        match self {
            LidChoice::Exclusive => LidStrategy::Exclusive,
            LidChoice::RandomK(k) => LidStrategy::RandomK { k },
        }
    }
}

impl fmt::Display for LidChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LidChoice::Exclusive => f.write_str("exclusive"),
            LidChoice::RandomK(k) if *k == DEFAULT_RANDOM_K => f.write_str("random-k"),
            LidChoice::RandomK(k) => write!(f, "random-{k}"),
        }
    }
}

impl FromStr for LidChoice {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "exclusive" => Ok(LidChoice::Exclusive),
            "random-k" => Ok(LidChoice::RandomK(DEFAULT_RANDOM_K)),
            other => other
                .strip_prefix("random-")
                .and_then(|k| k.parse().ok())
                .filter(|&k| k > 0)
                .map(LidChoice::RandomK)
                .ok_or_else(|| CliError::Input(format!("unknown LID strategy {other:?} (exclusive, random-k or random-<k>)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_sweep: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub shape: f64,
    pub scale: f64,
    pub width: usize,
    pub lid: LidChoice,
    pub schemes: Vec<StateScheme>,
    pub bridges: usize,
    /// Random multicast trees verified per topology, on top of every unicast path.
    pub trees: usize,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_sweep: (20..=200).step_by(20).collect(),
            repeats: 10,
            seed: 1,
            shape: 0.42,
            scale: 2.0,
            width: 256,
            lid: LidChoice::Exclusive,
            schemes: vec![
                StateScheme::BfNative,
                StateScheme::BfBridged(DEFAULT_BRIDGES),
                StateScheme::L2Switch,
                StateScheme::MplsLm,
            ],
            bridges: DEFAULT_BRIDGES,
            trees: 100,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !WIDTHS.contains(&self.width) {
            return Err(CliError::Input(format!("--width must be one of 256, 276, 384, got {}", self.width)));
        }
        if self.n_sweep.is_empty() || self.n_sweep.iter().any(|&n| n < 2) {
            return Err(CliError::Input("--n-sweep needs node counts of at least 2".into()));
        }
        if self.repeats == 0 {
            return Err(CliError::Input("--repeats must be at least 1".into()));
        }
        if self.bridges == 0 {
            return Err(CliError::Input("--bridges must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(CliError::Input("--schemes is empty".into()));
        }
        Ok(())
    }
}

/// `20:200:20` (inclusive range with step), `20,40,80` or a single count.
pub fn parse_n_sweep(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Input(format!("bad --n-sweep {s:?}; use start:end:step or a comma list"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts.as_slice() else { return Err(bad()) };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if step == 0 || a > b {
            return Err(bad());
        }
        Ok((a..=b).step_by(step).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

/// Comma-separated scheme labels; a bare `bf-bridged` uses `bridges`.
pub fn parse_schemes(s: &str, bridges: usize) -> Result<Vec<StateScheme>, CliError> {
    let mut out = Vec::new();
    for label in s.split(',').filter(|l| !l.trim().is_empty()) {
        let scheme = StateScheme::parse_with_default(label, bridges).map_err(|e| CliError::Input(e.to_string()))?;
        if !out.contains(&scheme) {
            out.push(scheme);
        }
    }
    Ok(out)
}
