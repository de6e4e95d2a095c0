use std::path::PathBuf;
use std::process::ExitCode;

use bfswitch::flowcomp::HeaderLayout;
use bfswitch_cli::commands::{self, DemoArgs};
use bfswitch_cli::config::{parse_n_sweep, parse_schemes, ExperimentConfig, LidChoice};
use bfswitch_cli::CliError;
use clap::{Args, Parser, Subcommand};

/// Bloom-filter switching: compile, simulate and count TCAM state.
#[derive(Parser)]
#[command(name = "bfswitch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep synthetic Weibull-degree topologies.
    Synthetic(Experiment),
    /// Analyze every GraphML file in a directory.
    Itz {
        dir: PathBuf,
        #[command(flatten)]
        exp: Experiment,
    },
    /// Forward one packet along a tree and show each step.
    Demo {
        /// GraphML or text topology.
        topology: PathBuf,
        #[arg(long)]
        source: String,
        /// Comma-separated destination nodes.
        #[arg(long, value_delimiter = ',', required = true)]
        dest: Vec<String>,
        /// Inject this FID (hex) instead of the tree's own.
        #[arg(long)]
        fid: Option<String>,
        #[arg(long, default_value = "multitable")]
        scheme: String,
        /// Also show the FID laid out in header fields (fid276 or fid384).
        #[arg(long)]
        layout: Option<String>,
        #[command(flatten)]
        lid: LidArgs,
    },
    /// Print the rule JSON of every switch.
    Compile {
        topology: PathBuf,
        #[arg(long, default_value = "multitable")]
        scheme: String,
        #[command(flatten)]
        lid: LidArgs,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count LID false positives over all unicast paths.
    Audit {
        topology: PathBuf,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value = "random-k")]
        lid: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Per-path CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct LidArgs {
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value = "exclusive")]
    lid: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct Experiment {
    /// start:end:step or a comma list.
    #[arg(long, default_value = "20:200:20")]
    n_sweep: String,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0.42)]
    shape: f64,
    #[arg(long, default_value_t = 2.0)]
    scale: f64,
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value = "exclusive")]
    lid: String,
    #[arg(long, default_value = "bf-native,bf-bridged,l2switch,mpls-lm")]
    schemes: String,
    #[arg(long, default_value_t = 8)]
    bridges: usize,
    /// Random multicast trees checked per topology.
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Experiment {
    fn config(&self) -> Result<ExperimentConfig, CliError> {
        Ok(ExperimentConfig {
            n_sweep: parse_n_sweep(&self.n_sweep)?,
            repeats: self.repeats,
            seed: self.seed,
            shape: self.shape,
            scale: self.scale,
            width: self.width,
            lid: self.lid.parse()?,
            schemes: parse_schemes(&self.schemes, self.bridges)?,
            bridges: self.bridges,
            trees: self.trees,
            out: self.out.clone(),
        })
    }
}

fn check_width(width: usize) -> Result<usize, CliError> {
    if bfswitch_cli::config::WIDTHS.contains(&width) {
        Ok(width)
    } else {
        Err(CliError::Input(format!("--width must be one of 256, 276, 384, got {width}")))
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Synthetic(exp) => commands::run_synthetic(&exp.config()?).map(|r| r.text),
        Command::Itz { dir, exp } => commands::run_itz(&dir, &exp.config()?).map(|r| r.text),
        Command::Demo { topology, source, dest, fid, scheme, layout, lid } => {
            let layout = layout.map(|l| l.parse::<HeaderLayout>()).transpose().map_err(|e| CliError::Input(e.to_string()))?;
            let out = commands::run_demo(&DemoArgs {
                topology,
                source,
                destinations: dest,
                fid,
                width: check_width(lid.width)?,
                lid: lid.lid.parse::<LidChoice>()?,
                scheme: commands::parse_compile_scheme(&scheme)?,
                layout,
                seed: lid.seed,
            })?;
            Ok(out.text)
        }
        Command::Compile { topology, scheme, lid, out } => {
            let json = commands::run_compile(
                &topology,
                check_width(lid.width)?,
                lid.lid.parse()?,
                commands::parse_compile_scheme(&scheme)?,
                lid.seed,
            )?;
            match out {
                Some(path) => {
                    std::fs::write(&path, json).map_err(|source| CliError::Io { path: path.clone(), source })?;
                    Ok(format!("wrote {}\n", path.display()))
                }
                None => Ok(json),
            }
        }
        Command::Audit { topology, width, lid, seed, out } => {
            commands::run_audit(&topology, check_width(width)?, lid.parse()?, seed, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(3);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
