//! `bwabc` — command-line harness around the bwabc library.
//!
//! Subcommands: `thermo-check`, `simulate`, `solve`, `hydro-verify`,
//! `perturbed-verify`, `ldp-check`. Exit codes: 0 = pass, 2 = config
//! error (including unusable environment: unreadable config, unwritable
//! output directory), 3 = a checked tolerance failed. Every run is
//! deterministic given (config file, seed): data files are byte-identical
//! across repeats; only the recorded wall time varies.

mod cmds;
mod config;
mod experiment;

use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "bwabc",
    version,
    about = "Boundary-driven three-state lattice gas: exact simulator, hydrodynamic solver, large-deviations checks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file (flat `key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed (`run.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory (`run.out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for replica fan-out (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Verify single-site thermodynamic identities and print a JSON report.
    ThermoCheck(CommonArgs),
    /// Run the continuous-time simulator; write trajectory CSVs and run manifests.
    Simulate(CommonArgs),
    /// Solve the limiting PDE system; write the solution CSV and a run manifest.
    Solve(CommonArgs),
    /// Simulate across an N list and compare to the solved limit.
    HydroVerify(CommonArgs),
    /// Same comparison under a tilted (perturbed) dynamics.
    PerturbedVerify(CommonArgs),
    /// Evaluate the large-deviations functionals on a tilted path.
    LdpCheck(CommonArgs),
}

/// Command outcome mapped to the documented exit codes.
pub enum Failure {
    /// Exit 2: invalid configuration or unusable environment.
    Config(Vec<String>),
    /// Exit 3: computation finished but a checked tolerance failed.
    Tolerance(String),
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Failure {
        Failure::Config(vec![msg.into()])
    }
}

pub type CmdResult = Result<(), Failure>;

fn load_config(args: &CommonArgs, required: bool) -> Result<BTreeMap<String, String>, Failure> {
    match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::config(format!("cannot read config {}: {e}", path.display()))
            })?;
            config::parse_text(&text).map_err(Failure::Config)
        }
        None if required => Err(Failure::config("missing --config")),
        None => Ok(BTreeMap::new()),
    }
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Failure::config("--workers must be at least 1")),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Failure::config(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn dispatch(cli: Cli) -> CmdResult {
    match cli.cmd {
        Cmd::ThermoCheck(args) => {
            let map = load_config(&args, false)?;
            cmds::thermo::run(map, &args)
        }
        Cmd::Simulate(args) => {
            let map = load_config(&args, true)?;
            in_pool(args.workers, || cmds::simulate::run(map, &args))?
        }
        Cmd::Solve(args) => {
            let map = load_config(&args, true)?;
            cmds::solve::run(map, &args)
        }
        Cmd::HydroVerify(args) => {
            let map = load_config(&args, true)?;
            in_pool(args.workers, || cmds::verify::run(map, &args, false))?
        }
        Cmd::PerturbedVerify(args) => {
            let map = load_config(&args, true)?;
            in_pool(args.workers, || cmds::verify::run(map, &args, true))?
        }
        Cmd::LdpCheck(args) => {
            let map = load_config(&args, true)?;
            in_pool(args.workers, || cmds::ldp::run(map, &args))?
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(errors)) => {
            for e in &errors {
                eprintln!("config error: {e}");
            }
            eprintln!("{} config error(s); nothing was run", errors.len());
            ExitCode::from(2)
        }
        Err(Failure::Tolerance(msg)) => {
            eprintln!("tolerance failure: {msg}");
            ExitCode::from(3)
        }
    }
}
