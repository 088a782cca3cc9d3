//! Command-line front end: configuration loading, command dispatch and
//! output emission for the optomechanical Otto engine simulator.
//!
//! Exit codes: 0 success, 1 output failure, 2 configuration or usage error,
//! 3 convergence failure, 4 stability violation without `--force`.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use otto_core::model::is_stable;
use otto_core::thermo::SweepAxis;
use otto_core::{Backend, CouplingKind};

use crate::commands::{CliError, CliResult, Context};
use crate::config::RunConfig;

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "OTTO_THREADS";

#[derive(Debug, Parser)]
#[command(name = "otto", version, about = "Quantum Otto engine on an optomechanical cavity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML configuration; omitted sections take the baseline values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory (overrides `outputs.directory`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Propagator: rk4, expm or auto.
    #[arg(long, global = true, value_parser = parse_backend)]
    pub backend: Option<Backend>,

    /// Fock truncation of the optical and mechanical modes.
    #[arg(long, global = true, value_name = "NA,NB", value_parser = parse_dims)]
    pub dims: Option<(usize, usize)>,

    /// Optomechanical interaction: quadratic or linear.
    #[arg(long, global = true, value_parser = parse_coupling)]
    pub coupling: Option<CouplingKind>,

    /// Run even when the stability bound is violated.
    #[arg(long, global = true)]
    pub force: bool,

    /// Worker threads for sweeps.
    #[arg(long, global = true, env = THREADS_ENV, value_name = "N")]
    pub threads: Option<usize>,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the master equation (or the moment hierarchy) and dump observables.
    Simulate {
        /// End time in units of 1/omega_b.
        #[arg(long)]
        t_final: Option<f64>,
    },
    /// Mechanical Wigner functions at selected times.
    Wigner {
        /// Comma-separated times in units of 1/omega_b.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
    /// Converged limit cycle and its effective Otto cycle.
    Cycle,
    /// Figures of merit along nbar_h or kappa_l.
    Sweep {
        /// nbar_h or kappa_l.
        #[arg(long, value_parser = parse_axis)]
        axis: Option<SweepAxis>,
        /// Comma-separated values along the axis.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Quadratic against linear coupling, including the load sweep.
    Compare,
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    s.parse().map_err(|e: otto_core::Error| e.to_string())
}

fn parse_coupling(s: &str) -> Result<CouplingKind, String> {
    s.parse().map_err(|e: otto_core::Error| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: otto_core::Error| e.to_string())
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected NA,NB, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad dimension `{v}`: {e}"));
    Ok((p(a)?, p(b)?))
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn init_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // the global pool can only be set once per process
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("thread pool already initialised");
        }
    }
    Ok(())
}

/// Loads the configuration and applies command-line overrides.
pub fn load_context(cli: &Cli) -> CliResult<Context> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(b) = cli.backend {
        cfg.solver.backend = b;
    }
    if let Some((a, b)) = cli.dims {
        cfg.engine.dim_a = a;
        cfg.engine.dim_b = b;
    }
    if let Some(c) = cli.coupling {
        cfg.engine.coupling = c;
    }
    match &cli.command {
        Command::Simulate { t_final: Some(t) } => cfg.simulate.t_final = *t,
        Command::Wigner { times: Some(t) } => cfg.wigner.times = t.clone(),
        Command::Sweep { axis, values } => {
            if let Some(a) = axis {
                cfg.sweep.axis = *a;
            }
            if let Some(v) = values {
                cfg.sweep.values = v.clone();
            }
        }
        _ => {}
    }
    cfg.validate()?;
    if !is_stable(&cfg.engine) {
        log::warn!("{}", commands::stability_message(&cfg.engine));
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.outputs.directory.clone());
    Ok(Context { cfg, out, force: cli.force })
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    init_threads(cli.threads)?;
    let ctx = load_context(cli)?;
    match &cli.command {
        Command::Simulate { .. } => commands::simulate(&ctx),
        Command::Wigner { .. } => commands::wigner_cmd(&ctx, &ctx.cfg.wigner.times),
        Command::Cycle => commands::cycle(&ctx),
        Command::Sweep { .. } => commands::sweep_cmd(&ctx, ctx.cfg.sweep.axis, &ctx.cfg.sweep.values, &ctx.cfg.sweep.couplings),
        Command::Compare => commands::compare_cmd(&ctx),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
