use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use hsm_admm::harness::config::{RunConfig, TopologyKind};
use hsm_admm::harness::output::read_trace;
use hsm_admm::harness::sweep::{parse_constants, run_sweep, SweepSpec};
use hsm_admm::harness::{plot, run_experiment, verify};
use hsm_admm::simulator::RunError;
use hsm_admm::{Algorithm, Error};

#[derive(Parser)]
#[command(name = "hsm-admm", version, about = "Decentralized stochastic ADMM simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write trace.csv, summary.json and plots.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a topology × algorithm × constants × seed grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated topologies; defaults to the configured one.
        #[arg(long, value_delimiter = ',')]
        topologies: Vec<String>,
        /// Comma-separated algorithms; defaults to the configured one.
        #[arg(long, visible_alias = "algos", value_delimiter = ',')]
        algorithms: Vec<String>,
        /// `c_rho,c_a,c_eta` triples separated by `;`.
        #[arg(long)]
        constants: Option<String>,
        /// Number of seeds, starting at the configured seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the acceptance criteria and print a pass/fail table.
    Verify {
        /// Criterion ids to run; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// Plot one or more trace.csv files together.
    Plot {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        output: PathBuf,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 2,
        Some(Error::Run(RunError::NumericalDivergence { .. })) => 3,
        Some(Error::Run(RunError::ConfigInvalid(_))) => 2,
        _ => 1,
    }
}

fn load(path: &std::path::Path) -> Result<RunConfig, Error> {
    Ok(RunConfig::from_file(path)?)
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run { config, output } => {
            let mut cfg = load(&config)?;
            if let Some(o) = output {
                cfg.output = o;
            }
            let outcome = run_experiment(&cfg)?;
            for s in &outcome.summaries {
                if let Some(last) = &s.last {
                    println!(
                        "seed {}: k={} stationarity={:.4e} residual={:.4e} scalars={}",
                        s.seed, last.k, last.stat_total, last.res_combined, last.scalars_tx
                    );
                }
            }
            if let Some(fit) = &outcome.averaged_fit {
                println!("averaged rate slope {:.3}", fit.slope);
            }
            println!("outputs in {}", cfg.output.display());
            Ok(true)
        }
        Command::Sweep { config, topologies, algorithms, constants, seeds, output } => {
            let mut cfg = load(&config)?;
            if let Some(o) = output {
                cfg.output = o;
            }
            let bad = |what: &str, v: &str| {
                Error::Config(hsm_admm::harness::config::ConfigError::InvalidValue {
                    key: what.into(),
                    value: v.into(),
                    reason: "unknown name".into(),
                })
            };
            let topologies = if topologies.is_empty() {
                vec![cfg.topology.kind]
            } else {
                topologies
                    .iter()
                    .map(|t| TopologyKind::parse(t).ok_or_else(|| bad("topologies", t)))
                    .collect::<Result<_, _>>()?
            };
            let algorithms = if algorithms.is_empty() {
                vec![cfg.sim.algorithm]
            } else {
                algorithms
                    .iter()
                    .map(|a| a.parse::<Algorithm>().map_err(|_| bad("algorithms", a)))
                    .collect::<Result<_, _>>()?
            };
            let constants = match constants {
                Some(text) => parse_constants(&text).map_err(|e| bad("constants", &e))?,
                None => vec![cfg.sim.schedules],
            };
            let spec =
                SweepSpec { topologies, algorithms, constants, seeds: (cfg.sim.seed..cfg.sim.seed + seeds).collect() };
            let cells = run_sweep(&cfg, &spec)?;
            for c in &cells {
                let stat = c.summary.last.map_or(f64::NAN, |r| r.stat_total);
                let status = if c.summary.divergence.is_some() { "diverged" } else { "ok" };
                println!("{:<48} {status:<8} stationarity={stat:.4e}", c.name);
            }
            Ok(true)
        }
        Command::Verify { only } => {
            let results = verify::run_all(&only);
            let passed = results.iter().filter(|c| c.pass).count();
            println!("{passed}/{} criteria passed", results.len());
            Ok(passed == results.len())
        }
        Command::Plot { traces, output } => {
            std::fs::create_dir_all(&output).context("creating plot directory")?;
            let loaded = traces
                .iter()
                .map(|p| read_trace(p).with_context(|| format!("reading {}", p.display())))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let names: Vec<String> = traces
                .iter()
                .map(|p| p.parent().and_then(|d| d.file_name()).map_or("trace".into(), |n| n.to_string_lossy().into()))
                .collect();
            let labelled: Vec<(&str, &[_])> =
                names.iter().map(String::as_str).zip(loaded.iter().map(Vec::as_slice)).collect();
            for p in plot::write_plots(&output, &labelled).map_err(Error::from)? {
                println!("wrote {}", p.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
