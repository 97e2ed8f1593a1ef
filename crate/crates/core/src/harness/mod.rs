//! Configuration, output files, plots, parameter sweeps and acceptance checks.

pub mod config;
pub mod output;
pub mod plot;
pub mod sweep;
pub mod verify;

use std::fs;
use std::path::Path;

use crate::admm::StepPolicy;
use crate::metrics::{averaged_rate_fit, constants_feasibility, Feasibility, RateFit};
use crate::simulator::{run, Algorithm, MetricsTrace, RunError};
use crate::Error;
use config::RunConfig;
use output::{write_json, write_trace, Divergence, RunSummary};

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub traces: Vec<MetricsTrace>,
    pub summaries: Vec<RunSummary>,
    /// Fit on the replica-averaged curve, when there are several replicas.
    pub averaged_fit: Option<RateFit>,
    pub feasibility: Option<Feasibility>,
}

/// Feasibility of the configured constants, for the ADMM variants.
pub fn feasibility_of(cfg: &RunConfig, graph: &crate::Graph, smoothness: f64) -> Option<Feasibility> {
    let policy = match cfg.sim.algorithm {
        Algorithm::HsmAdmm => StepPolicy::Heterogeneous,
        Algorithm::UniformAdmm => StepPolicy::Uniform,
        _ => return None,
    };
    Some(constants_feasibility(graph, cfg.sim.schedules, policy, smoothness, cfg.sim.lyapunov))
}

fn write_run(dir: &Path, trace: &MetricsTrace, summary: &RunSummary, plots: bool) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    write_trace(&dir.join("trace.csv"), &trace.rows)?;
    write_json(&dir.join("summary.json"), summary)?;
    if plots && !trace.rows.is_empty() {
        let name = trace.algorithm.map_or("run", Algorithm::name);
        match plot::write_plots(dir, &[(name, &trace.rows)]) {
            Ok(_) | Err(plot::PlotError::EmptyTrace) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

/// Run every replica of `cfg` and write its outputs under `cfg.output`
/// (directly for one replica, in `replica_<r>/` otherwise). A divergent
/// replica still writes its partial trace before the error is returned.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutcome, Error> {
    cfg.validate()?;
    let prob = cfg.build_problem()?;
    let graph = cfg.build_graph(prob.agents())?;
    let feasibility = feasibility_of(cfg, &graph, prob.smoothness());
    if let Some(f) = feasibility.filter(|f| !f.feasible) {
        eprintln!(
            "warning: constants do not satisfy the descent conditions (C_ℰ = {:.3}, λ_min(C_x) = {:.3})",
            f.c_error, f.lambda_min_cx
        );
    }
    fs::create_dir_all(&cfg.output)?;
    let mut traces = Vec::new();
    let mut summaries = Vec::new();
    for r in 0..cfg.replicas {
        let sim = crate::SimConfig { seed: cfg.sim.seed + r as u64, ..cfg.sim.clone() };
        let dir = if cfg.replicas == 1 { cfg.output.clone() } else { cfg.output.join(format!("replica_{r}")) };
        match run(&sim, &prob, &graph, &mut ()) {
            Ok(trace) => {
                let summary = RunSummary::from_trace(&trace, sim.seed, feasibility, None);
                write_run(&dir, &trace, &summary, cfg.plots)?;
                traces.push(trace);
                summaries.push(summary);
            }
            Err(RunError::NumericalDivergence { round, magnitude, trace }) => {
                let summary =
                    RunSummary::from_trace(&trace, sim.seed, feasibility, Some(Divergence { round, magnitude }));
                write_run(&dir, &trace, &summary, cfg.plots)?;
                return Err(RunError::NumericalDivergence { round, magnitude, trace }.into());
            }
            Err(e) => return Err(e.into()),
        }
    }
    let averaged_fit = (traces.len() > 1).then(|| averaged_rate_fit(&traces).ok()).flatten();
    if cfg.replicas > 1 {
        let combined = serde_json::json!({
            "replicas": summaries,
            "averaged_rate_fit": averaged_fit,
        });
        write_json(&cfg.output.join("summary.json"), &combined)?;
    }
    Ok(RunOutcome { traces, summaries, averaged_fit, feasibility })
}
