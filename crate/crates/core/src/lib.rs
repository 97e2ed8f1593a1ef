//! Deterministic simulator for decentralized stochastic nonconvex composite
//! optimization with momentum ADMM and degree-scaled step sizes.
//!
//! Agents on an undirected connected graph minimize `Σ_i f_i(x) + h_i(x)`,
//! where each `f_i` is a smooth stochastic loss over a private dataset and
//! `h_i` is a convex regularizer with a cheap prox. The crate provides:
//!
//! - [`graph`]: topologies, incidence/Laplacian matrices and the constraint operators.
//! - [`problems`]: composite objectives, stochastic and full gradient oracles, synthetic data.
//! - [`estimator`]: the STORM recursive-momentum estimator.
//! - [`admm`]: per-agent state and the synchronous HSM-ADMM round.
//! - [`baselines`]: uniform-step ADMM, proximal DSGD and proximal gradient tracking.
//! - [`simulator`]: the round engine, message ledger and trace.
//! - [`metrics`]: stationarity, residuals, Lyapunov value and inequality checkers.
//! - [`harness`]: configuration files, trace/summary output, plots, sweeps and verification.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod baselines;
pub mod estimator;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod problems;
pub mod simulator;

use thiserror::Error;

pub use admm::{AgentState, EdgeDuals, Schedules, StepPolicy};
pub use graph::{build_topology, ConstraintOps, Graph, Topology};
pub use problems::{CompositeProblem, LossKind, Regularizer};
pub use simulator::{run, Algorithm, MetricsTrace, SimConfig};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] graph::GraphError),
    #[error(transparent)]
    Problem(#[from] problems::ProblemError),
    #[error(transparent)]
    Estimator(#[from] estimator::EstimatorError),
    #[error(transparent)]
    Admm(#[from] admm::AdmmError),
    #[error(transparent)]
    Run(#[from] simulator::RunError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error(transparent)]
    Config(#[from] harness::config::ConfigError),
    #[error(transparent)]
    Plot(#[from] harness::plot::PlotError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
