//! Synchronous round engine shared by every algorithm.
//!
//! Each agent owns a ChaCha8 stream `(master_seed, agent_id)`; per-agent work
//! runs on a rayon pool of the configured size while every reduction runs
//! sequentially in agent order, so traces do not depend on the worker count.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admm::{
    hsm_admm_round, state_magnitude, AdmmError, AgentState, EdgeDuals, RoundParams, Schedules, StepPolicy,
};
use crate::baselines::{
    metropolis_weights, prox_dsgd_round, prox_gt_round, BaselineAgent, BaselineParams, MixingMatrix,
};
use crate::estimator::{draw_batch, init_momentum, init_momentum_with, EstimatorError, MomentumState, Sampling};
use crate::graph::{ConstraintOps, Graph};
use crate::linalg;
use crate::metrics::{
    gradient_error, lemma1_check, lyapunov, residuals, sampling_variance, stationarity_measure, Lemma1Check,
    Lemma1Inputs, LyapunovConstants, LyapunovInputs, LyapunovSetup, RoundDiagnostics,
};
use crate::problems::CompositeProblem;

/// Stream reserved for the shared initial iterate.
const INIT_STREAM: u64 = u64::MAX;

/// Vector messages per round; scalars are vectors times `p`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MessageLedger {
    per_round: Vec<u64>,
    total_vectors: u64,
    total_scalars: u64,
}

impl MessageLedger {
    pub fn record(&mut self, vectors: usize, dim: usize) {
        self.per_round.push(vectors as u64);
        self.total_vectors += vectors as u64;
        self.total_scalars += (vectors * dim) as u64;
    }

    pub fn rounds(&self) -> usize {
        self.per_round.len()
    }

    pub fn per_round(&self) -> &[u64] {
        &self.per_round
    }

    pub fn total_vectors(&self) -> u64 {
        self.total_vectors
    }

    pub fn total_scalars(&self) -> u64 {
        self.total_scalars
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    HsmAdmm,
    UniformAdmm,
    ProxDsgd,
    ProxGt,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] =
        [Algorithm::HsmAdmm, Algorithm::UniformAdmm, Algorithm::ProxDsgd, Algorithm::ProxGt];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::HsmAdmm => "hsm_admm",
            Algorithm::UniformAdmm => "uniform_admm",
            Algorithm::ProxDsgd => "prox_dsgd",
            Algorithm::ProxGt => "prox_gt",
        }
    }

    pub fn is_admm(self) -> bool {
        matches!(self, Algorithm::HsmAdmm | Algorithm::UniformAdmm)
    }

    fn policy(self) -> StepPolicy {
        match self {
            Algorithm::UniformAdmm => StepPolicy::Uniform,
            _ => StepPolicy::Heterogeneous,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

/// When trace rows are emitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cadence {
    /// Every round up to 100, then every `⌈K/1000⌉` rounds, and always the last.
    Auto,
    Every(usize),
}

impl Cadence {
    pub fn logs(self, k: usize, total: usize) -> bool {
        if k == total {
            return true;
        }
        match self {
            Cadence::Auto => k <= 100 || k.is_multiple_of(total.div_ceil(1000)),
            Cadence::Every(n) => k.is_multiple_of(n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub algorithm: Algorithm,
    pub schedules: Schedules,
    pub sampling: Sampling,
    /// Initial momentum batch; ignored under full-batch sampling.
    pub m0: usize,
    pub rounds: usize,
    pub seed: u64,
    pub workers: usize,
    pub divergence_guard: f64,
    pub cadence: Cadence,
    /// Baseline step `γ = base_step · t^{−1/3}`.
    pub base_step: f64,
    /// Standard deviation of the shared random initial iterate.
    pub init_scale: f64,
    pub lyapunov: LyapunovConstants,
    /// Record per-round diagnostics and run the dual-difference check every round.
    pub diagnostics: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            algorithm: Algorithm::HsmAdmm,
            schedules: Schedules::default(),
            sampling: Sampling::default(),
            m0: 32,
            rounds: 1000,
            seed: 0,
            workers: 1,
            divergence_guard: 1e12,
            cadence: Cadence::Auto,
            base_step: 0.1,
            init_scale: 1.0,
            lyapunov: LyapunovConstants::default(),
            diagnostics: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: String| Err(RunError::ConfigInvalid(m));
        self.schedules.validate().map_err(|e| RunError::ConfigInvalid(e.to_string()))?;
        self.sampling.validate().map_err(|e| RunError::ConfigInvalid(e.to_string()))?;
        if self.m0 == 0 {
            return bad("m0 must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if !(self.divergence_guard > 0.0) {
            return bad(format!("divergence_guard must be positive, got {}", self.divergence_guard));
        }
        if !(self.base_step > 0.0 && self.base_step.is_finite()) {
            return bad(format!("base_step must be positive, got {}", self.base_step));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad(format!("init_scale must be >= 0, got {}", self.init_scale));
        }
        if matches!(self.cadence, Cadence::Every(0)) {
            return bad("cadence must be at least 1".into());
        }
        let c = &self.lyapunov;
        if !(c.theta > 0.0 && c.c_gamma > 0.0 && c.c_mu > 0.0 && c.c_err > 0.0) {
            return bad("Lyapunov constants must be positive".into());
        }
        Ok(())
    }
}

/// One logged row; `k` counts completed rounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub stat_total: f64,
    pub stat_prox: f64,
    pub stat_consensus: f64,
    pub res_combined: f64,
    pub res_consensus: f64,
    pub res_split: f64,
    pub err_sq: f64,
    pub phi: f64,
    pub scalars_tx: u64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTrace {
    pub algorithm: Option<Algorithm>,
    pub dim: usize,
    pub rows: Vec<TraceRow>,
    pub ledger: MessageLedger,
    pub lemma1: Vec<Lemma1Check>,
    /// Entry `k` describes state `k`; empty unless diagnostics are on.
    pub diagnostics: Vec<RoundDiagnostics>,
    pub final_x: Vec<Vec<f64>>,
}

impl MetricsTrace {
    pub fn lemma1_violations(&self) -> usize {
        self.lemma1.iter().filter(|c| c.violated).count()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }
}

/// Receives each trace row as it is produced.
pub trait MetricsSink {
    fn on_row(&mut self, row: &TraceRow);
}

impl MetricsSink for () {
    fn on_row(&mut self, _: &TraceRow) {}
}

impl<F: FnMut(&TraceRow)> MetricsSink for F {
    fn on_row(&mut self, row: &TraceRow) {
        self(row)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("numerical divergence at round {round}: state magnitude {magnitude:e}")]
    NumericalDivergence { round: usize, magnitude: f64, trace: Box<MetricsTrace> },
    #[error(transparent)]
    Admm(#[from] AdmmError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Mutable per-run state.
enum AlgorithmState {
    Admm { agents: Vec<AgentState>, duals: EdgeDuals, policy: StepPolicy },
    Baseline { agents: Vec<BaselineAgent>, mixing: MixingMatrix },
}

impl AlgorithmState {
    fn xs(&self) -> Vec<Vec<f64>> {
        match self {
            AlgorithmState::Admm { agents, .. } => agents.iter().map(|a| a.x.clone()).collect(),
            AlgorithmState::Baseline { agents, .. } => agents.iter().map(|a| a.x.clone()).collect(),
        }
    }

    fn ys(&self) -> Vec<Vec<f64>> {
        match self {
            AlgorithmState::Admm { agents, .. } => agents.iter().map(|a| a.y.clone()).collect(),
            AlgorithmState::Baseline { agents, .. } => agents.iter().map(|a| a.x.clone()).collect(),
        }
    }

    fn vs(&self) -> Vec<Vec<f64>> {
        match self {
            AlgorithmState::Admm { agents, .. } => agents.iter().map(|a| a.momentum.v.clone()).collect(),
            AlgorithmState::Baseline { agents, .. } => agents.iter().map(|a| a.momentum.v.clone()).collect(),
        }
    }

    fn duals(&self) -> Option<(&EdgeDuals, Vec<Vec<f64>>)> {
        match self {
            AlgorithmState::Admm { agents, duals, .. } => {
                Some((duals, agents.iter().map(|a| a.beta.clone()).collect()))
            }
            AlgorithmState::Baseline { .. } => None,
        }
    }

    fn magnitude(&self) -> f64 {
        match self {
            AlgorithmState::Admm { agents, duals, .. } => state_magnitude(agents, duals),
            AlgorithmState::Baseline { agents, .. } => agents
                .iter()
                .flat_map(|a| [&a.x, &a.s, &a.momentum.v])
                .map(|v| linalg::max_abs_slice(v))
                .fold(0.0, f64::max),
        }
    }
}

/// Shared initial iterate `x⁰`, identical across agents.
pub fn initial_iterate(seed: u64, dim: usize, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Agent `i`'s private stream.
pub fn agent_rng(seed: u64, agent: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(agent as u64);
    rng
}

fn initial_momentum(
    prob: &CompositeProblem,
    i: usize,
    x0: &[f64],
    config: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<MomentumState, EstimatorError> {
    match config.sampling {
        Sampling::FullBatch => init_momentum_with(prob, i, x0, &draw_batch(prob, i, Sampling::FullBatch, rng)),
        Sampling::WithReplacement { .. } => init_momentum(prob, i, x0, config.m0, rng),
    }
}

fn initial_state(config: &SimConfig, prob: &CompositeProblem, graph: &Graph) -> Result<AlgorithmState, RunError> {
    let p = prob.dim();
    let x0 = initial_iterate(config.seed, p, config.init_scale);
    let n = graph.node_count();
    if config.algorithm.is_admm() {
        let agents = (0..n)
            .map(|i| {
                let mut rng = agent_rng(config.seed, i);
                let momentum = initial_momentum(prob, i, &x0, config, &mut rng)?;
                Ok(AgentState {
                    id: i,
                    x: x0.clone(),
                    y: x0.clone(),
                    beta: vec![0.0; p],
                    momentum,
                    degree: graph.degree(i),
                    rng,
                })
            })
            .collect::<Result<_, EstimatorError>>()?;
        Ok(AlgorithmState::Admm { agents, duals: EdgeDuals::zeros(graph, p), policy: config.algorithm.policy() })
    } else {
        let agents = (0..n)
            .map(|i| {
                let mut rng = agent_rng(config.seed, i);
                let momentum = initial_momentum(prob, i, &x0, config, &mut rng)?;
                Ok(BaselineAgent { id: i, x: x0.clone(), s: momentum.v.clone(), momentum, rng })
            })
            .collect::<Result<_, EstimatorError>>()?;
        Ok(AlgorithmState::Baseline { agents, mixing: metropolis_weights(graph) })
    }
}

/// Initial ADMM agents and edge duals exactly as [`run`] creates them.
pub fn initial_admm_state(
    config: &SimConfig,
    prob: &CompositeProblem,
    graph: &Graph,
) -> Result<(Vec<AgentState>, EdgeDuals), RunError> {
    let config = SimConfig { algorithm: Algorithm::HsmAdmm, ..config.clone() };
    match initial_state(&config, prob, graph)? {
        AlgorithmState::Admm { agents, duals, .. } => Ok((agents, duals)),
        AlgorithmState::Baseline { .. } => unreachable!("admm algorithm"),
    }
}

fn stack_duals(state: &AlgorithmState) -> Vec<f64> {
    match state.duals() {
        Some((duals, betas)) => {
            let mut out = linalg::stack(duals.as_slice());
            out.extend(linalg::stack(&betas));
            out
        }
        None => Vec::new(),
    }
}

fn dist_sq_blocks(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| linalg::dist_sq(x, y)).sum()
}

/// Run `config.rounds` rounds and return the trace of logged rows.
pub fn run(
    config: &SimConfig,
    prob: &CompositeProblem,
    graph: &Graph,
    sink: &mut (dyn MetricsSink + Send),
) -> Result<MetricsTrace, RunError> {
    config.validate()?;
    if prob.agents() != graph.node_count() {
        return Err(RunError::ConfigInvalid(format!(
            "problem has {} agents but graph has {} nodes",
            prob.agents(),
            graph.node_count()
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| RunError::ConfigInvalid(format!("worker pool: {e}")))?;
    pool.install(|| run_rounds(config, prob, graph, sink))
}

fn run_rounds(
    config: &SimConfig,
    prob: &CompositeProblem,
    graph: &Graph,
    sink: &mut (dyn MetricsSink + Send),
) -> Result<MetricsTrace, RunError> {
    let start = Instant::now();
    let algo = config.algorithm;
    let mut state = initial_state(config, prob, graph)?;
    let mut trace = MetricsTrace { algorithm: Some(algo), dim: prob.dim(), ..MetricsTrace::default() };
    let total = config.rounds;

    let setup = algo
        .is_admm()
        .then(|| LyapunovSetup::new(graph, config.schedules, algo.policy(), prob.smoothness(), config.lyapunov));
    let ops = ConstraintOps::implicit(graph, prob.dim());
    let diag = config.diagnostics;

    let mut x_cur = state.xs();
    let mut v_cur = state.vs();
    let mut x_prev: Option<Vec<Vec<f64>>> = None;
    let mut err_cur: Option<f64> = None;
    let mut err_prev: Option<f64> = None;
    if diag {
        let e0 = gradient_error(prob, &x_cur, &v_cur);
        err_cur = Some(e0);
        trace.diagnostics.push(RoundDiagnostics {
            k: 0,
            phi: f64::NAN,
            r_sq: 0.0,
            err_sq: e0,
            dx_sq: 0.0,
            sigma_sq: sampling_variance(prob, &x_cur, config.sampling),
        });
    }

    for k in 0..total {
        let lambda_before = if diag { stack_duals(&state) } else { Vec::new() };
        match &mut state {
            AlgorithmState::Admm { agents, duals, policy } => {
                let params = RoundParams {
                    prob,
                    graph,
                    schedules: config.schedules,
                    policy: *policy,
                    sampling: config.sampling,
                };
                hsm_admm_round(agents, duals, &params, k, &mut trace.ledger)?;
            }
            AlgorithmState::Baseline { agents, mixing } => {
                let params = BaselineParams {
                    prob,
                    graph,
                    mixing,
                    base_step: config.base_step,
                    c_a: config.schedules.c_a,
                    sampling: config.sampling,
                };
                match algo {
                    Algorithm::ProxGt => prox_gt_round(agents, &params, k, &mut trace.ledger)?,
                    _ => prox_dsgd_round(agents, &params, k, &mut trace.ledger)?,
                }
            }
        }
        let row_k = k + 1;

        let magnitude = state.magnitude();
        if !(magnitude <= config.divergence_guard) {
            trace.final_x = state.xs();
            return Err(RunError::NumericalDivergence { round: row_k, magnitude, trace: Box::new(trace) });
        }

        let x_next = state.xs();
        let v_next = state.vs();
        let logs = config.cadence.logs(row_k, total);
        let has_error = algo != Algorithm::ProxDsgd;
        let err_next = (has_error && (diag || logs)).then(|| gradient_error(prob, &x_next, &v_next));

        if diag && algo.is_admm() && k >= 1 {
            let setup = setup.as_ref().expect("admm setup");
            let dlambda_sq = linalg::dist_sq(&stack_duals(&state), &lambda_before);
            let dx_next = linalg::sub(&linalg::stack(&x_next), &linalg::stack(&x_cur));
            let dx_prev_sq = dist_sq_blocks(&x_cur, x_prev.as_ref().expect("history"));
            trace.lemma1.push(lemma1_check(
                setup,
                &ops,
                &Lemma1Inputs {
                    k,
                    dlambda_sq,
                    dx_next: &dx_next,
                    dx_prev_sq,
                    err_sq: err_cur.expect("diagnostic error"),
                    err_prev_sq: err_prev.expect("diagnostic error"),
                },
            ));
        }

        let need_phi = algo.is_admm() && row_k >= 2 && (logs || diag);
        let ys = state.ys();
        let phi = if need_phi {
            let setup = setup.as_ref().expect("admm setup");
            let e_cur = *err_cur.get_or_insert_with(|| gradient_error(prob, &x_cur, &v_cur));
            let (duals, betas) = state.duals().expect("admm duals");
            lyapunov(
                prob,
                graph,
                setup,
                &LyapunovInputs {
                    k: row_k,
                    xs: &x_next,
                    ys: &ys,
                    duals,
                    betas: &betas,
                    x_prev: &x_cur,
                    err_sq: err_next.expect("error computed when phi is needed"),
                    err_prev_sq: e_cur,
                },
            )
            .map(|s| s.phi)
            .unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };

        let res = (logs || diag).then(|| residuals(graph, &x_next, &ys));
        if diag {
            let r = res.expect("residuals");
            trace.diagnostics.push(RoundDiagnostics {
                k: row_k,
                phi,
                r_sq: r.combined * r.combined,
                err_sq: err_next.unwrap_or(f64::NAN),
                dx_sq: dist_sq_blocks(&x_next, &x_cur),
                sigma_sq: sampling_variance(prob, &x_next, config.sampling),
            });
        }
        if logs {
            let stat = stationarity_measure(prob, &x_next);
            let r = res.expect("residuals");
            let row = TraceRow {
                k: row_k,
                stat_total: stat.total,
                stat_prox: stat.prox_gradient_gap,
                stat_consensus: stat.consensus_gap,
                res_combined: r.combined,
                res_consensus: r.consensus,
                res_split: r.splitting,
                err_sq: err_next.unwrap_or(f64::NAN),
                phi,
                scalars_tx: trace.ledger.total_scalars(),
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            };
            sink.on_row(&row);
            trace.rows.push(row);
        }

        x_prev = Some(std::mem::replace(&mut x_cur, x_next));
        v_cur = v_next;
        err_prev = err_cur;
        err_cur = err_next;
    }
    trace.final_x = state.xs();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_topology, Topology};
    use crate::problems::{synthetic, SyntheticSpec};

    fn small_problem(n: usize) -> CompositeProblem {
        synthetic(&SyntheticSpec { agents: n, dim: 3, samples_per_agent: 10, ..Default::default() }).unwrap()
    }

    #[test]
    fn cadence_rule() {
        let c = Cadence::Auto;
        assert!(c.logs(100, 20_000));
        assert!(!c.logs(101, 20_000));
        assert!(c.logs(120, 20_000));
        assert!(c.logs(20_000, 20_000));
        assert!(Cadence::Every(7).logs(14, 20));
        assert!(Cadence::Every(7).logs(20, 20));
        assert!(!Cadence::Every(7).logs(15, 20));
    }

    #[test]
    fn zero_rounds_is_empty() {
        let prob = small_problem(4);
        let g = build_topology(&Topology::Ring, 4, 0).unwrap();
        let cfg = SimConfig { rounds: 0, ..Default::default() };
        let t = run(&cfg, &prob, &g, &mut ()).unwrap();
        assert!(t.rows.is_empty());
        assert_eq!(t.ledger.total_vectors(), 0);
    }

    #[test]
    fn ledger_totals() {
        let prob =
            synthetic(&SyntheticSpec { agents: 8, dim: 10, samples_per_agent: 10, ..Default::default() }).unwrap();
        let g = build_topology(&Topology::Ring, 8, 0).unwrap();
        let cfg = SimConfig { rounds: 100, ..Default::default() };
        let t = run(&cfg, &prob, &g, &mut ()).unwrap();
        assert_eq!(t.ledger.total_vectors(), 1600);
        assert_eq!(t.ledger.total_scalars(), 16_000);
        assert_eq!(t.last().unwrap().scalars_tx, 16_000);
    }

    #[test]
    fn sink_sees_every_row() {
        let prob = small_problem(4);
        let g = build_topology(&Topology::Ring, 4, 0).unwrap();
        let cfg = SimConfig { rounds: 30, ..Default::default() };
        let mut seen = Vec::new();
        let mut sink = |r: &TraceRow| seen.push(r.k);
        let t = run(&cfg, &prob, &g, &mut sink).unwrap();
        assert_eq!(seen, (1..=30).collect::<Vec<_>>());
        assert_eq!(t.rows.len(), 30);
        assert!(t.rows[0].phi.is_nan());
        assert!(t.rows[1].phi.is_finite());
    }

    #[test]
    fn divergence_is_reported() {
        let prob = small_problem(4);
        let g = build_topology(&Topology::Ring, 4, 0).unwrap();
        let cfg = SimConfig {
            rounds: 500,
            schedules: Schedules { c_rho: 1.0, c_a: 1.0, c_eta: 0.05 },
            divergence_guard: 1e6,
            ..Default::default()
        };
        match run(&cfg, &prob, &g, &mut ()) {
            Err(RunError::NumericalDivergence { round, trace, .. }) => {
                assert!(round < 500);
                assert!(trace.rows.len() < round);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let prob = small_problem(4);
        let g = build_topology(&Topology::Ring, 4, 0).unwrap();
        let cfg = SimConfig { workers: 0, ..Default::default() };
        assert!(matches!(run(&cfg, &prob, &g, &mut ()), Err(RunError::ConfigInvalid(_))));
        let g5 = build_topology(&Topology::Ring, 5, 0).unwrap();
        assert!(matches!(run(&SimConfig::default(), &prob, &g5, &mut ()), Err(RunError::ConfigInvalid(_))));
    }

    #[test]
    fn worker_count_does_not_change_trace() {
        let prob = small_problem(6);
        let g = build_topology(&Topology::RandomConnected { prob: 0.5 }, 6, 2).unwrap();
        for algo in Algorithm::ALL {
            let base = SimConfig { algorithm: algo, rounds: 60, seed: 9, ..Default::default() };
            let a = run(&base, &prob, &g, &mut ()).unwrap();
            let b = run(&SimConfig { workers: 4, ..base }, &prob, &g, &mut ()).unwrap();
            let strip = |t: &MetricsTrace| t.rows.iter().map(|r| TraceRow { wall_ms: 0.0, ..*r }).collect::<Vec<_>>();
            let (sa, sb) = (strip(&a), strip(&b));
            assert_eq!(sa.len(), sb.len());
            for (ra, rb) in sa.iter().zip(&sb) {
                assert_eq!(format!("{ra:?}"), format!("{rb:?}"));
            }
            assert_eq!(a.final_x, b.final_x);
        }
    }
}
