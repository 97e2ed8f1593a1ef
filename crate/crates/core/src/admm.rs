//! Per-agent state, parameter schedules and the synchronous HSM-ADMM round.
//!
//! A round runs, for every agent: the local y-prox, the linearized x-step
//! against round-k neighbor values, the exchange of the new x, the dual
//! ascent, and finally the momentum refresh.
//!
//! Schedules are evaluated at `t = k + 1` so that round `k = 0` already has
//! a positive penalty.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{update_momentum, EstimatorError, MomentumState, Sampling};
use crate::graph::Graph;
use crate::linalg;
use crate::problems::{CompositeProblem, ProblemError};
use crate::simulator::MessageLedger;

#[derive(Debug, Error)]
pub enum AdmmError {
    #[error("agent {agent} is missing the value of neighbor {neighbor}")]
    MissingNeighbor { agent: usize, neighbor: usize },
    #[error("agent {agent} received a value from non-neighbor {node}")]
    UnexpectedNeighbor { agent: usize, node: usize },
    #[error("{0} must be positive, got {1}")]
    NonPositive(&'static str, f64),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Schedule constants `c_ρ, c_a, c_η`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedules {
    pub c_rho: f64,
    pub c_a: f64,
    pub c_eta: f64,
}

impl Default for Schedules {
    fn default() -> Self {
        Schedules { c_rho: 1.0, c_a: 1.0, c_eta: 2.0 }
    }
}

/// Schedule values for one round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleValues {
    pub rho: f64,
    pub a: f64,
    pub eta: f64,
}

impl Schedules {
    pub fn validate(&self) -> Result<(), AdmmError> {
        for (name, v) in [("c_rho", self.c_rho), ("c_a", self.c_a), ("c_eta", self.c_eta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(AdmmError::NonPositive(name, v));
            }
        }
        Ok(())
    }

    fn t(k: usize) -> f64 {
        (k + 1) as f64
    }

    /// `ρ = c_ρ t^{1/3}`
    pub fn rho(&self, k: usize) -> f64 {
        self.c_rho * Self::t(k).cbrt()
    }

    /// `a = min(1, c_a t^{−2/3})`
    pub fn momentum(&self, k: usize) -> f64 {
        (self.c_a / Self::t(k).cbrt().powi(2)).min(1.0)
    }

    /// `η = c_η (d + 1) t^{1/3}`
    pub fn eta(&self, k: usize, degree: usize) -> f64 {
        self.c_eta * (degree + 1) as f64 * Self::t(k).cbrt()
    }

    pub fn at(&self, k: usize, degree: usize) -> ScheduleValues {
        ScheduleValues { rho: self.rho(k), a: self.momentum(k), eta: self.eta(k, degree) }
    }
}

/// Which degree drives each agent's step size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPolicy {
    /// `η_i` from the agent's own degree.
    Heterogeneous,
    /// `η_i` from the maximum degree, identical for all agents.
    Uniform,
}

impl StepPolicy {
    pub fn effective_degree(self, graph: &Graph, i: usize) -> usize {
        match self {
            StepPolicy::Heterogeneous => graph.degree(i),
            StepPolicy::Uniform => graph.max_degree(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AgentState {
    pub id: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub beta: Vec<f64>,
    pub momentum: MomentumState,
    pub degree: usize,
    pub rng: ChaCha8Rng,
}

/// Consensus duals, one vector per canonical edge. The tail of edge `e`
/// reads `+α_e`, the head reads `−α_e`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeDuals {
    alpha: Vec<Vec<f64>>,
}

impl EdgeDuals {
    pub fn zeros(graph: &Graph, dim: usize) -> Self {
        EdgeDuals { alpha: vec![vec![0.0; dim]; graph.edge_count()] }
    }

    pub fn edge(&self, e: usize) -> &[f64] {
        &self.alpha[e]
    }

    pub fn edge_mut(&mut self, e: usize) -> &mut [f64] {
        &mut self.alpha[e]
    }

    pub fn as_slice(&self) -> &[Vec<f64>] {
        &self.alpha
    }

    /// `α_ij` as seen by an endpoint with orientation `sign`.
    pub fn view(&self, e: usize, sign: f64) -> impl Iterator<Item = f64> + '_ {
        self.alpha[e].iter().map(move |v| sign * v)
    }
}

/// `y_i = prox_{h_i}^{1/ρ}(x_i − β_i/ρ)`.
pub fn step_y(agent: &AgentState, prob: &CompositeProblem, rho: f64) -> Result<Vec<f64>, AdmmError> {
    if !(rho > 0.0) {
        return Err(AdmmError::NonPositive("rho", rho));
    }
    let input: Vec<f64> = agent.x.iter().zip(&agent.beta).map(|(x, b)| x - b / rho).collect();
    Ok(prob.prox_h(agent.id, &input, 1.0 / rho)?)
}

/// Linearized x-step
/// `x_i − (1/η_i)(v_i + Σ_j[−α_ij + ρ(x_i − x_j)] − β_i + ρ(x_i − y_i))`
/// using the neighbors' round-k values.
pub fn step_x(
    agent: &AgentState,
    graph: &Graph,
    duals: &EdgeDuals,
    neighbor_x: &BTreeMap<usize, &[f64]>,
    y_new: &[f64],
    rho: f64,
    eta: f64,
) -> Result<Vec<f64>, AdmmError> {
    if !(eta > 0.0) {
        return Err(AdmmError::NonPositive("eta", eta));
    }
    let i = agent.id;
    if let Some(&node) = neighbor_x.keys().find(|&&j| !graph.neighbors(i).any(|n| n == j)) {
        return Err(AdmmError::UnexpectedNeighbor { agent: i, node });
    }
    let mut dir = agent.momentum.v.clone();
    for inc in graph.incident(i) {
        let xj =
            neighbor_x.get(&inc.neighbor).ok_or(AdmmError::MissingNeighbor { agent: i, neighbor: inc.neighbor })?;
        for (c, a) in duals.view(inc.edge, inc.sign).enumerate() {
            dir[c] += -a + rho * (agent.x[c] - xj[c]);
        }
    }
    for c in 0..dir.len() {
        dir[c] += -agent.beta[c] + rho * (agent.x[c] - y_new[c]);
    }
    Ok(agent.x.iter().zip(&dir).map(|(x, d)| x - d / eta).collect())
}

/// `α_e ← α_e − ρ(x_i − x_j)` per canonical edge, `β_i ← β_i − ρ(x_i − y_i)` per agent.
pub fn step_duals(duals: &mut EdgeDuals, agents: &mut [AgentState], graph: &Graph, rho: f64) {
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        let (xi, xj) = (&agents[i].x, &agents[j].x);
        for (c, a) in duals.edge_mut(e).iter_mut().enumerate() {
            *a -= rho * (xi[c] - xj[c]);
        }
    }
    agents.par_iter_mut().for_each(|ag| {
        for c in 0..ag.beta.len() {
            ag.beta[c] -= rho * (ag.x[c] - ag.y[c]);
        }
    });
}

/// Everything a round needs besides the mutable state.
#[derive(Clone, Copy, Debug)]
pub struct RoundParams<'a> {
    pub prob: &'a CompositeProblem,
    pub graph: &'a Graph,
    pub schedules: Schedules,
    pub policy: StepPolicy,
    pub sampling: Sampling,
}

/// Round `k`: produces `(x, y, λ, v)^{k+1}` from round-k state and records the exchange.
pub fn hsm_admm_round(
    agents: &mut [AgentState],
    duals: &mut EdgeDuals,
    params: &RoundParams<'_>,
    k: usize,
    ledger: &mut MessageLedger,
) -> Result<(), AdmmError> {
    let RoundParams { prob, graph, schedules, policy, sampling } = *params;
    let rho = schedules.rho(k);
    let snapshot: Vec<Vec<f64>> = agents.iter().map(|a| a.x.clone()).collect();

    let updates: Vec<(Vec<f64>, Vec<f64>)> = agents
        .par_iter()
        .map(|ag| {
            let y = step_y(ag, prob, rho)?;
            let neighbors: BTreeMap<usize, &[f64]> =
                graph.neighbors(ag.id).map(|j| (j, snapshot[j].as_slice())).collect();
            let eta = schedules.eta(k, policy.effective_degree(graph, ag.id));
            let x = step_x(ag, graph, duals, &neighbors, &y, rho, eta)?;
            Ok((y, x))
        })
        .collect::<Result<_, AdmmError>>()?;
    for (ag, (y, x)) in agents.iter_mut().zip(updates) {
        ag.y = y;
        ag.x = x;
    }

    // every agent sends its new x to each neighbor
    ledger.record(2 * graph.edge_count(), prob.dim());

    step_duals(duals, agents, graph, rho);

    let a_next = schedules.momentum(k + 1);
    agents.par_iter_mut().try_for_each(|ag| {
        let x = ag.x.clone();
        update_momentum(&mut ag.momentum, prob, ag.id, &x, a_next, sampling, &mut ag.rng)
    })?;
    Ok(())
}

/// Largest absolute entry over all primal, dual and momentum variables.
pub fn state_magnitude(agents: &[AgentState], duals: &EdgeDuals) -> f64 {
    let per_agent = agents
        .iter()
        .flat_map(|a| [&a.x, &a.y, &a.beta, &a.momentum.v])
        .map(|v| linalg::max_abs_slice(v))
        .fold(0.0, f64::max);
    per_agent.max(linalg::max_abs(duals.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_topology, Topology};
    use crate::problems::{LocalDataset, LossKind, Regularizer};
    use rand::SeedableRng;

    fn agent(id: usize, x: Vec<f64>, beta: Vec<f64>, v: Vec<f64>, degree: usize) -> AgentState {
        AgentState {
            id,
            y: x.clone(),
            momentum: MomentumState { v, last_x: x.clone() },
            x,
            beta,
            degree,
            rng: ChaCha8Rng::seed_from_u64(id as u64),
        }
    }

    fn scalar_problem(reg: Regularizer, n: usize) -> CompositeProblem {
        let data = (0..n).map(|_| LocalDataset::new(1, vec![1.0], vec![0.0]).unwrap()).collect();
        CompositeProblem::new(LossKind::LeastSquares, reg, 0.0, data).unwrap()
    }

    #[test]
    fn schedule_values() {
        let s = Schedules { c_rho: 1.0, c_a: 1.0, c_eta: 1.0 };
        assert!((s.rho(7) - 2.0).abs() < 1e-15);
        assert_eq!(s.momentum(0), 1.0);
        assert!((s.eta(26, 2) - 9.0).abs() < 1e-12);
        let big = Schedules { c_a: 5.0, ..s };
        assert_eq!(big.momentum(1), 1.0);
        assert!(big.momentum(1000) < 1.0 && big.momentum(1000) > 0.0);
    }

    #[test]
    fn star_leaf_steps_are_four_times_larger() {
        let g = build_topology(&Topology::Star, 8, 0).unwrap();
        let s = Schedules::default();
        let het = s.eta(5, StepPolicy::Heterogeneous.effective_degree(&g, 3));
        let uni = s.eta(5, StepPolicy::Uniform.effective_degree(&g, 3));
        assert!((uni / het - 4.0).abs() < 1e-12);
    }

    #[test]
    fn y_step_cases() {
        let prob = scalar_problem(Regularizer::L1 { weight: 1.0 }, 1);
        let ag = agent(0, vec![3.0], vec![1.0], vec![0.0], 0);
        assert_eq!(step_y(&ag, &prob, 2.0).unwrap(), vec![2.0]);

        let prob = scalar_problem(Regularizer::None, 1);
        assert_eq!(step_y(&ag, &prob, 4.0).unwrap(), vec![3.0 - 0.25]);
        assert!(matches!(step_y(&ag, &prob, 0.0), Err(AdmmError::NonPositive(..))));
    }

    #[test]
    fn x_step_by_hand() {
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        let duals = EdgeDuals::zeros(&g, 1);
        let ag = agent(0, vec![0.0], vec![0.0], vec![1.0], 1);
        let x1 = [0.0];
        let nb = BTreeMap::from([(1usize, &x1[..])]);
        let x = step_x(&ag, &g, &duals, &nb, &[0.0], 1.0, 2.0).unwrap();
        assert_eq!(x, vec![-0.5]);

        let empty = BTreeMap::new();
        assert!(matches!(
            step_x(&ag, &g, &duals, &empty, &[0.0], 1.0, 2.0),
            Err(AdmmError::MissingNeighbor { agent: 0, neighbor: 1 })
        ));
    }

    #[test]
    fn consensus_fixed_point() {
        let g = build_topology(&Topology::Ring, 5, 0).unwrap();
        let duals = EdgeDuals::zeros(&g, 2);
        let xs = vec![vec![0.4, -1.0]; 5];
        for i in 0..5 {
            let ag = agent(i, xs[i].clone(), vec![0.0; 2], vec![0.0; 2], 2);
            let nb: BTreeMap<usize, &[f64]> = g.neighbors(i).map(|j| (j, xs[j].as_slice())).collect();
            assert_eq!(step_x(&ag, &g, &duals, &nb, &xs[i], 3.0, 7.0).unwrap(), xs[i]);
        }
    }

    #[test]
    fn dual_views_negate() {
        let g = Graph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let mut duals = EdgeDuals::zeros(&g, 1);
        let mut agents: Vec<_> =
            [1.0, 4.0, 4.0].iter().enumerate().map(|(i, &v)| agent(i, vec![v], vec![0.0], vec![0.0], 1)).collect();
        step_duals(&mut duals, &mut agents, &g, 2.0);
        // edge (0,1): α = −2·(1 − 4); edge (1,2) unchanged since x_1 = x_2
        assert_eq!(duals.edge(0), &[6.0]);
        assert_eq!(duals.edge(1), &[0.0]);
        let tail: Vec<f64> = duals.view(0, 1.0).collect();
        let head: Vec<f64> = duals.view(0, -1.0).collect();
        assert_eq!(tail[0], -head[0]);
        // y = x leaves β untouched
        assert!(agents.iter().all(|a| a.beta == vec![0.0]));
    }

    #[test]
    fn ring_ledger_counts() {
        let g = build_topology(&Topology::Ring, 8, 0).unwrap();
        let prob = scalar_problem(Regularizer::None, 8);
        let mut agents: Vec<_> = (0..8).map(|i| agent(i, vec![0.1 * i as f64], vec![0.0], vec![0.0], 2)).collect();
        let mut duals = EdgeDuals::zeros(&g, 1);
        let mut ledger = MessageLedger::default();
        let params = RoundParams {
            prob: &prob,
            graph: &g,
            schedules: Schedules::default(),
            policy: StepPolicy::Heterogeneous,
            sampling: Sampling::FullBatch,
        };
        for k in 0..10 {
            hsm_admm_round(&mut agents, &mut duals, &params, k, &mut ledger).unwrap();
        }
        assert_eq!(ledger.total_vectors(), 10 * 16);
        assert_eq!(ledger.total_scalars(), 10 * 16);
    }
}
