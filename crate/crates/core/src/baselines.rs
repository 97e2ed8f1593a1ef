//! Comparison methods: proximal decentralized SGD and proximal gradient
//! tracking, both mixing with Metropolis weights. The uniform-step ADMM
//! baseline is [`hsm_admm_round`](crate::admm::hsm_admm_round) with
//! [`StepPolicy::Uniform`](crate::admm::StepPolicy::Uniform).

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::AdmmError;
use crate::estimator::{draw_batch, update_momentum, MomentumState, Sampling};
use crate::graph::Graph;
use crate::problems::CompositeProblem;
use crate::simulator::MessageLedger;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    UniformAdmm,
    ProxDsgd,
    ProxGradientTracking,
}

/// Sparse symmetric doubly-stochastic mixing matrix; each row lists
/// `(j, w_ij)` for the agent itself and its neighbors, sorted by `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

/// `w_ij = 1 / (1 + max(d_i, d_j))` on edges, `w_ii = 1 − Σ_j w_ij`.
pub fn metropolis_weights(graph: &Graph) -> MixingMatrix {
    let rows = (0..graph.node_count())
        .map(|i| {
            let mut row: Vec<(usize, f64)> =
                graph.neighbors(i).map(|j| (j, 1.0 / (1 + graph.degree(i).max(graph.degree(j))) as f64)).collect();
            let off: f64 = row.iter().map(|(_, w)| w).sum();
            row.push((i, 1.0 - off));
            row.sort_by_key(|&(j, _)| j);
            row
        })
        .collect();
    MixingMatrix { rows }
}

impl MixingMatrix {
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().find(|&&(k, _)| k == j).map_or(0.0, |&(_, w)| w)
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.rows.len();
        DMatrix::from_fn(n, n, |i, j| self.weight(i, j))
    }

    /// `Σ_j w_ij values_j`.
    pub fn mix(&self, i: usize, values: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; values[i].len()];
        for &(j, w) in &self.rows[i] {
            crate::linalg::axpy(w, &values[j], &mut out);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct BaselineAgent {
    pub id: usize,
    pub x: Vec<f64>,
    /// Gradient-tracking variable; unused by prox-DSGD.
    pub s: Vec<f64>,
    /// For prox-GT the STORM estimate `g_i`; for prox-DSGD the last stochastic gradient.
    pub momentum: MomentumState,
    pub rng: ChaCha8Rng,
}

#[derive(Clone, Copy, Debug)]
pub struct BaselineParams<'a> {
    pub prob: &'a CompositeProblem,
    pub graph: &'a Graph,
    pub mixing: &'a MixingMatrix,
    /// `γ = base_step · t^{−1/3}` with `t = k + 1`.
    pub base_step: f64,
    pub c_a: f64,
    pub sampling: Sampling,
}

pub fn baseline_step(base: f64, k: usize) -> f64 {
    base / ((k + 1) as f64).cbrt()
}

/// `x_i ← prox^γ(Σ_j w_ij x_j − γ g_i)` with a fresh stochastic gradient at `x_i`.
pub fn prox_dsgd_round(
    agents: &mut [BaselineAgent],
    params: &BaselineParams<'_>,
    k: usize,
    ledger: &mut MessageLedger,
) -> Result<(), AdmmError> {
    let BaselineParams { prob, graph, mixing, base_step, sampling, .. } = *params;
    let gamma = baseline_step(base_step, k);
    let xs: Vec<Vec<f64>> = agents.iter().map(|a| a.x.clone()).collect();
    ledger.record(2 * graph.edge_count(), prob.dim());
    agents.par_iter_mut().try_for_each(|ag| -> Result<(), AdmmError> {
        let batch = draw_batch(prob, ag.id, sampling, &mut ag.rng);
        let g = prob.stochastic_gradient(ag.id, &ag.x, &batch)?;
        let mut z = mixing.mix(ag.id, &xs);
        crate::linalg::axpy(-gamma, &g, &mut z);
        ag.x = prob.prox_h(ag.id, &z, gamma)?;
        ag.momentum.v = g;
        ag.momentum.last_x.clone_from(&ag.x);
        Ok(())
    })
}

/// Proximal gradient tracking with a STORM estimate `g_i`:
///
/// ```text
/// x_i ← prox^γ(Σ_j w_ij x_j − γ s_i)
/// s_i ← Σ_j w_ij s_j + g_i(new) − g_i(old)
/// ```
///
/// Both `x` and `s` are exchanged each round.
pub fn prox_gt_round(
    agents: &mut [BaselineAgent],
    params: &BaselineParams<'_>,
    k: usize,
    ledger: &mut MessageLedger,
) -> Result<(), AdmmError> {
    let BaselineParams { prob, graph, mixing, base_step, c_a, sampling } = *params;
    let gamma = baseline_step(base_step, k);
    let a_next = (c_a / ((k + 2) as f64).cbrt().powi(2)).min(1.0);
    let xs: Vec<Vec<f64>> = agents.iter().map(|a| a.x.clone()).collect();
    let ss: Vec<Vec<f64>> = agents.iter().map(|a| a.s.clone()).collect();
    ledger.record(2 * 2 * graph.edge_count(), prob.dim());
    agents.par_iter_mut().try_for_each(|ag| -> Result<(), AdmmError> {
        let mut z = mixing.mix(ag.id, &xs);
        crate::linalg::axpy(-gamma, &ag.s, &mut z);
        ag.x = prob.prox_h(ag.id, &z, gamma)?;
        let g_old = ag.momentum.v.clone();
        let x = ag.x.clone();
        update_momentum(&mut ag.momentum, prob, ag.id, &x, a_next, sampling, &mut ag.rng)?;
        let mut s = mixing.mix(ag.id, &ss);
        for ((sc, gn), go) in s.iter_mut().zip(&ag.momentum.v).zip(&g_old) {
            *sc += gn - go;
        }
        ag.s = s;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_topology, Topology};
    use crate::problems::{synthetic, SyntheticSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn ring_metropolis_thirds() {
        let g = build_topology(&Topology::Ring, 6, 0).unwrap();
        let w = metropolis_weights(&g);
        for i in 0..6 {
            for &(j, v) in w.row(i) {
                assert!((v - 1.0 / 3.0).abs() < 1e-15, "w[{i}][{j}] = {v}");
            }
        }
    }

    fn gt_agents(prob: &CompositeProblem, seed: u64) -> Vec<BaselineAgent> {
        (0..prob.agents())
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let x = vec![0.1; prob.dim()];
                let momentum = crate::estimator::init_momentum(prob, i, &x, 4, &mut rng).unwrap();
                BaselineAgent { id: i, s: momentum.v.clone(), x, momentum, rng }
            })
            .collect()
    }

    #[test]
    fn tracking_invariant_and_ledger() {
        let prob =
            synthetic(&SyntheticSpec { agents: 8, dim: 3, samples_per_agent: 10, ..Default::default() }).unwrap();
        let g = build_topology(&Topology::Ring, 8, 0).unwrap();
        let mixing = metropolis_weights(&g);
        let params = BaselineParams {
            prob: &prob,
            graph: &g,
            mixing: &mixing,
            base_step: 0.1,
            c_a: 1.0,
            sampling: Sampling::default(),
        };
        let mut agents = gt_agents(&prob, 3);
        let mut ledger = MessageLedger::default();
        for k in 0..50 {
            prox_gt_round(&mut agents, &params, k, &mut ledger).unwrap();
            for c in 0..3 {
                let s: f64 = agents.iter().map(|a| a.s[c]).sum();
                let g: f64 = agents.iter().map(|a| a.momentum.v[c]).sum();
                assert!((s - g).abs() <= 1e-10 * (1.0 + g.abs()));
            }
        }
        assert_eq!(ledger.total_vectors(), 50 * 2 * 16);

        let mut ledger = MessageLedger::default();
        prox_dsgd_round(&mut agents, &params, 0, &mut ledger).unwrap();
        assert_eq!(ledger.total_vectors(), 16);
    }

    #[test]
    fn single_agent_is_prox_sgd() {
        let prob =
            synthetic(&SyntheticSpec { agents: 1, dim: 3, samples_per_agent: 10, ..Default::default() }).unwrap();
        let g = Graph::new(1, &[]).unwrap();
        let mixing = metropolis_weights(&g);
        assert_eq!(mixing.weight(0, 0), 1.0);
        let params = BaselineParams {
            prob: &prob,
            graph: &g,
            mixing: &mixing,
            base_step: 0.5,
            c_a: 1.0,
            sampling: Sampling::FullBatch,
        };
        let mut agents = gt_agents(&prob, 0);
        let x0 = agents[0].x.clone();
        prox_dsgd_round(&mut agents, &params, 0, &mut MessageLedger::default()).unwrap();
        let grad = prob.full_gradient(0, &x0);
        let z: Vec<f64> = x0.iter().zip(&grad).map(|(x, g)| x - 0.5 * g).collect();
        assert_eq!(agents[0].x, prob.prox_h(0, &z, 0.5).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn metropolis_is_symmetric_doubly_stochastic(n in 2usize..16, seed in 0u64..500) {
            let g = build_topology(&Topology::RandomConnected { prob: 0.35 }, n, seed).unwrap();
            let w = metropolis_weights(&g).dense();
            for i in 0..n {
                let row: f64 = w.row(i).iter().sum();
                prop_assert!((row - 1.0).abs() < 1e-12);
                for j in 0..n {
                    prop_assert_eq!(w[(i, j)], w[(j, i)]);
                    let adjacent = g.neighbors(i).any(|k| k == j);
                    if i != j {
                        prop_assert_eq!(w[(i, j)] > 0.0, adjacent);
                    }
                }
                prop_assert!(w[(i, i)] > 0.0);
            }
        }
    }
}
