//! STORM recursive-momentum gradient estimator, one state per agent.
//!
//! ```text
//! v ← ∇f_i(x_new, ξ) + (1 − a)(v − ∇f_i(x_old, ξ))
//! ```
//!
//! Both gradients are taken on the same batch `ξ`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problems::{CompositeProblem, ProblemError, SampleBatch};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("batch size must be at least 1, got {0}")]
    InvalidBatch(usize),
    #[error("momentum parameter must lie in (0, 1], got {0}")]
    MomentumOutOfRange(f64),
    #[error("momentum state has dimension {state}, iterate has {iterate}")]
    DimensionMismatch { state: usize, iterate: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// How each agent draws its per-round samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// `B` indices uniformly with replacement.
    WithReplacement { batch: usize },
    /// Every local sample, in order; the oracle becomes deterministic.
    FullBatch,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::WithReplacement { batch: 1 }
    }
}

impl Sampling {
    pub fn validate(self) -> Result<(), EstimatorError> {
        match self {
            Sampling::WithReplacement { batch: 0 } => Err(EstimatorError::InvalidBatch(0)),
            _ => Ok(()),
        }
    }

    /// Variance divisor of the batch mean: `B`, or infinity for full batches.
    pub fn variance_divisor(self) -> f64 {
        match self {
            Sampling::WithReplacement { batch } => batch as f64,
            Sampling::FullBatch => f64::INFINITY,
        }
    }
}

pub fn draw_batch<R: Rng + ?Sized>(prob: &CompositeProblem, i: usize, sampling: Sampling, rng: &mut R) -> SampleBatch {
    let len = prob.dataset(i).len();
    let indices = match sampling {
        Sampling::WithReplacement { batch } => (0..batch).map(|_| rng.random_range(0..len)).collect(),
        Sampling::FullBatch => (0..len).collect(),
    };
    SampleBatch::new(i, indices)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentumState {
    pub v: Vec<f64>,
    /// Iterate the current estimate is anchored at.
    pub last_x: Vec<f64>,
}

/// `v⁰` as the mean of `m0` gradients at `x0`, sampled with replacement.
pub fn init_momentum<R: Rng + ?Sized>(
    prob: &CompositeProblem,
    i: usize,
    x0: &[f64],
    m0: usize,
    rng: &mut R,
) -> Result<MomentumState, EstimatorError> {
    if m0 < 1 {
        return Err(EstimatorError::InvalidBatch(m0));
    }
    let batch = draw_batch(prob, i, Sampling::WithReplacement { batch: m0 }, rng);
    init_momentum_with(prob, i, x0, &batch)
}

pub fn init_momentum_with(
    prob: &CompositeProblem,
    i: usize,
    x0: &[f64],
    batch: &SampleBatch,
) -> Result<MomentumState, EstimatorError> {
    Ok(MomentumState { v: prob.stochastic_gradient(i, x0, batch)?, last_x: x0.to_vec() })
}

/// Draw one batch and apply the recursive update at `x_new`.
pub fn update_momentum<R: Rng + ?Sized>(
    state: &mut MomentumState,
    prob: &CompositeProblem,
    i: usize,
    x_new: &[f64],
    a: f64,
    sampling: Sampling,
    rng: &mut R,
) -> Result<(), EstimatorError> {
    check_momentum(a)?;
    let batch = draw_batch(prob, i, sampling, rng);
    update_momentum_with(state, prob, i, x_new, a, &batch)
}

/// The recursive update with an explicit batch.
pub fn update_momentum_with(
    state: &mut MomentumState,
    prob: &CompositeProblem,
    i: usize,
    x_new: &[f64],
    a: f64,
    batch: &SampleBatch,
) -> Result<(), EstimatorError> {
    check_momentum(a)?;
    if state.last_x.len() != x_new.len() {
        return Err(EstimatorError::DimensionMismatch { state: state.last_x.len(), iterate: x_new.len() });
    }
    let g_new = prob.stochastic_gradient(i, x_new, batch)?;
    let g_old = prob.stochastic_gradient(i, &state.last_x, batch)?;
    let keep = 1.0 - a;
    for ((v, gn), go) in state.v.iter_mut().zip(&g_new).zip(&g_old) {
        *v = gn + keep * (*v - go);
    }
    state.last_x.copy_from_slice(x_new);
    Ok(())
}

fn check_momentum(a: f64) -> Result<(), EstimatorError> {
    if a > 0.0 && a <= 1.0 {
        Ok(())
    } else {
        Err(EstimatorError::MomentumOutOfRange(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::problems::{synthetic, LocalDataset, LossKind, Regularizer, SyntheticSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_sample(a: f64, b: f64) -> CompositeProblem {
        let d = LocalDataset::new(1, vec![a], vec![b]).unwrap();
        CompositeProblem::new(LossKind::LeastSquares, Regularizer::None, 0.0, vec![d]).unwrap()
    }

    #[test]
    fn hand_evaluated_update() {
        let prob = one_sample(1.0, 0.0);
        let mut st = MomentumState { v: vec![3.0], last_x: vec![2.0] };
        let batch = SampleBatch::new(0, vec![0]);
        update_momentum_with(&mut st, &prob, 0, &[1.0], 0.5, &batch).unwrap();
        assert_eq!(st.v, vec![1.5]);
        assert_eq!(st.last_x, vec![1.0]);
    }

    #[test]
    fn unit_momentum_is_plain_sgd() {
        let prob = synthetic(&SyntheticSpec { agents: 2, dim: 3, samples_per_agent: 9, ..Default::default() }).unwrap();
        let mut st = MomentumState { v: vec![10.0, -4.0, 2.0], last_x: vec![0.1, 0.2, 0.3] };
        let batch = SampleBatch::new(1, vec![4, 2]);
        let x = [0.5, -0.5, 1.0];
        update_momentum_with(&mut st, &prob, 1, &x, 1.0, &batch).unwrap();
        assert_eq!(st.v, prob.stochastic_gradient(1, &x, &batch).unwrap());
    }

    #[test]
    fn full_batch_at_anchor() {
        let prob = synthetic(&SyntheticSpec { agents: 1, dim: 3, samples_per_agent: 9, ..Default::default() }).unwrap();
        let x = [0.2, 0.1, -0.4];
        let v_old = vec![1.0, 2.0, 3.0];
        let mut st = MomentumState { v: v_old.clone(), last_x: x.to_vec() };
        let full = draw_batch(&prob, 0, Sampling::FullBatch, &mut ChaCha8Rng::seed_from_u64(0));
        update_momentum_with(&mut st, &prob, 0, &x, 0.25, &full).unwrap();
        let g = prob.full_gradient(0, &x);
        for j in 0..3 {
            let expect = g[j] + 0.75 * (v_old[j] - g[j]);
            assert!((st.v[j] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn single_draw_init() {
        let prob = synthetic(&SyntheticSpec { agents: 1, dim: 3, samples_per_agent: 9, ..Default::default() }).unwrap();
        let x0 = [0.3, 0.3, 0.3];
        let st = init_momentum(&prob, 0, &x0, 1, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let batch = draw_batch(&prob, 0, Sampling::WithReplacement { batch: 1 }, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(st.v, prob.stochastic_gradient(0, &x0, &batch).unwrap());
    }

    #[test]
    fn zero_gradient_problem() {
        let prob = one_sample(0.0, 0.0);
        let st = init_momentum(&prob, 0, &[5.0], 8, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(st.v, vec![0.0]);
    }

    #[test]
    fn large_init_batch_concentrates() {
        let prob =
            synthetic(&SyntheticSpec { agents: 1, dim: 5, samples_per_agent: 40, ..Default::default() }).unwrap();
        let x0 = [0.1, -0.2, 0.3, 0.0, 0.5];
        let m0 = 10 * prob.dataset(0).len();
        let st = init_momentum(&prob, 0, &x0, m0, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let sigma = prob.gradient_variance(0, &x0).sqrt();
        let err = linalg::dist_sq(&st.v, &prob.full_gradient(0, &x0)).sqrt();
        assert!(err <= 3.0 * sigma / (m0 as f64).sqrt(), "{err} vs {sigma}");
    }

    #[test]
    fn argument_errors() {
        let prob = one_sample(1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(init_momentum(&prob, 0, &[0.0], 0, &mut rng), Err(EstimatorError::InvalidBatch(0))));
        let mut st = MomentumState { v: vec![0.0], last_x: vec![0.0] };
        for a in [0.0, 1.5, f64::NAN] {
            assert!(matches!(
                update_momentum(&mut st, &prob, 0, &[1.0], a, Sampling::default(), &mut rng),
                Err(EstimatorError::MomentumOutOfRange(_))
            ));
        }
    }
}
