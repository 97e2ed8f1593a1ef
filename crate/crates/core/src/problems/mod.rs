//! Per-agent composite objectives `f_i + h_i` over finite local datasets.
//!
//! Each `f_i` is the empirical mean of a per-sample loss plus the smooth
//! nonconvex penalty `α Σ_j x_j² / (1 + x_j²)`. Sampling uniformly with
//! replacement from the local dataset makes `full_gradient` the exact
//! expectation of `stochastic_gradient`.

pub mod data;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

pub use data::{load_dataset, save_dataset, synthetic, DatasetManifest, SyntheticSpec};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("sample index {index} out of range for agent {agent} with {len} samples")]
    IndexOutOfRange { agent: usize, index: usize, len: usize },
    #[error("batch for agent {batch} passed to agent {agent}")]
    AgentMismatch { agent: usize, batch: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("prox scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `½ (aᵀx − b)²`
    LeastSquares,
    /// `ln(1 + exp(−b aᵀx))`, labels in `{−1, +1}`
    Logistic,
    /// Cauchy loss `½ ln(1 + (aᵀx − b)²)`
    NonconvexRobust,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::LeastSquares => "least_squares",
            LossKind::Logistic => "logistic",
            LossKind::NonconvexRobust => "nonconvex_robust",
        }
    }

    /// Bound on the second derivative of the scalar loss in `aᵀx`.
    fn curvature_bound(self) -> f64 {
        match self {
            LossKind::LeastSquares | LossKind::NonconvexRobust => 1.0,
            LossKind::Logistic => 0.25,
        }
    }

    fn value(self, z: f64, b: f64) -> f64 {
        match self {
            LossKind::LeastSquares => 0.5 * (z - b) * (z - b),
            LossKind::Logistic => softplus(-b * z),
            LossKind::NonconvexRobust => 0.5 * (z - b).powi(2).ln_1p(),
        }
    }

    /// Derivative of the scalar loss with respect to `z = aᵀx`.
    fn slope(self, z: f64, b: f64) -> f64 {
        match self {
            LossKind::LeastSquares => z - b,
            LossKind::Logistic => -b * sigmoid(-b * z),
            LossKind::NonconvexRobust => {
                let r = z - b;
                r / (1.0 + r * r)
            }
        }
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    None,
    L1 { weight: f64 },
}

impl Regularizer {
    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Regularizer::None => 0.0,
            Regularizer::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }

    pub fn weight(&self) -> f64 {
        match *self {
            Regularizer::None => 0.0,
            Regularizer::L1 { weight } => weight,
        }
    }

    /// `argmin_u h(u) + ‖u − v‖² / (2c)`.
    pub fn prox(&self, v: &[f64], c: f64) -> Result<Vec<f64>, ProblemError> {
        if !(c > 0.0) {
            return Err(ProblemError::NonPositiveScale(c));
        }
        Ok(match *self {
            Regularizer::None => v.to_vec(),
            Regularizer::L1 { weight } => v.iter().map(|&x| linalg::soft_threshold(x, c * weight)).collect(),
        })
    }
}

/// One agent's samples, features stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalDataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl LocalDataset {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self, ProblemError> {
        if dim == 0 {
            return Err(ProblemError::Invalid("dimension must be positive".into()));
        }
        if features.len() != dim * labels.len() {
            return Err(ProblemError::Invalid(format!(
                "{} feature values do not form {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        Ok(LocalDataset { dim, features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.features[s * self.dim..(s + 1) * self.dim]
    }

    pub fn label(&self, s: usize) -> f64 {
        self.labels[s]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn max_row_norm_sq(&self) -> f64 {
        (0..self.len()).map(|s| linalg::norm_sq(self.row(s))).fold(0.0, f64::max)
    }
}

/// Sample indices drawn by one agent for one oracle call.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleBatch {
    pub agent: usize,
    pub indices: Vec<usize>,
}

impl SampleBatch {
    pub fn new(agent: usize, indices: Vec<usize>) -> Self {
        SampleBatch { agent, indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct CompositeProblem {
    loss: LossKind,
    reg: Regularizer,
    alpha: f64,
    data: Vec<LocalDataset>,
    smoothness: f64,
}

impl CompositeProblem {
    pub fn new(loss: LossKind, reg: Regularizer, alpha: f64, data: Vec<LocalDataset>) -> Result<Self, ProblemError> {
        let Some(first) = data.first() else {
            return Err(ProblemError::Invalid("need at least one agent".into()));
        };
        let dim = first.dim();
        if let Some((i, d)) = data.iter().enumerate().find(|(_, d)| d.dim() != dim) {
            return Err(ProblemError::Invalid(format!("agent {i} has dimension {}, expected {dim}", d.dim())));
        }
        if let Some(i) = data.iter().position(LocalDataset::is_empty) {
            return Err(ProblemError::Invalid(format!("agent {i} has no samples")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(ProblemError::Invalid(format!("alpha must be >= 0, got {alpha}")));
        }
        if !(reg.weight() >= 0.0 && reg.weight().is_finite()) {
            return Err(ProblemError::Invalid(format!("l1 weight must be >= 0, got {}", reg.weight())));
        }
        if loss == LossKind::Logistic {
            if let Some(b) = data.iter().flat_map(|d| d.labels()).find(|b| b.abs() != 1.0) {
                return Err(ProblemError::Invalid(format!("logistic labels must be ±1, found {b}")));
            }
        }
        let mut prob = CompositeProblem { loss, reg, alpha, data, smoothness: 0.0 };
        prob.smoothness = prob.estimate_smoothness();
        Ok(prob)
    }

    /// Replace the computed smoothness constant with a supplied one.
    pub fn with_smoothness(mut self, l: f64) -> Self {
        self.smoothness = l;
        self
    }

    pub fn agents(&self) -> usize {
        self.data.len()
    }

    pub fn dim(&self) -> usize {
        self.data[0].dim()
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn regularizer(&self) -> Regularizer {
        self.reg
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn dataset(&self, i: usize) -> &LocalDataset {
        &self.data[i]
    }

    pub fn datasets(&self) -> &[LocalDataset] {
        &self.data
    }

    /// Per-sample smoothness bound: `c · max‖a‖² + 2α`, with `c = 1` for
    /// least squares and the Cauchy loss and `c = ¼` for logistic.
    pub fn estimate_smoothness(&self) -> f64 {
        let max_norm = self.data.iter().map(LocalDataset::max_row_norm_sq).fold(0.0, f64::max);
        self.loss.curvature_bound() * max_norm + 2.0 * self.alpha
    }

    fn penalty_value(&self, x: &[f64]) -> f64 {
        self.alpha * x.iter().map(|v| v * v / (1.0 + v * v)).sum::<f64>()
    }

    fn add_penalty_gradient(&self, x: &[f64], out: &mut [f64]) {
        if self.alpha == 0.0 {
            return;
        }
        for (o, &v) in out.iter_mut().zip(x) {
            let d = 1.0 + v * v;
            *o += 2.0 * self.alpha * v / (d * d);
        }
    }

    /// `f_i(x, ξ_s)` for a single sample, penalty included.
    pub fn sample_loss(&self, i: usize, s: usize, x: &[f64]) -> f64 {
        let d = &self.data[i];
        self.loss.value(linalg::dot(d.row(s), x), d.label(s)) + self.penalty_value(x)
    }

    /// Adds `∇f_i(x, ξ_s)` to `out`.
    fn add_sample_gradient(&self, i: usize, s: usize, x: &[f64], out: &mut [f64]) {
        let d = &self.data[i];
        let row = d.row(s);
        let g = self.loss.slope(linalg::dot(row, x), d.label(s));
        linalg::axpy(g, row, out);
        self.add_penalty_gradient(x, out);
    }

    pub fn sample_gradient(&self, i: usize, s: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.add_sample_gradient(i, s, x, &mut out);
        out
    }

    fn mean_gradient<I: ExactSizeIterator<Item = usize>>(&self, i: usize, x: &[f64], idx: I) -> Vec<f64> {
        let count = idx.len() as f64;
        let mut out = vec![0.0; x.len()];
        for s in idx {
            self.add_sample_gradient(i, s, x, &mut out);
        }
        out.iter_mut().for_each(|v| *v /= count);
        out
    }

    /// Mean per-sample gradient over the batch, accumulated in index order.
    pub fn stochastic_gradient(&self, i: usize, x: &[f64], batch: &SampleBatch) -> Result<Vec<f64>, ProblemError> {
        if batch.agent != i {
            return Err(ProblemError::AgentMismatch { agent: i, batch: batch.agent });
        }
        if batch.is_empty() {
            return Err(ProblemError::EmptyBatch);
        }
        let len = self.data[i].len();
        if let Some(&index) = batch.indices.iter().find(|&&s| s >= len) {
            return Err(ProblemError::IndexOutOfRange { agent: i, index, len });
        }
        Ok(self.mean_gradient(i, x, batch.indices.iter().copied()))
    }

    /// `∇f_i(x)`; the same accumulation as a batch listing every sample once.
    pub fn full_gradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        self.mean_gradient(i, x, 0..self.data[i].len())
    }

    /// `(1/n) Σ_i ∇f_i(x)`.
    pub fn global_mean_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for i in 0..self.agents() {
            linalg::axpy(1.0, &self.full_gradient(i, x), &mut out);
        }
        let n = self.agents() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        out
    }

    /// `f_i(x)`.
    pub fn local_loss(&self, i: usize, x: &[f64]) -> f64 {
        let d = &self.data[i];
        let total: f64 = (0..d.len()).map(|s| self.loss.value(linalg::dot(d.row(s), x), d.label(s))).sum();
        total / d.len() as f64 + self.penalty_value(x)
    }

    /// `h_i(x)`; the regularizer is shared by all agents.
    pub fn h_value(&self, x: &[f64]) -> f64 {
        self.reg.value(x)
    }

    pub fn prox_h(&self, _i: usize, v: &[f64], c: f64) -> Result<Vec<f64>, ProblemError> {
        self.reg.prox(v, c)
    }

    /// `E‖∇f_i(x, ξ) − ∇f_i(x)‖²` under uniform single-sample draws.
    pub fn gradient_variance(&self, i: usize, x: &[f64]) -> f64 {
        let mean = self.full_gradient(i, x);
        let n = self.data[i].len();
        let total: f64 = (0..n).map(|s| linalg::dist_sq(&self.sample_gradient(i, s, x), &mean)).sum();
        total / n as f64
    }
}
