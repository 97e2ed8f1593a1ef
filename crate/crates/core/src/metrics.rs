//! Measurements taken on simulator snapshots: the stationarity measure,
//! constraint residuals, gradient-estimation error, the Lyapunov function,
//! and empirical checkers for the dual-difference bound, the STORM error
//! recursion, the single-step descent inequality and the accumulation sum.
//!
//! Paper-indexed sequences use the same `t = k + 1` shift as the schedules:
//! `ρ^k = c_ρ (k+1)^{1/3}`, `1/Γ^k = c_γ (k+1)^{1/3}`, `β^k = c_β (k+1)^{1/3}`,
//! `μ^k = c_μ (k+1)^{1/3}`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admm::{EdgeDuals, Schedules, StepPolicy};
use crate::estimator::{draw_batch, update_momentum_with, MomentumState, Sampling};
use crate::graph::{ConstraintOps, Graph};
use crate::linalg;
use crate::problems::CompositeProblem;
use crate::simulator::MetricsTrace;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("Lyapunov value needs round k-1 state; unavailable at k = {0}")]
    HistoryUnavailable(usize),
    #[error("rate fit needs at least {needed} trace rows reaching k >= 100, got {got}")]
    InsufficientTrace { needed: usize, got: usize },
    #[error("traces disagree on logged iterations")]
    MisalignedTraces,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub prox_gradient_gap: f64,
    pub consensus_gap: f64,
    pub total: f64,
}

/// `‖x̄ − prox¹(x̄ − ∇F(x̄))‖² + Σ_i ‖x_i − x̄‖²` with `∇F = (1/n) Σ ∇f_i`.
///
/// The prox is that of the averaged regularizer `(1/n) Σ h_i`, which keeps
/// the zero set of the measure at the stationary points of the averaged
/// objective.
pub fn stationarity_measure(prob: &CompositeProblem, xs: &[Vec<f64>]) -> StationarityReport {
    let xbar = linalg::mean_of(xs);
    let grad = prob.global_mean_gradient(&xbar);
    let step = linalg::sub(&xbar, &grad);
    let prox = prob.regularizer().prox(&step, 1.0).expect("unit scale is positive");
    let prox_gradient_gap = linalg::dist_sq(&xbar, &prox);
    let consensus_gap = xs.iter().map(|x| linalg::dist_sq(x, &xbar)).sum();
    StationarityReport { prox_gradient_gap, consensus_gap, total: prox_gradient_gap + consensus_gap }
}

/// Norms of the constraint residual `r = Ax + By` and its two blocks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub consensus: f64,
    pub splitting: f64,
    pub combined: f64,
}

pub fn residuals(graph: &Graph, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Residuals {
    let consensus_sq: f64 = graph.edges().iter().map(|&(i, j)| linalg::dist_sq(&xs[i], &xs[j])).sum();
    let splitting_sq: f64 = xs.iter().zip(ys).map(|(x, y)| linalg::dist_sq(x, y)).sum();
    Residuals {
        consensus: consensus_sq.sqrt(),
        splitting: splitting_sq.sqrt(),
        combined: (consensus_sq + splitting_sq).sqrt(),
    }
}

/// `‖ℰ‖² = Σ_i ‖v_i − ∇f_i(x_i)‖²`.
pub fn gradient_error(prob: &CompositeProblem, xs: &[Vec<f64>], vs: &[Vec<f64>]) -> f64 {
    xs.iter().zip(vs).enumerate().map(|(i, (x, v))| linalg::dist_sq(v, &prob.full_gradient(i, x))).sum()
}

/// `Σ_i Var_i(x_i) / B`: variance of one round's fresh batch gradient.
pub fn sampling_variance(prob: &CompositeProblem, xs: &[Vec<f64>], sampling: Sampling) -> f64 {
    let total: f64 = xs.iter().enumerate().map(|(i, x)| prob.gradient_variance(i, x)).sum();
    total / sampling.variance_divisor()
}

/// `F(x) + H(y) − ⟨λ, r⟩ + (ρ/2)‖r‖²` with `F = Σ f_i`, `H = Σ h_i`.
pub fn augmented_lagrangian(
    prob: &CompositeProblem,
    graph: &Graph,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    duals: &EdgeDuals,
    betas: &[Vec<f64>],
    rho: f64,
) -> f64 {
    let f: f64 = xs.iter().enumerate().map(|(i, x)| prob.local_loss(i, x)).sum();
    let h: f64 = ys.iter().map(|y| prob.h_value(y)).sum();
    let mut inner = 0.0;
    let mut r_sq = 0.0;
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        let r = linalg::sub(&xs[i], &xs[j]);
        inner += linalg::dot(duals.edge(e), &r);
        r_sq += linalg::norm_sq(&r);
    }
    for ((x, y), b) in xs.iter().zip(ys).zip(betas) {
        let r = linalg::sub(x, y);
        inner += linalg::dot(b, &r);
        r_sq += linalg::norm_sq(&r);
    }
    f + h - inner + 0.5 * rho * r_sq
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConstants {
    pub theta: f64,
    pub c_gamma: f64,
    pub c_mu: f64,
    pub c_err: f64,
}

impl Default for LyapunovConstants {
    fn default() -> Self {
        LyapunovConstants { theta: 1.0, c_gamma: 1.0, c_mu: 1.0, c_err: 24.0 }
    }
}

impl LyapunovConstants {
    /// `C_err ≥ 12(1 + 1/θ)`.
    pub fn satisfies_error_bound(&self) -> bool {
        self.c_err >= 12.0 * (1.0 + 1.0 / self.theta)
    }
}

/// `C_η − c_ρ(L + I)` as an `n × n` matrix; the full operator is this `⊗ I_p`.
pub fn step_gap_matrix(graph: &Graph, schedules: &Schedules, policy: StepPolicy) -> DMatrix<f64> {
    let mut g = graph.laplacian() * (-schedules.c_rho);
    for i in 0..graph.node_count() {
        let ceta = schedules.c_eta * (policy.effective_degree(graph, i) + 1) as f64;
        g[(i, i)] += ceta - schedules.c_rho;
    }
    g
}

fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn lambda_min_sym(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Quantities fixed for a run that the Lyapunov value and the dual bound need.
#[derive(Clone, Debug)]
pub struct LyapunovSetup {
    pub constants: LyapunovConstants,
    pub schedules: Schedules,
    /// Diagonal of `C_η`, one entry per node.
    pub c_eta_diag: Vec<f64>,
    /// `‖C_η − c_ρ AᵀA‖₂`
    pub gap_norm: f64,
    pub c_beta: f64,
    pub smoothness: f64,
}

impl LyapunovSetup {
    pub fn new(
        graph: &Graph,
        schedules: Schedules,
        policy: StepPolicy,
        smoothness: f64,
        constants: LyapunovConstants,
    ) -> Self {
        let gap_norm = spectral_norm_sym(&step_gap_matrix(graph, &schedules, policy));
        let w = 1.0 + 1.0 / constants.theta;
        let c_beta =
            6.0 * w * gap_norm * gap_norm / schedules.c_rho + 12.0 * smoothness * smoothness * w / schedules.c_rho;
        let c_eta_diag =
            (0..graph.node_count()).map(|i| schedules.c_eta * (policy.effective_degree(graph, i) + 1) as f64).collect();
        LyapunovSetup { constants, schedules, c_eta_diag, gap_norm, c_beta, smoothness }
    }

    fn cbrt_t(k: usize) -> f64 {
        ((k + 1) as f64).cbrt()
    }

    pub fn gamma_inv(&self, k: usize) -> f64 {
        self.constants.c_gamma * Self::cbrt_t(k)
    }

    pub fn beta(&self, k: usize) -> f64 {
        self.c_beta * Self::cbrt_t(k)
    }

    pub fn mu(&self, k: usize) -> f64 {
        self.constants.c_mu * Self::cbrt_t(k)
    }

    /// `‖S^k‖₂` with `S^k = Q^k − ρ^k AᵀA`.
    pub fn s_norm(&self, k: usize) -> f64 {
        Self::cbrt_t(k) * self.gap_norm
    }

    /// `S^k d` for a stacked vector `d`.
    pub fn apply_s(&self, ops: &ConstraintOps<'_>, k: usize, d: &[f64]) -> Vec<f64> {
        let p = ops.dim();
        let ata = ops.apply_ata(d).expect("stacked dimension matches");
        let t = Self::cbrt_t(k);
        d.iter()
            .zip(&ata)
            .enumerate()
            .map(|(idx, (di, ai))| t * (self.c_eta_diag[idx / p] * di - self.schedules.c_rho * ai))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSnapshot {
    pub k: usize,
    pub phi: f64,
    pub lagrangian: f64,
    pub error_term: f64,
    pub previous_error_term: f64,
    pub step_term: f64,
}

/// State needed to evaluate `Φ^k`.
#[derive(Clone, Copy, Debug)]
pub struct LyapunovInputs<'a> {
    pub k: usize,
    pub xs: &'a [Vec<f64>],
    pub ys: &'a [Vec<f64>],
    pub duals: &'a EdgeDuals,
    pub betas: &'a [Vec<f64>],
    /// `x^{k−1}`
    pub x_prev: &'a [Vec<f64>],
    /// `‖ℰ^k‖²`
    pub err_sq: f64,
    /// `‖ℰ^{k−1}‖²`
    pub err_prev_sq: f64,
}

/// `Φ^k = ℒ_{ρ^{k−1}}(x^k, y^k, λ^k) + (1/Γ^k)‖ℰ^k‖² + (C_err/ρ^{k−1})‖ℰ^{k−1}‖² + (β^k/2)‖Δx^k‖²`.
pub fn lyapunov(
    prob: &CompositeProblem,
    graph: &Graph,
    setup: &LyapunovSetup,
    inp: &LyapunovInputs<'_>,
) -> Result<LyapunovSnapshot, MetricsError> {
    let k = inp.k;
    if k < 2 {
        return Err(MetricsError::HistoryUnavailable(k));
    }
    let rho_prev = setup.schedules.rho(k - 1);
    let lagrangian = augmented_lagrangian(prob, graph, inp.xs, inp.ys, inp.duals, inp.betas, rho_prev);
    let error_term = setup.gamma_inv(k) * inp.err_sq;
    let previous_error_term = setup.constants.c_err / rho_prev * inp.err_prev_sq;
    let dx_sq: f64 = inp.xs.iter().zip(inp.x_prev).map(|(a, b)| linalg::dist_sq(a, b)).sum();
    let step_term = 0.5 * setup.beta(k) * dx_sq;
    Ok(LyapunovSnapshot {
        k,
        phi: lagrangian + error_term + previous_error_term + step_term,
        lagrangian,
        error_term,
        previous_error_term,
        step_term,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Check {
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
}

/// Inputs of the dual-difference bound at round `k` (`k ≥ 1`).
#[derive(Clone, Copy, Debug)]
pub struct Lemma1Inputs<'a> {
    pub k: usize,
    /// `‖λ^{k+1} − λ^k‖²`
    pub dlambda_sq: f64,
    /// `x^{k+1} − x^k`, stacked
    pub dx_next: &'a [f64],
    /// `‖x^k − x^{k−1}‖²`
    pub dx_prev_sq: f64,
    /// `‖ℰ^k‖²`
    pub err_sq: f64,
    /// `‖ℰ^{k−1}‖²`
    pub err_prev_sq: f64,
}

/// `‖Δλ^{k+1}‖² ≤ (1+θ)‖S^kΔx^{k+1}‖² + (2(1+1/θ)‖S^{k−1}‖² + 4L²(1+1/θ))‖Δx^k‖²
///  + 8(1+1/θ)(‖ℰ^k‖² + ‖ℰ^{k−1}‖²)`.
pub fn lemma1_check(setup: &LyapunovSetup, ops: &ConstraintOps<'_>, inp: &Lemma1Inputs<'_>) -> Lemma1Check {
    let theta = setup.constants.theta;
    let w = 1.0 + 1.0 / theta;
    let s_dx = setup.apply_s(ops, inp.k, inp.dx_next);
    let s_prev = setup.s_norm(inp.k - 1);
    let l = setup.smoothness;
    let rhs = (1.0 + theta) * linalg::norm_sq(&s_dx)
        + (2.0 * w * s_prev * s_prev + 4.0 * l * l * w) * inp.dx_prev_sq
        + 8.0 * w * (inp.err_sq + inp.err_prev_sq);
    let lhs = inp.dlambda_sq;
    Lemma1Check { k: inp.k, lhs, rhs, violated: lhs > rhs + 1e-12 * rhs.max(1e-300) }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Result {
    pub lhs_mean: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Frozen inputs of one STORM step.
#[derive(Clone, Copy, Debug)]
pub struct FrozenStep<'a> {
    pub x: &'a [Vec<f64>],
    pub x_next: &'a [Vec<f64>],
    pub v: &'a [Vec<f64>],
    pub a: f64,
}

/// Monte-Carlo check of
/// `E‖ℰ^{k+1}‖² ≤ (1−a)²‖ℰ^k‖² + 2a²σ̂² + 2L²(1−a)²‖Δx‖²`
/// over `draws` independent batches; passes when the sample mean is within
/// four standard errors of the bound.
pub fn lemma2_monte_carlo<R: Rng + ?Sized>(
    prob: &CompositeProblem,
    step: &FrozenStep<'_>,
    sampling: Sampling,
    draws: usize,
    rng: &mut R,
) -> Lemma2Result {
    let grads: Vec<Vec<f64>> = step.x_next.iter().enumerate().map(|(i, x)| prob.full_gradient(i, x)).collect();
    let mut samples = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut total = 0.0;
        for (i, grad) in grads.iter().enumerate() {
            let mut st = MomentumState { v: step.v[i].clone(), last_x: step.x[i].clone() };
            let batch = draw_batch(prob, i, sampling, rng);
            update_momentum_with(&mut st, prob, i, &step.x_next[i], step.a, &batch)
                .expect("frozen state is consistent");
            total += linalg::dist_sq(&st.v, grad);
        }
        samples.push(total);
    }
    let (mean, se) = mean_and_se(&samples);
    let err_sq = gradient_error(prob, step.x, step.v);
    let sigma_sq = sampling_variance(prob, step.x_next, sampling);
    let dx_sq: f64 = step.x.iter().zip(step.x_next).map(|(a, b)| linalg::dist_sq(a, b)).sum();
    let keep = (1.0 - step.a).powi(2);
    let l = prob.smoothness();
    let rhs = keep * err_sq + 2.0 * step.a * step.a * sigma_sq + 2.0 * l * l * keep * dx_sq;
    Lemma2Result { lhs_mean: mean, lhs_se: se, rhs, pass: mean <= rhs + 4.0 * se }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-state quantities recorded every round when diagnostics are on.
/// Entry `k` describes the state after `k` rounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundDiagnostics {
    pub k: usize,
    /// `Φ^k`, NaN when unavailable
    pub phi: f64,
    /// `‖r^k‖²`
    pub r_sq: f64,
    /// `‖ℰ^k‖²`
    pub err_sq: f64,
    /// `‖x^k − x^{k−1}‖²`
    pub dx_sq: f64,
    /// `σ̂²` at `x^k`
    pub sigma_sq: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentRound {
    pub k: usize,
    pub mean: f64,
    pub se: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub rounds: Vec<DescentRound>,
    pub pass_fraction: f64,
}

/// Replica-averaged single-step descent check over `k ∈ [k_lo, k_hi]`:
///
/// ```text
/// D_k = Φ^{k+1} − Φ^k − (ρ^k − ρ^{k−1})/2 ‖r^k‖² − 2(a^{k+1})² σ̂² / Γ^{k+1}
/// ```
///
/// with `σ̂²` at `x^{k+1}`; round `k` passes when `mean(D_k) ≤ 3 SE`.
pub fn descent_check(
    replicas: &[Vec<RoundDiagnostics>],
    setup: &LyapunovSetup,
    k_lo: usize,
    k_hi: usize,
) -> DescentReport {
    let s = &setup.schedules;
    let mut rounds = Vec::new();
    for k in k_lo.max(2)..=k_hi {
        let ds: Vec<f64> = replicas
            .iter()
            .filter(|d| d.len() > k + 1)
            .map(|d| {
                let (cur, next) = (&d[k], &d[k + 1]);
                let a = s.momentum(k + 1);
                next.phi
                    - cur.phi
                    - 0.5 * (s.rho(k) - s.rho(k - 1)) * cur.r_sq
                    - 2.0 * a * a * next.sigma_sq * setup.gamma_inv(k + 1)
            })
            .collect();
        if ds.is_empty() {
            continue;
        }
        let (mean, se) = mean_and_se(&ds);
        let pass = mean.is_finite() && mean <= 3.0 * se + 1e-12 * ds.iter().map(|d| d.abs()).fold(0.0, f64::max);
        rounds.push(DescentRound { k, mean, se, pass });
    }
    let passed = rounds.iter().filter(|r| r.pass).count();
    let pass_fraction = if rounds.is_empty() { 0.0 } else { passed as f64 / rounds.len() as f64 };
    DescentReport { rounds, pass_fraction }
}

/// `S(K) = Σ_{k=1}^{K} (k^{−1/3}‖ℰ^k‖² + k^{1/3}‖Δx^{k+1}‖² + k^{1/3}‖r^{k+1}‖²)`
/// at each requested `K`; needs diagnostics through state `K + 1`.
pub fn accumulation_sums(diags: &[RoundDiagnostics], checkpoints: &[usize]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let mut sum = 0.0;
    let mut next = checkpoints.iter().copied().peekable();
    for k in 1..diags.len().saturating_sub(1) {
        let kf = (k as f64).cbrt();
        sum += diags[k].err_sq / kf + kf * diags[k + 1].dx_sq + kf * diags[k + 1].r_sq;
        while next.peek() == Some(&k) {
            out.push((k, sum));
            next.next();
        }
    }
    out
}

/// Positivity of the accumulation-bound constants for one constant choice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub c_error: f64,
    pub lambda_min_cx: f64,
    pub feasible: bool,
}

/// Evaluates
///
/// ```text
/// C_ℰ = 2 c_a c_γ − 1/(2c_μ) − 12(1+1/θ)/c_ρ − C_err/c_ρ
/// C_x = C_η − (c_ρ/2)AᵀA − 3(1+θ)/(2c_ρ) (C_η − c_ρAᵀA)² − (c_μ/2 + c_β/2 + L/2 + 2L²c_γ) I
/// ```
///
/// with `c_β` at its lower bound. Both are reduced to `n × n` since every
/// term is a Kronecker product with `I_p`.
pub fn constants_feasibility(
    graph: &Graph,
    schedules: Schedules,
    policy: StepPolicy,
    smoothness: f64,
    constants: LyapunovConstants,
) -> Feasibility {
    let setup = LyapunovSetup::new(graph, schedules, policy, smoothness, constants);
    let LyapunovConstants { theta, c_gamma, c_mu, c_err } = constants;
    let c_rho = schedules.c_rho;
    let c_error =
        2.0 * schedules.c_a * c_gamma - 1.0 / (2.0 * c_mu) - 12.0 * (1.0 + 1.0 / theta) / c_rho - c_err / c_rho;
    let n = graph.node_count();
    let ata = graph.laplacian() + DMatrix::identity(n, n);
    let gap = step_gap_matrix(graph, &schedules, policy);
    let l = smoothness;
    let shift = c_mu / 2.0 + setup.c_beta / 2.0 + l / 2.0 + 2.0 * l * l * c_gamma;
    let cx = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(setup.c_eta_diag.clone()))
        - ata * (c_rho / 2.0)
        - (&gap * &gap) * (3.0 * (1.0 + theta) / (2.0 * c_rho))
        - DMatrix::identity(n, n) * shift;
    let lambda_min_cx = lambda_min_sym(cx);
    Feasibility {
        c_error,
        lambda_min_cx,
        feasible: c_error > 0.0 && lambda_min_cx > 0.0 && constants.satisfies_error_bound(),
    }
}

/// The documented search grid: powers of two for `c_ρ ∈ [2⁻², 2⁸]`,
/// `c_η ∈ [2⁻², 2¹²]`, `c_a ∈ [2⁰, 2⁸]`, `c_γ, c_μ ∈ [2⁻⁸, 2⁴]`, and
/// `θ ∈ {¼, ½, 1, 2, 4}` with `C_err = 12(1 + 1/θ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilitySearch {
    pub evaluated: usize,
    pub best_lambda_min_cx: f64,
    pub best_c_error: f64,
    pub feasible: Option<(Schedules, LyapunovConstants)>,
}

pub fn search_feasible_constants(graph: &Graph, policy: StepPolicy, smoothness: f64) -> FeasibilitySearch {
    let pow2 = |lo: i32, hi: i32| (lo..=hi).map(|e| 2f64.powi(e)).collect::<Vec<_>>();
    let mut out = FeasibilitySearch {
        evaluated: 0,
        best_lambda_min_cx: f64::NEG_INFINITY,
        best_c_error: f64::NEG_INFINITY,
        feasible: None,
    };
    for &theta in &[0.25, 0.5, 1.0, 2.0, 4.0] {
        let c_err = 12.0 * (1.0 + 1.0 / theta);
        for &c_rho in &pow2(-2, 8) {
            for &c_eta in &pow2(-2, 12) {
                for &c_gamma in &pow2(-8, 4) {
                    for &c_mu in &pow2(-8, 4) {
                        let constants = LyapunovConstants { theta, c_gamma, c_mu, c_err };
                        let schedules = Schedules { c_rho, c_a: 1.0, c_eta };
                        let base = constants_feasibility(graph, schedules, policy, smoothness, constants);
                        out.evaluated += 1;
                        out.best_lambda_min_cx = out.best_lambda_min_cx.max(base.lambda_min_cx);
                        if base.lambda_min_cx <= 0.0 {
                            continue;
                        }
                        // C_x does not depend on c_a; pick the smallest c_a that makes C_ℰ positive
                        for &c_a in &pow2(0, 8) {
                            let schedules = Schedules { c_a, ..schedules };
                            let f = constants_feasibility(graph, schedules, policy, smoothness, constants);
                            out.best_c_error = out.best_c_error.max(f.c_error);
                            if f.feasible && out.feasible.is_none() {
                                out.feasible = Some((schedules, constants));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// `(k, min-prefix value)` checkpoints used in the fit.
    pub points: Vec<(usize, f64)>,
}

/// Running minimum of a sequence.
pub fn min_prefix(values: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    values
        .iter()
        .map(|&v| {
            best = best.min(v);
            best
        })
        .collect()
}

/// Least-squares fit of `ln m(k)` against `ln k`, where `m` is the running
/// minimum of `values`, sampled at ten log-spaced checkpoints per decade
/// from `k = 100` to the last logged `k`.
pub fn rate_fit(ks: &[usize], values: &[f64]) -> Result<RateFit, MetricsError> {
    fit_min_prefix(ks, &min_prefix(values))
}

fn fit_min_prefix(ks: &[usize], mins: &[f64]) -> Result<RateFit, MetricsError> {
    const NEEDED: usize = 100;
    let last = ks.last().copied().unwrap_or(0);
    if ks.len() < NEEDED || last < 100 {
        return Err(MetricsError::InsufficientTrace { needed: NEEDED, got: ks.len() });
    }
    let mut points: Vec<(usize, f64)> = Vec::new();
    let mut q = 0;
    loop {
        let target = (100.0 * 10f64.powf(q as f64 / 10.0)).round() as usize;
        let target = target.min(last);
        let idx = ks.partition_point(|&k| k <= target) - 1;
        if points.last().map(|p| p.0) != Some(ks[idx]) && mins[idx] > 0.0 {
            points.push((ks[idx], mins[idx]));
        }
        if target == last {
            break;
        }
        q += 1;
    }
    if points.len() < 2 {
        return Err(MetricsError::InsufficientTrace { needed: NEEDED, got: ks.len() });
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(RateFit { slope, intercept: my - slope * mx, points })
}

pub fn rate_fit_trace(trace: &MetricsTrace) -> Result<RateFit, MetricsError> {
    let ks: Vec<usize> = trace.rows.iter().map(|r| r.k).collect();
    let vals: Vec<f64> = trace.rows.iter().map(|r| r.stat_total).collect();
    rate_fit(&ks, &vals)
}

/// Fit on the replica-averaged running minimum of the stationarity measure.
pub fn averaged_rate_fit(traces: &[MetricsTrace]) -> Result<RateFit, MetricsError> {
    let Some(first) = traces.first() else {
        return Err(MetricsError::InsufficientTrace { needed: 100, got: 0 });
    };
    let ks: Vec<usize> = first.rows.iter().map(|r| r.k).collect();
    let mut avg = vec![0.0; ks.len()];
    for t in traces {
        if t.rows.len() != ks.len() || t.rows.iter().zip(&ks).any(|(r, &k)| r.k != k) {
            return Err(MetricsError::MisalignedTraces);
        }
        let mins = min_prefix(&t.rows.iter().map(|r| r.stat_total).collect::<Vec<_>>());
        for (a, m) in avg.iter_mut().zip(mins) {
            *a += m / traces.len() as f64;
        }
    }
    fit_min_prefix(&ks, &avg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_topology, Topology};
    use crate::problems::{LocalDataset, LossKind, Regularizer};

    fn two_agent_problem() -> CompositeProblem {
        // f_1 = ½(x − 1)², f_2 = ½(x − 2)² ⇒ ∇F(x) = x − 1.5
        let d1 = LocalDataset::new(1, vec![1.0], vec![1.0]).unwrap();
        let d2 = LocalDataset::new(1, vec![1.0], vec![2.0]).unwrap();
        CompositeProblem::new(LossKind::LeastSquares, Regularizer::None, 0.0, vec![d1, d2]).unwrap()
    }

    #[test]
    fn stationarity_hand_case() {
        let prob = two_agent_problem();
        let r = stationarity_measure(&prob, &[vec![1.0], vec![3.0]]);
        assert_eq!(r.consensus_gap, 2.0);
        assert_eq!(r.prox_gradient_gap, 0.25);
        assert_eq!(r.total, 2.25);
    }

    #[test]
    fn stationarity_zero_at_minimizer_and_gradient_at_consensus() {
        let prob = two_agent_problem();
        assert_eq!(stationarity_measure(&prob, &[vec![1.5], vec![1.5]]).total, 0.0);
        let r = stationarity_measure(&prob, &[vec![0.5], vec![0.5]]);
        assert_eq!(r.total, 1.0);
    }

    #[test]
    fn residual_blocks() {
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        let xs = vec![vec![3.0], vec![1.0]];
        let r = residuals(&g, &xs, &xs);
        assert_eq!(r.combined, 2.0);
        assert_eq!(r.splitting, 0.0);
        let ys = vec![vec![2.0], vec![2.0]];
        let r = residuals(&g, &xs, &ys);
        assert!((r.combined.powi(2) - r.consensus.powi(2) - r.splitting.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_needs_history() {
        let prob = two_agent_problem();
        let g = Graph::new(2, &[(0, 1)]).unwrap();
        let setup = LyapunovSetup::new(&g, Schedules::default(), StepPolicy::Heterogeneous, 1.0, Default::default());
        let xs = vec![vec![1.5], vec![1.5]];
        let duals = EdgeDuals::zeros(&g, 1);
        let zeros = vec![vec![0.0], vec![0.0]];
        let mut inp = LyapunovInputs {
            k: 1,
            xs: &xs,
            ys: &xs,
            duals: &duals,
            betas: &zeros,
            x_prev: &xs,
            err_sq: 0.0,
            err_prev_sq: 0.0,
        };
        assert!(matches!(lyapunov(&prob, &g, &setup, &inp), Err(MetricsError::HistoryUnavailable(1))));
        inp.k = 5;
        let snap = lyapunov(&prob, &g, &setup, &inp).unwrap();
        // at the KKT point the Lagrangian collapses to F + H
        let f = prob.local_loss(0, &[1.5]) + prob.local_loss(1, &[1.5]);
        assert_eq!(snap.phi, f);
        let sum = snap.lagrangian + snap.error_term + snap.previous_error_term + snap.step_term;
        assert!((snap.phi - sum).abs() <= 1e-12);
    }

    #[test]
    fn defaults_are_infeasible_on_ring() {
        let g = build_topology(&Topology::Ring, 8, 0).unwrap();
        let f = constants_feasibility(&g, Schedules::default(), StepPolicy::Heterogeneous, 1.0, Default::default());
        assert!(f.c_error < 0.0);
        assert!(!f.feasible);
    }

    #[test]
    fn rate_fit_power_law_and_constant() {
        let ks: Vec<usize> = (1..=2000).collect();
        let vals: Vec<f64> = ks.iter().map(|&k| (k as f64).powf(-2.0 / 3.0)).collect();
        let fit = rate_fit(&ks, &vals).unwrap();
        assert!((fit.slope + 2.0 / 3.0).abs() < 1e-6);
        let fit = rate_fit(&ks, &vec![0.3; ks.len()]).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert!(matches!(rate_fit(&ks[..50], &vals[..50]), Err(MetricsError::InsufficientTrace { .. })));
    }

    #[test]
    fn accumulation_prefix_sums() {
        let diags: Vec<RoundDiagnostics> = (0..12)
            .map(|k| RoundDiagnostics { k, phi: f64::NAN, r_sq: 1.0, err_sq: 1.0, dx_sq: 1.0, sigma_sq: 0.0 })
            .collect();
        let sums = accumulation_sums(&diags, &[1, 10]);
        assert_eq!(sums[0], (1, 3.0));
        let expect: f64 = (1..=10).map(|k| (k as f64).cbrt().recip() + 2.0 * (k as f64).cbrt()).sum();
        assert!((sums[1].1 - expect).abs() < 1e-12);
    }
}
