//! Online gradient learning of a policy's value function over kernel
//! sections, coupled to the plant.
//!
//! The weight vector obeys `K_N wdot = -a sigma sigma^T w + a sigma y`:
//! the coordinate form of the steepest-descent law for the squared
//! instantaneous Bellman residual, preconditioned by the Grammian because
//! the section basis is not orthonormal. The rank-one form follows from
//! the operator matrix entries being products of section responses,
//! `(op K_j, K_i) = sigma_i sigma_j`, since each section's image under
//! evaluation of the closed-loop derivative is the scalar `sigma_i(x)`.
//!
//! The plant is integrated together with the weights by classical RK4 at
//! a fixed step. A hard dead-zone freezes the weights for a whole step
//! whenever the residual magnitude at the step's start is below the
//! threshold; the plant still advances. Excitation is either additive
//! probing on the plant input (the regressor and output are still
//! evaluated with the unprobed policy, which stays exact because the
//! Bellman identity is pointwise in x) or periodic resets of the state to
//! uniform random points of the domain.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::control::{
    closed_loop_drift, running_cost, sigma_with_drift, ControlAffineSystem, ControlError,
    CostSpec, Policy,
};
use crate::kernels::KernelSpec;
use crate::native_space::{
    h_norm, project, CenterSet, GrammianFactor, HNElement, NativeSpaceError,
};

#[derive(Debug, Error)]
pub enum CriticError {
    #[error("state diverged (non-finite entries) at t = {t}")]
    Divergence { t: f64 },
    #[error("at t = {t}: {source}")]
    Control { t: f64, source: ControlError },
    #[error("initial state has dimension {got}, system expects {expected}")]
    BadInitialState { expected: usize, got: usize },
    #[error("weight vector has length {got}, center set has {expected}")]
    BadWeights { expected: usize, got: usize },
    #[error("kernel dimension {kernel} does not match state dimension {state}")]
    KernelStateMismatch { kernel: usize, state: usize },
    #[error("integration step must be positive and finite, got {0}")]
    BadDt(f64),
    #[error("horizon must be nonnegative and finite, got {0}")]
    BadHorizon(f64),
    #[error("learning rate must be positive and finite, got {0}")]
    BadLearningRate(f64),
    #[error("dead-zone threshold must be nonnegative and finite, got {0}")]
    BadDeadzone(f64),
    #[error("sample_every must be at least 1")]
    BadSampleEvery,
    #[error("probing needs matching finite amplitude and frequency lists")]
    BadProbing,
    #[error("reset period must be positive and finite, got {0}")]
    BadResetPeriod(f64),
    #[error("PE window {window} exceeds the logged span {span}")]
    WindowTooLong { window: f64, span: f64 },
    #[error("PE window must contain at least two logged samples")]
    WindowTooShort,
    #[error("ultimate bound requires gamma1 > 0, got {0}")]
    NonPositiveGamma(f64),
    #[error(transparent)]
    NativeSpace(#[from] NativeSpaceError),
}

/// Full simulation state: time, plant state, and critic weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticState {
    pub t: f64,
    pub x: DVector<f64>,
    pub w_hat: DVector<f64>,
}

impl CriticState {
    pub fn new(t: f64, x: DVector<f64>, w_hat: DVector<f64>) -> Self {
        Self { t, x, w_hat }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.x.iter().all(|v| v.is_finite())
            && self.w_hat.iter().all(|v| v.is_finite())
    }
}

/// Excitation injected to keep the regressor persistently exciting once
/// the closed loop has settled.
#[derive(Debug, Clone, PartialEq)]
pub enum Excitation {
    None,
    /// Additive input probing `p(t) = sum_i A_i sin(omega_i t)`, broadcast
    /// over all input channels. Plant only; regressor and output keep the
    /// unprobed policy.
    Probing {
        amplitudes: Vec<f64>,
        frequencies: Vec<f64>,
    },
    /// Periodic jumps of the plant state to uniform random points of the
    /// center domain, sampled from a seeded stream.
    Reset { period: f64, seed: u64 },
}

impl Excitation {
    /// Default probing signal: two incommensurate tones.
    pub fn default_probing() -> Self {
        Excitation::Probing {
            amplitudes: vec![0.8, 0.6],
            frequencies: vec![7.0, 11.3],
        }
    }

    fn probe(&self, t: f64) -> f64 {
        match self {
            Excitation::Probing {
                amplitudes,
                frequencies,
            } => amplitudes
                .iter()
                .zip(frequencies)
                .map(|(a, w)| a * (w * t).sin())
                .sum(),
            _ => 0.0,
        }
    }
}

/// Learning-law configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningConfig {
    /// Learning rate a > 0.
    pub learning_rate: f64,
    /// Fixed integration step (seconds).
    pub dt: f64,
    /// Total integration time (seconds).
    pub horizon: f64,
    /// Hard dead-zone threshold; 0 disables the dead zone.
    pub deadzone: f64,
    /// Scale the update by 1 / (sigma^T sigma + 1)^2.
    pub normalize: bool,
    pub excitation: Excitation,
    /// Initial weights; zeros when absent.
    pub w0: Option<DVector<f64>>,
    /// Log every k-th step (the initial and final states are always kept).
    pub sample_every: usize,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            learning_rate: 50.0,
            dt: 1e-3,
            horizon: 10.0,
            deadzone: 0.0,
            normalize: false,
            excitation: Excitation::default_probing(),
            w0: None,
            sample_every: 10,
        }
    }
}

impl LearningConfig {
    fn validate(&self) -> Result<(), CriticError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(CriticError::BadDt(self.dt));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(CriticError::BadHorizon(self.horizon));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(CriticError::BadLearningRate(self.learning_rate));
        }
        if !(self.deadzone >= 0.0 && self.deadzone.is_finite()) {
            return Err(CriticError::BadDeadzone(self.deadzone));
        }
        if self.sample_every == 0 {
            return Err(CriticError::BadSampleEvery);
        }
        match &self.excitation {
            Excitation::Probing {
                amplitudes,
                frequencies,
            } => {
                if amplitudes.len() != frequencies.len()
                    || amplitudes.iter().chain(frequencies).any(|v| !v.is_finite())
                {
                    return Err(CriticError::BadProbing);
                }
            }
            Excitation::Reset { period, .. } => {
                if !(*period > 0.0 && period.is_finite()) {
                    return Err(CriticError::BadResetPeriod(*period));
                }
            }
            Excitation::None => {}
        }
        Ok(())
    }
}

/// What the critic regresses against.
#[derive(Debug, Clone, Copy)]
pub enum LearningTarget<'a> {
    /// The running-cost output `y(x) = -(Q(x) + mu^T R mu)`; its exact
    /// regressand is the policy's own value function.
    Bellman,
    /// Output manufactured from a known element (possibly of a larger
    /// center set, same kernel): `y(x) = drift^T grad(element)(x)`.
    Manufactured {
        centers: &'a CenterSet,
        element: &'a HNElement,
    },
}

/// The immutable problem data one critic run operates on.
#[derive(Debug, Clone, Copy)]
pub struct CriticProblem<'a> {
    pub kernel: &'a KernelSpec,
    pub centers: &'a CenterSet,
    pub grammian: &'a GrammianFactor,
    pub system: &'a ControlAffineSystem,
    pub cost: &'a CostSpec,
    pub policy: &'a Policy,
    pub target: LearningTarget<'a>,
}

struct Signals {
    sigma: DVector<f64>,
    output: f64,
    estimate: f64,
}

fn signals(prob: &CriticProblem, x: &[f64], w: &DVector<f64>, t: f64) -> Result<Signals, CriticError> {
    let drift = closed_loop_drift(prob.system, prob.policy, x);
    let sigma = sigma_with_drift(prob.kernel, prob.centers, &drift, x)
        .map_err(|source| CriticError::Control { t, source })?;
    let output = match prob.target {
        LearningTarget::Bellman => {
            let u = prob.policy.action(x);
            -running_cost(prob.cost, x, &u)
        }
        LearningTarget::Manufactured { centers, element } => {
            let grad = element.grad(prob.kernel, centers, x)?;
            drift.iter().zip(&grad).map(|(d, g)| d * g).sum()
        }
    };
    let estimate = sigma.dot(w);
    Ok(Signals {
        sigma,
        output,
        estimate,
    })
}

fn derivative(
    cfg: &LearningConfig,
    prob: &CriticProblem,
    t: f64,
    x: &DVector<f64>,
    w: &DVector<f64>,
    frozen: bool,
) -> Result<(DVector<f64>, DVector<f64>), CriticError> {
    let xs = x.as_slice();
    let f = prob.system.drift(xs);
    let g = prob.system.input_matrix(xs);
    let mu = prob.policy.action(xs);

    // closed-loop drift under the unprobed policy; feeds sigma and y
    let mut drift_mu = DVector::from_vec(f);
    drift_mu.gemv(1.0, &g, &DVector::from_column_slice(&mu), 1.0);

    // the plant additionally sees the probing input
    let probe = cfg.excitation.probe(t);
    let mut dx = drift_mu.clone();
    if probe != 0.0 {
        let ones = DVector::from_element(g.ncols(), probe);
        dx.gemv(1.0, &g, &ones, 1.0);
    }

    if frozen {
        return Ok((dx, DVector::zeros(w.len())));
    }

    let sigma = sigma_with_drift(prob.kernel, prob.centers, drift_mu.as_slice(), xs)
        .map_err(|source| CriticError::Control { t, source })?;
    let output = match prob.target {
        LearningTarget::Bellman => -running_cost(prob.cost, xs, &mu),
        LearningTarget::Manufactured { centers, element } => {
            let grad = element.grad(prob.kernel, centers, xs)?;
            drift_mu.iter().zip(&grad).map(|(d, g)| d * g).sum()
        }
    };
    let residual = output - sigma.dot(w);
    let mut gain = cfg.learning_rate;
    if cfg.normalize {
        let s2 = sigma.norm_squared();
        gain /= (s2 + 1.0) * (s2 + 1.0);
    }
    let dw = prob.grammian.solve(&(sigma * (gain * residual)));
    Ok((dx, dw))
}

/// One classical RK4 step of the coupled plant/weight system. With the
/// dead zone enabled and the residual magnitude at the step's start below
/// the threshold, the weights are frozen for the whole step while the
/// plant still advances.
pub fn step(
    state: &CriticState,
    cfg: &LearningConfig,
    prob: &CriticProblem,
) -> Result<CriticState, CriticError> {
    if state.x.len() != prob.system.state_dim() {
        return Err(CriticError::BadInitialState {
            expected: prob.system.state_dim(),
            got: state.x.len(),
        });
    }
    if state.w_hat.len() != prob.centers.len() {
        return Err(CriticError::BadWeights {
            expected: prob.centers.len(),
            got: state.w_hat.len(),
        });
    }
    if !state.is_finite() {
        return Err(CriticError::Divergence { t: state.t });
    }

    let frozen = if cfg.deadzone > 0.0 {
        let sig = signals(prob, state.x.as_slice(), &state.w_hat, state.t)?;
        (sig.output - sig.estimate).abs() < cfg.deadzone
    } else {
        false
    };

    let dt = cfg.dt;
    let t = state.t;
    let (k1x, k1w) = derivative(cfg, prob, t, &state.x, &state.w_hat, frozen)?;
    let x2 = &state.x + &k1x * (dt / 2.0);
    let w2 = &state.w_hat + &k1w * (dt / 2.0);
    let (k2x, k2w) = derivative(cfg, prob, t + dt / 2.0, &x2, &w2, frozen)?;
    let x3 = &state.x + &k2x * (dt / 2.0);
    let w3 = &state.w_hat + &k2w * (dt / 2.0);
    let (k3x, k3w) = derivative(cfg, prob, t + dt / 2.0, &x3, &w3, frozen)?;
    let x4 = &state.x + &k3x * dt;
    let w4 = &state.w_hat + &k3w * dt;
    let (k4x, k4w) = derivative(cfg, prob, t + dt, &x4, &w4, frozen)?;

    let x_next = &state.x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (dt / 6.0);
    let w_next = &state.w_hat + (k1w + k2w * 2.0 + k3w * 2.0 + k4w) * (dt / 6.0);
    let next = CriticState::new(t + dt, x_next, w_next);
    if !next.is_finite() {
        return Err(CriticError::Divergence { t: t + dt });
    }
    Ok(next)
}

/// Time series of a critic run on one shared time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    estimates: Vec<f64>,
    deadzone_active: Vec<bool>,
    sigmas: Vec<Vec<f64>>,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i]
    }

    pub fn weights(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    /// Output y at sample i.
    pub fn output(&self, i: usize) -> f64 {
        self.outputs[i]
    }

    /// Estimate `y_hat = sigma^T w` at sample i.
    pub fn estimate(&self, i: usize) -> f64 {
        self.estimates[i]
    }

    /// Residual `y - y_hat`, recomputed from the stored columns.
    pub fn residual(&self, i: usize) -> f64 {
        self.outputs[i] - self.estimates[i]
    }

    pub fn deadzone_active(&self, i: usize) -> bool {
        self.deadzone_active[i]
    }

    pub fn sigma(&self, i: usize) -> &[f64] {
        &self.sigmas[i]
    }

    pub fn terminal_weights(&self) -> &[f64] {
        self.weights.last().expect("log always has a row")
    }

    pub fn terminal_element(&self) -> HNElement {
        HNElement::from_slice(self.terminal_weights())
    }
}

/// Integrate the critic against the policy's own Bellman output.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    cfg: &LearningConfig,
    kernel: &KernelSpec,
    centers: &CenterSet,
    grammian: &GrammianFactor,
    system: &ControlAffineSystem,
    cost: &CostSpec,
    policy: &Policy,
    x0: &[f64],
) -> Result<TrajectoryLog, CriticError> {
    let prob = CriticProblem {
        kernel,
        centers,
        grammian,
        system,
        cost,
        policy,
        target: LearningTarget::Bellman,
    };
    simulate_with_target(cfg, &prob, x0)
}

/// Integrate the critic against an explicit learning target.
pub fn simulate_with_target(
    cfg: &LearningConfig,
    prob: &CriticProblem,
    x0: &[f64],
) -> Result<TrajectoryLog, CriticError> {
    cfg.validate()?;
    if x0.len() != prob.system.state_dim() {
        return Err(CriticError::BadInitialState {
            expected: prob.system.state_dim(),
            got: x0.len(),
        });
    }
    if prob.kernel.dim() != prob.system.state_dim() {
        return Err(CriticError::KernelStateMismatch {
            kernel: prob.kernel.dim(),
            state: prob.system.state_dim(),
        });
    }
    let n_weights = prob.centers.len();
    let w0 = match &cfg.w0 {
        Some(w) => {
            if w.len() != n_weights {
                return Err(CriticError::BadWeights {
                    expected: n_weights,
                    got: w.len(),
                });
            }
            w.clone()
        }
        None => DVector::zeros(n_weights),
    };

    let n_steps = (cfg.horizon / cfg.dt).round() as usize;
    let mut rng = match cfg.excitation {
        Excitation::Reset { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut next_reset = match cfg.excitation {
        Excitation::Reset { period, .. } => period,
        _ => f64::INFINITY,
    };

    let mut log = TrajectoryLog {
        times: Vec::new(),
        states: Vec::new(),
        weights: Vec::new(),
        outputs: Vec::new(),
        estimates: Vec::new(),
        deadzone_active: Vec::new(),
        sigmas: Vec::new(),
    };
    let record =
        |state: &CriticState, log: &mut TrajectoryLog| -> Result<(), CriticError> {
            let sig = signals(prob, state.x.as_slice(), &state.w_hat, state.t)?;
            let active = cfg.deadzone > 0.0 && (sig.output - sig.estimate).abs() < cfg.deadzone;
            log.times.push(state.t);
            log.states.push(state.x.as_slice().to_vec());
            log.weights.push(state.w_hat.as_slice().to_vec());
            log.outputs.push(sig.output);
            log.estimates.push(sig.estimate);
            log.deadzone_active.push(active);
            log.sigmas.push(sig.sigma.as_slice().to_vec());
            Ok(())
        };

    let mut state = CriticState::new(0.0, DVector::from_column_slice(x0), w0);
    record(&state, &mut log)?;
    for k in 0..n_steps {
        state = step(&state, cfg, prob)?;
        state.t = (k + 1) as f64 * cfg.dt;
        if state.t >= next_reset - 0.5 * cfg.dt {
            let rng = rng.as_mut().expect("reset excitation carries its rng");
            let domain = prob.centers.domain();
            for (i, xi) in state.x.iter_mut().enumerate() {
                let u: f64 = rng.random();
                *xi = domain.lower()[i] + u * (domain.upper()[i] - domain.lower()[i]);
            }
            next_reset += match cfg.excitation {
                Excitation::Reset { period, .. } => period,
                _ => unreachable!(),
            };
        }
        if (k + 1) % cfg.sample_every == 0 || k + 1 == n_steps {
            record(&state, &mut log)?;
        }
    }
    Ok(log)
}

/// Windowed persistency-of-excitation statistics over a logged run.
#[derive(Debug, Clone, PartialEq)]
pub struct PEWindowStats {
    pub start: f64,
    pub duration: f64,
    /// Smallest eigenvalue of the windowed regressor integral, as an
    /// operator on the subspace (generalized against the Grammian metric).
    pub gamma1: f64,
    /// Largest eigenvalue of the same operator.
    pub gamma2: f64,
    /// The windowed integral of `sigma sigma^T` in the section basis.
    pub integral: DMatrix<f64>,
}

/// Per-window PE levels: trapezoid quadrature of `sigma sigma^T` on each
/// consecutive window of length `delta`, eigenvalues taken against the
/// Grammian metric (`M c = lambda K_N c`).
///
/// The integral is assembled from the log's samples, so a window needs at
/// least as many samples as there are centers for its smallest eigenvalue
/// to be meaningful; log with `sample_every = 1` when measuring PE.
pub fn pe_stats(
    log: &TrajectoryLog,
    gf: &GrammianFactor,
    delta: f64,
) -> Result<Vec<PEWindowStats>, CriticError> {
    if log.len() < 2 {
        return Err(CriticError::WindowTooShort);
    }
    let t0 = log.times[0];
    let span = log.times[log.len() - 1] - t0;
    if delta <= 0.0 || !delta.is_finite() || delta > span + 1e-12 {
        return Err(CriticError::WindowTooLong {
            window: delta,
            span,
        });
    }
    let n = gf.n();
    let n_windows = (span / delta + 1e-9).floor() as usize;
    let mut out = Vec::with_capacity(n_windows);
    let mut lo = 0usize;
    for w in 0..n_windows {
        let start = t0 + w as f64 * delta;
        let end = start + delta;
        while log.times[lo] < start - 1e-12 {
            lo += 1;
        }
        let mut hi = lo;
        while hi + 1 < log.len() && log.times[hi + 1] <= end + 1e-12 {
            hi += 1;
        }
        if hi <= lo {
            return Err(CriticError::WindowTooShort);
        }
        let mut m = DMatrix::zeros(n, n);
        for i in lo..=hi {
            let dt_prev = if i > lo { log.times[i] - log.times[i - 1] } else { 0.0 };
            let dt_next = if i < hi { log.times[i + 1] - log.times[i] } else { 0.0 };
            let weight = 0.5 * (dt_prev + dt_next);
            let s = DVector::from_column_slice(&log.sigmas[i]);
            m.ger(weight, &s, &s, 1.0);
        }
        let whitened = gf.metric_whiten(&m);
        let eigs = SymmetricEigen::new(whitened).eigenvalues;
        let gamma1 = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let gamma2 = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        out.push(PEWindowStats {
            start,
            duration: delta,
            gamma1,
            gamma2,
            integral: m,
        });
        lo = hi;
    }
    Ok(out)
}

/// Closed-form ultimate bound on the projected value-function error under
/// PE: `sqrt(gamma2 delta) / gamma1 * (y_max + c gamma2 a (y_max + eps))`,
/// with `c` an order-one constant defaulting to 1.
pub fn ultimate_bound(
    gamma1: f64,
    gamma2: f64,
    delta_window: f64,
    y_bar_max: f64,
    eps_max: f64,
    learning_rate: f64,
    order_one_const: f64,
) -> Result<f64, CriticError> {
    if gamma1 <= 0.0 || !gamma1.is_finite() {
        return Err(CriticError::NonPositiveGamma(gamma1));
    }
    Ok((gamma2 * delta_window).sqrt() / gamma1
        * (y_bar_max + order_one_const * gamma2 * learning_rate * (y_bar_max + eps_max)))
}

/// Guaranteed shrink of the value-error norm after spending `time_outside`
/// seconds outside a dead zone of size `m_integer * eps_max`:
/// `sqrt(max(0, v0^2 - 2 a T (1 + M) M eps^2))`.
pub fn deadzone_decrease_bound(
    initial_error_norm: f64,
    learning_rate: f64,
    time_outside: f64,
    m_integer: u32,
    eps_max: f64,
) -> f64 {
    let m = m_integer as f64;
    let drop = 2.0 * learning_rate * time_outside * (1.0 + m) * m * eps_max * eps_max;
    (initial_error_norm * initial_error_norm - drop)
        .max(0.0)
        .sqrt()
}

/// Projection-error size of a manufactured target that lives in a larger
/// subspace of the same kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionErrorReport {
    /// Sup over the evaluation grid of the closed-loop derivative of the
    /// unprojected remainder: the approximation-error level the dead zone
    /// must dominate.
    pub eps_max: f64,
    /// Exact native-space norm of the remainder `(I - P) v`, from
    /// Grammian algebra on the nested sets.
    pub residual_norm: f64,
}

/// Project a target (known element of a larger center set, same kernel)
/// onto the working subspace and report both the exact norm of the
/// remainder and the grid sup of its closed-loop derivative.
#[allow(clippy::too_many_arguments)]
pub fn projection_error_report(
    kernel: &KernelSpec,
    cs: &CenterSet,
    gf: &GrammianFactor,
    target_cs: &CenterSet,
    target_gf: &GrammianFactor,
    target: &HNElement,
    sys: &ControlAffineSystem,
    policy: &Policy,
    resolution: usize,
) -> Result<ProjectionErrorReport, CriticError> {
    let mut samples = Vec::with_capacity(cs.len());
    for c in cs.centers() {
        samples.push(target.eval(kernel, target_cs, c)?);
    }
    let proj = project(gf, &samples)?;
    let full = h_norm(target, target_gf)?;
    let inside = h_norm(&proj, gf)?;
    let residual_norm = (full * full - inside * inside).max(0.0).sqrt();

    let grid = cs.domain().grid(resolution).map_err(NativeSpaceError::from)?;
    let mut eps_max = 0.0f64;
    for p in grid.points() {
        let drift = closed_loop_drift(sys, policy, &p);
        let g_target = target.grad(kernel, target_cs, &p)?;
        let g_proj = proj.grad(kernel, cs, &p)?;
        let eps: f64 = drift
            .iter()
            .zip(g_target.iter().zip(&g_proj))
            .map(|(d, (gt, gp))| d * (gt - gp))
            .sum();
        eps_max = eps_max.max(eps.abs());
    }
    Ok(ProjectionErrorReport {
        eps_max,
        residual_norm,
    })
}

/// Late-run residual check against the bound `(1 + eta) / a * eps_bar`.
/// The bound's inverse scaling with the learning rate is surprising, so
/// runs report violations instead of asserting the bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualBoundReport {
    pub bound: f64,
    pub violations: usize,
    pub total: usize,
}

pub fn residual_bound_report(
    log: &TrajectoryLog,
    t_start: f64,
    eps_bar: f64,
    eta: f64,
    learning_rate: f64,
) -> ResidualBoundReport {
    let bound = (1.0 + eta) / learning_rate * eps_bar;
    let mut violations = 0;
    let mut total = 0;
    for i in 0..log.len() {
        if log.times[i] >= t_start {
            total += 1;
            if log.residual(i).abs() > bound {
                violations += 1;
            }
        }
    }
    ResidualBoundReport {
        bound,
        violations,
        total,
    }
}
