//! Control-affine plants, running costs, policies, and the regressor and
//! output signals that drive the critic.
//!
//! For a plant `xdot = f(x) + g(x) u` under a fixed feedback `mu`, the
//! value function of `mu` satisfies the linear equation
//! `grad(V)^T (f + g mu) + Q + mu^T R mu = 0`. The critic regresses that
//! identity online: the regressor entry for basis section i is the
//! closed-loop directional derivative of the section,
//! `sigma_i(x) = (f + g mu)^T grad K(center_i, .)(x)`, and the output is
//! `y(x) = -(Q(x) + mu^T R mu)`.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::domain::BoxDomain;
use crate::kernels::{KernelError, KernelFamily, KernelSpec};
use crate::native_space::{CenterSet, HNElement, NativeSpaceError};

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("control weight matrix must be square, got {rows}x{cols}")]
    NonSquareControlWeight { rows: usize, cols: usize },
    #[error("control weight matrix must be symmetric positive definite")]
    IndefiniteControlWeight,
    #[error("state dimension {got} does not match system dimension {expected}")]
    StateDimensionMismatch { expected: usize, got: usize },
    #[error("regressor is singular at center {center}: {source}")]
    SingularRegressor {
        center: usize,
        source: KernelError,
    },
    #[error("policies from value estimates need a kernel that is differentiable everywhere; {family} is not")]
    NonSmoothPolicyKernel { family: KernelFamily },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    NativeSpace(#[from] NativeSpaceError),
}

type StateFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Plant `xdot = f(x) + g(x) u` with drift `f` and input map `g`.
#[derive(Clone)]
pub struct ControlAffineSystem {
    state_dim: usize,
    input_dim: usize,
    drift: StateFn,
    input_map: MatrixFn,
}

impl ControlAffineSystem {
    pub fn new(state_dim: usize, input_dim: usize, drift: StateFn, input_map: MatrixFn) -> Self {
        Self {
            state_dim,
            input_dim,
            drift,
            input_map,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        (self.drift)(x)
    }

    /// The n-by-m input matrix `g(x)`.
    pub fn input_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        (self.input_map)(x)
    }

    pub fn check_state(&self, x: &[f64]) -> Result<(), ControlError> {
        if x.len() != self.state_dim {
            return Err(ControlError::StateDimensionMismatch {
                expected: self.state_dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

impl std::fmt::Debug for ControlAffineSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ControlAffineSystem")
            .field("state_dim", &self.state_dim)
            .field("input_dim", &self.input_dim)
            .finish_non_exhaustive()
    }
}

/// Running cost `r(x, u) = Q(x) + u^T R u` with `Q >= 0` and `R` symmetric
/// positive definite.
#[derive(Clone)]
pub struct CostSpec {
    state_cost: ScalarFn,
    control_weight: DMatrix<f64>,
    control_weight_inv: DMatrix<f64>,
}

impl CostSpec {
    pub fn new(state_cost: ScalarFn, control_weight: DMatrix<f64>) -> Result<Self, ControlError> {
        if control_weight.nrows() != control_weight.ncols() {
            return Err(ControlError::NonSquareControlWeight {
                rows: control_weight.nrows(),
                cols: control_weight.ncols(),
            });
        }
        let sym_err = (&control_weight - control_weight.transpose()).norm();
        if sym_err > 1e-12 * control_weight.norm().max(1.0) {
            return Err(ControlError::IndefiniteControlWeight);
        }
        let chol = Cholesky::new(control_weight.clone())
            .ok_or(ControlError::IndefiniteControlWeight)?;
        let control_weight_inv = chol.inverse();
        Ok(Self {
            state_cost,
            control_weight,
            control_weight_inv,
        })
    }

    pub fn state_cost(&self, x: &[f64]) -> f64 {
        (self.state_cost)(x)
    }

    pub fn control_weight(&self) -> &DMatrix<f64> {
        &self.control_weight
    }

    pub fn control_weight_inv(&self) -> &DMatrix<f64> {
        &self.control_weight_inv
    }

    pub fn input_dim(&self) -> usize {
        self.control_weight.nrows()
    }
}

impl std::fmt::Debug for CostSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CostSpec")
            .field("control_weight", &self.control_weight)
            .finish_non_exhaustive()
    }
}

/// Fixed feedback `mu(x)`, either a closed-form formula or the improved
/// control derived from a value estimate.
#[derive(Clone)]
pub struct Policy {
    action: StateFn,
}

impl Policy {
    pub fn from_fn(action: StateFn) -> Self {
        Self { action }
    }

    pub fn zero(input_dim: usize) -> Self {
        Self {
            action: Arc::new(move |_| vec![0.0; input_dim]),
        }
    }

    /// The policy `-1/2 R^{-1} g(x)^T grad(v)(x)` for a subspace value
    /// estimate. Requires a kernel with gradients defined everywhere.
    pub fn from_value_estimate(
        kernel: &KernelSpec,
        cs: &CenterSet,
        estimate: &HNElement,
        sys: &ControlAffineSystem,
        cost: &CostSpec,
    ) -> Result<Self, ControlError> {
        if !kernel.smooth_at_origin() {
            return Err(ControlError::NonSmoothPolicyKernel {
                family: kernel.family(),
            });
        }
        // surface length mismatches now rather than inside the closure
        estimate.eval(kernel, cs, cs.center(0))?;
        let kernel = kernel.clone();
        let cs = cs.clone();
        let estimate = estimate.clone();
        let sys = sys.clone();
        let r_inv = cost.control_weight_inv().clone();
        let action: StateFn = Arc::new(move |x: &[f64]| {
            let grad = estimate
                .grad(&kernel, &cs, x)
                .expect("dimensions validated at construction; kernel smooth everywhere");
            let g = sys.input_matrix(x);
            let u = -0.5 * (&r_inv * (g.transpose() * DVector::from_column_slice(&grad)));
            u.as_slice().to_vec()
        });
        Ok(Self { action })
    }

    pub fn action(&self, x: &[f64]) -> Vec<f64> {
        (self.action)(x)
    }
}

impl std::fmt::Debug for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Policy").finish_non_exhaustive()
    }
}

/// Closed-loop drift `f(x) + g(x) mu(x)`.
pub fn closed_loop_drift(sys: &ControlAffineSystem, policy: &Policy, x: &[f64]) -> Vec<f64> {
    let mut out = sys.drift(x);
    let g = sys.input_matrix(x);
    let u = policy.action(x);
    for (i, o) in out.iter_mut().enumerate() {
        for (j, uj) in u.iter().enumerate() {
            *o += g[(i, j)] * uj;
        }
    }
    out
}

/// Running cost `Q(x) + u^T R u`.
pub fn running_cost(cost: &CostSpec, x: &[f64], u: &[f64]) -> f64 {
    let uv = DVector::from_column_slice(u);
    cost.state_cost(x) + (uv.transpose() * cost.control_weight() * &uv)[(0, 0)]
}

/// Regressor vector: component i is the closed-loop directional derivative
/// of the i-th kernel section at `x`.
pub fn sigma(
    kernel: &KernelSpec,
    cs: &CenterSet,
    sys: &ControlAffineSystem,
    policy: &Policy,
    x: &[f64],
) -> Result<DVector<f64>, ControlError> {
    let drift = closed_loop_drift(sys, policy, x);
    sigma_with_drift(kernel, cs, &drift, x)
}

/// As [`sigma`] with the closed-loop drift already evaluated at `x`.
pub fn sigma_with_drift(
    kernel: &KernelSpec,
    cs: &CenterSet,
    drift: &[f64],
    x: &[f64],
) -> Result<DVector<f64>, ControlError> {
    let mut out = DVector::zeros(cs.len());
    for (i, c) in cs.centers().iter().enumerate() {
        let grad = kernel
            .grad2(c, x)
            .map_err(|source| ControlError::SingularRegressor { center: i, source })?;
        out[i] = drift.iter().zip(&grad).map(|(d, g)| d * g).sum();
    }
    Ok(out)
}

/// Bellman output `y(x) = -(Q(x) + mu(x)^T R mu(x))`, the target the
/// critic's directional derivative must match along trajectories.
pub fn bellman_output(cost: &CostSpec, policy: &Policy, x: &[f64]) -> f64 {
    let u = policy.action(x);
    -running_cost(cost, x, &u)
}

/// Hamiltonian residual of a candidate value gradient under the policy:
/// `grad^T (f + g mu) + Q + mu^T R mu`. Zero exactly when the pair solves
/// the policy's Lyapunov equation at `x`.
pub fn hamiltonian_residual(
    sys: &ControlAffineSystem,
    cost: &CostSpec,
    policy: &Policy,
    value_grad: &[f64],
    x: &[f64],
) -> f64 {
    let drift = closed_loop_drift(sys, policy, x);
    let directional: f64 = value_grad.iter().zip(&drift).map(|(v, d)| v * d).sum();
    let u = policy.action(x);
    directional + running_cost(cost, x, &u)
}

/// One-step improved control `-1/2 R^{-1} g(x)^T value_grad`.
pub fn improved_control(
    sys: &ControlAffineSystem,
    cost: &CostSpec,
    value_grad: &[f64],
    x: &[f64],
) -> Vec<f64> {
    let g = sys.input_matrix(x);
    let u = -0.5
        * (cost.control_weight_inv() * (g.transpose() * DVector::from_column_slice(value_grad)));
    u.as_slice().to_vec()
}

/// A named problem: plant, cost, the fixed policy under evaluation, a
/// default evaluation box, and (when available) analytic references for
/// the value function, its gradient, and the associated control.
#[derive(Clone)]
pub struct NamedProblem {
    pub name: &'static str,
    pub system: ControlAffineSystem,
    pub cost: CostSpec,
    pub policy: Policy,
    pub domain: BoxDomain,
    /// Equilibrium of the closed loop, where the value function vanishes.
    pub equilibrium: Vec<f64>,
    pub value_reference: Option<ScalarFn>,
    pub value_gradient: Option<StateFn>,
    pub control_reference: Option<StateFn>,
}

/// The two-state nonlinear benchmark with a known quadratic value
/// function: drift
/// `f(x) = (-x1 + x2, -0.5 x1 - 0.5 x2 (1 - (cos(2 x1) + 2)^2))`,
/// input map `g(x) = (0, cos(2 x1) + 2)`, cost `Q = I`, `R = 1`.
/// The optimal pair is `V(x) = 0.5 x1^2 + x2^2`,
/// `u(x) = -(cos(2 x1) + 2) x2`, and the problem's policy is that optimal
/// feedback, so the policy's value function coincides with `V`.
pub fn benchmark_problem() -> NamedProblem {
    let drift: StateFn = Arc::new(|x: &[f64]| {
        let gain = (2.0 * x[0]).cos() + 2.0;
        vec![
            -x[0] + x[1],
            -0.5 * x[0] - 0.5 * x[1] * (1.0 - gain * gain),
        ]
    });
    let input_map: MatrixFn = Arc::new(|x: &[f64]| {
        DMatrix::from_column_slice(2, 1, &[0.0, (2.0 * x[0]).cos() + 2.0])
    });
    let system = ControlAffineSystem::new(2, 1, drift, input_map);

    let state_cost: ScalarFn = Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1]);
    let cost = CostSpec::new(state_cost, DMatrix::from_element(1, 1, 1.0))
        .expect("R = 1 is positive definite");

    let policy = Policy::from_fn(Arc::new(|x: &[f64]| {
        vec![-((2.0 * x[0]).cos() + 2.0) * x[1]]
    }));

    NamedProblem {
        name: "benchmark2d",
        system,
        cost,
        policy,
        domain: BoxDomain::symmetric(2, 1.0).expect("unit box"),
        equilibrium: vec![0.0, 0.0],
        value_reference: Some(Arc::new(|x: &[f64]| 0.5 * x[0] * x[0] + x[1] * x[1])),
        value_gradient: Some(Arc::new(|x: &[f64]| vec![x[0], 2.0 * x[1]])),
        control_reference: Some(Arc::new(|x: &[f64]| {
            vec![-((2.0 * x[0]).cos() + 2.0) * x[1]]
        })),
    }
}

impl std::fmt::Debug for NamedProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NamedProblem")
            .field("name", &self.name)
            .field("system", &self.system)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

/// One-dimensional sweep plant for manufactured-solution studies: a weak
/// contraction with stiff walls outside the unit interval, a gentle
/// never-vanishing policy field, and slow probing tones that drag the
/// state back and forth across the centers. No analytic value reference.
pub fn sweep_problem_1d() -> NamedProblem {
    let drift: StateFn = Arc::new(|x: &[f64]| {
        let v = x[0];
        let wall = 1.5 * ((v - 1.05).max(0.0) - (-v - 1.05).max(0.0));
        vec![-0.06 * v - wall]
    });
    let input_map: MatrixFn = Arc::new(|_: &[f64]| DMatrix::from_element(1, 1, 1.0));
    let system = ControlAffineSystem::new(1, 1, drift, input_map);
    let cost = CostSpec::new(
        Arc::new(|x: &[f64]| x[0] * x[0]),
        DMatrix::from_element(1, 1, 1.0),
    )
    .expect("R = 1 is positive definite");
    let policy = Policy::from_fn(Arc::new(|x: &[f64]| {
        vec![0.1 + 0.03 * (2.7 * x[0]).sin()]
    }));
    NamedProblem {
        name: "sweep1d",
        system,
        cost,
        policy,
        domain: BoxDomain::symmetric(1, 1.0).expect("unit interval"),
        equilibrium: vec![0.0],
        value_reference: None,
        value_gradient: None,
        control_reference: None,
    }
}

/// Registry of named problems; systems are definable only in code.
pub fn lookup_problem(name: &str) -> Option<NamedProblem> {
    match name {
        "benchmark2d" => Some(benchmark_problem()),
        "sweep1d" => Some(sweep_problem_1d()),
        _ => None,
    }
}
