//! Online critic value-function approximation in native spaces.
//!
//! A critic estimates the value function of a fixed feedback policy for a
//! control-affine system by driving a weight vector over reproducing-kernel
//! sections with an online gradient law. This crate provides the kernel
//! families, the scattered-center native-space machinery (Grammians,
//! projections, power function, fill distance), the control-problem
//! plumbing (plants, costs, Bellman outputs, Hamiltonian residuals), the
//! coupled plant/weight integrator with dead-zone and excitation options,
//! and convergence-rate experiments that compare measured log-log slopes
//! against the kernel-dependent theoretical exponents.

pub mod control;
pub mod critic;
pub mod domain;
pub mod kernels;
pub mod native_space;
pub mod rates;

pub use control::{
    bellman_output, benchmark_problem, closed_loop_drift, hamiltonian_residual, improved_control,
    lookup_problem, running_cost, sigma, sigma_with_drift, sweep_problem_1d, ControlAffineSystem,
    ControlError, CostSpec, NamedProblem, Policy,
};
pub use critic::{
    deadzone_decrease_bound, pe_stats, projection_error_report, residual_bound_report, simulate,
    simulate_with_target, step, ultimate_bound, CriticError, CriticProblem, CriticState,
    Excitation, LearningConfig, LearningTarget, PEWindowStats, ProjectionErrorReport,
    ResidualBoundReport, TrajectoryLog,
};
pub use domain::{BoxDomain, DomainError, TensorGrid};
pub use kernels::{KernelError, KernelFamily, KernelSpec};
pub use native_space::{
    doubling_bound, fill_distance, grammian, grammian_with_jitter_max, h_norm, integral_operator,
    l2_norm_on_grid, power_function, project, sup_power, CenterSet, GrammianFactor, HNElement,
    NativeSpaceError, SupEstimate,
};
pub use rates::{
    fit_loglog_slope, linf_error, rate_sweep, theoretical_exponent, LevelRecord, RateError,
    RateLaw, RateReport, SlopeFit, SweepOptions, SweepTarget,
};
