//! Convergence-rate experiments: nested uniform center sweeps, sup-norm
//! errors against analytic references, and log-log slope fits compared to
//! the kernel family's theoretical exponent.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::control::{improved_control, NamedProblem};
use crate::critic::{simulate_with_target, CriticProblem, LearningConfig, LearningTarget};
use crate::domain::{BoxDomain, DomainError};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::native_space::{
    fill_distance, grammian, sup_power, CenterSet, HNElement, NativeSpaceError,
};

#[derive(Debug, Error)]
pub enum RateError {
    #[error("slope fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("slope fit needs strictly positive coordinates")]
    NonPositivePoint,
    #[error("grid levels must be strictly increasing")]
    LevelsNotIncreasing,
    #[error("the {0} family has no rate-lemma exponent")]
    UnsupportedFamily(KernelFamily),
    #[error("problem has no analytic reference for this sweep")]
    MissingReference,
    #[error(transparent)]
    NativeSpace(#[from] NativeSpaceError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Sup-norm distance between two scalar fields on the domain's tensor grid.
pub fn linf_error<F, G>(
    estimate: F,
    reference: G,
    domain: &BoxDomain,
    resolution: usize,
) -> Result<f64, RateError>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    let grid = domain.grid(resolution)?;
    let mut max = 0.0f64;
    for p in grid.points() {
        max = max.max((estimate(&p) - reference(&p)).abs());
    }
    Ok(max)
}

/// How a family's approximation error scales with the fill distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateLaw {
    /// Error of order `h^p`.
    Polynomial(f64),
    /// Exponential-type decay, faster than any fixed power of h.
    SuperPolynomial,
}

/// Rate-lemma exponent of a kernel family: Sobolev-Matern `k - d/2`,
/// Wendland `k + 1/2`, exponential the super-polynomial marker. The
/// remaining families are not covered.
pub fn theoretical_exponent(kernel: &KernelSpec) -> Result<RateLaw, RateError> {
    match kernel.family() {
        KernelFamily::SobolevMatern => Ok(RateLaw::Polynomial(
            kernel.smoothness() - kernel.dim() as f64 / 2.0,
        )),
        KernelFamily::Wendland => Ok(RateLaw::Polynomial(kernel.smoothness() + 0.5)),
        KernelFamily::Exponential => Ok(RateLaw::SuperPolynomial),
        family => Err(RateError::UnsupportedFamily(family)),
    }
}

/// Least-squares line through `(log h, log err)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit, RateError> {
    if points.len() < 3 {
        return Err(RateError::TooFewPoints(points.len()));
    }
    if points.iter().any(|&(h, e)| h <= 0.0 || e <= 0.0) {
        return Err(RateError::NonPositivePoint);
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(h, _)| h.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, e)| e.ln()).collect();
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y) * (y - mean_y)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fit = slope * x + intercept;
            (y - fit) * (y - fit)
        })
        .sum();
    let r_squared = if ss_tot <= f64::EPSILON * n {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
    })
}

/// What the per-level terminal estimate is compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepTarget {
    /// The problem's analytic value function and control.
    Analytic,
    /// A random element of each level's own subspace (coefficients uniform
    /// in `[-amplitude, amplitude]`, seeded per level): the learning
    /// transient alone limits the terminal error.
    Manufactured { seed: u64, amplitude: f64 },
}

/// Options shared by every level of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    /// Tensor-grid resolution for fill distance, sup power, and sup errors.
    pub resolution: usize,
    /// Plant initial condition.
    pub x0: Vec<f64>,
    pub target: SweepTarget,
    /// When positive, each level runs with a hard dead-zone sized a priori
    /// from its own geometry: `threshold = scale * sup_power`. The power
    /// function bounds the level's approximation error, so this sizes the
    /// zone the way the theory sizes it, without an oracle. Zero keeps the
    /// dead-zone threshold from the learning configuration.
    pub deadzone_power_scale: f64,
}

/// One refinement level of a rate sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub points_per_axis: usize,
    pub n_centers: usize,
    pub fill: Option<f64>,
    pub sup_power: Option<f64>,
    pub value_error: Option<f64>,
    pub control_error: Option<f64>,
    pub jitter: Option<f64>,
    /// Failure description when the level could not complete.
    pub error: Option<String>,
}

/// Sweep results: per-level records ordered by level, slope fits when at
/// least three levels produced positive errors, and the kernel's
/// theoretical rate law when one exists.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub levels: Vec<LevelRecord>,
    pub value_fit: Option<SlopeFit>,
    pub control_fit: Option<SlopeFit>,
    pub power_fit: Option<SlopeFit>,
    pub rate_law: Option<RateLaw>,
    pub kernel: KernelSpec,
}

impl RateReport {
    fn points<F: Fn(&LevelRecord) -> Option<f64>>(&self, field: F) -> Vec<(f64, f64)> {
        self.levels
            .iter()
            .filter_map(|l| match (l.fill, field(l)) {
                (Some(h), Some(e)) if h > 0.0 && e > 0.0 => Some((h, e)),
                _ => None,
            })
            .collect()
    }

    pub fn value_points(&self) -> Vec<(f64, f64)> {
        self.points(|l| l.value_error)
    }

    pub fn control_points(&self) -> Vec<(f64, f64)> {
        self.points(|l| l.control_error)
    }

    pub fn power_points(&self) -> Vec<(f64, f64)> {
        self.points(|l| l.sup_power)
    }

    /// True when too few levels completed to fit any slope.
    pub fn insufficient_for_slope(&self) -> bool {
        self.value_fit.is_none()
    }
}

/// Run the critic on nested uniform center grids and fit error slopes
/// against the fill distance.
///
/// Each level builds an `m x m` center grid on the problem's domain, runs
/// the critic to the horizon, and records the fill distance, the sup of
/// the power function, and the sup errors of the terminal value estimate
/// and of its improved control. A diverging level carries its error and
/// the sweep continues. Levels run concurrently; the report is assembled
/// in level order.
///
/// The learning law only observes directional derivatives of the value
/// estimate along the closed loop, so the estimate's level is determined
/// only up to the (near-)constant directions of the subspace. Terminal
/// estimates are therefore anchored before the error is taken: the
/// estimate's value at the problem's equilibrium, where the value
/// function vanishes by definition, is subtracted. Control errors use
/// gradients and need no anchoring.
pub fn rate_sweep(
    problem: &NamedProblem,
    kernel: &KernelSpec,
    grid_levels: &[usize],
    cfg: &LearningConfig,
    opts: &SweepOptions,
) -> Result<RateReport, RateError> {
    if grid_levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RateError::LevelsNotIncreasing);
    }
    let levels: Vec<LevelRecord> = grid_levels
        .par_iter()
        .map(|&m| run_level(problem, kernel, cfg, opts, m))
        .collect();

    let report_points = |selector: fn(&LevelRecord) -> Option<f64>| -> Vec<(f64, f64)> {
        levels
            .iter()
            .filter_map(|l| match (l.fill, selector(l)) {
                (Some(h), Some(e)) if h > 0.0 && e > 0.0 => Some((h, e)),
                _ => None,
            })
            .collect()
    };
    let value_fit = fit_loglog_slope(&report_points(|l: &LevelRecord| l.value_error)).ok();
    let control_fit = fit_loglog_slope(&report_points(|l: &LevelRecord| l.control_error)).ok();
    let power_fit = fit_loglog_slope(&report_points(|l: &LevelRecord| l.sup_power)).ok();

    Ok(RateReport {
        levels,
        value_fit,
        control_fit,
        power_fit,
        rate_law: theoretical_exponent(kernel).ok(),
        kernel: kernel.clone(),
    })
}

fn run_level(
    problem: &NamedProblem,
    kernel: &KernelSpec,
    cfg: &LearningConfig,
    opts: &SweepOptions,
    m: usize,
) -> LevelRecord {
    let mut record = LevelRecord {
        points_per_axis: m,
        n_centers: 0,
        fill: None,
        sup_power: None,
        value_error: None,
        control_error: None,
        jitter: None,
        error: None,
    };
    let fail = |mut rec: LevelRecord, msg: String| {
        rec.error = Some(msg);
        rec
    };

    let centers = match CenterSet::uniform_grid(&problem.domain, m) {
        Ok(c) => c,
        Err(e) => return fail(record, e.to_string()),
    };
    record.n_centers = centers.len();
    let gf = match grammian(kernel, &centers) {
        Ok(g) => g,
        Err(e) => return fail(record, e.to_string()),
    };
    record.jitter = Some(gf.jitter());
    match fill_distance(&centers, opts.resolution) {
        Ok(h) => record.fill = Some(h),
        Err(e) => return fail(record, e.to_string()),
    }
    match sup_power(kernel, &centers, &gf, opts.resolution) {
        Ok(s) => record.sup_power = Some(s.value),
        Err(e) => return fail(record, e.to_string()),
    }
    let mut cfg = cfg.clone();
    if opts.deadzone_power_scale > 0.0 {
        cfg.deadzone = opts.deadzone_power_scale * record.sup_power.unwrap();
    }
    let cfg = &cfg;

    // per-level manufactured coefficients, when requested
    let manufactured: Option<HNElement> = match opts.target {
        SweepTarget::Analytic => None,
        SweepTarget::Manufactured { seed, amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (m as u64).wrapping_mul(0x9e37_79b9));
            let coeffs =
                DVector::from_fn(centers.len(), |_, _| (rng.random::<f64>() * 2.0 - 1.0) * amplitude);
            Some(HNElement::new(coeffs))
        }
    };

    let target = match &manufactured {
        Some(elem) => LearningTarget::Manufactured {
            centers: &centers,
            element: elem,
        },
        None => LearningTarget::Bellman,
    };
    let prob = CriticProblem {
        kernel,
        centers: &centers,
        grammian: &gf,
        system: &problem.system,
        cost: &problem.cost,
        policy: &problem.policy,
        target,
    };
    let log = match simulate_with_target(cfg, &prob, &opts.x0) {
        Ok(l) => l,
        Err(e) => return fail(record, e.to_string()),
    };
    let estimate = log.terminal_element();
    // anchor: the value estimate's level at the equilibrium must be zero
    let anchor = match estimate.eval(kernel, &centers, &problem.equilibrium) {
        Ok(v) => v,
        Err(e) => return fail(record, e.to_string()),
    };
    let reference_anchor = match &manufactured {
        Some(elem) => match elem.eval(kernel, &centers, &problem.equilibrium) {
            Ok(v) => v,
            Err(e) => return fail(record, e.to_string()),
        },
        None => 0.0,
    };

    let grid = match problem.domain.grid(opts.resolution) {
        Ok(g) => g,
        Err(e) => return fail(record, e.to_string()),
    };

    // sup errors of the terminal estimate; gradient-based control errors
    // skip the measure-zero points where a non-smooth kernel's gradient
    // is undefined (exact center hits)
    let mut value_err = 0.0f64;
    let mut control_err = 0.0f64;
    let mut control_points = 0usize;
    for p in grid.points() {
        let est = match estimate.eval(kernel, &centers, &p) {
            Ok(v) => v,
            Err(e) => return fail(record, e.to_string()),
        };
        let (v_ref, u_ref): (f64, Option<Vec<f64>>) = match &manufactured {
            Some(elem) => {
                let v = match elem.eval(kernel, &centers, &p) {
                    Ok(v) => v,
                    Err(e) => return fail(record, e.to_string()),
                };
                let u = elem.grad(kernel, &centers, &p).ok().map(|g| {
                    improved_control(&problem.system, &problem.cost, &g, &p)
                });
                (v, u)
            }
            None => {
                let v_ref_fn = match problem.value_reference.as_ref() {
                    Some(f) => f,
                    None => return fail(record, RateError::MissingReference.to_string()),
                };
                let u = problem.control_reference.as_ref().map(|f| f(&p));
                (v_ref_fn(&p), u)
            }
        };
        value_err = value_err.max(((est - anchor) - (v_ref - reference_anchor)).abs());
        if let (Some(u_ref), Ok(grad)) = (u_ref, estimate.grad(kernel, &centers, &p)) {
            let u_est = improved_control(&problem.system, &problem.cost, &grad, &p);
            let diff = u_est
                .iter()
                .zip(&u_ref)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            control_err = control_err.max(diff);
            control_points += 1;
        }
    }
    record.value_error = Some(value_err);
    record.control_error = (control_points > 0).then_some(control_err);
    record
}
