//! Closed-form Mercer kernels with analytic spatial gradients.
//!
//! Every family is radial and isotropic: the lengthscale enters as
//! `r -> r / lengthscale`. Values are normalized so the diagonal
//! `K(x, x)` is 1 for all families except the inverse multiquadric,
//! whose diagonal is `c^(2*beta)`.
//!
//! The Sobolev-Matern family is restricted to the closed half-integer
//! forms `nu = k - d/2 in {1/2, 3/2, 5/2}`; the Wendland family to
//! dimensions 1..=3 and smoothness 0..=2, using the published
//! polynomial table.

use std::fmt;

use thiserror::Error;

use crate::domain::euclidean_distance;

const SQRT_3: f64 = 1.732_050_807_568_877_2;
const SQRT_5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Gaussian,
    Exponential,
    InverseMultiquadric,
    Wendland,
    SobolevMatern,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Exponential => "exponential",
            KernelFamily::InverseMultiquadric => "inverse_multiquadric",
            KernelFamily::Wendland => "wendland",
            KernelFamily::SobolevMatern => "sobolev_matern",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("kernel dimension must be at least 1")]
    ZeroDimension,
    #[error("lengthscale must be positive and finite, got {0}")]
    InvalidLengthscale(f64),
    #[error("inverse multiquadric shape parameter must be positive, got {0}")]
    InvalidShape(f64),
    #[error("inverse multiquadric exponent must be negative, got {0}")]
    InvalidExponent(f64),
    #[error("Wendland smoothness must be one of 0, 1, 2, got {0}")]
    InvalidWendlandSmoothness(u32),
    #[error("Wendland kernels are implemented for dimensions 1..=3, got {0}")]
    InvalidWendlandDimension(usize),
    #[error("support radius must be positive and finite, got {0}")]
    InvalidSupportRadius(f64),
    #[error(
        "Sobolev-Matern smoothness k = {k} in dimension {dim} requires k - d/2 in {{1/2, 3/2, 5/2}}"
    )]
    InvalidMaternSmoothness { k: f64, dim: usize },
    #[error("rate constant must be positive and finite, got {0}")]
    InvalidRateConstant(f64),
    #[error("point dimension {got} does not match kernel dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{family} kernel gradient is undefined at coincident points")]
    SingularGradient { family: KernelFamily },
    #[error("power bound requires a positive fill distance, got {0}")]
    InvalidFillDistance(f64),
}

/// A Mercer kernel family with its hyperparameters.
///
/// Immutable after construction; all evaluations are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    dim: usize,
    lengthscale: f64,
    /// Matern k (so nu = k - d/2) or Wendland smoothness; unused otherwise.
    smoothness: f64,
    /// Inverse multiquadric shape c.
    shape: f64,
    /// Inverse multiquadric exponent beta < 0.
    exponent: f64,
    /// Wendland support radius in lengthscale units.
    support_radius: f64,
    /// Generic constant `a` in the power-function bound.
    rate_constant: f64,
}

impl KernelSpec {
    fn base(family: KernelFamily, dim: usize, lengthscale: f64) -> Result<Self, KernelError> {
        if dim == 0 {
            return Err(KernelError::ZeroDimension);
        }
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(KernelError::InvalidLengthscale(lengthscale));
        }
        Ok(Self {
            family,
            dim,
            lengthscale,
            smoothness: 0.0,
            shape: 1.0,
            exponent: -0.5,
            support_radius: 1.0,
            rate_constant: 1.0,
        })
    }

    /// `K(x, y) = exp(-(r / lengthscale)^2)`.
    pub fn gaussian(dim: usize, lengthscale: f64) -> Result<Self, KernelError> {
        Self::base(KernelFamily::Gaussian, dim, lengthscale)
    }

    /// `K(x, y) = exp(-r / lengthscale)`; coincides with Matern nu = 1/2.
    pub fn exponential(dim: usize, lengthscale: f64) -> Result<Self, KernelError> {
        Self::base(KernelFamily::Exponential, dim, lengthscale)
    }

    /// `K(x, y) = (c^2 + (r / lengthscale)^2)^beta` with `c > 0`, `beta < 0`.
    pub fn inverse_multiquadric(
        dim: usize,
        lengthscale: f64,
        shape: f64,
        exponent: f64,
    ) -> Result<Self, KernelError> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(KernelError::InvalidShape(shape));
        }
        if !(exponent < 0.0 && exponent.is_finite()) {
            return Err(KernelError::InvalidExponent(exponent));
        }
        let mut k = Self::base(KernelFamily::InverseMultiquadric, dim, lengthscale)?;
        k.shape = shape;
        k.exponent = exponent;
        Ok(k)
    }

    /// Compactly supported Wendland kernel of smoothness `k in {0, 1, 2}`,
    /// normalized to 1 at the origin, vanishing for
    /// `r >= lengthscale * support_radius`.
    pub fn wendland(
        dim: usize,
        smoothness: u32,
        lengthscale: f64,
        support_radius: f64,
    ) -> Result<Self, KernelError> {
        if dim > 3 {
            return Err(KernelError::InvalidWendlandDimension(dim));
        }
        if smoothness > 2 {
            return Err(KernelError::InvalidWendlandSmoothness(smoothness));
        }
        if !(support_radius > 0.0 && support_radius.is_finite()) {
            return Err(KernelError::InvalidSupportRadius(support_radius));
        }
        let mut k = Self::base(KernelFamily::Wendland, dim, lengthscale)?;
        k.smoothness = smoothness as f64;
        k.support_radius = support_radius;
        Ok(k)
    }

    /// Sobolev-Matern kernel of smoothness `k`, requiring
    /// `nu = k - d/2 in {1/2, 3/2, 5/2}` (closed half-integer forms),
    /// normalized so `K(x, x) = 1`.
    pub fn sobolev_matern(dim: usize, smoothness: f64, lengthscale: f64) -> Result<Self, KernelError> {
        let nu = smoothness - dim as f64 / 2.0;
        if !(nu == 0.5 || nu == 1.5 || nu == 2.5) {
            return Err(KernelError::InvalidMaternSmoothness {
                k: smoothness,
                dim,
            });
        }
        let mut k = Self::base(KernelFamily::SobolevMatern, dim, lengthscale)?;
        k.smoothness = smoothness;
        Ok(k)
    }

    /// Override the generic constant used by [`KernelSpec::power_bound_fn`].
    pub fn with_rate_constant(mut self, a: f64) -> Result<Self, KernelError> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(KernelError::InvalidRateConstant(a));
        }
        self.rate_constant = a;
        Ok(self)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn rate_constant(&self) -> f64 {
        self.rate_constant
    }

    /// Matern order nu = k - d/2 (Sobolev-Matern only).
    pub fn matern_order(&self) -> f64 {
        self.smoothness - self.dim as f64 / 2.0
    }

    /// Whether the gradient is defined at coincident points. False for the
    /// families with an `|r|` kink at the origin (exponential,
    /// Matern nu = 1/2, Wendland smoothness 0).
    pub fn smooth_at_origin(&self) -> bool {
        match self.family {
            KernelFamily::Gaussian | KernelFamily::InverseMultiquadric => true,
            KernelFamily::Exponential => false,
            KernelFamily::Wendland => self.smoothness as u32 >= 1,
            KernelFamily::SobolevMatern => self.matern_order() > 0.5,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), KernelError> {
        if x.len() != self.dim {
            return Err(KernelError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Kernel value `K(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, KernelError> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.eval_r(euclidean_distance(x, y)))
    }

    /// Kernel value as a function of the unscaled distance `r = |x - y|`.
    pub fn eval_r(&self, r: f64) -> f64 {
        let rho = r / self.lengthscale;
        match self.family {
            KernelFamily::Gaussian => (-rho * rho).exp(),
            KernelFamily::Exponential => (-rho).exp(),
            KernelFamily::InverseMultiquadric => {
                (self.shape * self.shape + rho * rho).powf(self.exponent)
            }
            KernelFamily::Wendland => {
                wendland_value(self.dim, self.smoothness as u32, rho / self.support_radius)
            }
            KernelFamily::SobolevMatern => matern_value(self.matern_order(), rho),
        }
    }

    /// Gradient of the kernel in its second argument, `grad_y K(x, y)`.
    ///
    /// By symmetry this is the gradient of the kernel section `K(x, .)`
    /// at `y`. Errors at `x = y` for the families that are not
    /// differentiable there.
    pub fn grad2(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, KernelError> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        let r = euclidean_distance(x, y);
        let factor = self.grad_factor(r)?;
        Ok(x.iter().zip(y).map(|(xi, yi)| factor * (yi - xi)).collect())
    }

    /// Radial factor `s(r)` with `grad_y K(x, y) = s(r) * (y - x)`.
    pub(crate) fn grad_factor(&self, r: f64) -> Result<f64, KernelError> {
        let ell = self.lengthscale;
        let rho = r / ell;
        match self.family {
            KernelFamily::Gaussian => Ok(-2.0 * (-rho * rho).exp() / (ell * ell)),
            KernelFamily::Exponential => {
                if r == 0.0 {
                    Err(KernelError::SingularGradient {
                        family: self.family,
                    })
                } else {
                    Ok(-(-rho).exp() / (ell * r))
                }
            }
            KernelFamily::InverseMultiquadric => {
                let base = self.shape * self.shape + rho * rho;
                Ok(2.0 * self.exponent * base.powf(self.exponent - 1.0) / (ell * ell))
            }
            KernelFamily::Wendland => {
                let scale = ell * self.support_radius;
                let q = r / scale;
                let k = self.smoothness as u32;
                if k == 0 {
                    if r == 0.0 {
                        return Err(KernelError::SingularGradient {
                            family: self.family,
                        });
                    }
                    if q >= 1.0 {
                        return Ok(0.0);
                    }
                    // phi(q) = (1 - q)^j, phi'(q) = -j (1 - q)^(j - 1)
                    let j = wendland_base_power(self.dim, 0);
                    let omq = 1.0 - q;
                    return Ok(-j * omq.powf(j - 1.0) / (scale * r));
                }
                if q >= 1.0 {
                    return Ok(0.0);
                }
                // For k >= 1 the slope factors as phi'(q) = q * psi(q), so the
                // gradient is psi(q) (y - x) / scale^2, finite at r = 0.
                let omq = 1.0 - q;
                let psi = match (self.dim, k) {
                    (1, 1) => -12.0 * omq.powi(2),
                    (1, 2) => -14.0 * omq.powi(4) * (4.0 * q + 1.0),
                    (_, 1) => -20.0 * omq.powi(3),
                    (_, 2) => -(56.0 / 3.0) * omq.powi(5) * (5.0 * q + 1.0),
                    _ => unreachable!("validated at construction"),
                };
                Ok(psi / (scale * scale))
            }
            KernelFamily::SobolevMatern => {
                let nu = self.matern_order();
                if nu == 0.5 {
                    if r == 0.0 {
                        return Err(KernelError::SingularGradient {
                            family: self.family,
                        });
                    }
                    return Ok(-(-rho).exp() / (ell * r));
                }
                if nu == 1.5 {
                    return Ok(-3.0 * (-SQRT_3 * rho).exp() / (ell * ell));
                }
                // nu = 5/2
                Ok(-(5.0 / 3.0) * (1.0 + SQRT_5 * rho) * (-SQRT_5 * rho).exp() / (ell * ell))
            }
        }
    }

    /// `Kbar` with `sup_x sqrt(K(x, x)) <= Kbar`; for all supported radial
    /// families this is the value at zero distance.
    pub fn diagonal_bound(&self) -> f64 {
        self.eval_r(0.0).sqrt()
    }

    /// Power-function bound `sqrt(N(h))` as a function of the fill
    /// distance `h`, with the generic constant `a = rate_constant`:
    /// Gaussian and exponential `sqrt(exp(-a |log h| / h))`, inverse
    /// multiquadric `sqrt(exp(-a / h))`, Wendland `h^(k + 1/2)`,
    /// Sobolev-Matern `h^(k - d/2)`.
    pub fn power_bound_fn(&self, h: f64) -> Result<f64, KernelError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(KernelError::InvalidFillDistance(h));
        }
        let a = self.rate_constant;
        let value = match self.family {
            KernelFamily::Gaussian | KernelFamily::Exponential => {
                (-a * h.ln().abs() / h).exp().sqrt()
            }
            KernelFamily::InverseMultiquadric => (-a / h).exp().sqrt(),
            KernelFamily::Wendland => h.powf(self.smoothness + 0.5),
            KernelFamily::SobolevMatern => h.powf(self.smoothness - self.dim as f64 / 2.0),
        };
        Ok(value)
    }
}

fn wendland_base_power(dim: usize, smoothness: u32) -> f64 {
    (dim / 2 + smoothness as usize + 1) as f64
}

/// Published Wendland polynomials for d <= 3, normalized to 1 at q = 0.
fn wendland_value(dim: usize, smoothness: u32, q: f64) -> f64 {
    if q >= 1.0 {
        return 0.0;
    }
    let omq = 1.0 - q;
    match (dim, smoothness) {
        (1, 0) => omq,
        (1, 1) => omq.powi(3) * (3.0 * q + 1.0),
        (1, 2) => omq.powi(5) * (8.0 * q * q + 5.0 * q + 1.0),
        (_, 0) => omq.powi(2),
        (_, 1) => omq.powi(4) * (4.0 * q + 1.0),
        (_, 2) => omq.powi(6) * (35.0 * q * q + 18.0 * q + 3.0) / 3.0,
        _ => unreachable!("validated at construction"),
    }
}

/// Closed half-integer Matern forms, unit variance, unit diagonal.
fn matern_value(nu: f64, rho: f64) -> f64 {
    if nu == 0.5 {
        (-rho).exp()
    } else if nu == 1.5 {
        let t = SQRT_3 * rho;
        (1.0 + t) * (-t).exp()
    } else {
        let t = SQRT_5 * rho;
        (1.0 + t + t * t / 3.0) * (-t).exp()
    }
}
