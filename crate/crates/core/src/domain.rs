//! Axis-aligned box domains and tensor-product evaluation grids.
//!
//! Sup-type quantities (fill distance, sup of the power function) and the
//! quadrature behind the integral operator are all discretized on the same
//! tensor grid: `resolution` points per axis, endpoints included.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("domain needs at least one axis")]
    Empty,
    #[error("axis {axis}: lower bound {lower} is not strictly below upper bound {upper}")]
    DegenerateAxis { axis: usize, lower: f64, upper: f64 },
    #[error("axis {axis}: bound is not finite")]
    NonFiniteBound { axis: usize },
    #[error("point dimension {got} does not match domain dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid resolution must be at least 2 points per axis, got {0}")]
    ResolutionTooSmall(usize),
}

/// Closed axis-aligned box `[lower_1, upper_1] x ... x [lower_d, upper_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, DomainError> {
        if lower.is_empty() {
            return Err(DomainError::Empty);
        }
        if lower.len() != upper.len() {
            return Err(DomainError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (axis, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(DomainError::NonFiniteBound { axis });
            }
            if lo >= hi {
                return Err(DomainError::DegenerateAxis {
                    axis,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// The box `[-half_width, half_width]^dim`.
    pub fn symmetric(dim: usize, half_width: f64) -> Result<Self, DomainError> {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .product()
    }

    /// Membership in the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&xi, (&lo, &hi))| xi >= lo && xi <= hi)
    }

    /// Tensor grid with `resolution` points per axis, endpoints included.
    pub fn grid(&self, resolution: usize) -> Result<TensorGrid, DomainError> {
        if resolution < 2 {
            return Err(DomainError::ResolutionTooSmall(resolution));
        }
        let step = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) / (resolution - 1) as f64)
            .collect();
        Ok(TensorGrid {
            lower: self.lower.clone(),
            step,
            resolution,
        })
    }
}

/// Evaluation grid over a box: `resolution^dim` points visited in
/// row-major order (last axis fastest).
#[derive(Debug, Clone)]
pub struct TensorGrid {
    lower: Vec<f64>,
    step: Vec<f64>,
    resolution: usize,
}

impl TensorGrid {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.resolution.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest per-axis spacing; the discretization scale of any sup taken
    /// over this grid.
    pub fn max_spacing(&self) -> f64 {
        self.step.iter().cloned().fold(0.0, f64::max)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        let mut rem = flat;
        for axis in (0..d).rev() {
            let idx = rem % self.resolution;
            rem /= self.resolution;
            out[axis] = self.lower[axis] + self.step[axis] * idx as f64;
        }
        out
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|flat| self.point(flat))
    }

    /// Trapezoid quadrature weight of the grid node (product rule; per-axis
    /// weight is the step, halved at the two endpoints).
    pub fn trapezoid_weight(&self, flat: usize) -> f64 {
        let d = self.dim();
        let mut rem = flat;
        let mut w = 1.0;
        for axis in (0..d).rev() {
            let idx = rem % self.resolution;
            rem /= self.resolution;
            let edge = idx == 0 || idx == self.resolution - 1;
            w *= if edge {
                self.step[axis] * 0.5
            } else {
                self.step[axis]
            };
        }
        w
    }
}

pub(crate) fn euclidean_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
