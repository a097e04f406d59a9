//! Scattered centers and the finite-dimensional native subspace they span.
//!
//! An N-point center set inside a box domain defines the subspace spanned
//! by the kernel sections at those centers. The Grammian of the sections
//! is the metric of that coordinate system: projections, norms, the power
//! function and the doubling-trick bound are all quadratic-form
//! computations against its Cholesky factorization.

use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::domain::{euclidean_distance, BoxDomain, DomainError};
use crate::kernels::{KernelError, KernelSpec};

#[derive(Debug, Error)]
pub enum NativeSpaceError {
    #[error("center set must contain at least one point")]
    EmptyCenters,
    #[error("center {index} lies outside the domain box")]
    CenterOutsideDomain { index: usize },
    #[error("centers {first} and {second} coincide")]
    DuplicateCenters { first: usize, second: usize },
    #[error("center {index} has dimension {got}, domain has dimension {expected}")]
    CenterDimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error(
        "Grammian factorization failed at maximum jitter {jitter_max:.3e} \
         (minimum pairwise center distance {min_pairwise_distance:.6e})"
    )]
    IllConditionedCenters {
        min_pairwise_distance: f64,
        jitter_max: f64,
    },
    #[error("expected a vector of length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("uniform grid needs at least 2 points per axis, got {0}")]
    GridTooSmall(usize),
    #[error("centers file: {0}")]
    CsvFormat(String),
    #[error("centers file line {line}: {message}")]
    CsvParse { line: usize, message: String },
    #[error("failed to read centers file: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Ordered scattered centers inside a box domain. Index i identifies the
/// i-th kernel-section basis function.
#[derive(Debug, Clone)]
pub struct CenterSet {
    centers: Vec<Vec<f64>>,
    domain: BoxDomain,
}

impl CenterSet {
    pub fn new(centers: Vec<Vec<f64>>, domain: BoxDomain) -> Result<Self, NativeSpaceError> {
        if centers.is_empty() {
            return Err(NativeSpaceError::EmptyCenters);
        }
        for (index, c) in centers.iter().enumerate() {
            if c.len() != domain.dim() {
                return Err(NativeSpaceError::CenterDimensionMismatch {
                    index,
                    expected: domain.dim(),
                    got: c.len(),
                });
            }
            if !domain.contains(c) {
                return Err(NativeSpaceError::CenterOutsideDomain { index });
            }
        }
        for i in 0..centers.len() {
            for j in (i + 1)..centers.len() {
                if euclidean_distance(&centers[i], &centers[j]) == 0.0 {
                    return Err(NativeSpaceError::DuplicateCenters { first: i, second: j });
                }
            }
        }
        Ok(Self { centers, domain })
    }

    /// Uniform tensor grid of `points_per_axis^dim` centers spanning the
    /// box, endpoints included.
    pub fn uniform_grid(domain: &BoxDomain, points_per_axis: usize) -> Result<Self, NativeSpaceError> {
        if points_per_axis < 2 {
            return Err(NativeSpaceError::GridTooSmall(points_per_axis));
        }
        let grid = domain.grid(points_per_axis)?;
        let centers: Vec<Vec<f64>> = grid.points().collect();
        Self::new(centers, domain.clone())
    }

    /// Load centers from CSV with header `x1,...,xd`, one center per row.
    pub fn from_csv_path(path: &Path, domain: BoxDomain) -> Result<Self, NativeSpaceError> {
        let file = fs::File::open(path)?;
        Self::from_csv_reader(file, domain)
    }

    pub fn from_csv_reader<R: Read>(reader: R, domain: BoxDomain) -> Result<Self, NativeSpaceError> {
        let reader = BufReader::new(reader);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| NativeSpaceError::CsvFormat("empty file".into()))??;
        let expected_header: Vec<String> =
            (1..=domain.dim()).map(|i| format!("x{i}")).collect();
        let got: Vec<&str> = header.trim().split(',').map(str::trim).collect();
        if got != expected_header.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(NativeSpaceError::CsvFormat(format!(
                "expected header {}, got {header:?}",
                expected_header.join(",")
            )));
        }
        let mut centers = Vec::new();
        for (offset, line) in lines.enumerate() {
            let line = line?;
            let line_no = offset + 2;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != domain.dim() {
                return Err(NativeSpaceError::CsvParse {
                    line: line_no,
                    message: format!(
                        "expected {} columns, got {}",
                        domain.dim(),
                        fields.len()
                    ),
                });
            }
            let mut point = Vec::with_capacity(domain.dim());
            for field in fields {
                let v: f64 = field.parse().map_err(|e| NativeSpaceError::CsvParse {
                    line: line_no,
                    message: format!("bad number {field:?}: {e}"),
                })?;
                point.push(v);
            }
            centers.push(point);
        }
        Self::new(centers, domain)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i]
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut min = f64::INFINITY;
        for i in 0..self.centers.len() {
            for j in (i + 1)..self.centers.len() {
                min = min.min(euclidean_distance(&self.centers[i], &self.centers[j]));
            }
        }
        min
    }

    /// Indices of this set's centers inside `fine`, when every center has an
    /// exact coordinate match there. Used to embed coefficient vectors of a
    /// coarse set into a nested finer one.
    pub fn embedding_into(&self, fine: &CenterSet) -> Option<Vec<usize>> {
        self.centers
            .iter()
            .map(|c| fine.centers.iter().position(|f| f == c))
            .collect()
    }

    /// Column vector of kernel sections evaluated at `x`.
    pub(crate) fn sections_at(
        &self,
        kernel: &KernelSpec,
        x: &[f64],
    ) -> Result<DVector<f64>, NativeSpaceError> {
        let mut out = DVector::zeros(self.len());
        for (i, c) in self.centers.iter().enumerate() {
            out[i] = kernel.eval(c, x)?;
        }
        Ok(out)
    }
}

/// Grammian of the kernel sections at a center set, with a symmetric
/// positive-definite Cholesky factorization and the diagonal jitter that
/// was needed to reach it.
#[derive(Debug, Clone)]
pub struct GrammianFactor {
    gram: DMatrix<f64>,
    factor: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
    log_det: f64,
}

/// Default jitter ceiling, as a multiple of `trace / N`.
const JITTER_MAX_RELATIVE: f64 = 1e-8;
/// First nonzero rung of the jitter ladder, as a multiple of `trace / N`.
const JITTER_START_RELATIVE: f64 = 1e-12;

/// Build the Grammian `K[i][j] = kernel(center_i, center_j)` and factor it,
/// escalating diagonal jitter from zero by decades up to the default
/// ceiling `1e-8 * trace / N`.
pub fn grammian(kernel: &KernelSpec, cs: &CenterSet) -> Result<GrammianFactor, NativeSpaceError> {
    let n = cs.len();
    let mean_diag = {
        let mut t = 0.0;
        for c in cs.centers() {
            t += kernel.eval(c, c)?;
        }
        t / n as f64
    };
    grammian_with_jitter_max(kernel, cs, JITTER_MAX_RELATIVE * mean_diag)
}

/// As [`grammian`] with an explicit jitter ceiling.
pub fn grammian_with_jitter_max(
    kernel: &KernelSpec,
    cs: &CenterSet,
    jitter_max: f64,
) -> Result<GrammianFactor, NativeSpaceError> {
    let n = cs.len();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(cs.center(i), cs.center(j))?;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let trace = gram.trace();

    let mut jitter = 0.0;
    loop {
        let mut attempt = gram.clone();
        for i in 0..n {
            attempt[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(attempt) {
            let factor = chol.l();
            let log_det = 2.0 * factor.diagonal().iter().map(|d| d.ln()).sum::<f64>();
            return Ok(GrammianFactor {
                gram,
                factor,
                chol,
                jitter,
                log_det,
            });
        }
        let next = if jitter == 0.0 {
            JITTER_START_RELATIVE * trace / n as f64
        } else {
            jitter * 10.0
        };
        if next > jitter_max {
            return Err(NativeSpaceError::IllConditionedCenters {
                min_pairwise_distance: cs.min_pairwise_distance(),
                jitter_max,
            });
        }
        jitter = next;
    }
}

impl GrammianFactor {
    pub fn n(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Lower-triangular factor L with `L L^T = gram + jitter I`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Solve `(gram + jitter I) w = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_in_place(&self, b: &mut DVector<f64>) {
        self.chol.solve_mut(b);
    }

    /// Quadratic form `b^T (gram + jitter I)^{-1} b` via one half-solve.
    pub fn inverse_quad_form(&self, b: &DVector<f64>) -> f64 {
        match self.factor.solve_lower_triangular(b) {
            Some(z) => z.norm_squared(),
            None => f64::NAN,
        }
    }

    /// Congruence transform `L^{-1} M L^{-T}`, the coordinate form of an
    /// operator on the subspace re-expressed against the Grammian metric.
    pub fn metric_whiten(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let x = self
            .factor
            .solve_lower_triangular(m)
            .expect("factor is nonsingular by construction");
        let y = self
            .factor
            .solve_lower_triangular(&x.transpose())
            .expect("factor is nonsingular by construction");
        // symmetrize away the roundoff asymmetry
        let yt = y.transpose();
        (y + yt) * 0.5
    }
}

/// Element of the subspace: a coefficient vector over the kernel sections
/// of one center set.
#[derive(Debug, Clone, PartialEq)]
pub struct HNElement {
    coeffs: DVector<f64>,
}

impl HNElement {
    pub fn new(coeffs: DVector<f64>) -> Self {
        Self { coeffs }
    }

    pub fn from_slice(coeffs: &[f64]) -> Self {
        Self {
            coeffs: DVector::from_column_slice(coeffs),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            coeffs: DVector::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    fn check_len(&self, cs: &CenterSet) -> Result<(), NativeSpaceError> {
        if self.len() != cs.len() {
            return Err(NativeSpaceError::LengthMismatch {
                expected: cs.len(),
                got: self.len(),
            });
        }
        Ok(())
    }

    /// Pointwise value `sum_j c_j K(center_j, x)`.
    pub fn eval(
        &self,
        kernel: &KernelSpec,
        cs: &CenterSet,
        x: &[f64],
    ) -> Result<f64, NativeSpaceError> {
        self.check_len(cs)?;
        let mut acc = 0.0;
        for (c, w) in cs.centers().iter().zip(self.coeffs.iter()) {
            acc += w * kernel.eval(c, x)?;
        }
        Ok(acc)
    }

    /// Pointwise gradient `sum_j c_j grad K(center_j, .)(x)`.
    pub fn grad(
        &self,
        kernel: &KernelSpec,
        cs: &CenterSet,
        x: &[f64],
    ) -> Result<Vec<f64>, NativeSpaceError> {
        self.check_len(cs)?;
        let mut acc = vec![0.0; cs.dim()];
        for (c, w) in cs.centers().iter().zip(self.coeffs.iter()) {
            let g = kernel.grad2(c, x)?;
            for (a, gi) in acc.iter_mut().zip(g) {
                *a += w * gi;
            }
        }
        Ok(acc)
    }
}

/// Orthogonal projection onto the subspace from point samples at the
/// centers: by the reproducing property the projection interpolates, so
/// its coefficients solve the Grammian system against the samples.
pub fn project(gf: &GrammianFactor, samples: &[f64]) -> Result<HNElement, NativeSpaceError> {
    if samples.len() != gf.n() {
        return Err(NativeSpaceError::LengthMismatch {
            expected: gf.n(),
            got: samples.len(),
        });
    }
    let coeffs = gf.solve(&DVector::from_column_slice(samples));
    Ok(HNElement::new(coeffs))
}

/// Native-space norm of a subspace element, `sqrt(c^T K c)` against the
/// unjittered Grammian, clamped at zero.
pub fn h_norm(elem: &HNElement, gf: &GrammianFactor) -> Result<f64, NativeSpaceError> {
    if elem.len() != gf.n() {
        return Err(NativeSpaceError::LengthMismatch {
            expected: gf.n(),
            got: elem.len(),
        });
    }
    let quad = (elem.coeffs().transpose() * gf.gram() * elem.coeffs())[(0, 0)];
    Ok(quad.max(0.0).sqrt())
}

/// Pointwise power function: worst-case evaluation error of projection
/// onto the subspace, `sqrt(K(x, x) - k(x)^T K_N^{-1} k(x))`, clamping
/// negative round-off to zero.
pub fn power_function(
    kernel: &KernelSpec,
    cs: &CenterSet,
    gf: &GrammianFactor,
    x: &[f64],
) -> Result<f64, NativeSpaceError> {
    let sections = cs.sections_at(kernel, x)?;
    let quad = gf.inverse_quad_form(&sections);
    let diag = kernel.eval(x, x)?;
    Ok((diag - quad).max(0.0).sqrt())
}

/// A sup estimated on a tensor grid, reported with the grid spacing that
/// discretized it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupEstimate {
    pub value: f64,
    pub grid_spacing: f64,
}

/// Sup of the power function over the domain's tensor grid.
pub fn sup_power(
    kernel: &KernelSpec,
    cs: &CenterSet,
    gf: &GrammianFactor,
    resolution: usize,
) -> Result<SupEstimate, NativeSpaceError> {
    let grid = cs.domain().grid(resolution)?;
    let mut max = 0.0f64;
    for p in grid.points() {
        max = max.max(power_function(kernel, cs, gf, &p)?);
    }
    Ok(SupEstimate {
        value: max,
        grid_spacing: grid.max_spacing(),
    })
}

/// Fill distance of the centers in their domain: the largest distance
/// from any grid point to its nearest center.
pub fn fill_distance(cs: &CenterSet, resolution: usize) -> Result<f64, NativeSpaceError> {
    let grid = cs.domain().grid(resolution)?;
    let mut h = 0.0f64;
    for p in grid.points() {
        let nearest = cs
            .centers()
            .iter()
            .map(|c| euclidean_distance(c, &p))
            .fold(f64::INFINITY, f64::min);
        h = h.max(nearest);
    }
    Ok(h)
}

/// Subspace-projection error bound for targets in the uncertainty class
/// `v = Lu`, `|u|_L2 <= radius`: `sqrt(vol) * sup_power * radius`.
pub fn doubling_bound(
    kernel: &KernelSpec,
    cs: &CenterSet,
    gf: &GrammianFactor,
    resolution: usize,
    radius: f64,
) -> Result<f64, NativeSpaceError> {
    let sup = sup_power(kernel, cs, gf, resolution)?;
    Ok(cs.domain().volume().sqrt() * sup.value * radius)
}

/// Forward image of the kernel integral operator,
/// `(Lu)(x) = int_domain K(x, y) u(y) dy`, by tensor-grid trapezoid
/// quadrature. Used to manufacture test targets with known `|u|_L2`.
pub fn integral_operator<F>(
    kernel: &KernelSpec,
    domain: &BoxDomain,
    resolution: usize,
    u: F,
    x: &[f64],
) -> Result<f64, NativeSpaceError>
where
    F: Fn(&[f64]) -> f64,
{
    let grid = domain.grid(resolution)?;
    let mut acc = 0.0;
    for flat in 0..grid.len() {
        let p = grid.point(flat);
        acc += grid.trapezoid_weight(flat) * kernel.eval(x, &p)? * u(&p);
    }
    Ok(acc)
}

/// `L^2(domain)` norm by the same trapezoid quadrature.
pub fn l2_norm_on_grid<F>(
    domain: &BoxDomain,
    resolution: usize,
    u: F,
) -> Result<f64, NativeSpaceError>
where
    F: Fn(&[f64]) -> f64,
{
    let grid = domain.grid(resolution)?;
    let mut acc = 0.0;
    for flat in 0..grid.len() {
        let v = u(&grid.point(flat));
        acc += grid.trapezoid_weight(flat) * v * v;
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;

    fn unit_box() -> BoxDomain {
        BoxDomain::symmetric(2, 1.0).unwrap()
    }

    fn two_center_gaussian() -> (KernelSpec, CenterSet, GrammianFactor) {
        let kernel = KernelSpec::gaussian(2, 1.0).unwrap();
        let cs = CenterSet::new(vec![vec![0.0, 0.0], vec![1.0, 0.0]], unit_box()).unwrap();
        let gf = grammian(&kernel, &cs).unwrap();
        (kernel, cs, gf)
    }

    #[test]
    fn center_set_validation() {
        let domain = unit_box();
        assert!(matches!(
            CenterSet::new(vec![], domain.clone()),
            Err(NativeSpaceError::EmptyCenters)
        ));
        assert!(matches!(
            CenterSet::new(vec![vec![2.0, 0.0]], domain.clone()),
            Err(NativeSpaceError::CenterOutsideDomain { index: 0 })
        ));
        assert!(matches!(
            CenterSet::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]], domain.clone()),
            Err(NativeSpaceError::DuplicateCenters { .. })
        ));
        assert!(matches!(
            CenterSet::new(vec![vec![0.0]], domain),
            Err(NativeSpaceError::CenterDimensionMismatch { .. })
        ));
    }

    #[test]
    fn uniform_grid_centers() {
        let cs = CenterSet::uniform_grid(&unit_box(), 3).unwrap();
        assert_eq!(cs.len(), 9);
        assert_eq!(cs.center(0), &[-1.0, -1.0]);
        assert_eq!(cs.center(8), &[1.0, 1.0]);
        assert_eq!(cs.center(4), &[0.0, 0.0]);
        assert!(CenterSet::uniform_grid(&unit_box(), 1).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let domain = unit_box();
        let good = "x1,x2\n0.0,0.0\n0.5,-0.5\n";
        let cs = CenterSet::from_csv_reader(good.as_bytes(), domain.clone()).unwrap();
        assert_eq!(cs.len(), 2);
        assert_eq!(cs.center(1), &[0.5, -0.5]);

        let bad_header = "a,b\n0.0,0.0\n";
        assert!(matches!(
            CenterSet::from_csv_reader(bad_header.as_bytes(), domain.clone()),
            Err(NativeSpaceError::CsvFormat(_))
        ));
        let bad_value = "x1,x2\n0.0,zebra\n";
        assert!(matches!(
            CenterSet::from_csv_reader(bad_value.as_bytes(), domain.clone()),
            Err(NativeSpaceError::CsvParse { line: 2, .. })
        ));
        let bad_cols = "x1,x2\n0.0\n";
        assert!(matches!(
            CenterSet::from_csv_reader(bad_cols.as_bytes(), domain),
            Err(NativeSpaceError::CsvParse { line: 2, .. })
        ));
    }

    #[test]
    fn grammian_single_center() {
        let kernel = KernelSpec::gaussian(2, 1.0).unwrap();
        let cs = CenterSet::new(vec![vec![0.0, 0.0]], unit_box()).unwrap();
        let gf = grammian(&kernel, &cs).unwrap();
        assert_eq!(gf.gram()[(0, 0)], 1.0);
        assert_eq!(gf.jitter(), 0.0);
    }

    #[test]
    fn grammian_two_centers_exact_entries() {
        let (_, _, gf) = two_center_gaussian();
        let q = (-1.0f64).exp();
        assert_eq!(gf.gram()[(0, 0)], 1.0);
        assert_eq!(gf.gram()[(1, 1)], 1.0);
        assert!((gf.gram()[(0, 1)] - q).abs() < 1e-16);
        assert!((gf.gram()[(1, 0)] - q).abs() < 1e-16);
        assert_eq!(gf.jitter(), 0.0);
    }

    #[test]
    fn factorization_reconstructs_gram() {
        let kernel = KernelSpec::sobolev_matern(2, 2.5, 0.8).unwrap();
        let cs = CenterSet::uniform_grid(&unit_box(), 4).unwrap();
        let gf = grammian(&kernel, &cs).unwrap();
        let rebuilt = gf.factor() * gf.factor().transpose();
        let mut target = gf.gram().clone();
        for i in 0..gf.n() {
            target[(i, i)] += gf.jitter();
        }
        let err = (&rebuilt - &target).norm() / target.norm();
        assert!(err <= 1e-10, "relative reconstruction error {err}");
    }

    #[test]
    fn near_duplicate_centers_fail_when_jitter_disallowed() {
        let kernel = KernelSpec::gaussian(2, 1.0).unwrap();
        let eps = 1e-13;
        let cs = CenterSet::new(
            vec![vec![0.0, 0.0], vec![eps, 0.0], vec![0.5, 0.5]],
            unit_box(),
        )
        .unwrap();
        // with the jitter ladder disabled the factorization must fail and
        // name the offending minimum pairwise distance
        match grammian_with_jitter_max(&kernel, &cs, 0.0) {
            Err(NativeSpaceError::IllConditionedCenters {
                min_pairwise_distance,
                ..
            }) => {
                assert!((min_pairwise_distance - eps).abs() < 1e-16);
            }
            other => panic!("expected ill-conditioned error, got {other:?}"),
        }
    }

    #[test]
    fn jitter_ladder_records_nonzero_jitter() {
        // Centers this close make the Grammian numerically singular; the
        // default ladder rescues it and records the jitter it needed.
        let kernel = KernelSpec::gaussian(2, 1.0).unwrap();
        let cs = CenterSet::new(
            vec![vec![0.0, 0.0], vec![1e-13, 0.0], vec![0.5, 0.5]],
            unit_box(),
        )
        .unwrap();
        let gf = grammian(&kernel, &cs).unwrap();
        assert!(gf.jitter() > 0.0);
        assert!(gf.jitter() <= 1e-8 * gf.gram().trace() / gf.n() as f64);
    }

    #[test]
    fn projection_of_basis_section_is_unit_vector() {
        let kernel = KernelSpec::gaussian(2, 0.8).unwrap();
        let cs = CenterSet::uniform_grid(&unit_box(), 3).unwrap();
        let gf = grammian(&kernel, &cs).unwrap();
        // v = section at center 3: samples are the Grammian column
        let samples: Vec<f64> = (0..cs.len())
            .map(|i| kernel.eval(cs.center(3), cs.center(i)).unwrap())
            .collect();
        let elem = project(&gf, &samples).unwrap();
        for i in 0..cs.len() {
            let expected = if i == 3 { 1.0 } else { 0.0 };
            assert!(
                (elem.coeffs()[i] - expected).abs() < 1e-8,
                "coeff {i} = {}",
                elem.coeffs()[i]
            );
        }
    }

    #[test]
    fn projection_zero_and_frozen_two_center_solve() {
        let (_, _, gf) = two_center_gaussian();
        let zero = project(&gf, &[0.0, 0.0]).unwrap();
        assert_eq!(zero.coeffs().as_slice(), &[0.0, 0.0]);

        // K = [[1, q], [q, 1]], samples (1, 0):
        // coeffs = (1, -q) / (1 - q^2)
        let q = (-1.0f64).exp();
        let elem = project(&gf, &[1.0, 0.0]).unwrap();
        let det = 1.0 - q * q;
        assert!((elem.coeffs()[0] - 1.0 / det).abs() < 1e-10);
        assert!((elem.coeffs()[1] + q / det).abs() < 1e-10);
        // five-digit reference values from the hand solve
        assert!((elem.coeffs()[0] - 1.1565).abs() < 1e-4);
        assert!((elem.coeffs()[1] + 0.4255).abs() < 1e-4);

        assert!(project(&gf, &[1.0]).is_err());
    }

    #[test]
    fn eval_element_cases() {
        let (kernel, cs, _) = two_center_gaussian();
        let e1 = HNElement::from_slice(&[1.0, 0.0]);
        let v = e1.eval(&kernel, &cs, &[0.0, 0.0]).unwrap();
        assert_eq!(v, 1.0);

        let zero = HNElement::zeros(2);
        assert_eq!(zero.eval(&kernel, &cs, &[0.3, 0.4]).unwrap(), 0.0);

        let ones = HNElement::from_slice(&[1.0, 1.0]);
        let mid = ones.eval(&kernel, &cs, &[0.5, 0.0]).unwrap();
        assert!((mid - 2.0 * (-0.25f64).exp()).abs() < 1e-15);

        let short = HNElement::zeros(1);
        assert!(short.eval(&kernel, &cs, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn grad_element_matches_finite_differences() {
        let (kernel, cs, _) = two_center_gaussian();
        let elem = HNElement::from_slice(&[0.7, -1.3]);
        let x = [0.3, -0.4];
        let grad = elem.grad(&kernel, &cs, &x).unwrap();
        let step = 1e-6;
        for axis in 0..2 {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[axis] += step;
            xm[axis] -= step;
            let fd = (elem.eval(&kernel, &cs, &xp).unwrap()
                - elem.eval(&kernel, &cs, &xm).unwrap())
                / (2.0 * step);
            assert!((grad[axis] - fd).abs() <= 1e-6 * grad[axis].abs().max(1e-4));
        }
        let zero = HNElement::zeros(2);
        assert_eq!(zero.grad(&kernel, &cs, &x).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn grad_element_propagates_singular_gradient() {
        let kernel = KernelSpec::exponential(2, 1.0).unwrap();
        let cs = CenterSet::new(vec![vec![0.2, -0.1], vec![-0.4, 0.3]], unit_box()).unwrap();
        let elem = HNElement::from_slice(&[1.0, -0.5]);
        // evaluating the gradient exactly at a center hits the kink
        let err = elem.grad(&kernel, &cs, &[0.2, -0.1]).unwrap_err();
        assert!(matches!(
            err,
            NativeSpaceError::Kernel(crate::kernels::KernelError::SingularGradient { .. })
        ));
        assert!(elem.grad(&kernel, &cs, &[0.0, 0.0]).is_ok());
    }

    #[test]
    fn shared_types_are_send_and_sync() {
        fn check<T: Send + Sync>() {}
        check::<KernelSpec>();
        check::<CenterSet>();
        check::<GrammianFactor>();
        check::<HNElement>();
    }

    #[test]
    fn grad_element_outside_wendland_support_is_zero() {
        let kernel = KernelSpec::wendland(2, 1, 1.0, 0.25).unwrap();
        let cs = CenterSet::new(vec![vec![-0.5, -0.5], vec![-0.5, 0.5]], unit_box()).unwrap();
        let elem = HNElement::from_slice(&[1.0, 2.0]);
        assert_eq!(elem.grad(&kernel, &cs, &[0.9, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(elem.eval(&kernel, &cs, &[0.9, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn power_function_single_center_closed_form() {
        let kernel = KernelSpec::gaussian(2, 1.0).unwrap();
        let cs = CenterSet::new(vec![vec![0.0, 0.0]], unit_box()).unwrap();
        let gf = grammian(&kernel, &cs).unwrap();
        for r in [0.0, 0.3, 0.7, 1.0] {
            let x = [r, 0.0];
            let p = power_function(&kernel, &cs, &gf, &x).unwrap();
            let expected = (1.0 - (-2.0 * r * r).exp()).max(0.0).sqrt();
            assert!((p - expected).abs() < 1e-12, "r = {r}: {p} vs {expected}");
        }
    }

    #[test]
    fn power_function_vanishes_at_centers_and_shrinks_with_refinement() {
        let kernel = KernelSpec::sobolev_matern(2, 2.5, 1.0).unwrap();
        let coarse = CenterSet::new(vec![vec![0.0, 0.0]], unit_box()).unwrap();
        let coarse_gf = grammian(&kernel, &coarse).unwrap();
        let fine = CenterSet::uniform_grid(&unit_box(), 5).unwrap();
        let fine_gf = grammian(&kernel, &fine).unwrap();

        for c in fine.centers() {
            let p = power_function(&kernel, &fine, &fine_gf, c).unwrap();
            assert!(p <= 1e-7, "power {p} at center {c:?}");
        }
        let x = [0.37, -0.21];
        let p1 = power_function(&kernel, &coarse, &coarse_gf, &x).unwrap();
        let p2 = power_function(&kernel, &fine, &fine_gf, &x).unwrap();
        assert!(p2 < p1);
        assert!(p2 >= 0.0);
    }

    #[test]
    fn sup_power_single_center_peaks_at_corner() {
        let kernel = KernelSpec::gaussian(2, 1.0).unwrap();
        let cs = CenterSet::new(vec![vec![0.0, 0.0]], unit_box()).unwrap();
        let gf = grammian(&kernel, &cs).unwrap();
        let sup = sup_power(&kernel, &cs, &gf, 101).unwrap();
        // farthest grid point is a corner, r^2 = 2
        let expected = (1.0 - (-4.0f64).exp()).sqrt();
        assert!((sup.value - expected).abs() < 1e-10);
        assert!((sup.grid_spacing - 0.02).abs() < 1e-15);

        let coarse = sup_power(&kernel, &cs, &gf, 11).unwrap();
        assert!(sup.value >= coarse.value - 1e-12);
    }

    #[test]
    fn fill_distance_cases() {
        let cs = CenterSet::new(vec![vec![0.0, 0.0]], unit_box()).unwrap();
        let h = fill_distance(&cs, 101).unwrap();
        assert!((h - 2.0f64.sqrt()).abs() < 1e-12);

        // adding a center never increases the fill distance
        let cs2 = CenterSet::new(vec![vec![0.0, 0.0], vec![0.8, 0.8]], unit_box()).unwrap();
        let h2 = fill_distance(&cs2, 101).unwrap();
        assert!(h2 <= h + 1e-15);
    }

    #[test]
    fn h_norm_cases() {
        let (_, _, gf) = two_center_gaussian();
        assert_eq!(h_norm(&HNElement::zeros(2), &gf).unwrap(), 0.0);
        let e0 = HNElement::from_slice(&[1.0, 0.0]);
        assert_eq!(h_norm(&e0, &gf).unwrap(), 1.0);
        let diff = HNElement::from_slice(&[1.0, -1.0]);
        let expected = (2.0 - 2.0 * (-1.0f64).exp()).sqrt();
        assert!((h_norm(&diff, &gf).unwrap() - expected).abs() < 1e-14);
        assert!(h_norm(&HNElement::zeros(3), &gf).is_err());
    }

    #[test]
    fn doubling_bound_composition() {
        let kernel = KernelSpec::gaussian(2, 1.0).unwrap();
        let cs = CenterSet::new(vec![vec![0.0, 0.0]], unit_box()).unwrap();
        let gf = grammian(&kernel, &cs).unwrap();
        assert_eq!(doubling_bound(&kernel, &cs, &gf, 51, 0.0).unwrap(), 0.0);
        let b1 = doubling_bound(&kernel, &cs, &gf, 51, 1.0).unwrap();
        let b2 = doubling_bound(&kernel, &cs, &gf, 51, 2.0).unwrap();
        assert!((b2 - 2.0 * b1).abs() < 1e-12);
        let sup = sup_power(&kernel, &cs, &gf, 51).unwrap();
        assert!((b1 - 2.0 * sup.value).abs() < 1e-12); // sqrt(vol) = 2
    }

    #[test]
    fn integral_operator_constant_kernel_sanity() {
        // With u = 1 the image at x is the integral of the kernel section;
        // check against a 1D separable hand computation on a coarse grid.
        let kernel = KernelSpec::gaussian(2, 1.0).unwrap();
        let domain = unit_box();
        let v = integral_operator(&kernel, &domain, 201, |_| 1.0, &[0.0, 0.0]).unwrap();
        // int_{-1}^{1} e^{-t^2} dt = sqrt(pi) erf(1); squared for the product
        let erf1 = 0.842_700_792_949_714_9_f64;
        let expected = (std::f64::consts::PI.sqrt() * erf1).powi(2);
        assert!((v - expected).abs() < 5e-4, "{v} vs {expected}");
        let norm = l2_norm_on_grid(&domain, 81, |_| 1.0).unwrap();
        assert!((norm - 2.0).abs() < 1e-12);
    }

    #[test]
    fn embedding_into_fine_grid() {
        let coarse = CenterSet::uniform_grid(&unit_box(), 3).unwrap();
        let fine = CenterSet::uniform_grid(&unit_box(), 5).unwrap();
        let map = coarse.embedding_into(&fine).unwrap();
        assert_eq!(map.len(), coarse.len());
        for (i, &j) in map.iter().enumerate() {
            assert_eq!(coarse.center(i), fine.center(j));
        }
        let shifted = CenterSet::new(vec![vec![0.1, 0.1]], unit_box()).unwrap();
        assert!(shifted.embedding_into(&fine).is_none());
    }
}
