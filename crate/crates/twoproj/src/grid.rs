//! Grid-sampled model of the module of continuous 2x2 matrix functions on
//! [0,1] with sup-norm semantics, plus the obstruction certificates that the
//! model pairs realize.
//!
//! The continuum object is the space of continuous functions from [0,1] into
//! 2x2 complex matrices, normed by the maximum pointwise operator norm. The
//! grid model samples on a uniform grid including both endpoints and the
//! midpoint. Continuity phenomena that the sampling cannot capture (ranges
//! that are zero in the continuum but nonzero pointwise at a boundary
//! sample) are reported side by side rather than hidden; exhibiting that gap
//! is the point of the model.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gen::{derive_seed, rng_for, standard_complex};
use crate::linalg::{
    identity, operator_norm, range_basis, re, subspace_intersect, svd_parts, CMat, Tolerance,
};
use crate::pair::ProjectionPair;
use crate::par;

/// Residual level treated as exact for grid certificates. Well above
/// arithmetic noise on 2x2 work, well below any discretization effect.
pub const GRID_CERT_TOL: f64 = 1e-10;

/// Default number of random witnesses in the randomized sweeps.
pub const DEFAULT_TRIALS: usize = 1000;

/// Default seed for the randomized sweeps.
pub const DEFAULT_SCENARIO_SEED: u64 = 42;

/// A uniform sampling grid on [0,1], endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSpec {
    n_samples: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n_samples: 1001 }
    }
}

impl GridSpec {
    /// At least 3 samples, odd so that the midpoint t = 1/2 is on the grid;
    /// every certified special point then lands on a sample.
    pub fn new(n_samples: usize) -> Result<Self> {
        if n_samples < 3 {
            return Err(Error::Validation(format!(
                "grid needs at least 3 samples, got {n_samples}"
            )));
        }
        if n_samples.is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "grid sample count must be odd so the midpoint is a sample, got {n_samples}"
            )));
        }
        Ok(Self { n_samples })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Grid spacing.
    pub fn delta(&self) -> f64 {
        1.0 / (self.n_samples - 1) as f64
    }

    /// Index of the midpoint sample t = 1/2.
    pub fn midpoint(&self) -> usize {
        (self.n_samples - 1) / 2
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 / (self.n_samples - 1) as f64
    }

    /// `(cos(pi t / 2), sin(pi t / 2))` at sample j, pinned to exact values
    /// at the endpoints so boundary certificates hold exactly in floating
    /// point.
    pub fn cs(&self, j: usize) -> (f64, f64) {
        if j == 0 {
            (1.0, 0.0)
        } else if j == self.n_samples - 1 {
            (0.0, 1.0)
        } else {
            let arg = std::f64::consts::FRAC_PI_2 * self.t(j);
            (arg.cos(), arg.sin())
        }
    }
}

/// Operator norm of a 2x2 matrix: the square root of the top eigenvalue of
/// the Gram matrix, by the closed form
/// `lambda_max = (a+c)/2 + sqrt(((a-c)/2)^2 + |b|^2)`.
///
/// The discriminant is a sum of squares, so the formula keeps full relative
/// accuracy even when the two singular values coincide; the textbook route
/// through `‖m‖_F^4 - 4·|det|^2` cancels catastrophically there.
pub fn operator_norm_2x2(m: &CMat) -> f64 {
    debug_assert!(m.nrows() == 2 && m.ncols() == 2);
    let a = m[(0, 0)].norm_sqr() + m[(1, 0)].norm_sqr();
    let c = m[(0, 1)].norm_sqr() + m[(1, 1)].norm_sqr();
    let b = m[(0, 0)].conj() * m[(0, 1)] + m[(1, 0)].conj() * m[(1, 1)];
    let half_gap = 0.5 * (a - c);
    let lambda_max = 0.5 * (a + c) + (half_gap * half_gap + b.norm_sqr()).sqrt();
    let value = lambda_max.max(0.0).sqrt();
    debug_assert!(
        (value - operator_norm(m)).abs() <= 1e-12 * value.max(1.0),
        "closed-form 2x2 norm diverged from the general solver"
    );
    value
}

/// A 2x2 matrix-valued grid function.
#[derive(Debug, Clone)]
pub struct GridMatrixFunction {
    grid: GridSpec,
    values: Vec<CMat>,
}

impl GridMatrixFunction {
    pub fn new(grid: GridSpec, values: Vec<CMat>) -> Result<Self> {
        if values.len() != grid.n_samples() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} samples, got {}",
                grid.n_samples(),
                values.len()
            )));
        }
        for (j, v) in values.iter().enumerate() {
            if v.nrows() != 2 || v.ncols() != 2 {
                return Err(Error::ShapeMismatch(format!(
                    "sample {j} is {}x{}, expected 2x2",
                    v.nrows(),
                    v.ncols()
                )));
            }
            crate::linalg::check_finite(v)?;
        }
        Ok(Self { grid, values })
    }

    /// Builds values sample by sample; the closure must return 2x2 matrices.
    pub fn from_fn(grid: GridSpec, f: impl Fn(usize) -> CMat + Sync + Send) -> Self {
        let values = par::map_range(grid.n_samples(), f);
        debug_assert!(values.iter().all(|v| v.nrows() == 2 && v.ncols() == 2));
        Self { grid, values }
    }

    pub fn constant(grid: GridSpec, value: CMat) -> Self {
        debug_assert!(value.nrows() == 2 && value.ncols() == 2);
        let values = vec![value; grid.n_samples()];
        Self { grid, values }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn value(&self, j: usize) -> &CMat {
        &self.values[j]
    }

    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> CMat + Sync + Send) -> Self {
        assert_eq!(self.grid, other.grid, "grid functions live on different grids");
        Self::from_fn(self.grid, |j| f(&self.values[j], &other.values[j]))
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.grid, |j| self.values[j].adjoint())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_fn(self.grid, |j| &self.values[j] * re(factor))
    }
}

/// Sup norm: the maximum pointwise operator norm, reduced in fixed sample
/// order so parallel and sequential runs agree bitwise.
pub fn sup_norm(f: &GridMatrixFunction) -> f64 {
    let norms = par::map_range(f.grid().n_samples(), |j| operator_norm_2x2(f.value(j)));
    par::fold_max(&norms)
}

/// A pair of pointwise projections on the grid.
#[derive(Debug, Clone)]
pub struct GridPair {
    p: GridMatrixFunction,
    q: GridMatrixFunction,
    boundary_diagonal: bool,
    tol: Tolerance,
}

impl GridPair {
    /// Validates pointwise projections and, when `boundary_diagonal` is set,
    /// diagonality of both functions at the endpoint samples.
    pub fn new(
        p: GridMatrixFunction,
        q: GridMatrixFunction,
        boundary_diagonal: bool,
        tol: Tolerance,
    ) -> Result<Self> {
        if p.grid() != q.grid() {
            return Err(Error::ShapeMismatch(
                "pair components live on different grids".into(),
            ));
        }
        let n = p.grid().n_samples();
        let checks = par::map_range(n, |j| -> Result<()> {
            for (which, f) in [("p", &p), ("q", &q)] {
                let check = crate::linalg::is_projection(f.value(j), &tol)?;
                if !check.passed {
                    return Err(Error::NotProjection {
                        which,
                        hermitian: check.hermitian_residual,
                        idempotent: check.idempotent_residual,
                    });
                }
            }
            Ok(())
        });
        for check in checks {
            check?;
        }
        if boundary_diagonal {
            for j in [0, n - 1] {
                for f in [&p, &q] {
                    let v = f.value(j);
                    let off = v[(0, 1)].norm().max(v[(1, 0)].norm());
                    if off > tol.residual {
                        return Err(Error::Validation(format!(
                            "boundary sample {j} is not diagonal: off-diagonal {off:.3e}"
                        )));
                    }
                }
            }
        }
        Ok(Self { p, q, boundary_diagonal, tol })
    }

    pub fn p(&self) -> &GridMatrixFunction {
        &self.p
    }

    pub fn q(&self) -> &GridMatrixFunction {
        &self.q
    }

    pub fn grid(&self) -> GridSpec {
        self.p.grid()
    }

    pub fn boundary_diagonal(&self) -> bool {
        self.boundary_diagonal
    }

    pub fn tol(&self) -> Tolerance {
        self.tol
    }
}

/// The two bundled model pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ModelVariant {
    /// `P` constant `diag(1,0)`, `Q(t)` the rotating rank-one projection.
    ConstantP,
    /// `P(t)` the reflected rotation, `Q(t)` as above; boundary-diagonal.
    RotatedP,
}

fn q_value(c: f64, s: f64) -> CMat {
    CMat::from_row_slice(2, 2, &[re(c * c), re(s * c), re(s * c), re(s * s)])
}

fn rotated_p_value(c: f64, s: f64) -> CMat {
    CMat::from_row_slice(2, 2, &[re(c * c), re(-s * c), re(-s * c), re(s * s)])
}

/// Builds one of the bundled model pairs on the given grid.
pub fn make_model_pair(grid: GridSpec, variant: ModelVariant) -> Result<GridPair> {
    let q = GridMatrixFunction::from_fn(grid, |j| {
        let (c, s) = grid.cs(j);
        q_value(c, s)
    });
    match variant {
        ModelVariant::ConstantP => {
            let p = GridMatrixFunction::constant(
                grid,
                CMat::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(0.0)]),
            );
            GridPair::new(p, q, false, Tolerance::default())
        }
        ModelVariant::RotatedP => {
            let p = GridMatrixFunction::from_fn(grid, |j| {
                let (c, s) = grid.cs(j);
                rotated_p_value(c, s)
            });
            GridPair::new(p, q, true, Tolerance::default())
        }
    }
}

/// At each sample, the projection onto the intersection of the pointwise
/// ranges.
pub fn pointwise_infimum(gp: &GridPair) -> GridMatrixFunction {
    let tol = gp.tol();
    GridMatrixFunction::from_fn(gp.grid(), |j| {
        let rp = range_basis(gp.p().value(j), &tol);
        let rq = range_basis(gp.q().value(j), &tol);
        match subspace_intersect(&rp, &rq, &tol) {
            Ok(meet) => meet.projector(),
            Err(_) => CMat::zeros(2, 2),
        }
    })
}

/// A random smooth test function: each entry a trigonometric polynomial of
/// degree at most 4 with coefficients damped quadratically in the degree, so
/// refinement behavior matches the bundled smooth data.
pub fn random_smooth_function(grid: GridSpec, rng: &mut ChaCha8Rng) -> GridMatrixFunction {
    let degrees = 0..=4_usize;
    let coeffs: Vec<[(num_complex::Complex64, num_complex::Complex64); 4]> = degrees
        .map(|d| {
            let damp = 1.0 / (1.0 + (d * d) as f64);
            core::array::from_fn(|_| {
                (standard_complex(rng) * damp, standard_complex(rng) * damp)
            })
        })
        .collect();
    GridMatrixFunction::from_fn(grid, |j| {
        let t = grid.t(j);
        let mut entries = [re(0.0); 4];
        for (d, entry_coeffs) in coeffs.iter().enumerate() {
            let angle = std::f64::consts::PI * d as f64 * t;
            let (sin, cos) = angle.sin_cos();
            for (slot, &(alpha, beta)) in entries.iter_mut().zip(entry_coeffs.iter()) {
                *slot += alpha * cos + beta * sin;
            }
        }
        CMat::from_row_slice(2, 2, &entries)
    })
}

// ── scenario certificates ────────────────────────────────────────────────────

/// Certificate that the constant-P model pair is not harmonious: the range
/// of `T = (P + I - Q) a` stays a fixed distance from `a`.
#[derive(Debug, Clone, Serialize)]
pub struct SemiharmoniousReport {
    pub n_samples: usize,
    pub trials: usize,
    pub seed: u64,
    /// Largest second-row entry of `(T x)(1)` over all witnesses; the model
    /// forces it to exactly zero.
    pub structural_row_residual: f64,
    /// `sup-norm(T 0 - a) = sup-norm(a)`.
    pub zero_witness_sup: f64,
    /// Minimum of `sup-norm(T x - a)` over the random witnesses.
    pub min_sup_distance: f64,
    /// Pointwise distance from `a` to the range of the submodule generator.
    pub membership_distance: f64,
    pub pass: bool,
}

/// Runs [`obstruction_semiharmonious_with`] with the default witness count
/// and seed.
pub fn obstruction_semiharmonious(grid: GridSpec) -> Result<SemiharmoniousReport> {
    obstruction_semiharmonious_with(grid, DEFAULT_TRIALS, DEFAULT_SCENARIO_SEED)
}

/// Certifies that `a` lies in the invariant submodule but at distance at
/// least one from everything `T` reaches, structurally at the right
/// endpoint and corroborated by a randomized sweep.
pub fn obstruction_semiharmonious_with(
    grid: GridSpec,
    trials: usize,
    seed: u64,
) -> Result<SemiharmoniousReport> {
    let pair = make_model_pair(grid, ModelVariant::ConstantP)?;
    // a(t) = s_t I, one factor of the pointwise polar form of P - Q
    let a = GridMatrixFunction::from_fn(grid, |j| {
        let (_, s) = grid.cs(j);
        identity(2) * re(s)
    });
    let t_op = GridMatrixFunction::from_fn(grid, |j| {
        let m = pair.p().value(j) + identity(2) - pair.q().value(j);
        m * a.value(j)
    });

    let last = grid.n_samples() - 1;
    let per_trial = par::map_range(trials, |i| {
        let mut rng = rng_for(derive_seed(seed, i as u64));
        let x = random_smooth_function(grid, &mut rng);
        let image = t_op.mul(&x);
        let end = image.value(last);
        let row_residual = end[(1, 0)].norm().max(end[(1, 1)].norm());
        let distance = sup_norm(&image.sub(&a));
        (row_residual, distance)
    });
    let structural_row_residual = par::fold_max(
        &per_trial.iter().map(|(r, _)| *r).collect::<Vec<_>>(),
    );
    let min_sup_distance = per_trial
        .iter()
        .map(|(_, d)| *d)
        .fold(f64::INFINITY, f64::min);
    let zero_witness_sup = sup_norm(&a);

    // membership: a is in the closure of the range of the generator
    // G = (P + Q)(2I - P - Q), checked by pointwise range distance
    let tol = pair.tol();
    let membership = par::map_range(grid.n_samples(), |j| {
        let p = pair.p().value(j);
        let q = pair.q().value(j);
        let g = (p + q) * (identity(2) * re(2.0) - p - q);
        let range = range_basis(&g, &tol);
        let residual = a.value(j) - range.projector() * a.value(j);
        operator_norm_2x2(&residual)
    });
    let membership_distance = par::fold_max(&membership);

    let pass = structural_row_residual == 0.0
        && (zero_witness_sup - 1.0).abs() <= GRID_CERT_TOL
        && min_sup_distance >= 1.0 - 1e-12
        && membership_distance <= GRID_CERT_TOL;
    Ok(SemiharmoniousReport {
        n_samples: grid.n_samples(),
        trials,
        seed,
        structural_row_residual,
        zero_witness_sup,
        min_sup_distance,
        membership_distance,
        pass,
    })
}

/// Certificate that the complement-side range fails to be orthogonally
/// complemented: `P` stays a fixed distance from the range of
/// `F = (2I - P - Q)(P + Q)`.
#[derive(Debug, Clone, Serialize)]
pub struct ComplementRangeReport {
    pub n_samples: usize,
    pub trials: usize,
    pub seed: u64,
    /// `sup-norm` of `F` at the left endpoint; structurally zero.
    pub f_at_zero_norm: f64,
    /// Deviation of `F` at the midpoint from `diag(1/2, 1/2)`.
    pub f_at_half_residual: f64,
    /// `sup-norm(P - F 0) = sup-norm(P)`.
    pub zero_witness_sup: f64,
    /// Minimum of `sup-norm(P - F x)` over the random witnesses.
    pub min_sup_distance: f64,
    /// Largest pointwise infimum norm of `(P, Q)` over interior samples.
    pub max_interior_infimum: f64,
    /// Same for the complement pair `(I-P, I-Q)`.
    pub max_interior_complement_infimum: f64,
    pub pass: bool,
}

/// Runs [`obstruction_range_2ipq_with`] with the default witness count and
/// seed.
pub fn obstruction_range_2ipq(grid: GridSpec) -> Result<ComplementRangeReport> {
    obstruction_range_2ipq_with(grid, DEFAULT_TRIALS, DEFAULT_SCENARIO_SEED)
}

/// Certifies `F(0) = 0` exactly, the midpoint value `diag(1/2, 1/2)`, the
/// distance-one bound over random witnesses, and the vanishing interior
/// infima of the pair and its complements.
pub fn obstruction_range_2ipq_with(
    grid: GridSpec,
    trials: usize,
    seed: u64,
) -> Result<ComplementRangeReport> {
    let pair = make_model_pair(grid, ModelVariant::ConstantP)?;
    let f_op = GridMatrixFunction::from_fn(grid, |j| {
        let p = pair.p().value(j);
        let q = pair.q().value(j);
        (identity(2) * re(2.0) - p - q) * (p + q)
    });
    let f_at_zero_norm = operator_norm_2x2(f_op.value(0));
    let half = identity(2) * re(0.5);
    let f_at_half_residual = operator_norm_2x2(&(f_op.value(grid.midpoint()) - half));

    let p_fn = pair.p().clone();
    let zero_witness_sup = sup_norm(&p_fn);
    let distances = par::map_range(trials, |i| {
        let mut rng = rng_for(derive_seed(seed, i as u64));
        let x = random_smooth_function(grid, &mut rng);
        sup_norm(&p_fn.sub(&f_op.mul(&x)))
    });
    let min_sup_distance = distances.iter().copied().fold(f64::INFINITY, f64::min);

    let infimum = pointwise_infimum(&pair);
    let complement_pair = GridPair::new(
        GridMatrixFunction::from_fn(grid, |j| identity(2) - pair.p().value(j)),
        GridMatrixFunction::from_fn(grid, |j| identity(2) - pair.q().value(j)),
        false,
        pair.tol(),
    )?;
    let complement_infimum = pointwise_infimum(&complement_pair);
    let interior_max = |f: &GridMatrixFunction| {
        let norms: Vec<f64> = (1..grid.n_samples() - 1)
            .map(|j| operator_norm_2x2(f.value(j)))
            .collect();
        par::fold_max(&norms)
    };
    let max_interior_infimum = interior_max(&infimum);
    let max_interior_complement_infimum = interior_max(&complement_infimum);

    let pass = f_at_zero_norm == 0.0
        && f_at_half_residual <= GRID_CERT_TOL
        && (zero_witness_sup - 1.0).abs() <= GRID_CERT_TOL
        && min_sup_distance >= 1.0 - 1e-12
        && max_interior_infimum <= GRID_CERT_TOL
        && max_interior_complement_infimum <= GRID_CERT_TOL;
    Ok(ComplementRangeReport {
        n_samples: grid.n_samples(),
        trials,
        seed,
        f_at_zero_norm,
        f_at_half_residual,
        zero_witness_sup,
        min_sup_distance,
        max_interior_infimum,
        max_interior_complement_infimum,
        pass,
    })
}

/// Solution-space summary of the per-sample intertwining equations at one
/// sample.
#[derive(Debug, Clone, Serialize)]
pub struct SampleSolutionSpace {
    pub index: usize,
    pub t: f64,
    /// Real dimension of the solution space of the two commutation
    /// equations at this sample.
    pub real_dim: usize,
    /// Largest diagonal entry magnitude over the nullspace basis; forced to
    /// zero away from the midpoint.
    pub diag_residual: f64,
    /// Largest deviation from off-diagonal symmetry over the basis, for
    /// interior samples where the first equation is active.
    pub offdiag_symmetry_residual: f64,
}

/// Certificate that no single unitary intertwines the rotated pair the way
/// the finite-dimensional theory would require.
#[derive(Debug, Clone, Serialize)]
pub struct CommonUnitaryReport {
    pub n_samples: usize,
    /// Expected real dimensions: 2 at interior samples away from the
    /// midpoint, 4 at the midpoint, 4 at the endpoints before the boundary
    /// diagonality constraint.
    pub expected_interior_dim: usize,
    pub expected_midpoint_dim: usize,
    pub expected_endpoint_dim: usize,
    pub dims_match: bool,
    /// Largest diagonal-entry magnitude over nullspace bases away from the
    /// midpoint.
    pub max_diag_residual: f64,
    /// Largest off-diagonal symmetry defect at interior samples.
    pub max_offdiag_residual: f64,
    /// Solution dimension at each endpoint after imposing diagonality;
    /// certifies U = 0 there.
    pub endpoint_dim_after_diagonality: [usize; 2],
    /// Largest interior pointwise infimum norm of the pair and of its
    /// complement pair; both vanish, matching the continuum claims.
    pub max_interior_infimum: f64,
    pub max_interior_complement_infimum: f64,
    /// Pointwise infimum norm at the endpoints, where the sampled ranges
    /// coincide: the continuity gap the grid model exhibits on purpose.
    pub endpoint_infimum_norm: f64,
    /// The certified conclusion: every candidate is zero somewhere it must
    /// be unitary.
    pub no_unitary: bool,
    pub pass: bool,
}

/// Relative singular value cutoff for nullspace ranks of the per-sample
/// constraint systems.
const NULLSPACE_CUT: f64 = 1e-10;

fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Nullspace basis (columns) of a matrix, via singular values below
/// `NULLSPACE_CUT` relative to the largest.
fn nullspace_basis(m: &CMat) -> CMat {
    let parts = svd_parts(m);
    let sigma_max = parts.sigma.first().copied().unwrap_or(0.0).max(1.0);
    let keep: Vec<usize> = parts
        .sigma
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= NULLSPACE_CUT * sigma_max)
        .map(|(i, _)| i)
        .collect();
    parts.v.select_columns(keep.iter())
}

/// Per-sample constraint matrix: stacks the commutation equation with the
/// difference and the exchange equation with the sum, acting on the
/// column-major vectorization of the unknown.
fn sample_constraint_matrix(p: &CMat, q: &CMat) -> CMat {
    let eye = identity(2);
    let diff = q - p;
    let sum = p + q;
    let swapped = &eye * re(2.0) - &sum;
    // U M - M U = 0 and U S - S' U = 0 on vec(U)
    let eq1 = kron(&diff.transpose(), &eye) - kron(&eye, &diff);
    let eq2 = kron(&sum.transpose(), &eye) - kron(&eye, &swapped);
    let mut k = CMat::zeros(8, 4);
    k.view_mut((0, 0), (4, 4)).copy_from(&eq1);
    k.view_mut((4, 0), (4, 4)).copy_from(&eq2);
    k
}

/// Solves the per-sample linear systems for the rotated pair, reports the
/// solution-space dimensions and entry structure, and certifies that the
/// boundary diagonality leaves only the zero solution.
pub fn no_common_unitary_certificate(grid: GridSpec) -> Result<CommonUnitaryReport> {
    let pair = make_model_pair(grid, ModelVariant::RotatedP)?;
    let n = grid.n_samples();
    let last = n - 1;
    let mid = grid.midpoint();

    let samples = par::map_range(n, |j| {
        let k = sample_constraint_matrix(pair.p().value(j), pair.q().value(j));
        let basis = nullspace_basis(&k);
        let complex_nullity = basis.ncols();
        // vec order: [U11, U21, U12, U22]
        let mut diag_residual = 0.0_f64;
        let mut offdiag_residual = 0.0_f64;
        for col in 0..complex_nullity {
            let v = basis.column(col);
            diag_residual = diag_residual.max(v[0].norm()).max(v[3].norm());
            offdiag_residual = offdiag_residual.max((v[2] - v[1]).norm());
        }
        SampleSolutionSpace {
            index: j,
            t: grid.t(j),
            real_dim: 2 * complex_nullity,
            diag_residual,
            offdiag_symmetry_residual: offdiag_residual,
        }
    });

    let expected_interior_dim = 2;
    let expected_midpoint_dim = 4;
    let expected_endpoint_dim = 4;
    let mut dims_match = true;
    let mut max_diag_residual = 0.0_f64;
    let mut max_offdiag_residual = 0.0_f64;
    for s in &samples {
        let expected = if s.index == mid {
            expected_midpoint_dim
        } else if s.index == 0 || s.index == last {
            expected_endpoint_dim
        } else {
            expected_interior_dim
        };
        if s.real_dim != expected {
            dims_match = false;
        }
        if s.index != mid {
            max_diag_residual = max_diag_residual.max(s.diag_residual);
        }
        if s.index != mid && s.index != 0 && s.index != last {
            max_offdiag_residual = max_offdiag_residual.max(s.offdiag_symmetry_residual);
        }
    }

    // endpoints: add the diagonality rows U12 = U21 = 0 and re-solve
    let mut endpoint_dim_after_diagonality = [usize::MAX; 2];
    for (slot, j) in [0_usize, last].into_iter().enumerate() {
        let k = sample_constraint_matrix(pair.p().value(j), pair.q().value(j));
        let mut augmented = CMat::zeros(10, 4);
        augmented.view_mut((0, 0), (8, 4)).copy_from(&k);
        augmented[(8, 1)] = re(1.0);
        augmented[(9, 2)] = re(1.0);
        endpoint_dim_after_diagonality[slot] = 2 * nullspace_basis(&augmented).ncols();
    }

    let infimum = pointwise_infimum(&pair);
    let complement_pair = GridPair::new(
        GridMatrixFunction::from_fn(grid, |j| identity(2) - pair.p().value(j)),
        GridMatrixFunction::from_fn(grid, |j| identity(2) - pair.q().value(j)),
        false,
        pair.tol(),
    )?;
    let complement_infimum = pointwise_infimum(&complement_pair);
    let interior: Vec<f64> = (1..last)
        .map(|j| operator_norm_2x2(infimum.value(j)))
        .collect();
    let interior_complement: Vec<f64> = (1..last)
        .map(|j| operator_norm_2x2(complement_infimum.value(j)))
        .collect();
    let max_interior_infimum = par::fold_max(&interior);
    let max_interior_complement_infimum = par::fold_max(&interior_complement);
    let endpoint_infimum_norm = operator_norm_2x2(infimum.value(0))
        .max(operator_norm_2x2(infimum.value(last)));

    let no_unitary = dims_match
        && endpoint_dim_after_diagonality == [0, 0]
        && max_diag_residual <= NULLSPACE_CUT;
    let pass = no_unitary
        && max_offdiag_residual <= NULLSPACE_CUT
        && max_interior_infimum <= GRID_CERT_TOL
        && max_interior_complement_infimum <= GRID_CERT_TOL;
    Ok(CommonUnitaryReport {
        n_samples: n,
        expected_interior_dim,
        expected_midpoint_dim,
        expected_endpoint_dim,
        dims_match,
        max_diag_residual,
        max_offdiag_residual,
        endpoint_dim_after_diagonality,
        max_interior_infimum,
        max_interior_complement_infimum,
        endpoint_infimum_norm,
        no_unitary,
        pass,
    })
}

/// Certificate that the iterates `(PQP)^n` do not converge to the infimum in
/// norm: a fixed point at the left endpoint keeps the sup norm at one.
#[derive(Debug, Clone, Serialize)]
pub struct NonconvergenceReport {
    pub n_samples: usize,
    pub n_max: usize,
    /// Max over n of the deviation of `(PQP)^n` at t = 0 from `diag(1,0)`.
    pub max_fixed_point_residual: f64,
    /// Min over n of `sup-norm((PQP)^n P)`; stays at one.
    pub min_sup_norm: f64,
    /// Max over n of the deviation of the midpoint norm from `(1/2)^n`.
    pub max_interior_decay_residual: f64,
    pub pass: bool,
}

/// Iterates the pointwise products and certifies the endpoint fixed point,
/// the constant sup norm, and the geometric interior decay.
pub fn nonconvergence_check(grid: GridSpec, n_max: usize) -> Result<NonconvergenceReport> {
    if n_max == 0 {
        return Err(Error::Validation("need at least one iterate".into()));
    }
    let pair = make_model_pair(grid, ModelVariant::ConstantP)?;
    let pqp = pair.p().mul(pair.q()).mul(pair.p());
    let fixed = CMat::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(0.0)]);
    let mid = grid.midpoint();

    let mut power = pqp.clone();
    let mut max_fixed_point_residual = 0.0_f64;
    let mut min_sup_norm = f64::INFINITY;
    let mut max_interior_decay_residual = 0.0_f64;
    for n in 1..=n_max {
        max_fixed_point_residual =
            max_fixed_point_residual.max(operator_norm_2x2(&(power.value(0) - &fixed)));
        min_sup_norm = min_sup_norm.min(sup_norm(&power.mul(pair.p())));
        let expected = 0.5_f64.powi(n as i32);
        max_interior_decay_residual = max_interior_decay_residual
            .max((operator_norm_2x2(power.value(mid)) - expected).abs());
        if n < n_max {
            power = power.mul(&pqp);
        }
    }
    let pass = max_fixed_point_residual <= GRID_CERT_TOL
        && min_sup_norm >= 1.0 - 1e-12
        && max_interior_decay_residual <= GRID_CERT_TOL;
    Ok(NonconvergenceReport {
        n_samples: grid.n_samples(),
        n_max,
        max_fixed_point_residual,
        min_sup_norm,
        max_interior_decay_residual,
        pass,
    })
}

/// Certificate for the invariant-submodule identities of the constant-P
/// model pair.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantSubmoduleReport {
    pub n_samples: usize,
    /// Max pointwise residual of the two commutation identities chaining
    /// `P(2I-A)A`, `P(I-Q)P`, and `A(2I-A)P` with `A = P + Q`.
    pub commutation_residual: f64,
    /// Max pointwise residual of `P + Q - PQ - QP = (P-Q)(P-Q)*`.
    pub factorization_residual: f64,
    /// Max pointwise gap between the range projections of `P - Q` and of
    /// `(P+Q)(2I-P-Q)`; certifies the two descriptions of the submodule.
    pub range_match_residual: f64,
    /// Residual of the midpoint equality of the factorization with
    /// `diag(1/2, 1/2)`.
    pub midpoint_value_residual: f64,
    pub pass: bool,
}

/// Checks the submodule identities pointwise.
pub fn invariant_submodule_check(grid: GridSpec) -> Result<InvariantSubmoduleReport> {
    let pair = make_model_pair(grid, ModelVariant::ConstantP)?;
    let tol = pair.tol();
    let per_sample = par::map_range(grid.n_samples(), |j| {
        let p = pair.p().value(j);
        let q = pair.q().value(j);
        let eye = identity(2);
        let a = p + q;
        let two_minus = &eye * re(2.0) - &a;
        let left = p * &two_minus * &a;
        let middle = p * (&eye - q) * p;
        let right = &a * &two_minus * p;
        let commutation = operator_norm_2x2(&(&left - &middle))
            .max(operator_norm_2x2(&(&middle - &right)));
        let diff = p - q;
        let factor = &diff * diff.adjoint();
        let sum_form = &a - p * q - q * p;
        let factorization = operator_norm_2x2(&(&factor - &sum_form));
        let generator = &a * &two_minus;
        let range_diff = range_basis(&diff, &tol).projector()
            - range_basis(&generator, &tol).projector();
        let range_match = operator_norm_2x2(&range_diff);
        (commutation, factorization, range_match)
    });
    let commutation_residual =
        par::fold_max(&per_sample.iter().map(|(c, _, _)| *c).collect::<Vec<_>>());
    let factorization_residual =
        par::fold_max(&per_sample.iter().map(|(_, f, _)| *f).collect::<Vec<_>>());
    let range_match_residual =
        par::fold_max(&per_sample.iter().map(|(_, _, r)| *r).collect::<Vec<_>>());

    let mid = grid.midpoint();
    let p = pair.p().value(mid);
    let q = pair.q().value(mid);
    let diff = p - q;
    let midpoint_value_residual =
        operator_norm_2x2(&(&diff * diff.adjoint() - identity(2) * re(0.5)));

    let pass = commutation_residual <= 1e-12
        && factorization_residual <= 1e-12
        && range_match_residual <= GRID_CERT_TOL
        && midpoint_value_residual <= GRID_CERT_TOL;
    Ok(InvariantSubmoduleReport {
        n_samples: grid.n_samples(),
        commutation_residual,
        factorization_residual,
        range_match_residual,
        midpoint_value_residual,
        pass,
    })
}

/// Convergence report for the complement-transfer iteration on a
/// finite-dimensional pair.
#[derive(Debug, Clone, Serialize)]
pub struct MatchedTransferReport {
    pub angle: f64,
    /// `angle^2`, the exact per-step contraction factor.
    pub predicted_rate: f64,
    pub iterations: usize,
    pub final_residual: f64,
    /// Geometric mean of the early step ratios; absent when the iteration
    /// converges immediately.
    pub measured_rate: Option<f64>,
    pub rate_relative_error: Option<f64>,
    pub converged: bool,
    pub pass: bool,
}

/// Target residual for the transfer iteration.
const TRANSFER_TARGET: f64 = 1e-12;

/// Iterates `W = (I-P)(I-Q)(I-P)` toward the complement infimum and compares
/// the measured contraction rate with the squared Friedrichs angle. Errors
/// when the angle leaves less than `eps` of room below one.
pub fn matched_triple_transfer(pair: &ProjectionPair, eps: f64) -> Result<MatchedTransferReport> {
    let angle = pair.friedrichs_angle();
    if angle >= 1.0 - eps {
        return Err(Error::AngleTooLarge { angle, margin: eps });
    }
    let n = pair.dim();
    let eye = identity(n);
    let w = (&eye - pair.p()) * (&eye - pair.q()) * (&eye - pair.p());
    let p_n = pair.complement_infimum();
    let predicted_rate = angle * angle;
    let max_iterations = if predicted_rate > 0.0 {
        (TRANSFER_TARGET.ln() / predicted_rate.ln()).ceil() as usize + 10
    } else {
        4
    };

    let mut power = w.clone();
    let mut residuals = Vec::with_capacity(max_iterations);
    let mut converged = false;
    for _ in 1..=max_iterations {
        let residual = operator_norm(&(&power - p_n));
        residuals.push(residual);
        if residual <= TRANSFER_TARGET {
            converged = true;
            break;
        }
        power = &power * &w;
    }
    let iterations = residuals.len();
    let final_residual = *residuals.last().expect("at least one iterate");

    // rate from early iterates, before residuals reach the noise floor
    let usable: Vec<f64> = residuals
        .iter()
        .copied()
        .take_while(|r| *r > 1e-9)
        .take(12)
        .collect();
    let measured_rate = if usable.len() >= 2 {
        let steps = (usable.len() - 1) as f64;
        Some((usable[usable.len() - 1] / usable[0]).powf(1.0 / steps))
    } else {
        None
    };
    let rate_relative_error = measured_rate.map(|m| {
        if predicted_rate > 0.0 {
            (m - predicted_rate).abs() / predicted_rate
        } else {
            m
        }
    });
    let pass = converged && rate_relative_error.is_none_or(|e| e <= 0.05);
    Ok(MatchedTransferReport {
        angle,
        predicted_rate,
        iterations,
        final_residual,
        measured_rate,
        rate_relative_error,
        converged,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{plane_pair, random_pair};

    fn small_grid() -> GridSpec {
        GridSpec::new(101).unwrap()
    }

    #[test]
    fn grid_spec_validates_and_places_special_points() {
        assert!(GridSpec::new(2).is_err());
        assert!(GridSpec::new(10).is_err());
        let grid = GridSpec::new(11).unwrap();
        assert_eq!(grid.t(0), 0.0);
        assert_eq!(grid.t(10), 1.0);
        assert_eq!(grid.t(grid.midpoint()), 0.5);
        assert_eq!(grid.cs(0), (1.0, 0.0));
        assert_eq!(grid.cs(10), (0.0, 1.0));
        let (c, s) = grid.cs(5);
        assert!((c - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!((s - 0.5_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn closed_form_norm_matches_general_solver() {
        let mut rng = rng_for(9);
        for _ in 0..40 {
            let m = crate::gen::ginibre(&mut rng, 2, 2);
            let closed = operator_norm_2x2(&m);
            let general = operator_norm(&m);
            assert!((closed - general).abs() < 1e-12 * general.max(1.0));
        }
        assert_eq!(operator_norm_2x2(&CMat::zeros(2, 2)), 0.0);
        assert!((operator_norm_2x2(&identity(2)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn model_pairs_are_pointwise_projections_with_known_samples() {
        let grid = small_grid();
        let constant = make_model_pair(grid, ModelVariant::ConstantP).unwrap();
        let q0 = constant.q().value(0);
        let q1 = constant.q().value(grid.n_samples() - 1);
        assert_eq!(q0[(0, 0)], re(1.0));
        assert_eq!(q0[(1, 1)], re(0.0));
        assert_eq!(q1[(0, 0)], re(0.0));
        assert_eq!(q1[(1, 1)], re(1.0));
        let rotated = make_model_pair(grid, ModelVariant::RotatedP).unwrap();
        assert!(rotated.boundary_diagonal());
        let p_half = rotated.p().value(grid.midpoint());
        assert!((p_half[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((p_half[(0, 1)].re + 0.5).abs() < 1e-12);
    }

    #[test]
    fn sup_norm_matches_known_functions() {
        let grid = small_grid();
        let zero = GridMatrixFunction::constant(grid, CMat::zeros(2, 2));
        assert_eq!(sup_norm(&zero), 0.0);
        let eye = GridMatrixFunction::constant(grid, identity(2));
        assert!((sup_norm(&eye) - 1.0).abs() < 1e-15);
        // pointwise norm of P - Q is s_t, sup attained at t = 1
        let pair = make_model_pair(grid, ModelVariant::ConstantP).unwrap();
        let diff = pair.p().sub(pair.q());
        assert!((sup_norm(&diff) - 1.0).abs() < 1e-14);
        let norms: Vec<f64> = (0..grid.n_samples())
            .map(|j| operator_norm_2x2(diff.value(j)))
            .collect();
        for (j, norm) in norms.iter().enumerate() {
            let (_, s) = grid.cs(j);
            assert!((norm - s).abs() < 1e-12, "sample {j}");
        }
    }

    #[test]
    fn pointwise_infimum_detects_coincidence_and_transversality() {
        let grid = small_grid();
        let pair = make_model_pair(grid, ModelVariant::ConstantP).unwrap();
        let inf = pointwise_infimum(&pair);
        let at_zero = inf.value(0);
        assert!((at_zero[(0, 0)].re - 1.0).abs() < 1e-12, "ranges coincide at t=0");
        assert!(operator_norm_2x2(inf.value(grid.midpoint())) < 1e-12);
        let same = GridPair::new(
            pair.q().clone(),
            pair.q().clone(),
            false,
            Tolerance::default(),
        )
        .unwrap();
        let inf_same = pointwise_infimum(&same);
        let diff = inf_same.sub(pair.q());
        assert!(sup_norm(&diff) < 1e-10, "p = q reproduces p");
    }

    #[test]
    fn semiharmonious_obstruction_certifies_on_a_coarse_grid() {
        let report = obstruction_semiharmonious_with(small_grid(), 50, 7).unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.structural_row_residual, 0.0);
        assert!(report.min_sup_distance >= 1.0 - 1e-12);
        assert!((report.zero_witness_sup - 1.0).abs() < 1e-14);
        assert!(report.membership_distance < 1e-10);
    }

    #[test]
    fn complement_range_obstruction_certifies_on_a_coarse_grid() {
        let report = obstruction_range_2ipq_with(small_grid(), 50, 7).unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.f_at_zero_norm, 0.0);
        assert!(report.f_at_half_residual < 1e-14);
        assert!(report.min_sup_distance >= 1.0 - 1e-12);
    }

    #[test]
    fn no_common_unitary_certificate_finds_the_contradiction() {
        let report = no_common_unitary_certificate(small_grid()).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.dims_match);
        assert_eq!(report.endpoint_dim_after_diagonality, [0, 0]);
        assert!(report.no_unitary);
        assert!((report.endpoint_infimum_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonconvergence_check_certifies_the_fixed_point() {
        let report = nonconvergence_check(small_grid(), 25).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.max_fixed_point_residual <= 1e-14);
        assert!(report.min_sup_norm >= 1.0 - 1e-12);
    }

    #[test]
    fn invariant_submodule_identities_hold_pointwise() {
        let report = invariant_submodule_check(small_grid()).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.commutation_residual <= 1e-13);
        assert!(report.factorization_residual <= 1e-13);
    }

    #[test]
    fn matched_transfer_converges_at_the_squared_angle_rate() {
        let pair = plane_pair(0.5_f64.sqrt()).unwrap();
        let report = matched_triple_transfer(&pair, 0.1).unwrap();
        assert!(report.pass, "{report:?}");
        assert!((report.predicted_rate - 0.5).abs() < 1e-12);
        let measured = report.measured_rate.unwrap();
        assert!((measured - 0.5).abs() < 0.01, "measured {measured}");

        let random = random_pair(23, 8);
        let report = matched_triple_transfer(&random, 1e-3).unwrap();
        assert!(report.converged, "{report:?}");
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn matched_transfer_rejects_angles_near_one() {
        let pair = plane_pair(0.9999).unwrap();
        assert!(matches!(
            matched_triple_transfer(&pair, 0.01),
            Err(Error::AngleTooLarge { .. })
        ));
    }

    #[test]
    fn matched_transfer_handles_equal_projections() {
        let mut rng = rng_for(3);
        let u = crate::gen::haar_unitary(&mut rng, 4);
        let mut d = CMat::zeros(4, 4);
        d[(0, 0)] = re(1.0);
        d[(1, 1)] = re(1.0);
        let p = &u * d * u.adjoint();
        let p = (&p + p.adjoint()) * re(0.5);
        let pair = ProjectionPair::with_defaults(p.clone(), p).unwrap();
        let report = matched_triple_transfer(&pair, 0.5).unwrap();
        assert!(report.converged);
        assert!(report.measured_rate.is_none());
        assert!(report.pass);
    }

    #[test]
    fn random_smooth_functions_are_deterministic_in_the_seed() {
        let grid = GridSpec::new(51).unwrap();
        let a = random_smooth_function(grid, &mut rng_for(11));
        let b = random_smooth_function(grid, &mut rng_for(11));
        let diff = a.sub(&b);
        assert_eq!(sup_norm(&diff), 0.0);
        let c = random_smooth_function(grid, &mut rng_for(12));
        assert!(sup_norm(&a.sub(&c)) > 1e-6);
    }
}
