//! Tolerance-aware dense complex linear algebra.
//!
//! Every basis produced here is deterministic: frames come from pivoted
//! orthogonalization with a fixed pivot order (largest remaining column norm,
//! lowest index on ties), spectra are sorted descending, and each output
//! column is phase-normalized so its first entry of visible modulus is real
//! positive. That makes downstream reports byte-stable for identical inputs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense complex matrix, the operator carrier used throughout the crate.
pub type CMat = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVec = DVector<Complex64>;

/// Entries below this modulus are treated as zero when picking the leading
/// entry of a column for phase normalization.
pub(crate) const PHASE_FLOOR: f64 = 1e-12;

pub(crate) fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Numerical cutoffs shared by rank decisions and validation checks.
///
/// `rank_cut` bounds which singular values count as nonzero and how close a
/// principal cosine must come to 1 before two directions are identified; the
/// dimension-scaled floor `max(rows, cols) * eps * sigma_max` always applies
/// underneath it, so passing a tiny value recovers the standard numerical
/// rank convention. `residual` bounds acceptable defect in validation checks
/// (Hermitian, idempotent, orthonormal).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rank_cut: f64,
    pub residual: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rank_cut: 1e-8, residual: 1e-8 }
    }
}

impl Tolerance {
    pub const fn new(rank_cut: f64, residual: f64) -> Self {
        Self { rank_cut, residual }
    }

    /// Tight cutoffs for studies that must keep nearly-aligned directions
    /// apart instead of merging them into a common subspace.
    pub const fn tight() -> Self {
        Self { rank_cut: 1e-12, residual: 1e-10 }
    }

    pub(crate) fn sigma_cut(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        let floor = rows.max(cols) as f64 * f64::EPSILON * sigma_max;
        self.rank_cut.max(floor)
    }
}

/// Identity matrix of the given dimension.
pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Errors if any entry is NaN or infinite.
pub fn check_finite(m: &CMat) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Horizontal concatenation. All blocks must share the row count.
pub(crate) fn hstack(blocks: &[&CMat]) -> CMat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut at = 0;
    for block in blocks {
        debug_assert_eq!(block.nrows(), rows);
        out.view_mut((0, at), (rows, block.ncols())).copy_from(*block);
        at += block.ncols();
    }
    out
}

/// Largest singular value; zero for an empty matrix.
///
/// Computed as the square root of the top eigenvalue of the smaller Gram
/// matrix. The top eigenvalue of a Hermitian matrix carries full absolute
/// accuracy, so no precision is lost for the norm (only the small singular
/// values suffer from squaring, and those never decide a norm).
pub fn operator_norm(m: &CMat) -> f64 {
    if m.nrows().min(m.ncols()) == 0 {
        return 0.0;
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    let (values, _) = hermitian_factor(&gram);
    values.iter().copied().fold(0.0, f64::max).max(0.0).sqrt()
}

// ── Hermitian eigenfactor kernel ────────────────────────────────────────────

/// Eigenfactorization `(values, vectors)` of a Hermitian matrix, unsorted.
///
/// The library eigensolver silently mispairs eigenvectors for some complex
/// Hermitian matrices with degenerate spectra (the columns stay orthonormal
/// but fail `H v = lambda v`), so its output is only accepted after a
/// reconstruction check; on failure a cyclic Jacobi pass redoes the work.
fn hermitian_factor(m: &CMat) -> (Vec<f64>, CMat) {
    let h = (m + m.adjoint()) * re(0.5);
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let scale = h.norm().max(1e-300);
    let se = h.clone().symmetric_eigen();
    let diag = CMat::from_diagonal(&se.eigenvalues.map(re));
    let recon = &se.eigenvectors * diag * se.eigenvectors.adjoint();
    let orth = se.eigenvectors.adjoint() * &se.eigenvectors - identity(n);
    // Frobenius residuals; a correct factorization sits near machine epsilon
    if (recon - &h).norm() <= 1e-11 * scale && orth.norm() <= 1e-11 * (n as f64).sqrt() {
        return (se.eigenvalues.iter().copied().collect(), se.eigenvectors);
    }
    jacobi_hermitian_eigen(&h)
}

/// Cyclic complex Jacobi eigendecomposition; quadratically convergent, the
/// sweep cap is never reached for the sizes this crate handles.
fn jacobi_hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let n = h.nrows();
    let mut a = h.clone();
    let mut v = identity(n);
    let scale = a.norm().max(1e-300);
    let target = 1e-15 * scale;
    for _sweep in 0..60 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let phase = apq / re(r);
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = re(1.0 / (1.0 + t * t).sqrt());
                let s = c * t;
                // plane rotation G: columns p, q of the identity replaced by
                // (c, -s e^{-i arg}) and (s, c e^{-i arg}); A <- G^H A G
                let gqp = -phase.conj() * s;
                let gqq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c + akq * gqp;
                    a[(k, q)] = akp * s + akq * gqq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c + aqk * gqp.conj();
                    a[(q, k)] = apk * s + aqk * gqq.conj();
                }
                a[(p, q)] = re(0.0);
                a[(q, p)] = re(0.0);
                a[(p, p)] = re(a[(p, p)].re);
                a[(q, q)] = re(a[(q, q)].re);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c + vkq * gqp;
                    v[(k, q)] = vkp * s + vkq * gqq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)].re).collect(), v)
}

// ── singular value machinery ────────────────────────────────────────────────

pub(crate) struct SvdParts {
    pub u: CMat,
    pub sigma: Vec<f64>,
    pub v: CMat,
}

/// Full SVD `m = u * diag(sigma) * v^H` with singular values sorted
/// descending and each (u, v) column pair jointly phase-normalized.
///
/// Implemented as a one-sided Jacobi iteration on the tall orientation of
/// the input: right rotations make the columns mutually orthogonal, so the
/// rotation product is exactly unitary, the column norms are the singular
/// values at full absolute accuracy, and the normalized columns are the left
/// factor. This avoids both the bidiagonalization route of the underlying
/// library (inaccurate for complex input) and any eigenvector pairing, which
/// degrades on clustered spectra.
pub(crate) fn svd_parts(m: &CMat) -> SvdParts {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return SvdParts {
            u: CMat::zeros(rows, 0),
            sigma: Vec::new(),
            v: CMat::zeros(cols, 0),
        };
    }
    let transposed = rows < cols;
    let tall = if transposed { m.adjoint() } else { m.clone() };
    let (scaled, rotations) = one_sided_jacobi(tall);

    let norms: Vec<f64> = (0..k).map(|j| scaled.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).expect("norms are finite"));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let zero_cut = (rows + cols) as f64 * f64::EPSILON * sigma[0];

    let mut left = CMat::zeros(scaled.nrows(), k);
    let mut right = CMat::zeros(k, k);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        right.set_column(dst, &rotations.column(src));
        if norms[src] > zero_cut {
            left.set_column(dst, &(scaled.column(src) / re(norms[src])));
        } else {
            // a vanishing column carries no direction information
            missing.push(dst);
        }
    }
    fill_missing_columns(&mut left, &missing);

    let (mut u, mut v) = if transposed { (right, left) } else { (left, right) };
    for j in 0..k {
        if let Some(phase) = leading_phase(&u.column(j).into_owned()) {
            let f = phase.conj();
            // joint rescale keeps u * diag(sigma) * v^H unchanged
            u.column_mut(j).iter_mut().for_each(|z| *z *= f);
            v.column_mut(j).iter_mut().for_each(|z| *z *= f);
        }
    }
    SvdParts { u, sigma, v }
}

/// One-sided Jacobi sweep loop: returns `(w, v)` with `w = input * v`,
/// `v` unitary, and the columns of `w` pairwise orthogonal to machine
/// precision. The input must have at least as many rows as columns.
fn one_sided_jacobi(mut w: CMat) -> (CMat, CMat) {
    let n = w.ncols();
    let rows = w.nrows();
    let mut v = identity(n);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let app: f64 = w.column(p).norm_squared();
                let aqq: f64 = w.column(q).norm_squared();
                if app == 0.0 || aqq == 0.0 {
                    continue;
                }
                let apq: Complex64 = w.column(p).dotc(&w.column(q));
                let r = apq.norm();
                if r <= 1e-15 * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                // rotation diagonalizing the implicit Gram 2x2
                // [[app, apq], [conj(apq), aqq]]
                let phase = apq / re(r);
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = re(1.0 / (1.0 + t * t).sqrt());
                let s = c * t;
                let gqp = -phase.conj() * s;
                let gqq = phase.conj() * c;
                for i in 0..rows {
                    let wip = w[(i, p)];
                    let wiq = w[(i, q)];
                    w[(i, p)] = wip * c + wiq * gqp;
                    w[(i, q)] = wip * s + wiq * gqq;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * c + viq * gqp;
                    v[(i, q)] = vip * s + viq * gqq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (w, v)
}

/// Replaces the listed columns with a deterministic orthonormal completion of
/// the remaining ones.
fn fill_missing_columns(mat: &mut CMat, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let (n, k) = mat.shape();
    let established: Vec<usize> = (0..k).filter(|i| !missing.contains(i)).collect();
    let mut candidate = CMat::zeros(n, established.len() + n);
    for (dst, &src) in established.iter().enumerate() {
        candidate.set_column(dst, &mat.column(src));
    }
    candidate
        .view_mut((0, established.len()), (n, n))
        .copy_from(&identity(n));
    let full = pivoted_orthonormal_columns_seeded(
        &candidate,
        established.len() + missing.len(),
        established.len(),
    );
    for (j, &dst) in missing.iter().enumerate() {
        mat.set_column(dst, &full.column(established.len() + j));
    }
}

pub(crate) fn leading_phase(col: &CVec) -> Option<Complex64> {
    col.iter().find(|z| z.norm() > PHASE_FLOOR).map(|z| z / z.norm())
}

fn normalize_column_phases(m: &mut CMat) {
    for j in 0..m.ncols() {
        if let Some(phase) = leading_phase(&m.column(j).into_owned()) {
            let f = phase.conj();
            m.column_mut(j).iter_mut().for_each(|z| *z *= f);
        }
    }
}

// ── Hermitian eigendecomposition ────────────────────────────────────────────

/// Real spectrum and unitary eigenvector matrix of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Eigenvalues sorted descending.
    pub values: Vec<f64>,
    /// Matching eigenvectors as columns, phase-normalized.
    pub vectors: CMat,
}

/// Eigendecomposition of a Hermitian matrix.
///
/// The input is symmetrized before factoring; a Hermitian defect beyond
/// `tol.residual` is an error rather than silently averaged away.
pub fn hermitian_eig(m: &CMat, tol: &Tolerance) -> Result<HermitianEig> {
    let n = require_square(m)?;
    if n == 0 {
        return Ok(HermitianEig { values: Vec::new(), vectors: CMat::zeros(0, 0) });
    }
    let defect = operator_norm(&(m - m.adjoint()));
    if defect > tol.residual {
        return Err(Error::NotHermitian { residual: defect, tol: tol.residual });
    }
    let (raw_values, raw_vectors) = hermitian_factor(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        raw_values[b]
            .partial_cmp(&raw_values[a])
            .expect("eigenvalues are finite")
    });
    let mut values = Vec::with_capacity(n);
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(raw_values[src]);
        vectors.set_column(dst, &raw_vectors.column(src));
    }
    normalize_column_phases(&mut vectors);
    Ok(HermitianEig { values, vectors })
}

fn require_square(m: &CMat) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

/// Hermitian square root of a positive semidefinite matrix. Eigenvalues are
/// clamped below at zero so roundoff never produces NaN.
pub fn psd_sqrt(m: &CMat, tol: &Tolerance) -> Result<CMat> {
    let eig = hermitian_eig(m, tol)?;
    Ok(rebuild_hermitian(&eig.vectors, eig.values.iter().map(|&v| v.max(0.0).sqrt())))
}

/// The absolute value `|T| = (T^H T)^{1/2}`, assembled from the singular
/// value decomposition of `T` itself. Going through `T` instead of its Gram
/// matrix keeps small singular values at full absolute accuracy.
pub fn operator_abs(t: &CMat) -> CMat {
    let parts = svd_parts(t);
    let diag = CVec::from_iterator(parts.sigma.len(), parts.sigma.iter().map(|&s| re(s)));
    &parts.v * CMat::from_diagonal(&diag) * parts.v.adjoint()
}

fn rebuild_hermitian(vectors: &CMat, values: impl Iterator<Item = f64>) -> CMat {
    let diag = CVec::from_iterator(vectors.ncols(), values.map(re));
    vectors * CMat::from_diagonal(&diag) * vectors.adjoint()
}

// ── projection test ─────────────────────────────────────────────────────────

/// Residual report from [`is_projection`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProjectionCheck {
    pub passed: bool,
    pub hermitian_residual: f64,
    pub idempotent_residual: f64,
}

/// Checks `m = m^H = m^2` within `tol.residual`.
pub fn is_projection(m: &CMat, tol: &Tolerance) -> Result<ProjectionCheck> {
    require_square(m)?;
    check_finite(m)?;
    let hermitian_residual = operator_norm(&(m - m.adjoint()));
    let idempotent_residual = operator_norm(&(m - m * m));
    Ok(ProjectionCheck {
        passed: hermitian_residual <= tol.residual && idempotent_residual <= tol.residual,
        hermitian_residual,
        idempotent_residual,
    })
}

// ── polar decomposition ─────────────────────────────────────────────────────

/// Partial-isometry polar factorization `t = isometry * abs`.
#[derive(Debug, Clone)]
pub struct Polar {
    /// Partial isometry with initial space `closure(range(t^H))` and final
    /// space `closure(range(t))`.
    pub isometry: CMat,
    /// `|t| = (t^H t)^{1/2}`.
    pub abs: CMat,
}

/// Polar decomposition via SVD. Singular directions at or below the rank
/// cutoff are excluded from the isometry, so `isometry^H * isometry` is the
/// projection onto the numerical range of `t^H`.
pub fn polar_partial_isometry(t: &CMat, tol: &Tolerance) -> Polar {
    let parts = svd_parts(t);
    let sigma_max = parts.sigma.first().copied().unwrap_or(0.0);
    let cut = tol.sigma_cut(t.nrows(), t.ncols(), sigma_max);
    let rank = parts.sigma.iter().take_while(|&&s| s > cut).count();
    let u_r = parts.u.columns(0, rank);
    let v_r = parts.v.columns(0, rank);
    let isometry = u_r * v_r.adjoint();
    let abs = {
        let diag = CVec::from_iterator(parts.sigma.len(), parts.sigma.iter().map(|&s| re(s)));
        &parts.v * CMat::from_diagonal(&diag) * parts.v.adjoint()
    };
    Polar { isometry, abs }
}

// ── subspaces ───────────────────────────────────────────────────────────────

/// A subspace carried as an orthonormal frame (columns) in its ambient space.
#[derive(Debug, Clone)]
pub struct Subspace {
    frame: CMat,
    tol: Tolerance,
}

impl Subspace {
    /// Wraps a frame after validating orthonormality of its columns.
    pub fn new(frame: CMat, tol: Tolerance) -> Result<Self> {
        check_finite(&frame)?;
        if frame.ncols() > frame.nrows() {
            return Err(Error::Validation(format!(
                "frame has {} columns in ambient dimension {}",
                frame.ncols(),
                frame.nrows()
            )));
        }
        let gram_defect = operator_norm(&(frame.adjoint() * &frame - identity(frame.ncols())));
        // Frames are produced by floating-point orthogonalization, so honest
        // rounding of order n*eps must pass even when the caller's residual
        // tolerance is tighter than that.
        let floor = 32.0 * frame.nrows().max(1) as f64 * f64::EPSILON;
        if gram_defect > tol.residual.max(floor) {
            return Err(Error::Validation(format!(
                "frame columns are not orthonormal: defect {gram_defect:.3e}"
            )));
        }
        Ok(Self { frame, tol })
    }

    /// The zero subspace of the given ambient dimension.
    pub fn trivial(ambient_dim: usize, tol: Tolerance) -> Self {
        Self { frame: CMat::zeros(ambient_dim, 0), tol }
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn frame(&self) -> &CMat {
        &self.frame
    }

    pub fn tol(&self) -> Tolerance {
        self.tol
    }

    /// Orthogonal projection onto the subspace.
    pub fn projector(&self) -> CMat {
        &self.frame * self.frame.adjoint()
    }
}

/// Orthonormal frame for the column space of `t`.
///
/// Numerical rank is the count of singular values above the cutoff; the frame
/// itself comes from pivoted orthogonalization of the columns of `t` so the
/// output is reproducible column by column.
pub fn range_basis(t: &CMat, tol: &Tolerance) -> Subspace {
    let parts_sigma = if t.nrows().min(t.ncols()) == 0 {
        Vec::new()
    } else {
        svd_parts(t).sigma
    };
    let sigma_max = parts_sigma.first().copied().unwrap_or(0.0);
    let cut = tol.sigma_cut(t.nrows(), t.ncols(), sigma_max);
    let rank = parts_sigma.iter().take_while(|&&s| s > cut).count();
    let frame = pivoted_orthonormal_columns(t, rank);
    Subspace::new(frame, *tol).expect("pivoted orthogonalization yields an orthonormal frame")
}

/// Orthonormal frame for the null space of `t`, from the right singular
/// vectors whose singular values sit at or below the cutoff.
pub fn null_basis(t: &CMat, tol: &Tolerance) -> Subspace {
    let n = t.ncols();
    if t.nrows() == 0 || n == 0 {
        // no constraints: the whole domain is null space
        let mut frame = identity(n);
        normalize_column_phases(&mut frame);
        return Subspace::new(frame, *tol).expect("identity frame");
    }
    let parts = svd_parts(t);
    let sigma_max = parts.sigma.first().copied().unwrap_or(0.0);
    let cut = tol.sigma_cut(t.nrows(), n, sigma_max);
    let rank = parts.sigma.iter().take_while(|&&s| s > cut).count();
    let mut columns = CMat::zeros(n, n - rank);
    // right singular vectors beyond the rank, then the orthogonal complement
    // of the full V when the domain exceeds min(rows, cols)
    let k = parts.sigma.len();
    for (dst, src) in (rank..k).enumerate() {
        columns.set_column(dst, &parts.v.column(src));
    }
    if k < n {
        // complete V to a unitary deterministically, then keep the tail
        let completion = complete_frame(&parts.v);
        for (dst, src) in (0..n - k).enumerate() {
            columns.set_column(k - rank + dst, &completion.column(src));
        }
    }
    normalize_column_phases(&mut columns);
    Subspace::new(columns, *tol).expect("singular vectors are orthonormal")
}

/// Extends an orthonormal frame to a full basis and returns the new columns.
fn complete_frame(frame: &CMat) -> CMat {
    let n = frame.nrows();
    let k = frame.ncols();
    let mut candidate = CMat::zeros(n, k + n);
    candidate.view_mut((0, 0), (n, k)).copy_from(frame);
    candidate.view_mut((0, k), (n, n)).copy_from(&identity(n));
    let full = pivoted_orthonormal_columns_seeded(&candidate, n, k);
    full.columns(k, n - k).into_owned()
}

/// Pivoted modified Gram-Schmidt with re-orthogonalization, taking `rank`
/// columns. Pivot order: largest remaining norm, lowest index on ties.
fn pivoted_orthonormal_columns(t: &CMat, rank: usize) -> CMat {
    pivoted_orthonormal_columns_seeded(t, rank, 0)
}

/// Same as above, but the first `seeded` columns are taken as already
/// orthonormal and consumed in order before pivoting starts.
fn pivoted_orthonormal_columns_seeded(t: &CMat, rank: usize, seeded: usize) -> CMat {
    let n = t.nrows();
    let mut work: Vec<CVec> = (0..t.ncols()).map(|j| t.column(j).into_owned()).collect();
    let mut taken = vec![false; work.len()];
    let mut q = CMat::zeros(n, rank);
    for step in 0..rank {
        let pivot = if step < seeded {
            step
        } else {
            let mut best = usize::MAX;
            let mut best_norm = -1.0;
            for (j, col) in work.iter().enumerate() {
                if taken[j] {
                    continue;
                }
                let norm = col.norm();
                if norm > best_norm {
                    best_norm = norm;
                    best = j;
                }
            }
            best
        };
        taken[pivot] = true;
        let mut v = work[pivot].clone();
        for _ in 0..2 {
            for j in 0..step {
                let qj = q.column(j);
                let coef = qj.dotc(&v);
                v -= qj.into_owned() * coef;
            }
        }
        let norm = v.norm();
        debug_assert!(norm > 0.0, "rank decision admitted a vanishing pivot column");
        q.set_column(step, &(v / re(norm)));
        let qs = q.column(step).into_owned();
        for (j, col) in work.iter_mut().enumerate() {
            if !taken[j] {
                let coef = qs.dotc(col);
                *col -= &qs * coef;
            }
        }
    }
    q
}

/// Cosines of the principal angles between two subspaces, sorted descending
/// and clamped into [0, 1].
pub fn principal_cosines(a: &Subspace, b: &Subspace) -> Result<Vec<f64>> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::AmbientMismatch { left: a.ambient_dim(), right: b.ambient_dim() });
    }
    let m = a.frame().adjoint() * b.frame();
    let s: Vec<f64> = if m.nrows().min(m.ncols()) == 0 {
        Vec::new()
    } else {
        svd_parts(&m).sigma.iter().map(|&v| v.clamp(0.0, 1.0)).collect()
    };
    Ok(s)
}

/// Intersection of two subspaces via principal vectors: directions whose
/// principal cosine reaches `1 - tol.rank_cut` are kept.
pub fn subspace_intersect(a: &Subspace, b: &Subspace, tol: &Tolerance) -> Result<Subspace> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::AmbientMismatch { left: a.ambient_dim(), right: b.ambient_dim() });
    }
    let ambient = a.ambient_dim();
    if a.dim() == 0 || b.dim() == 0 {
        return Ok(Subspace::trivial(ambient, *tol));
    }
    let m = a.frame().adjoint() * b.frame();
    let parts = svd_parts(&m);
    let count = parts.sigma.iter().take_while(|&&s| s >= 1.0 - tol.rank_cut).count();
    if count == 0 {
        return Ok(Subspace::trivial(ambient, *tol));
    }
    let directions = a.frame() * parts.u.columns(0, count);
    let frame = pivoted_orthonormal_columns(&directions, count);
    Subspace::new(frame, *tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, entries: &[f64]) -> CMat {
        CMat::from_row_slice(rows, cols, &entries.iter().map(|&x| re(x)).collect::<Vec<_>>())
    }

    const HALF_PAIR_Q: [f64; 4] = [0.5, 0.5, 0.5, 0.5];

    #[test]
    fn operator_norm_of_diagonal_is_largest_magnitude() {
        let m = mat(2, 2, &[3.0, 0.0, 0.0, -4.0]);
        assert!((operator_norm(&m) - 4.0).abs() < 1e-14);
        assert_eq!(operator_norm(&CMat::zeros(3, 0)), 0.0);
    }

    #[test]
    fn operator_norm_of_projection_product_is_principal_cosine() {
        // P = diag(1,0), Q at cosine 1/sqrt(2): PQ has norm sqrt(1/2)
        let p = mat(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let q = mat(2, 2, &HALF_PAIR_Q);
        assert!((operator_norm(&(p * q)) - 0.5_f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn hermitian_eig_matches_hand_computed_spectrum() {
        let q = mat(2, 2, &HALF_PAIR_Q);
        let eig = hermitian_eig(&q, &Tolerance::default()).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!(eig.values[1].abs() < 1e-14);
        // leading eigenvector (1,1)/sqrt(2), phase-normalized real positive
        let inv_sqrt2 = 0.5_f64.sqrt();
        assert!((eig.vectors[(0, 0)].re - inv_sqrt2).abs() < 1e-12);
        assert!((eig.vectors[(1, 0)].re - inv_sqrt2).abs() < 1e-12);
        assert!(eig.vectors[(0, 0)].im.abs() < 1e-14);
    }

    #[test]
    fn hermitian_eig_rejects_non_hermitian_input() {
        let m = mat(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        match hermitian_eig(&m, &Tolerance::default()) {
            Err(Error::NotHermitian { .. }) => {}
            other => panic!("expected NotHermitian, got {other:?}"),
        }
        let rect = CMat::zeros(2, 3);
        assert!(matches!(hermitian_eig(&rect, &Tolerance::default()), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn hermitian_eig_reconstructs_input() {
        let m = mat(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]);
        let eig = hermitian_eig(&m, &Tolerance::default()).unwrap();
        let rebuilt = rebuild_hermitian(&eig.vectors, eig.values.iter().copied());
        assert!(operator_norm(&(&m - rebuilt)) < 1e-12);
        let unitary_defect = operator_norm(&(eig.vectors.adjoint() * &eig.vectors - identity(3)));
        assert!(unitary_defect < 1e-12);
    }

    #[test]
    fn polar_factors_zero_and_diagonal_matrices() {
        let tol = Tolerance::default();
        let z = CMat::zeros(2, 2);
        let polar = polar_partial_isometry(&z, &tol);
        assert_eq!(operator_norm(&polar.isometry), 0.0);
        assert_eq!(operator_norm(&polar.abs), 0.0);

        let d = mat(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let polar = polar_partial_isometry(&d, &tol);
        assert!(operator_norm(&(&polar.isometry - mat(2, 2, &[1.0, 0.0, 0.0, 0.0]))) < 1e-14);
        assert!(operator_norm(&(&polar.abs - &d)) < 1e-14);
    }

    #[test]
    fn polar_of_skew_rank_one_block_matches_hand_computation() {
        // t = [[1/2, -1/2], [0, 0]]: isometry has first row (1, -1)/sqrt(2)
        let tol = Tolerance::default();
        let t = mat(2, 2, &[0.5, -0.5, 0.0, 0.0]);
        let polar = polar_partial_isometry(&t, &tol);
        let s = 0.5_f64.sqrt();
        let expected = mat(2, 2, &[s, -s, 0.0, 0.0]);
        assert!(operator_norm(&(&polar.isometry - expected)) < 1e-12);
        assert!(operator_norm(&(&polar.isometry * &polar.abs - &t)) < 1e-12);
        // initial projection is onto span (1,-1)/sqrt(2)
        let init = polar.isometry.adjoint() * &polar.isometry;
        let expected_init = mat(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!(operator_norm(&(init - expected_init)) < 1e-12);
    }

    #[test]
    fn range_basis_spans_column_space_deterministically() {
        let tol = Tolerance::default();
        let ones = mat(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let basis = range_basis(&ones, &tol);
        assert_eq!(basis.dim(), 1);
        let s = 0.5_f64.sqrt();
        assert!((basis.frame()[(0, 0)].re - s).abs() < 1e-14);
        assert!((basis.frame()[(1, 0)].re - s).abs() < 1e-14);

        assert_eq!(range_basis(&CMat::zeros(3, 3), &tol).dim(), 0);
        assert_eq!(range_basis(&identity(4), &tol).dim(), 4);
    }

    #[test]
    fn null_basis_of_rank_one_projection() {
        let tol = Tolerance::default();
        let p = mat(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let null = null_basis(&p, &tol);
        assert_eq!(null.dim(), 1);
        assert!((null.frame()[(1, 0)].re - 1.0).abs() < 1e-14);
        assert!(null.frame()[(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn null_basis_handles_rectangular_wide_matrices() {
        let tol = Tolerance::default();
        // 1x3 row: null space has dimension 2, orthogonal to (1,1,1)
        let t = mat(1, 3, &[1.0, 1.0, 1.0]);
        let null = null_basis(&t, &tol);
        assert_eq!(null.dim(), 2);
        assert!(operator_norm(&(&t * null.frame())) < 1e-12);
        let gram = null.frame().adjoint() * null.frame();
        assert!(operator_norm(&(gram - identity(2))) < 1e-12);
    }

    #[test]
    fn intersect_of_coordinate_planes_is_shared_axis() {
        let tol = Tolerance::default();
        let e12 = Subspace::new(mat(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]), tol).unwrap();
        let e23 = Subspace::new(mat(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]), tol).unwrap();
        let meet = subspace_intersect(&e12, &e23, &tol).unwrap();
        assert_eq!(meet.dim(), 1);
        assert!((meet.frame()[(1, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intersect_of_transverse_lines_is_trivial() {
        let tol = Tolerance::default();
        let e1 = Subspace::new(mat(2, 1, &[1.0, 0.0]), tol).unwrap();
        let diag = {
            let s = 0.5_f64.sqrt();
            Subspace::new(mat(2, 1, &[s, s]), tol).unwrap()
        };
        assert_eq!(subspace_intersect(&e1, &diag, &tol).unwrap().dim(), 0);
        let same = subspace_intersect(&e1, &e1, &tol).unwrap();
        assert_eq!(same.dim(), 1);
    }

    #[test]
    fn intersect_rejects_mismatched_ambients() {
        let tol = Tolerance::default();
        let a = Subspace::new(mat(2, 1, &[1.0, 0.0]), tol).unwrap();
        let b = Subspace::new(mat(3, 1, &[1.0, 0.0, 0.0]), tol).unwrap();
        assert!(matches!(
            subspace_intersect(&a, &b, &tol),
            Err(Error::AmbientMismatch { .. })
        ));
    }

    #[test]
    fn is_projection_accepts_rank_one_rotation_and_rejects_shear() {
        let tol = Tolerance::default();
        let p = mat(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(is_projection(&p, &tol).unwrap().passed);

        // Q(t) at t = 1/3: cos^2 = 3/4
        let (c2, s2) = (0.75_f64, 0.25_f64);
        let sc = (c2 * s2).sqrt();
        let q = mat(2, 2, &[c2, sc, sc, s2]);
        assert!(is_projection(&q, &tol).unwrap().passed);

        let shear = mat(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let check = is_projection(&shear, &tol).unwrap();
        assert!(!check.passed);
        assert!(check.hermitian_residual > 0.5);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let tol = Tolerance::default();
        let q = mat(2, 2, &HALF_PAIR_Q);
        let root = psd_sqrt(&q, &tol).unwrap();
        assert!(operator_norm(&(&root * &root - &q)) < 1e-12);
    }

    #[test]
    fn complex_entries_round_trip_through_svd() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[cx(1.0, 2.0), cx(0.0, -1.0), cx(0.5, 0.0), cx(-1.0, 1.0)],
        );
        let parts = svd_parts(&m);
        let diag = CVec::from_iterator(parts.sigma.len(), parts.sigma.iter().map(|&s| re(s)));
        let rebuilt = &parts.u * CMat::from_diagonal(&diag) * parts.v.adjoint();
        assert!(operator_norm(&(&m - rebuilt)) < 1e-12);
        assert!(parts.sigma[0] >= parts.sigma[1]);
    }

    #[test]
    fn svd_stays_backward_stable_on_awkward_shapes() {
        let check = |m: &CMat| {
            let parts = svd_parts(m);
            let k = parts.sigma.len();
            let diag = CVec::from_iterator(k, parts.sigma.iter().map(|&s| re(s)));
            let rebuilt = &parts.u * CMat::from_diagonal(&diag) * parts.v.adjoint();
            let scale = parts.sigma.first().copied().unwrap_or(0.0).max(1.0);
            let backward = operator_norm(&(m - rebuilt)) / scale;
            assert!(backward < 1e-13, "backward error {backward:.3e}");
            let u_defect = operator_norm(&(parts.u.adjoint() * &parts.u - identity(k)));
            let v_defect = operator_norm(&(parts.v.adjoint() * &parts.v - identity(k)));
            assert!(u_defect < 1e-13 && v_defect < 1e-13, "{u_defect:.3e} / {v_defect:.3e}");
            // singular values of the adjoint are the same set
            let adj = svd_parts(&m.adjoint());
            for (a, b) in parts.sigma.iter().zip(adj.sigma.iter()) {
                assert!((a - b).abs() < 1e-13 * scale, "sigma mismatch {a} vs {b}");
            }
        };
        let mut rng = crate::gen::rng_for(99);
        // square, tall, wide, and rank-deficient inputs
        check(&crate::gen::ginibre(&mut rng, 7, 7));
        check(&crate::gen::ginibre(&mut rng, 9, 4));
        check(&crate::gen::ginibre(&mut rng, 3, 8));
        let low = crate::gen::ginibre(&mut rng, 6, 2) * crate::gen::ginibre(&mut rng, 2, 6);
        check(&low);
        // the adjoint of a projection product is the shape that loses accuracy
        // on a plain bidiagonalization route
        let pair = crate::gen::random_pair(3, 8);
        let t1 = pair.p() * (identity(8) - pair.q());
        check(&t1);
        check(&t1.adjoint().into_owned());
    }
}
