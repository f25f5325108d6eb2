//! Validated pairs of orthogonal projections and their basic geometry:
//! infima, corner subspaces, and the Friedrichs angle.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    check_finite, identity, is_projection, null_basis, operator_norm, range_basis,
    subspace_intersect, CMat, Subspace, Tolerance,
};

/// Default stopping threshold for the iterative infimum.
pub const ITERATIVE_EPS: f64 = 1e-12;
/// Default iteration ceiling for the iterative infimum.
pub const ITERATIVE_MAX_ITER: usize = 10_000;

/// Two orthogonal projections on one finite-dimensional space, validated at
/// construction. The infimum `P ∧ Q` (projection onto `range(P) ∩ range(Q)`)
/// and its complement-side twin (onto `null(P) ∩ null(Q)`) are computed once
/// and carried with the pair.
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    p: CMat,
    q: CMat,
    tol: Tolerance,
    range_p: Subspace,
    range_q: Subspace,
    null_p: Subspace,
    null_q: Subspace,
    infimum: CMat,
    complement_infimum: CMat,
}

/// The four corner subspaces cut out by a pair of projections.
#[derive(Debug, Clone)]
pub struct CornerSubspaces {
    /// range(P) ∩ range(Q)
    pub h1: Subspace,
    /// range(P) ∩ null(Q)
    pub h2: Subspace,
    /// null(P) ∩ range(Q)
    pub h3: Subspace,
    /// null(P) ∩ null(Q)
    pub h4: Subspace,
}

impl CornerSubspaces {
    pub fn dims(&self) -> [usize; 4] {
        [self.h1.dim(), self.h2.dim(), self.h3.dim(), self.h4.dim()]
    }
}

/// Result of the alternating-product iteration for the infimum.
#[derive(Debug, Clone)]
pub struct IterativeInfimum {
    /// Final iterate of `(PQP)^n`; within `max(eps, tol)` of the infimum.
    pub projector: CMat,
    /// Loop passes until successive iterates agreed within `eps`.
    pub iterations: usize,
    /// Observed geometric contraction of successive updates; approximately
    /// the square of the Friedrichs angle.
    pub ratio_estimate: f64,
}

/// Both sides of the angle duality `c(P, Q) = c(I-Q, I-P)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AngleSymmetry {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

impl ProjectionPair {
    /// Validates that both matrices are projections of equal dimension and
    /// precomputes the range/null frames and both infima.
    pub fn new(p: CMat, q: CMat, tol: Tolerance) -> Result<Self> {
        if p.nrows() != p.ncols() {
            return Err(Error::NotSquare { rows: p.nrows(), cols: p.ncols() });
        }
        if q.nrows() != q.ncols() {
            return Err(Error::NotSquare { rows: q.nrows(), cols: q.ncols() });
        }
        if p.nrows() != q.nrows() {
            return Err(Error::AmbientMismatch { left: p.nrows(), right: q.nrows() });
        }
        check_finite(&p)?;
        check_finite(&q)?;
        for (m, which) in [(&p, "first factor"), (&q, "second factor")] {
            let check = is_projection(m, &tol)?;
            if !check.passed {
                return Err(Error::NotProjection {
                    which,
                    hermitian: check.hermitian_residual,
                    idempotent: check.idempotent_residual,
                });
            }
        }
        let range_p = range_basis(&p, &tol);
        let range_q = range_basis(&q, &tol);
        let null_p = null_basis(&p, &tol);
        let null_q = null_basis(&q, &tol);
        let infimum = subspace_intersect(&range_p, &range_q, &tol)?.projector();
        let complement_infimum = subspace_intersect(&null_p, &null_q, &tol)?.projector();
        Ok(Self {
            p,
            q,
            tol,
            range_p,
            range_q,
            null_p,
            null_q,
            infimum,
            complement_infimum,
        })
    }

    pub fn with_defaults(p: CMat, q: CMat) -> Result<Self> {
        Self::new(p, q, Tolerance::default())
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn p(&self) -> &CMat {
        &self.p
    }

    pub fn q(&self) -> &CMat {
        &self.q
    }

    pub fn tol(&self) -> Tolerance {
        self.tol
    }

    pub fn range_p(&self) -> &Subspace {
        &self.range_p
    }

    pub fn range_q(&self) -> &Subspace {
        &self.range_q
    }

    pub fn null_p(&self) -> &Subspace {
        &self.null_p
    }

    pub fn null_q(&self) -> &Subspace {
        &self.null_q
    }

    /// Projection onto `range(P) ∩ range(Q)`, computed through subspace
    /// intersection at construction time.
    pub fn infimum(&self) -> &CMat {
        &self.infimum
    }

    /// Projection onto `null(P) ∩ null(Q)`.
    pub fn complement_infimum(&self) -> &CMat {
        &self.complement_infimum
    }

    /// The pair `(I - Q, I - P)`; its infimum is this pair's complement
    /// infimum.
    pub fn swapped_complements(&self) -> Self {
        let id = identity(self.dim());
        Self::new(&id - &self.q, &id - &self.p, self.tol)
            .expect("complements of validated projections are projections")
    }

    /// Infimum as the limit of `(PQP)^n`, by alternating multiplication.
    /// Stops when successive iterates agree within `eps` in operator norm.
    pub fn infimum_iterative(&self, eps: f64, max_iter: usize) -> Result<IterativeInfimum> {
        let qp = &self.q * &self.p;
        let mut current = &self.p * &qp;
        let mut last_delta: Option<f64> = None;
        let mut ratios: Vec<f64> = Vec::new();
        for iteration in 1..=max_iter {
            let next = &current * &qp;
            let delta = operator_norm(&(&next - &current));
            if let Some(prev) = last_delta {
                if prev > 0.0 {
                    ratios.push(delta / prev);
                }
            }
            last_delta = Some(delta);
            current = next;
            if delta <= eps {
                let tail = ratios.iter().rev().take(5).copied().collect::<Vec<_>>();
                let ratio_estimate = if tail.is_empty() {
                    0.0
                } else {
                    (tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64).exp()
                };
                return Ok(IterativeInfimum { projector: current, iterations: iteration, ratio_estimate });
            }
        }
        Err(Error::NoConvergence { max_iter, last_delta: last_delta.unwrap_or(f64::NAN) })
    }

    /// All four corner subspaces.
    pub fn corner_subspaces(&self) -> CornerSubspaces {
        let tol = self.tol;
        let h1 = subspace_intersect(&self.range_p, &self.range_q, &tol)
            .expect("equal ambients by construction");
        let h2 = subspace_intersect(&self.range_p, &self.null_q, &tol)
            .expect("equal ambients by construction");
        let h3 = subspace_intersect(&self.null_p, &self.range_q, &tol)
            .expect("equal ambients by construction");
        let h4 = subspace_intersect(&self.null_p, &self.null_q, &tol)
            .expect("equal ambients by construction");
        CornerSubspaces { h1, h2, h3, h4 }
    }

    /// Friedrichs angle cosine `‖(P - P∧Q)(Q - P∧Q)‖`, clamped into [0, 1].
    pub fn friedrichs_angle(&self) -> f64 {
        let p_deflated = &self.p - &self.infimum;
        let q_deflated = &self.q - &self.infimum;
        operator_norm(&(p_deflated * q_deflated)).min(1.0)
    }

    /// Checks the duality between the angle of `(P, Q)` and the angle of
    /// `(I - Q, I - P)`.
    pub fn check_angle_symmetry(&self) -> AngleSymmetry {
        let lhs = self.friedrichs_angle();
        let rhs = self.swapped_complements().friedrichs_angle();
        AngleSymmetry { lhs, rhs, residual: (lhs - rhs).abs() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::re;

    fn mat(n: usize, entries: &[f64]) -> CMat {
        CMat::from_row_slice(n, n, &entries.iter().map(|&x| re(x)).collect::<Vec<_>>())
    }

    /// 2x2 pair with prescribed principal cosine: P = diag(1,0), range(Q)
    /// spanned by (c, s).
    fn plane_pair(c: f64) -> ProjectionPair {
        let s = (1.0 - c * c).sqrt();
        let p = mat(2, &[1.0, 0.0, 0.0, 0.0]);
        let q = mat(2, &[c * c, c * s, c * s, s * s]);
        ProjectionPair::with_defaults(p, q).unwrap()
    }

    #[test]
    fn construction_rejects_non_projections() {
        let p = mat(2, &[1.0, 0.0, 0.0, 0.0]);
        let shear = mat(2, &[1.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            ProjectionPair::with_defaults(p, shear),
            Err(Error::NotProjection { .. })
        ));
    }

    #[test]
    fn construction_rejects_dimension_mismatch() {
        let p = mat(2, &[1.0, 0.0, 0.0, 0.0]);
        let q = mat(3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            ProjectionPair::with_defaults(p, q),
            Err(Error::AmbientMismatch { .. })
        ));
    }

    #[test]
    fn commuting_diagonal_pair_has_diagonal_infimum() {
        let p = mat(4, &[
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
        ]);
        let q = mat(4, &[
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
        ]);
        let pair = ProjectionPair::with_defaults(p, q).unwrap();
        let expected = mat(4, &[
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
        ]);
        assert!(operator_norm(&(pair.infimum() - &expected)) < 1e-12);
        let expected_complement = mat(4, &[
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ]);
        assert!(operator_norm(&(pair.complement_infimum() - &expected_complement)) < 1e-12);
        assert_eq!(pair.corner_subspaces().dims(), [1, 1, 1, 1]);
        // commuting pair: angle 0
        assert!(pair.friedrichs_angle() < 1e-12);
    }

    #[test]
    fn transverse_plane_pair_has_trivial_infimum_and_expected_angle() {
        let c = 0.5_f64.sqrt();
        let pair = plane_pair(c);
        assert!(operator_norm(pair.infimum()) < 1e-12);
        assert!(operator_norm(pair.complement_infimum()) < 1e-12);
        assert!((pair.friedrichs_angle() - c).abs() < 1e-12);
        assert_eq!(pair.corner_subspaces().dims(), [0, 0, 0, 0]);
    }

    #[test]
    fn iterative_infimum_contracts_at_squared_angle() {
        let c = 0.5_f64.sqrt();
        let pair = plane_pair(c);
        let run = pair.infimum_iterative(ITERATIVE_EPS, ITERATIVE_MAX_ITER).unwrap();
        assert!(operator_norm(&(&run.projector - pair.infimum())) < 1e-10);
        assert!((run.ratio_estimate - 0.5).abs() < 1e-6, "ratio {}", run.ratio_estimate);
        assert!(run.iterations > 30 && run.iterations < 60, "iterations {}", run.iterations);
    }

    #[test]
    fn iterative_infimum_of_equal_projections_converges_immediately() {
        let p = mat(2, &[1.0, 0.0, 0.0, 0.0]);
        let pair = ProjectionPair::with_defaults(p.clone(), p.clone()).unwrap();
        let run = pair.infimum_iterative(ITERATIVE_EPS, 10).unwrap();
        assert_eq!(run.iterations, 1);
        assert!(operator_norm(&(&run.projector - &p)) < 1e-14);
    }

    #[test]
    fn iterative_infimum_reports_nonconvergence() {
        let c = 0.5_f64.sqrt();
        let pair = plane_pair(c);
        assert!(matches!(
            pair.infimum_iterative(1e-15, 3),
            Err(Error::NoConvergence { max_iter: 3, .. })
        ));
    }

    #[test]
    fn angle_symmetry_holds_for_plane_pair() {
        let pair = plane_pair(0.3);
        let sym = pair.check_angle_symmetry();
        assert!(sym.residual < 1e-12, "residual {}", sym.residual);
        assert!((sym.lhs - 0.3).abs() < 1e-12);
    }

    #[test]
    fn full_and_trivial_projections_are_degenerate_cases() {
        let id = identity(3);
        let zero = CMat::zeros(3, 3);
        let pair = ProjectionPair::with_defaults(id.clone(), zero.clone()).unwrap();
        assert!(operator_norm(pair.infimum()) < 1e-14);
        assert!(operator_norm(pair.complement_infimum()) < 1e-14);
        assert_eq!(pair.corner_subspaces().dims(), [0, 3, 0, 0]);
        assert_eq!(pair.friedrichs_angle(), 0.0);

        let pair = ProjectionPair::with_defaults(id.clone(), id.clone()).unwrap();
        assert!(operator_norm(&(pair.infimum() - &id)) < 1e-14);
        assert_eq!(pair.corner_subspaces().dims(), [3, 0, 0, 0]);
    }
}
