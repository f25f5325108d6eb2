//! Six-subspace decomposition of a projection pair.
//!
//! The ambient space splits into four corner subspaces (the pairwise
//! intersections of ranges and null spaces) plus a generic part `h5 ⊕ h6` on
//! which the pair is described by a positive contraction `a_op` and a unitary
//! `u0`. The decomposition is exact data: [`HalmosDecomposition::reconstruct`]
//! rebuilds both projections from it.

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eig, hstack, identity, leading_phase, operator_norm, polar_partial_isometry,
    psd_sqrt, range_basis, re, CMat, CVec, Subspace, Tolerance,
};
use crate::pair::{CornerSubspaces, ProjectionPair};

/// Corner subspaces plus generic-part data for one projection pair.
///
/// Invariants maintained by the constructors:
/// - the six frames are mutually orthogonal and jointly orthonormal,
/// - `dim(h5) == dim(h6)`,
/// - `a_op` is a Hermitian contraction on the h5 coordinates whose spectrum
///   stays strictly inside `(0, 1)` at the working tolerance,
/// - `u0` is unitary as a map from h5 coordinates to h6 coordinates, each
///   column's first significant entry real positive.
#[derive(Debug, Clone)]
pub struct HalmosDecomposition {
    corners: CornerSubspaces,
    h5: Subspace,
    h6: Subspace,
    a_op: CMat,
    u0: CMat,
    tol: Tolerance,
}

/// Directions of a candidate generic frame split by the compression of `q`:
/// interior spectrum stays generic, endpoint spectrum moves to the corners.
struct EndpointSplit {
    interior: CMat,
    at_one: CMat,
    at_zero: CMat,
}

fn split_endpoint_directions(frame: &CMat, q: &CMat, tol: &Tolerance) -> Result<EndpointSplit> {
    let ambient = frame.nrows();
    let g = frame.ncols();
    if g == 0 {
        return Ok(EndpointSplit {
            interior: CMat::zeros(ambient, 0),
            at_one: CMat::zeros(ambient, 0),
            at_zero: CMat::zeros(ambient, 0),
        });
    }
    let compression = frame.adjoint() * q * frame;
    let eig = hermitian_eig(&compression, tol)?;
    let mut interior = Vec::new();
    let mut at_one = Vec::new();
    let mut at_zero = Vec::new();
    for (j, &value) in eig.values.iter().enumerate() {
        if value >= 1.0 - tol.rank_cut {
            at_one.push(j);
        } else if value <= tol.rank_cut {
            at_zero.push(j);
        } else {
            interior.push(j);
        }
    }
    let map = |idx: &[usize]| -> CMat {
        if idx.is_empty() {
            CMat::zeros(ambient, 0)
        } else {
            frame * eig.vectors.select_columns(idx.iter())
        }
    };
    Ok(EndpointSplit { interior: map(&interior), at_one: map(&at_one), at_zero: map(&at_zero) })
}

fn extend_subspace(base: &Subspace, extra: &CMat, tol: Tolerance) -> Result<Subspace> {
    if extra.ncols() == 0 {
        return Ok(base.clone());
    }
    Subspace::new(hstack(&[base.frame(), extra]), tol)
        .map_err(|e| Error::FrameInconsistency(format!("corner extension failed: {e}")))
}

/// Computes the decomposition of a pair.
///
/// The generic frames start as the orthogonal complements of the corners
/// inside `range(P)` and `null(P)`. Compression eigenvalues that sit at 0 or 1
/// within `tol.rank_cut` are reassigned to the corners first, so that `a_op`
/// and `I - a_op` stay injective even when an intersection straddles the rank
/// cut.
pub fn decompose(pair: &ProjectionPair) -> Result<HalmosDecomposition> {
    let tol = pair.tol();
    let n = pair.dim();
    let corners = pair.corner_subspaces();

    let inside_range =
        pair.p() - corners.h1.projector() - corners.h2.projector();
    let inside_null =
        identity(n) - pair.p() - corners.h3.projector() - corners.h4.projector();
    let f5_seed = range_basis(&inside_range, &tol);
    let f6_seed = range_basis(&inside_null, &tol);

    let split5 = split_endpoint_directions(f5_seed.frame(), pair.q(), &tol)?;
    let split6 = split_endpoint_directions(f6_seed.frame(), pair.q(), &tol)?;

    let corners = CornerSubspaces {
        h1: extend_subspace(&corners.h1, &split5.at_one, tol)?,
        h2: extend_subspace(&corners.h2, &split5.at_zero, tol)?,
        h3: extend_subspace(&corners.h3, &split6.at_one, tol)?,
        h4: extend_subspace(&corners.h4, &split6.at_zero, tol)?,
    };
    let mut f5 = split5.interior;
    let f6 = split6.interior;
    if f5.ncols() != f6.ncols() {
        return Err(Error::FrameInconsistency(format!(
            "generic frames disagree: {} vs {} directions",
            f5.ncols(),
            f6.ncols()
        )));
    }
    let g = f5.ncols();

    let mut a_op = CMat::zeros(g, g);
    let mut u0 = CMat::zeros(g, g);
    if g > 0 {
        let raw = f5.adjoint() * pair.q() * &f5;
        a_op = (&raw + raw.adjoint()) * re(0.5);
        let corner = f6.adjoint() * pair.q() * &f5;
        u0 = polar_partial_isometry(&corner, &tol).isometry;
        let defect = operator_norm(&(u0.adjoint() * &u0 - identity(g)));
        if defect > tol.residual {
            return Err(Error::FrameInconsistency(format!(
                "generic corner is rank deficient (unitarity defect {defect:.3e})"
            )));
        }
        // Column phase convention: first significant entry of each u0 column
        // real positive. The phases move into the h5 frame, which conjugates
        // a_op by the same diagonal, so the reconstruction is unaffected.
        let mut phases = vec![re(1.0); g];
        for (j, slot) in phases.iter_mut().enumerate() {
            let col: CVec = u0.column(j).into_owned();
            if let Some(phase) = leading_phase(&col) {
                *slot = phase.conj();
            }
        }
        for (j, &e) in phases.iter().enumerate() {
            u0.column_mut(j).iter_mut().for_each(|z| *z *= e);
            f5.column_mut(j).iter_mut().for_each(|z| *z *= e);
        }
        for i in 0..g {
            for j in 0..g {
                a_op[(i, j)] *= phases[i].conj() * phases[j];
            }
        }
    }

    let h5 = Subspace::new(f5, tol)
        .map_err(|e| Error::FrameInconsistency(format!("generic range frame: {e}")))?;
    let h6 = Subspace::new(f6, tol)
        .map_err(|e| Error::FrameInconsistency(format!("generic null frame: {e}")))?;
    Ok(HalmosDecomposition { corners, h5, h6, a_op, u0, tol })
}

impl HalmosDecomposition {
    /// Builds a decomposition from explicit parts, validating every invariant.
    pub fn from_parts(
        corners: CornerSubspaces,
        h5: Subspace,
        h6: Subspace,
        a_op: CMat,
        u0: CMat,
        tol: Tolerance,
    ) -> Result<Self> {
        let g = h5.dim();
        if h6.dim() != g {
            return Err(Error::FrameInconsistency(format!(
                "generic frames disagree: {} vs {} directions",
                g,
                h6.dim()
            )));
        }
        if a_op.nrows() != g || a_op.ncols() != g || u0.nrows() != g || u0.ncols() != g {
            return Err(Error::FrameInconsistency(format!(
                "generic blocks must be {g}x{g}, got a_op {}x{} and u0 {}x{}",
                a_op.nrows(),
                a_op.ncols(),
                u0.nrows(),
                u0.ncols()
            )));
        }
        let frames: Vec<&CMat> = [
            &corners.h1, &corners.h2, &corners.h3, &corners.h4, &h5, &h6,
        ]
        .iter()
        .map(|s| s.frame())
        .collect();
        let stacked = hstack(&frames);
        // joint orthonormality covers mutual orthogonality of the six frames
        Subspace::new(stacked, tol)
            .map_err(|e| Error::FrameInconsistency(format!("frames not orthonormal: {e}")))?;
        let a_sym = (&a_op + a_op.adjoint()) * re(0.5);
        if g > 0 {
            let eig = hermitian_eig(&a_sym, &tol)?;
            let lo = eig.values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = eig.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo <= tol.rank_cut || hi >= 1.0 - tol.rank_cut {
                return Err(Error::Validation(format!(
                    "generic contraction spectrum [{lo:.3e}, {hi:.3e}] touches an endpoint"
                )));
            }
            let defect = operator_norm(&(u0.adjoint() * &u0 - identity(g)))
                .max(operator_norm(&(&u0 * u0.adjoint() - identity(g))));
            if defect > tol.residual {
                return Err(Error::Validation(format!("u0 unitarity defect {defect:.3e}")));
            }
        }
        Ok(Self { corners, h5, h6, a_op: a_sym, u0, tol })
    }

    pub fn corners(&self) -> &CornerSubspaces {
        &self.corners
    }

    pub fn h5(&self) -> &Subspace {
        &self.h5
    }

    pub fn h6(&self) -> &Subspace {
        &self.h6
    }

    /// Compression of the second projection to h5, in the h5 frame.
    pub fn a_op(&self) -> &CMat {
        &self.a_op
    }

    /// Unitary factor of the h6-by-h5 corner of the second projection.
    pub fn u0(&self) -> &CMat {
        &self.u0
    }

    pub fn tol(&self) -> Tolerance {
        self.tol
    }

    pub fn generic_dim(&self) -> usize {
        self.h5.dim()
    }

    /// True when the generic part is empty and the corners carry everything.
    pub fn is_degenerate(&self) -> bool {
        self.generic_dim() == 0
    }

    pub fn corner_dims(&self) -> [usize; 4] {
        self.corners.dims()
    }

    /// Dimensions of all six subspaces in order.
    pub fn dims(&self) -> [usize; 6] {
        let [d1, d2, d3, d4] = self.corner_dims();
        [d1, d2, d3, d4, self.h5.dim(), self.h6.dim()]
    }

    /// Eigenvalues of the generic contraction, descending; empty when the
    /// decomposition is degenerate.
    pub fn generic_spectrum(&self) -> Vec<f64> {
        if self.is_degenerate() {
            return Vec::new();
        }
        hermitian_eig(&self.a_op, &self.tol)
            .expect("a_op is Hermitian by construction")
            .values
    }

    /// All six frames as one square matrix, corner order then h5, h6.
    pub fn frame(&self) -> CMat {
        hstack(&[
            self.corners.h1.frame(),
            self.corners.h2.frame(),
            self.corners.h3.frame(),
            self.corners.h4.frame(),
            self.h5.frame(),
            self.h6.frame(),
        ])
    }

    /// Rebuilds the projection pair on the ambient space.
    pub fn reconstruct(&self, ambient_dim: usize) -> Result<ProjectionPair> {
        let total: usize = self.dims().iter().sum();
        if total != ambient_dim || self.h5.ambient_dim() != ambient_dim {
            return Err(Error::FrameInconsistency(format!(
                "frames span {total} directions in ambient dimension {}, expected {ambient_dim}",
                self.h5.ambient_dim()
            )));
        }
        let stacked = self.frame();
        let defect = operator_norm(&(stacked.adjoint() * &stacked - identity(ambient_dim)));
        if defect > self.tol.residual {
            return Err(Error::FrameInconsistency(format!(
                "frame stack orthonormality defect {defect:.3e}"
            )));
        }

        let f5 = self.h5.frame();
        let f6 = self.h6.frame();
        let g = self.generic_dim();

        let mut p_rec =
            self.corners.h1.projector() + self.corners.h2.projector() + f5 * f5.adjoint();
        let mut q_rec = self.corners.h1.projector() + self.corners.h3.projector();
        if g > 0 {
            let s = psd_sqrt(&self.a_op, &self.tol)?;
            let t = psd_sqrt(&(identity(g) - &self.a_op), &self.tol)?;
            // s and t commute up to roundoff; symmetrize their product
            let mixed = (&s * &t + &t * &s) * re(0.5);
            q_rec += f5 * &self.a_op * f5.adjoint()
                + f5 * (&mixed * self.u0.adjoint()) * f6.adjoint()
                + f6 * (&self.u0 * &mixed) * f5.adjoint()
                + f6 * (&self.u0 * (identity(g) - &self.a_op) * self.u0.adjoint()) * f6.adjoint();
        }
        p_rec = (&p_rec + p_rec.adjoint()) * re(0.5);
        q_rec = (&q_rec + q_rec.adjoint()) * re(0.5);
        ProjectionPair::new(p_rec, q_rec, self.tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{haar_unitary, plane_pair, random_pair, rng_for, structured_pair, PairStructure};

    fn norm_diff(a: &CMat, b: &CMat) -> f64 {
        operator_norm(&(a - b))
    }

    #[test]
    fn transverse_plane_pair_has_scalar_generic_block() {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        let pair = plane_pair(c).unwrap();
        let dec = decompose(&pair).unwrap();
        assert_eq!(dec.corner_dims(), [0, 0, 0, 0]);
        assert_eq!(dec.generic_dim(), 1);
        assert!(!dec.is_degenerate());
        assert!((dec.a_op()[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!(dec.a_op()[(0, 0)].im.abs() < 1e-14);
        let u0 = dec.u0()[(0, 0)];
        assert!((u0.re - 1.0).abs() < 1e-12 && u0.im.abs() < 1e-14);
        // h5 is the range of P, pinned to the first coordinate axis
        assert!((dec.h5().frame()[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(dec.h5().frame()[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn commuting_pair_is_degenerate_and_roundtrips_exactly() {
        let p = CMat::from_diagonal(&CVec::from_vec(vec![re(1.0), re(1.0), re(0.0), re(0.0)]));
        let q = CMat::from_diagonal(&CVec::from_vec(vec![re(1.0), re(0.0), re(1.0), re(0.0)]));
        let pair = ProjectionPair::with_defaults(p.clone(), q.clone()).unwrap();
        let dec = decompose(&pair).unwrap();
        assert!(dec.is_degenerate());
        assert_eq!(dec.dims(), [1, 1, 1, 1, 0, 0]);
        assert_eq!(dec.generic_spectrum(), Vec::<f64>::new());
        let rebuilt = dec.reconstruct(4).unwrap();
        assert!(norm_diff(rebuilt.p(), &p) < 1e-12);
        assert!(norm_diff(rebuilt.q(), &q) < 1e-12);
    }

    #[test]
    fn two_angle_pair_spectrum_matches_prescribed_cosines() {
        // cos(pi/6)^2 = 3/4 and cos(pi/3)^2 = 1/4
        let structure = PairStructure {
            corner_dims: [0; 4],
            cosines: vec![(std::f64::consts::PI / 6.0).cos(), (std::f64::consts::PI / 3.0).cos()],
        };
        let w = haar_unitary(&mut rng_for(23), 4);
        let pair = structured_pair(&structure, Some(&w), Tolerance::default()).unwrap();
        let dec = decompose(&pair).unwrap();
        assert_eq!(dec.generic_dim(), 2);
        let spectrum = dec.generic_spectrum();
        assert!((spectrum[0] - 0.75).abs() < 1e-10, "spectrum {spectrum:?}");
        assert!((spectrum[1] - 0.25).abs() < 1e-10, "spectrum {spectrum:?}");
        let angle = pair.friedrichs_angle();
        assert!((angle * angle - spectrum[0]).abs() < 1e-10);
    }

    #[test]
    fn random_pairs_roundtrip_through_decomposition() {
        for seed in [2, 9, 31] {
            let pair = random_pair(seed, 8);
            let dec = decompose(&pair).unwrap();
            let rebuilt = dec.reconstruct(8).unwrap();
            let dp = norm_diff(rebuilt.p(), pair.p());
            let dq = norm_diff(rebuilt.q(), pair.q());
            assert!(dp < 1e-9 && dq < 1e-9, "seed {seed}: dp {dp:.3e}, dq {dq:.3e}");
        }
    }

    #[test]
    fn u0_columns_carry_real_positive_leading_entries() {
        let pair = random_pair(77, 10);
        let dec = decompose(&pair).unwrap();
        for j in 0..dec.generic_dim() {
            let col: CVec = dec.u0().column(j).into_owned();
            let lead = col.iter().find(|z| z.norm() > 1e-12).unwrap();
            assert!(lead.im.abs() < 1e-10 && lead.re > 0.0, "column {j}: {lead}");
        }
    }

    #[test]
    fn from_parts_rebuilds_known_plane_geometry() {
        let tol = Tolerance::default();
        let e1 = CMat::from_column_slice(2, 1, &[re(1.0), re(0.0)]);
        let e2 = CMat::from_column_slice(2, 1, &[re(0.0), re(1.0)]);
        let corners = CornerSubspaces {
            h1: Subspace::trivial(2, tol),
            h2: Subspace::trivial(2, tol),
            h3: Subspace::trivial(2, tol),
            h4: Subspace::trivial(2, tol),
        };
        let dec = HalmosDecomposition::from_parts(
            corners,
            Subspace::new(e1, tol).unwrap(),
            Subspace::new(e2, tol).unwrap(),
            CMat::from_element(1, 1, re(0.25)),
            CMat::from_element(1, 1, re(1.0)),
            tol,
        )
        .unwrap();
        let rebuilt = dec.reconstruct(2).unwrap();
        // cosine 1/2 geometry: q = [[1/4, sqrt(3)/4], [sqrt(3)/4, 3/4]]
        let expected = plane_pair(0.5).unwrap();
        assert!(norm_diff(rebuilt.p(), expected.p()) < 1e-12);
        assert!(norm_diff(rebuilt.q(), expected.q()) < 1e-12);
    }

    #[test]
    fn from_parts_rejects_endpoint_spectrum_and_bad_unitary() {
        let tol = Tolerance::default();
        let e1 = CMat::from_column_slice(2, 1, &[re(1.0), re(0.0)]);
        let e2 = CMat::from_column_slice(2, 1, &[re(0.0), re(1.0)]);
        let corners = CornerSubspaces {
            h1: Subspace::trivial(2, tol),
            h2: Subspace::trivial(2, tol),
            h3: Subspace::trivial(2, tol),
            h4: Subspace::trivial(2, tol),
        };
        let endpoint = HalmosDecomposition::from_parts(
            corners.clone(),
            Subspace::new(e1.clone(), tol).unwrap(),
            Subspace::new(e2.clone(), tol).unwrap(),
            CMat::from_element(1, 1, re(1.0)),
            CMat::from_element(1, 1, re(1.0)),
            tol,
        );
        assert!(endpoint.is_err());
        let shrunk = HalmosDecomposition::from_parts(
            corners,
            Subspace::new(e1, tol).unwrap(),
            Subspace::new(e2, tol).unwrap(),
            CMat::from_element(1, 1, re(0.25)),
            CMat::from_element(1, 1, re(0.5)),
            tol,
        );
        assert!(shrunk.is_err());
    }

    #[test]
    fn reconstruct_rejects_mismatched_ambient_dimension() {
        let pair = plane_pair(0.5).unwrap();
        let dec = decompose(&pair).unwrap();
        assert!(matches!(dec.reconstruct(3), Err(Error::FrameInconsistency(_))));
    }
}
