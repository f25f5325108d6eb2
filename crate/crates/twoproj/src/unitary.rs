//! The canonical unitary that swaps a projection pair with the reversed
//! complement pair, plus the operator identities that make it work.
//!
//! With `T1 = P(I-Q)` and `T2 = (I-P)Q`, the polar isometries `V1`, `V2`
//! combine with the infimum projections into `U = V1 + P_R - V2 - P_N`, a
//! unitary satisfying
//!
//! ```text
//! U (Q - P_R) U* = I - P - P_N
//! U (P - P_R) U* = I - Q - P_N
//! ```
//!
//! Everything here reports residuals instead of asserting, so callers can
//! certify at their own tolerance.

use crate::halmos::HalmosDecomposition;
use crate::linalg::{
    identity, operator_abs, operator_norm, polar_partial_isometry, psd_sqrt, re, CMat,
};
use crate::pair::ProjectionPair;

/// A constructed unitary together with the residuals of its defining
/// identities.
#[derive(Debug, Clone)]
pub struct UnitaryCertificate {
    /// The unitary `V1 + P_R - V2 - P_N`.
    pub u: CMat,
    /// `‖U U* − I‖`.
    pub unitarity_residual: f64,
    /// `‖U (Q − P_R) U* − (I − P − P_N)‖`.
    pub intertwine1_residual: f64,
    /// `‖U (P − P_R) U* − (I − Q − P_N)‖`.
    pub intertwine2_residual: f64,
}

impl UnitaryCertificate {
    pub fn max_residual(&self) -> f64 {
        self.unitarity_residual
            .max(self.intertwine1_residual)
            .max(self.intertwine2_residual)
    }

    pub fn accepted(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

fn polar_isometries(pair: &ProjectionPair) -> (CMat, CMat) {
    let n = pair.dim();
    let tol = pair.tol();
    let t1 = pair.p() * (identity(n) - pair.q());
    let t2 = (identity(n) - pair.p()) * pair.q();
    (
        polar_partial_isometry(&t1, &tol).isometry,
        polar_partial_isometry(&t2, &tol).isometry,
    )
}

/// Builds the canonical unitary and measures its defining residuals.
pub fn build_unitary(pair: &ProjectionPair) -> UnitaryCertificate {
    let n = pair.dim();
    let (v1, v2) = polar_isometries(pair);
    let p_r = pair.infimum();
    let p_n = pair.complement_infimum();
    let u = &v1 + p_r - &v2 - p_n;

    let unitarity_residual = operator_norm(&(&u * u.adjoint() - identity(n)));
    let lhs1 = &u * (pair.q() - p_r) * u.adjoint();
    let rhs1 = identity(n) - pair.p() - p_n;
    let lhs2 = &u * (pair.p() - p_r) * u.adjoint();
    let rhs2 = identity(n) - pair.q() - p_n;
    UnitaryCertificate {
        u,
        unitarity_residual,
        intertwine1_residual: operator_norm(&(lhs1 - rhs1)),
        intertwine2_residual: operator_norm(&(lhs2 - rhs2)),
    }
}

/// Assembles the same unitary from decomposition data: identity on the first
/// two corners, negated identity on the last two, and on the generic part
///
/// ```text
/// Y = [ (I-A)^{1/2}        -A^{1/2} U0*          ]
///     [ -U0 A^{1/2}        -U0 (I-A)^{1/2} U0*   ]
/// ```
pub fn block_form_unitary(dec: &HalmosDecomposition) -> crate::error::Result<CMat> {
    let [d1, d2, d3, d4, g, _] = dec.dims();
    let n = dec.h5().ambient_dim();
    if d1 + d2 + d3 + d4 + 2 * g != n {
        return Err(crate::error::Error::FrameInconsistency(format!(
            "decomposition spans {} directions in ambient dimension {n}",
            d1 + d2 + d3 + d4 + 2 * g
        )));
    }
    let mut core = CMat::zeros(n, n);
    let mut at = 0;
    for _ in 0..d1 + d2 {
        core[(at, at)] = re(1.0);
        at += 1;
    }
    for _ in 0..d3 + d4 {
        core[(at, at)] = re(-1.0);
        at += 1;
    }
    if g > 0 {
        let tol = dec.tol();
        let s = psd_sqrt(dec.a_op(), &tol)?;
        let t = psd_sqrt(&(identity(g) - dec.a_op()), &tol)?;
        let u0 = dec.u0();
        core.view_mut((at, at), (g, g)).copy_from(&t);
        core.view_mut((at, at + g), (g, g)).copy_from(&(-(&s * u0.adjoint())));
        core.view_mut((at + g, at), (g, g)).copy_from(&(-(u0 * &s)));
        core.view_mut((at + g, at + g), (g, g)).copy_from(&(-(u0 * &t * u0.adjoint())));
    }
    let w = dec.frame();
    Ok(&w * core * w.adjoint())
}

/// Residual of `|T1| + |T2| = |T1*| + |T2*|`, the absolute-value identity
/// behind the power-exchange relations.
pub fn check_absolute_value_identity(pair: &ProjectionPair) -> f64 {
    let n = pair.dim();
    let t1 = pair.p() * (identity(n) - pair.q());
    let t2 = (identity(n) - pair.p()) * pair.q();
    let lhs = operator_abs(&t1) + operator_abs(&t2);
    let rhs = operator_abs(&t1.adjoint()) + operator_abs(&t2.adjoint());
    operator_norm(&(lhs - rhs))
}

/// Residuals of the power-exchange relations for the polar isometries:
/// first `(Vi*)² Vi = |Ti| = Vi* Vi²`, then `Vi² Vi* = |Ti*| = Vi (Vi*)²`,
/// maximized over both factors.
pub fn check_power_exchange(pair: &ProjectionPair) -> (f64, f64) {
    let n = pair.dim();
    let t1 = pair.p() * (identity(n) - pair.q());
    let t2 = (identity(n) - pair.p()) * pair.q();
    let (v1, v2) = polar_isometries(pair);
    let mut lower = 0.0_f64;
    let mut upper = 0.0_f64;
    for (t, v) in [(&t1, &v1), (&t2, &v2)] {
        let abs_t = operator_abs(t);
        let abs_t_adj = operator_abs(&t.adjoint());
        let va = v.adjoint();
        lower = lower
            .max(operator_norm(&(&va * &va * v - &abs_t)))
            .max(operator_norm(&(&va * v * v - &abs_t)));
        upper = upper
            .max(operator_norm(&(v * v * &va - &abs_t_adj)))
            .max(operator_norm(&(v * &va * &va - &abs_t_adj)));
    }
    (lower, upper)
}

/// Largest norm among the six annihilation products
/// `V1* P_R`, `V2* P_N`, `V1* V2`, `V1* P_N`, `P_R V2`, `P_R P_N`.
pub fn annihilation_residual(pair: &ProjectionPair) -> f64 {
    let (v1, v2) = polar_isometries(pair);
    let p_r = pair.infimum();
    let p_n = pair.complement_infimum();
    [
        v1.adjoint() * p_r,
        v2.adjoint() * p_n,
        v1.adjoint() * &v2,
        v1.adjoint() * p_n,
        p_r * &v2,
        p_r * p_n,
    ]
    .iter()
    .map(operator_norm)
    .fold(0.0, f64::max)
}

/// Stacks a pair and its reversed complements into one report-friendly bundle:
/// the unitary conjugates `(Q - P_R, P - P_R)` onto
/// `(I - P - P_N, I - Q - P_N)`, which is what makes the two angle
/// computations agree.
pub fn conjugation_consequence_residual(pair: &ProjectionPair) -> f64 {
    let angle = pair.friedrichs_angle();
    let swapped = pair.swapped_complements().friedrichs_angle();
    (angle - swapped).abs()
}
