//! Word families in the deflated letters `P - P_R` and `Q - P_R`, their
//! product calculus and norm formulas, the two norm lower bounds, and norm
//! transport under representations.
//!
//! Every alternating product of the two letters collapses to one of four
//! families, indexed by a power `k`:
//!
//! ```text
//! A_k = [(P-P_R)(Q-P_R)]^k          B_k = A_k (P-P_R)
//! C_k = [(Q-P_R)(P-P_R)]^k = A_k*   D_k = C_k (Q-P_R)
//! ```
//!
//! with the convention `A_0 = C_0 = I`. Products reduce by letter
//! concatenation with idempotent absorption, which is what
//! [`reduce_product`] implements.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridMatrixFunction, GridPair};
use crate::linalg::{identity, operator_norm, re, CMat, Tolerance};
use crate::pair::ProjectionPair;

/// Tolerance for the norm-one hypothesis of the lower-bound lemmas. Looser
/// than arithmetic tolerance because the hypothesis is an exact-value
/// condition on a computed norm.
pub const HYPOTHESIS_TOL: f64 = 1e-8;

/// The four reduced families plus the formal identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Identity,
    A,
    B,
    C,
    D,
}

/// One reduced word: a family and a power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Word {
    pub family: Family,
    pub k: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Letter {
    P,
    Q,
}

impl Letter {
    fn other(self) -> Self {
        match self {
            Letter::P => Letter::Q,
            Letter::Q => Letter::P,
        }
    }
}

impl Word {
    pub fn new(family: Family, k: u32) -> Result<Self> {
        let word = Self { family, k };
        word.validate()?;
        Ok(word)
    }

    pub fn identity() -> Self {
        Self { family: Family::Identity, k: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == Family::Identity && self.k != 0 {
            return Err(Error::Validation(format!(
                "identity word must have power 0, got {}",
                self.k
            )));
        }
        Ok(())
    }

    /// True when the word equals the identity operator, including the `k = 0`
    /// convention for the A and C families.
    pub fn is_identity(&self) -> bool {
        match self.family {
            Family::Identity => true,
            Family::A | Family::C => self.k == 0,
            Family::B | Family::D => false,
        }
    }

    /// Alternating-string form: starting letter and total letter count.
    fn letters(&self) -> (Letter, u64) {
        let k = u64::from(self.k);
        match self.family {
            Family::Identity => (Letter::P, 0),
            Family::A => (Letter::P, 2 * k),
            Family::B => (Letter::P, 2 * k + 1),
            Family::C => (Letter::Q, 2 * k),
            Family::D => (Letter::Q, 2 * k + 1),
        }
    }

    fn from_letters(start: Letter, len: u64) -> Result<Self> {
        let k = len / 2;
        if k > u64::from(u32::MAX) {
            return Err(Error::Validation(format!(
                "reduced word power {k} exceeds the supported range"
            )));
        }
        let k = k as u32;
        let family = match (start, len % 2) {
            (_, _) if len == 0 => Family::A,
            (Letter::P, 0) => Family::A,
            (Letter::P, _) => Family::B,
            (Letter::Q, 0) => Family::C,
            (Letter::Q, _) => Family::D,
        };
        Ok(Self { family, k })
    }
}

/// Reduces a product of words to a single word, using that both letters are
/// idempotent. The identity result is normalized to `A` with power 0.
pub fn reduce_product(words: &[Word]) -> Result<Word> {
    if words.is_empty() {
        return Err(Error::Validation("cannot reduce an empty word list".into()));
    }
    let mut acc: (Letter, u64) = (Letter::P, 0);
    for word in words {
        word.validate()?;
        let next = word.letters();
        acc = concat_strings(acc, next);
    }
    Word::from_letters(acc.0, acc.1)
}

fn concat_strings(a: (Letter, u64), b: (Letter, u64)) -> (Letter, u64) {
    if a.1 == 0 {
        return b;
    }
    if b.1 == 0 {
        return a;
    }
    let a_end = if a.1 % 2 == 1 { a.0 } else { a.0.other() };
    // adjacent equal letters merge because the letters are idempotent
    let len = if a_end == b.0 { a.1 + b.1 - 1 } else { a.1 + b.1 };
    (a.0, len)
}

/// The word evaluated on explicit letter matrices. Both letters must be
/// square of equal size; they are meant to be the projections `P - P_R` and
/// `Q - P_R` of some pair, but any pair of operators works for testing.
pub fn word_matrix_with_letters(p_letter: &CMat, q_letter: &CMat, w: &Word) -> Result<CMat> {
    w.validate()?;
    let n = p_letter.nrows();
    if p_letter.ncols() != n || q_letter.nrows() != n || q_letter.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "letters must be square of equal size, got {}x{} and {}x{}",
            p_letter.nrows(),
            p_letter.ncols(),
            q_letter.nrows(),
            q_letter.ncols()
        )));
    }
    let (start, len) = w.letters();
    let mut out = identity(n);
    let mut current = start;
    for _ in 0..len {
        let factor = match current {
            Letter::P => p_letter,
            Letter::Q => q_letter,
        };
        out *= factor;
        current = current.other();
    }
    Ok(out)
}

/// The word evaluated on a pair, with `P_R` its infimum.
pub fn word_matrix(pair: &ProjectionPair, w: &Word) -> Result<CMat> {
    let p_letter = pair.p() - pair.infimum();
    let q_letter = pair.q() - pair.infimum();
    word_matrix_with_letters(&p_letter, &q_letter, w)
}

/// Norm of a word via the closed forms
///
/// ```text
/// ‖A_k‖ = ‖C_k‖ = a₁^(2k-1)    ‖B_k‖ = ‖D_k‖ = a₁^(2k)     (k ≥ 1)
/// ```
///
/// where `a₁` is the Friedrichs cosine of the pair. Powers `k = 0` fall back
/// to the direct projection norms.
pub fn word_norm(pair: &ProjectionPair, w: &Word) -> Result<f64> {
    w.validate()?;
    let value = if w.is_identity() {
        if pair.dim() == 0 {
            0.0
        } else {
            1.0
        }
    } else if w.k == 0 {
        // B_0 = P - P_R and D_0 = Q - P_R are projections
        let letter = match w.family {
            Family::B => pair.p() - pair.infimum(),
            Family::D => pair.q() - pair.infimum(),
            _ => unreachable!("k = 0 non-identity words are B or D"),
        };
        operator_norm(&letter)
    } else {
        let a1 = pair.friedrichs_angle();
        let exponent = match w.family {
            Family::A | Family::C => 2.0 * f64::from(w.k) - 1.0,
            Family::B | Family::D => 2.0 * f64::from(w.k),
            Family::Identity => unreachable!("identity handled above"),
        };
        a1.powf(exponent)
    };
    debug_assert!(
        {
            let direct = operator_norm(&word_matrix(pair, w)?);
            (direct - value).abs() <= 1e-8 * value.max(1.0)
        },
        "closed-form norm diverged from the assembled matrix norm"
    );
    Ok(value)
}

/// How the scalar head of a combination multiplies into the space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadMode {
    /// `lambda0 * I`.
    Identity,
    /// `lambda0 * (I - P_R)`, the head of the second lower bound.
    IdentityMinusInfimum,
}

/// A scalar head plus a finite linear combination of non-identity words.
#[derive(Debug, Clone)]
pub struct WordCombination {
    lambda0: Complex64,
    mode: HeadMode,
    terms: Vec<(Complex64, Word)>,
}

impl WordCombination {
    /// Validates that no term is an identity word (the head carries the
    /// identity component).
    pub fn new(
        lambda0: Complex64,
        mode: HeadMode,
        terms: Vec<(Complex64, Word)>,
    ) -> Result<Self> {
        for (_, word) in &terms {
            word.validate()?;
            if word.is_identity() {
                return Err(Error::Validation(
                    "identity words belong in the head coefficient, not the terms".into(),
                ));
            }
        }
        Ok(Self { lambda0, mode, terms })
    }

    /// A single word as a combination: identity words go to the head.
    pub fn single(word: Word) -> Result<Self> {
        word.validate()?;
        if word.is_identity() {
            Self::new(re(1.0), HeadMode::Identity, Vec::new())
        } else {
            Self::new(re(0.0), HeadMode::Identity, vec![(re(1.0), word)])
        }
    }

    pub fn lambda0(&self) -> Complex64 {
        self.lambda0
    }

    pub fn mode(&self) -> HeadMode {
        self.mode
    }

    pub fn terms(&self) -> &[(Complex64, Word)] {
        &self.terms
    }

    fn term_words(&self) -> Vec<Word> {
        self.terms.iter().map(|(_, w)| *w).collect()
    }
}

fn assemble_with_letters(
    p_letter: &CMat,
    q_letter: &CMat,
    head: &CMat,
    comb: &WordCombination,
) -> Result<CMat> {
    let mut out = head * comb.lambda0;
    for (coeff, word) in comb.terms() {
        out += word_matrix_with_letters(p_letter, q_letter, word)? * *coeff;
    }
    Ok(out)
}

/// Assembles the combination on a pair: head times `I` or `I - P_R`, plus the
/// weighted word matrices.
pub fn combination_matrix(pair: &ProjectionPair, comb: &WordCombination) -> Result<CMat> {
    let n = pair.dim();
    let head = match comb.mode() {
        HeadMode::Identity => identity(n),
        HeadMode::IdentityMinusInfimum => identity(n) - pair.infimum(),
    };
    let p_letter = pair.p() - pair.infimum();
    let q_letter = pair.q() - pair.infimum();
    assemble_with_letters(&p_letter, &q_letter, &head, comb)
}

/// Operator norm of the assembled combination.
pub fn combination_norm(pair: &ProjectionPair, comb: &WordCombination) -> Result<f64> {
    Ok(operator_norm(&combination_matrix(pair, comb)?))
}

/// One inequality outcome: left side, right side, and the slack granted for
/// an inexact hypothesis.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Outcome of both norm lower bounds on one combination.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LowerBoundReport {
    /// Norm of the reduced product of the term words.
    pub product_norm: f64,
    /// Whether that norm is 1 within [`HYPOTHESIS_TOL`].
    pub hypothesis_met: bool,
    pub hypothesis_tol: f64,
    /// `‖PQ - QP‖`, the second bound needs it nonzero.
    pub commutator_norm: f64,
    /// `|Σ λ_i| ≤ ‖Σ λ_i X_i‖` over the terms, when the hypothesis holds.
    pub sum_bound: Option<BoundCheck>,
    /// `|λ0| ≤ ‖λ0 (I - P_R) + Σ λ_i X_i‖`, when additionally `PQ ≠ QP`.
    pub head_bound: Option<BoundCheck>,
}

impl LowerBoundReport {
    /// A report fails only when a bound was applicable and violated.
    pub fn pass(&self) -> bool {
        self.sum_bound.is_none_or(|b| b.pass) && self.head_bound.is_none_or(|b| b.pass)
    }
}

/// Slack for an inexact norm-one hypothesis: if the product norm misses 1 by
/// `deficit`, the extremal spectral point backing the bound moves by at most
/// `2 * deficit`, and each term's value at that point drifts by at most its
/// coefficient times `(k + 2)` times the move. A fixed arithmetic floor is
/// added on top.
fn hypothesis_slack(deficit: f64, comb: &WordCombination) -> f64 {
    let weight: f64 = comb
        .terms()
        .iter()
        .map(|(coeff, word)| coeff.norm() * (f64::from(word.k) + 2.0))
        .sum();
    2.0 * deficit * weight + 1e-10
}

/// Evaluates both lower bounds on a combination, reporting hypotheses and
/// inequality sides; inapplicable bounds are omitted rather than failed.
pub fn check_lower_bounds(pair: &ProjectionPair, comb: &WordCombination) -> Result<LowerBoundReport> {
    let words = comb.term_words();
    let product_norm = if words.is_empty() {
        // empty product is the identity
        if pair.dim() == 0 {
            0.0
        } else {
            1.0
        }
    } else {
        word_norm(pair, &reduce_product(&words)?)?
    };
    let deficit = (product_norm - 1.0).abs();
    let hypothesis_met = deficit <= HYPOTHESIS_TOL;
    let commutator_norm = operator_norm(&(pair.p() * pair.q() - pair.q() * pair.p()));

    let mut sum_bound = None;
    let mut head_bound = None;
    if hypothesis_met {
        let slack = hypothesis_slack(deficit, comb);
        let sum: Complex64 = comb.terms().iter().map(|(c, _)| *c).sum();
        let sum_only =
            WordCombination::new(re(0.0), HeadMode::Identity, comb.terms().to_vec())?;
        let rhs = combination_norm(pair, &sum_only)?;
        let lhs = sum.norm();
        sum_bound = Some(BoundCheck { lhs, rhs, slack, pass: lhs <= rhs + slack });

        if commutator_norm > pair.tol().residual {
            let head_comb = WordCombination::new(
                comb.lambda0(),
                HeadMode::IdentityMinusInfimum,
                comb.terms().to_vec(),
            )?;
            let rhs = combination_norm(pair, &head_comb)?;
            let lhs = comb.lambda0().norm();
            head_bound = Some(BoundCheck { lhs, rhs, slack, pass: lhs <= rhs + slack });
        }
    }
    Ok(LowerBoundReport {
        product_norm,
        hypothesis_met,
        hypothesis_tol: HYPOTHESIS_TOL,
        commutator_norm,
        sum_bound,
        head_bound,
    })
}

// ── representations ─────────────────────────────────────────────────────────

/// One representation constructor.
#[derive(Debug, Clone)]
pub enum RepKind {
    Identity,
    /// Conjugation by a unitary.
    Conjugation(CMat),
    /// Tensoring with an identity of the given multiplicity.
    Ampliation(usize),
    /// Pointwise evaluation of a grid operand; the sample count must match
    /// the operand's grid.
    GridEvaluation(usize),
}

/// An ordered composition of representation constructors.
#[derive(Debug, Clone, Default)]
pub struct RepresentationSpec {
    steps: Vec<RepKind>,
}

impl RepresentationSpec {
    pub fn identity() -> Self {
        Self { steps: Vec::new() }
    }

    pub fn conjugation(u: CMat) -> Self {
        Self { steps: vec![RepKind::Conjugation(u)] }
    }

    pub fn ampliation(m: usize) -> Self {
        Self { steps: vec![RepKind::Ampliation(m)] }
    }

    pub fn grid_evaluation(n_samples: usize) -> Self {
        Self { steps: vec![RepKind::GridEvaluation(n_samples)] }
    }

    /// Appends another constructor, applied after the existing ones.
    pub fn then(mut self, next: RepKind) -> Self {
        self.steps.push(next);
        self
    }

    pub fn steps(&self) -> &[RepKind] {
        &self.steps
    }
}

/// What a representation is applied to.
#[derive(Debug, Clone, Copy)]
pub enum Operand<'a> {
    Finite(&'a ProjectionPair),
    Grid(&'a GridPair),
}

/// A finite-dimensional pair pushed through a representation, together with
/// the two infima that the transport theory compares.
#[derive(Debug, Clone)]
pub struct FiniteTransport {
    /// The transported pair; its own infimum is `P_{Rπ}`.
    pub pair: ProjectionPair,
    /// Infimum computed in the representation space.
    pub p_r_pi: CMat,
    /// The source infimum pushed through the representation.
    pub transported_infimum: CMat,
    /// `P_{Rπ} - π(P_R)`; a projection, zero exactly when the representation
    /// preserves the infimum.
    pub tilde_p_r: CMat,
}

/// A grid operand under pointwise evaluation. The source module infimum is
/// taken to be zero, which is the regime the bundled model pairs realize, so
/// the gap projection equals the pointwise infimum.
#[derive(Debug, Clone)]
pub struct GridTransport {
    pub pair: GridPair,
    pub p_r_pi: GridMatrixFunction,
    pub tilde_p_r: GridMatrixFunction,
}

/// Result of [`apply_representation`].
// Transient return value, never stored in bulk, so the variant size gap is harmless.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone)]
pub enum Transported {
    Finite(FiniteTransport),
    Grid(GridTransport),
}

fn conjugation_is_unitary(u: &CMat, tol: &Tolerance) -> Result<()> {
    if u.nrows() != u.ncols() {
        return Err(Error::SpecMismatch(format!(
            "conjugation matrix is {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    let defect = operator_norm(&(u.adjoint() * u - identity(u.ncols())));
    if defect > tol.residual {
        return Err(Error::SpecMismatch(format!(
            "conjugation matrix is not unitary: defect {defect:.3e}"
        )));
    }
    Ok(())
}

/// Pushes an operand through the representation and computes the two infima
/// the transport comparison needs.
pub fn apply_representation(spec: &RepresentationSpec, operand: Operand) -> Result<Transported> {
    match operand {
        Operand::Finite(pair) => {
            let tol = pair.tol();
            let mut p = pair.p().clone();
            let mut q = pair.q().clone();
            let mut inf = pair.infimum().clone();
            for step in spec.steps() {
                match step {
                    RepKind::Identity => {}
                    RepKind::Conjugation(u) => {
                        conjugation_is_unitary(u, &tol)?;
                        if u.nrows() != p.nrows() {
                            return Err(Error::SpecMismatch(format!(
                                "conjugation acts on dimension {}, operand has {}",
                                u.nrows(),
                                p.nrows()
                            )));
                        }
                        p = u * p * u.adjoint();
                        q = u * q * u.adjoint();
                        inf = u * inf * u.adjoint();
                    }
                    RepKind::Ampliation(m) => {
                        if *m == 0 {
                            return Err(Error::SpecMismatch(
                                "ampliation multiplicity must be at least 1".into(),
                            ));
                        }
                        let eye = identity(*m);
                        p = p.kronecker(&eye);
                        q = q.kronecker(&eye);
                        inf = inf.kronecker(&eye);
                    }
                    RepKind::GridEvaluation(_) => {
                        return Err(Error::SpecMismatch(
                            "grid evaluation applies to grid operands only".into(),
                        ));
                    }
                }
            }
            let transported = ProjectionPair::new(p, q, tol)?;
            let p_r_pi = transported.infimum().clone();
            let tilde_p_r = &p_r_pi - &inf;
            Ok(Transported::Finite(FiniteTransport {
                pair: transported,
                p_r_pi,
                transported_infimum: inf,
                tilde_p_r,
            }))
        }
        Operand::Grid(grid_pair) => {
            for step in spec.steps() {
                match step {
                    RepKind::Identity => {}
                    RepKind::GridEvaluation(n_samples) => {
                        if *n_samples != grid_pair.grid().n_samples() {
                            return Err(Error::SpecMismatch(format!(
                                "grid evaluation expects {} samples, operand has {}",
                                n_samples,
                                grid_pair.grid().n_samples()
                            )));
                        }
                    }
                    RepKind::Conjugation(_) | RepKind::Ampliation(_) => {
                        return Err(Error::SpecMismatch(
                            "only identity and grid evaluation apply to grid operands".into(),
                        ));
                    }
                }
            }
            let p_r_pi = crate::grid::pointwise_infimum(grid_pair);
            Ok(Transported::Grid(GridTransport {
                pair: grid_pair.clone(),
                p_r_pi: p_r_pi.clone(),
                tilde_p_r: p_r_pi,
            }))
        }
    }
}

/// Norm comparison across a representation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct NormTransportReport {
    /// `‖T‖` assembled on the source side with its own infimum.
    pub source_norm: f64,
    /// `‖T‖` assembled on the target side with the representation-space
    /// infimum `P_{Rπ}`.
    pub target_norm: f64,
    /// `|source - target|`.
    pub residual: f64,
    /// Norm of the image `π(T)`, assembled with the pushed-through infimum
    /// `π(P_R)`; equals the source norm whenever the representation is
    /// faithful.
    pub image_norm: f64,
    /// `‖P_{Rπ} - π(P_R)‖`.
    pub gap_projection_norm: f64,
    /// Grid spacing for grid operands.
    pub grid_delta: Option<f64>,
    /// True for the exactly norm-preserving constructors (identity,
    /// conjugation, ampliation); false for grid evaluation, where the
    /// residual is a discretization effect of order delta squared.
    pub exact_spec: bool,
}

/// Compares combination norms on both sides of a representation.
pub fn check_norm_transport(
    spec: &RepresentationSpec,
    operand: Operand,
    comb: &WordCombination,
) -> Result<NormTransportReport> {
    match (operand, apply_representation(spec, operand)?) {
        (Operand::Finite(pair), Transported::Finite(transport)) => {
            let source_norm = combination_norm(pair, comb)?;
            let target_norm = combination_norm(&transport.pair, comb)?;
            let n = transport.pair.dim();
            let head = match comb.mode() {
                HeadMode::Identity => identity(n),
                HeadMode::IdentityMinusInfimum => identity(n) - &transport.transported_infimum,
            };
            let p_letter = transport.pair.p() - &transport.transported_infimum;
            let q_letter = transport.pair.q() - &transport.transported_infimum;
            let image = assemble_with_letters(&p_letter, &q_letter, &head, comb)?;
            Ok(NormTransportReport {
                source_norm,
                target_norm,
                residual: (source_norm - target_norm).abs(),
                image_norm: operator_norm(&image),
                gap_projection_norm: operator_norm(&transport.tilde_p_r),
                grid_delta: None,
                exact_spec: true,
            })
        }
        (Operand::Grid(grid_pair), Transported::Grid(transport)) => {
            let grid = grid_pair.grid();
            let n_samples = grid.n_samples();
            let eye = identity(2);
            let norms = crate::par::map_range(n_samples, |j| -> Result<(f64, f64)> {
                let p = grid_pair.p().value(j);
                let q = grid_pair.q().value(j);
                let inf = transport.p_r_pi.value(j);
                // source side: the module infimum is zero, letters are raw
                let source = assemble_with_letters(p, q, &eye, comb)?;
                let target_head = match comb.mode() {
                    HeadMode::Identity => eye.clone(),
                    HeadMode::IdentityMinusInfimum => &eye - inf,
                };
                let target =
                    assemble_with_letters(&(p - inf), &(q - inf), &target_head, comb)?;
                Ok((operator_norm(&source), operator_norm(&target)))
            });
            let mut source_norm = 0.0_f64;
            let mut target_norm = 0.0_f64;
            for entry in norms {
                let (s, t) = entry?;
                source_norm = source_norm.max(s);
                target_norm = target_norm.max(t);
            }
            Ok(NormTransportReport {
                source_norm,
                target_norm,
                residual: (source_norm - target_norm).abs(),
                image_norm: source_norm,
                gap_projection_norm: crate::grid::sup_norm(&transport.tilde_p_r),
                grid_delta: Some(grid.delta()),
                exact_spec: false,
            })
        }
        _ => unreachable!("apply_representation preserves the operand flavor"),
    }
}
