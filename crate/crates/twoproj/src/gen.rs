//! Seeded generation of projection pairs and smooth grid functions.
//!
//! Pairs are built from a block normal form with known corner dimensions and
//! principal angles, then conjugated by a Haar-random unitary, so sweeps can
//! target angle regimes while retaining exact ground truth. Everything is
//! deterministic given the seed.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{cx, re, CMat, CVec, Tolerance};
use crate::pair::ProjectionPair;

/// Deterministic stream cipher RNG for a 64-bit seed.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-instance seed derivation for parallel sweeps: each instance gets an
/// independent stream, and results do not depend on scheduling order.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    (base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(index)
}

pub(crate) fn standard_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    let re_part: f64 = rng.sample(StandardNormal);
    let im_part: f64 = rng.sample(StandardNormal);
    cx(re_part, im_part) * std::f64::consts::FRAC_1_SQRT_2
}

/// Complex Ginibre matrix: independent standard complex Gaussian entries.
pub fn ginibre(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| standard_complex(rng))
}

/// Haar-distributed random unitary via Gram-Schmidt on a Ginibre matrix.
/// Modified Gram-Schmidt keeps the R-factor diagonal real positive, which is
/// exactly the normalization that makes the distribution Haar.
pub fn haar_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let z = ginibre(rng, n, n);
    let mut q = CMat::zeros(n, n);
    for j in 0..n {
        let mut v: CVec = z.column(j).into_owned();
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let coef = qi.dotc(&v);
                v -= qi.into_owned() * coef;
            }
        }
        let norm = v.norm();
        q.set_column(j, &(v / re(norm)));
    }
    q
}

/// Ground-truth structure of a generated pair: corner dimensions for
/// `range∩range`, `range∩null`, `null∩range`, `null∩null`, and the principal
/// cosines of the generic part.
#[derive(Debug, Clone)]
pub struct PairStructure {
    pub corner_dims: [usize; 4],
    pub cosines: Vec<f64>,
}

impl PairStructure {
    pub fn dim(&self) -> usize {
        self.corner_dims.iter().sum::<usize>() + 2 * self.cosines.len()
    }
}

/// Builds the block normal form for a structure and conjugates it by the
/// given unitary (pass the identity for the bare normal form).
pub fn structured_pair(
    structure: &PairStructure,
    conjugator: Option<&CMat>,
    tol: Tolerance,
) -> Result<ProjectionPair> {
    let dim = structure.dim();
    if let Some(w) = conjugator {
        if w.nrows() != dim || w.ncols() != dim {
            return Err(Error::ShapeMismatch(format!(
                "conjugator is {}x{}, structure needs {dim}",
                w.nrows(),
                w.ncols()
            )));
        }
    }
    for &c in &structure.cosines {
        if !(0.0..1.0).contains(&c) {
            return Err(Error::Validation(format!(
                "principal cosine {c} outside [0, 1)"
            )));
        }
    }
    let mut p = CMat::zeros(dim, dim);
    let mut q = CMat::zeros(dim, dim);
    let mut at = 0usize;
    let [c1, c2, c3, c4] = structure.corner_dims;
    for _ in 0..c1 {
        p[(at, at)] = re(1.0);
        q[(at, at)] = re(1.0);
        at += 1;
    }
    for _ in 0..c2 {
        p[(at, at)] = re(1.0);
        at += 1;
    }
    for _ in 0..c3 {
        q[(at, at)] = re(1.0);
        at += 1;
    }
    at += c4;
    for &c in &structure.cosines {
        let s = (1.0 - c * c).sqrt();
        p[(at, at)] = re(1.0);
        q[(at, at)] = re(c * c);
        q[(at, at + 1)] = re(c * s);
        q[(at + 1, at)] = re(c * s);
        q[(at + 1, at + 1)] = re(s * s);
        at += 2;
    }
    debug_assert_eq!(at, dim);
    if let Some(w) = conjugator {
        p = w * p * w.adjoint();
        q = w * q * w.adjoint();
    }
    ProjectionPair::new(p, q, tol)
}

/// Random structure for the given dimension: a generic part is preferred,
/// the remainder is spread across the corners.
pub fn random_structure(rng: &mut ChaCha8Rng, dim: usize) -> PairStructure {
    let max_pairs = dim / 2;
    let generic_pairs = if max_pairs == 0 { 0 } else { rng.gen_range(1..=max_pairs) };
    let mut corner_dims = [0usize; 4];
    for _ in 0..dim - 2 * generic_pairs {
        corner_dims[rng.gen_range(0..4)] += 1;
    }
    let cosines = (0..generic_pairs)
        .map(|_| rng.gen_range(0.10..0.98))
        .collect();
    PairStructure { corner_dims, cosines }
}

/// Haar-conjugated random pair with a random admissible structure.
pub fn random_pair(seed: u64, dim: usize) -> ProjectionPair {
    random_pair_with_tol(seed, dim, Tolerance::default())
}

pub fn random_pair_with_tol(seed: u64, dim: usize, tol: Tolerance) -> ProjectionPair {
    sample_structured(&mut rng_for(seed), dim, tol).0
}

/// Random pair together with its ground-truth structure.
pub fn sample_structured(
    rng: &mut ChaCha8Rng,
    dim: usize,
    tol: Tolerance,
) -> (ProjectionPair, PairStructure) {
    let structure = random_structure(rng, dim);
    let w = haar_unitary(rng, dim);
    let pair = structured_pair(&structure, Some(&w), tol)
        .expect("generated structure is admissible");
    (pair, structure)
}

/// 2x2 pair in generic position with the prescribed principal cosine:
/// `P = diag(1, 0)`, `range(Q)` spanned by `(c, s)`.
pub fn plane_pair(cosine: f64) -> Result<ProjectionPair> {
    structured_pair(
        &PairStructure { corner_dims: [0; 4], cosines: vec![cosine] },
        None,
        Tolerance::default(),
    )
}
