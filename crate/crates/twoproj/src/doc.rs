//! Plain-data exchange documents: matrices, projection pairs, words, and
//! combinations in a JSON-friendly layout, with validating conversions to
//! the domain types.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, Tolerance};
use crate::pair::ProjectionPair;
use crate::words::{Family, HeadMode, Word, WordCombination};

/// A dense complex matrix as `rows`, `cols`, and a row-major flat list of
/// `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<[f64; 2]>,
}

impl MatrixDoc {
    pub fn from_matrix(m: &CMat) -> Self {
        let mut entries = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        Self { rows: m.nrows(), cols: m.ncols(), entries }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        if self.entries.len() != self.rows * self.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix needs {} entries, got {}",
                self.rows,
                self.cols,
                self.rows * self.cols,
                self.entries.len()
            )));
        }
        let m = CMat::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.entries[i * self.cols + j];
            Complex64::new(re, im)
        });
        crate::linalg::check_finite(&m)?;
        Ok(m)
    }
}

/// A projection pair as two matrix documents plus optional tolerance
/// overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairDoc {
    pub p: MatrixDoc,
    pub q: MatrixDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<Tolerance>,
}

impl PairDoc {
    pub fn from_pair(pair: &ProjectionPair) -> Self {
        Self {
            p: MatrixDoc::from_matrix(pair.p()),
            q: MatrixDoc::from_matrix(pair.q()),
            tol: Some(pair.tol()),
        }
    }

    /// Validates through the pair constructor; the document tolerance can be
    /// overridden by the caller.
    pub fn to_pair(&self, tol_override: Option<Tolerance>) -> Result<ProjectionPair> {
        let tol = tol_override.or(self.tol).unwrap_or_default();
        ProjectionPair::new(self.p.to_matrix()?, self.q.to_matrix()?, tol)
    }
}

fn family_name(family: Family) -> &'static str {
    match family {
        Family::Identity => "identity",
        Family::A => "a",
        Family::B => "b",
        Family::C => "c",
        Family::D => "d",
    }
}

fn parse_family(name: &str) -> Result<Family> {
    match name.to_ascii_lowercase().as_str() {
        "identity" | "i" => Ok(Family::Identity),
        "a" => Ok(Family::A),
        "b" => Ok(Family::B),
        "c" => Ok(Family::C),
        "d" => Ok(Family::D),
        other => Err(Error::Validation(format!("unknown word family '{other}'"))),
    }
}

/// One word as a family name and power.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WordDoc {
    pub family: String,
    pub k: u32,
}

impl WordDoc {
    pub fn from_word(word: Word) -> Self {
        Self { family: family_name(word.family).to_string(), k: word.k }
    }

    pub fn to_word(&self) -> Result<Word> {
        Word::new(parse_family(&self.family)?, self.k)
    }
}

/// One combination term: complex coefficient and word.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermDoc {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub family: String,
    pub k: u32,
}

/// A head coefficient, head mode, and term list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombinationDoc {
    pub lambda0: [f64; 2],
    /// `"identity"` or `"identity-minus-infimum"`.
    pub mode: String,
    pub terms: Vec<TermDoc>,
}

impl CombinationDoc {
    pub fn from_combination(comb: &WordCombination) -> Self {
        let lambda0 = comb.lambda0();
        let mode = match comb.mode() {
            HeadMode::Identity => "identity",
            HeadMode::IdentityMinusInfimum => "identity-minus-infimum",
        };
        let terms = comb
            .terms()
            .iter()
            .map(|(coeff, word)| TermDoc {
                re: coeff.re,
                im: coeff.im,
                family: family_name(word.family).to_string(),
                k: word.k,
            })
            .collect();
        Self { lambda0: [lambda0.re, lambda0.im], mode: mode.to_string(), terms }
    }

    pub fn to_combination(&self) -> Result<WordCombination> {
        let mode = match self.mode.as_str() {
            "identity" => HeadMode::Identity,
            "identity-minus-infimum" => HeadMode::IdentityMinusInfimum,
            other => {
                return Err(Error::Validation(format!(
                    "unknown head mode '{other}', expected 'identity' or 'identity-minus-infimum'"
                )))
            }
        };
        let terms = self
            .terms
            .iter()
            .map(|t| {
                Ok((
                    Complex64::new(t.re, t.im),
                    Word::new(parse_family(&t.family)?, t.k)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        WordCombination::new(
            Complex64::new(self.lambda0[0], self.lambda0[1]),
            mode,
            terms,
        )
    }
}
