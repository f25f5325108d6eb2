//! Numerical toolkit for the geometry of two orthogonal projections.

pub mod doc;
pub mod error;
pub mod gen;
pub mod grid;
pub mod halmos;
pub mod linalg;
pub mod pair;
pub mod par;
pub mod unitary;
pub mod words;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use grid::{GridMatrixFunction, GridPair, GridSpec, ModelVariant};
pub use halmos::HalmosDecomposition;
pub use linalg::{CMat, CVec, Subspace, Tolerance};
pub use pair::{AngleSymmetry, CornerSubspaces, IterativeInfimum, ProjectionPair};
pub use unitary::UnitaryCertificate;
pub use words::{Family, HeadMode, RepresentationSpec, Word, WordCombination};
