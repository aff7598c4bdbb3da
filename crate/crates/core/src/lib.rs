//! Projective iterated function systems generated by finite sets of
//! unit-determinant 2×2 matrices.

pub mod attractor;
pub mod bundled;
pub mod cli;
pub mod config;
pub mod error;
pub mod furstenberg;
pub mod geometry;
pub mod multicone;
pub mod semigroup;
pub mod spectral;
pub mod subsystems;

pub use error::{Error, Result};
pub use geometry::{ClassTag, Matrix2, NormKind, ProjPoint};
pub use semigroup::{SystemConfig, Word};
