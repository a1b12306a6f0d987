//! Toolkit for symmetric `MOD_m` circuits: the depth-2 and nested
//! block-symmetric `AND_n` constructions, circuit symmetry and rigidity
//! checking, gate supports, and periodicity analysis of the functions the
//! gates compute.

pub mod analysis;
pub mod circuit;
pub mod construct;
pub mod error;
pub mod groups;
pub mod numtheory;
pub mod symmetry;

pub use error::{Error, Result};
