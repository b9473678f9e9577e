//! Exact normal-form arithmetic for Bunce-Deddens-Toeplitz algebras, the
//! covariant derivation pipeline, and numerical GNS diagnostics.

pub mod algebra;
pub mod derivations;
pub mod error;
pub mod gns;
pub mod numerics;
pub mod profinite;
pub mod random;
pub mod scalar;
pub mod sequences;

pub use error::{Error, Result};
pub use scalar::Scalar;
