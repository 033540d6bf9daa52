//! Brick-wall circuit approximations of lattice time-evolution operators,
//! optimized with a Riemannian trust-region method on products of unitary
//! groups.

pub mod circuit;
pub mod error;
pub mod linalg;
pub mod manifold;
pub mod models;
pub mod random;
pub mod trustregion;

pub use error::{Error, Result};
