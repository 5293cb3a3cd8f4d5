//! Numerical laboratory for companion-law conservation in systems of
//! conservation laws `d_a G_ia(u) = 0`.
//!
//! The crate samples fields on uniform space-time grids, mollifies them with
//! discrete bump kernels and measures the quantities that decide whether an
//! entropy/energy companion law `d_a Q_a(u) = 0` survives for a weak solution:
//! Besov and Besov-VMO moduli, mollified gradients, flux commutators
//! `G(u * eta) - G(u) * eta`, the mollified companion residual and the
//! distributional companion residual.

pub mod error;
pub mod field;
pub mod generators;
pub mod mollify;
pub mod analysis;
pub mod parallel;
pub mod systems;

pub use error::{Error, Result};
