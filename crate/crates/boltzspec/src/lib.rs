//! Spectral toolkit for the linearized hard-sphere Boltzmann operator.
//!
//! The crate discretizes the linearized collision operator L on orthonormal
//! velocity bases, forms the Fourier-mode family L_xi = L - i v.xi, and
//! provides the machinery to study it: spectra and resolvents, contour
//! spectral projectors, the hydrodynamic eigenvalue branches with their
//! small-frequency expansions, semigroup splitting with exponential remainder
//! decay, and an independent polynomially weighted discretization for
//! comparing spectra across ambient spaces.
//!
//! Start with [`basis::build_basis`] and [`collision::assemble_l`]; the
//! `boltzspec` command-line tool drives the same entry points from batch
//! configuration.

pub mod basis;
pub mod branches;
pub mod collision;
pub mod error;
pub mod fit;
pub mod fourier;
pub mod linalg;
pub mod multiindex;
pub mod quadrature;
pub mod semigroup;
pub mod weighted;

pub use error::{Error, Result};
