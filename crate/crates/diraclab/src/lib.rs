//! Numerical laboratory for the free Dirac operator `P0(D)` in three
//! dimensions, perturbed by a magnetic potential `A` and a pair of
//! electric potentials `(q+, q-)`.
//!
//! The crate provides, bottom up:
//!
//! * exact 4x4 spinor algebra for the symbol `P0(xi)` ([`spinor`]),
//! * limiting Carleman weights and null frames ([`weights`]),
//! * structured grids, spectral and stencil calculus ([`grid`]),
//! * a right inverse for the directional operator `zeta . grad` ([`cauchy`]),
//! * complex geometrical optics (CGO) solution builders ([`cgo`]),
//! * quadrature verification of Carleman identities ([`carleman`]),
//! * a sparse direct solver for the Dirichlet problem ([`forward`]),
//! * Fourier-mode recovery of `curl A` and of the electric potentials
//!   from interior or boundary pairings ([`inverse`]),
//! * boundary determination by concentrating solutions ([`boundary`]),
//! * scenario configuration and report writing for the CLI
//!   ([`scenario`], [`report`]).
//!
//! All fields are complex double precision throughout; grids are uniform
//! axis-aligned boxes.

pub mod boundary;
pub mod carleman;
pub mod cauchy;
pub mod cgo;
pub mod error;
pub mod forward;
pub mod grid;
pub mod inverse;
pub mod potentials;
pub mod report;
pub mod scenario;
pub mod spinor;
pub mod weights;

pub use error::{Error, Result};
