//! Spectral toolkit for generalized indefinite strings.
//!
//! A generalized indefinite string is a triple `(L, omega, upsilon)`: a length
//! `L` in `(0, inf]`, a real distribution `omega` given through its
//! left-continuous anti-derivative `w`, and a nonnegative Borel measure
//! `upsilon` on `[0, L)`. The associated spectral problem is
//!
//! ```text
//! -f'' = z omega f + z^2 upsilon f      on [0, L)
//! ```
//!
//! and all spectral information is carried by the Weyl function `m`, a
//! Herglotz function determined by the coefficients.
//!
//! The crate covers five areas:
//!
//! * [`model`]: coefficient data types (piecewise-constant `w`, atomic
//!   `upsilon`, analytic tails) and condition functionals for the
//!   square-integrability classes used elsewhere.
//! * [`solve`]: the direct problem. Exact transfer-matrix propagation of the
//!   fundamental system, Weyl functions, eigenvalue location, residues and
//!   spectral measures.
//! * [`trace`]: trace formulas relating coefficient integrals to spectral
//!   data, transmission coefficients, relative Wronskians, Lieb-Thirring
//!   bounds, Szego-type integrals and identities for meromorphic functions
//!   of Cartwright class.
//! * [`transform`]: structure-preserving maps. Strings to canonical systems
//!   and back, elementary Weyl transformations, Krein-string shifts and
//!   doublings, Dirac reductions and the change of variables connecting the
//!   Camassa-Holm equation to strings.
//! * [`flow`]: the conservative multi-peakon flow. Finite inverse spectral
//!   transform, isospectral evolution, field reconstruction, energy
//!   functionals and weak-form residuals.
//!
//! The crate is `no_std` (with `alloc`); all transcendental functions are
//! taken from `libm` through `num-traits`.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod err;
pub mod model;
pub mod poly;
pub mod quad;
pub mod solve;
pub mod special;
pub mod trace;
pub mod transform;
pub mod flow;

pub use err::{Error, Result};

/// Complex scalar used throughout.
pub type Complex = num_complex::Complex<f64>;
