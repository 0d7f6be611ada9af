//! Numerical laboratory for counting bound states of Schrödinger operators
//! with Hermitian matrix-valued potentials.
//!
//! The crate is organised bottom-up:
//!
//! - [`matcore`]: dense Hermitian linear algebra and spectral functional calculus.
//! - [`timeorder`]: time-ordered matrix functions and the time-ordered Jensen gap.
//! - [`transforms`]: scalar analysis (Laplace-type transform, `E1`, semiclassical
//!   constants, the `C_a` pipeline and its one-dimensional minimisation).
//! - [`lattice`]: finite-difference realisations of `-Δ - V`, eigenvalue
//!   counting, Birman–Schwinger operators and Trotter traces.
//! - [`harness`]: instance generators, experiments and reports.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod lattice;
pub mod matcore;
pub mod timeorder;
pub mod transforms;

pub use error::{Error, Result};
pub use matcore::{C64, EigenDecomposition, HermitianMatrix, ScalarFunction};
pub use timeorder::{ScalarFunctionClass, TimeOrderedResult};
