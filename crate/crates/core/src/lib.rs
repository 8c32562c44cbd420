//! Quantum dynamics in evolving non-orthogonal basis sets.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor_core`]: metrics, duals, index placement, matrix square roots.
//! - [`basis`]: parameter-dependent frames and their derivatives.
//! - [`ambient`]: operators on the ambient space, used as Hamiltonians.
//! - [`connection`]: Christoffel symbols, covariant derivatives, transport.
//! - [`curvature`]: Riemann tensor, Berry connection and curvature.
//! - [`propagators`]: Crank–Nicholson family, Löwdin propagator, density steps.
//! - [`forces`]: generalized eigenproblem, Hellmann–Feynman and Pulay terms.

pub mod ambient;
pub mod basis;
pub mod connection;
pub mod curvature;
pub mod error;
pub mod forces;
pub mod propagators;
pub mod tensor_core;

pub use error::{Error, Result};
