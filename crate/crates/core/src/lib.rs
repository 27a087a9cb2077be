//! Particle and PDE laboratory for the mean-field limit of multi-species,
//! moderately interacting stochastic particle systems.
//!
//! The crate simulates three synchronously coupled dynamics:
//!
//! * the interacting `N`-particle system driven by mollified Riesz kernels
//!   and a cut-off nonlinearity,
//! * the intermediate McKean–Vlasov system driven by the mollified
//!   cross-diffusion PDE,
//! * the limit McKean–Vlasov system driven by the limit cross-diffusion PDE,
//!
//! and measures the observables that control their distance: stopping
//! times, stopped moments, law-of-large-numbers deviation sets, exceedance
//! probabilities, coupling-error moments and chaos statistics.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod kernels;
pub mod nonlinearity;
pub mod particles;
pub mod potential;

mod jet;
mod linalg;
mod quadrature;

pub use error::{Error, Result};
