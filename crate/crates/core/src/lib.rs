//! Stability laboratory for explicit time integrators on transport problems.
//!
//! Amplification factors and energy coefficients of Runge-Kutta and
//! Adams-Bashforth schemes, shrinking-CFL predictions, scheme synthesis,
//! von Neumann stability domains, finite-difference symbols and a
//! pseudo-spectral Burgers harness that measures maximal stable time steps.

pub mod catalog;
mod dd;
pub mod error;
pub mod polyroots;
pub mod power_series;
pub mod scheme_algebra;
pub mod spectral_burgers;
pub mod scheme_constructor;
pub mod stability_domain;
pub mod transport_models;

pub use error::{Error, Result};
