//! Core algorithms for networked SIS epidemics over time-varying graphs.
//!
//! The crate simulates the discrete-time susceptible-infected-susceptible
//! model with mutating rates and interconnections, certifies global
//! exponential stability of the healthy state along two routes (pointwise
//! spectral radius on symmetric homogeneous systems, and a slow-variation
//! argument backed by discrete Lyapunov equations for heterogeneous
//! directed systems), and runs the data-driven healing-rate controllers
//! that eradicate the epidemic.
//!
//! Module map:
//! - [`model`]: system data types, assumption checks, state matrices
//! - [`dynamics`]: the Euler update, simulation engine, decay fitting
//! - [`spectral`]: spectral radius, Lyapunov solves, slow-variation bounds
//! - [`stability`]: executable stability certificates and Lyapunov-decrease
//!   verifiers
//! - [`mitigation`]: saturated healing-rate controllers and their
//!   hypothesis checkers
//! - [`netgen`]: bouncing-agent mobility, proximity graphs, scenario
//!   construction

pub mod dynamics;
pub mod error;
pub mod mitigation;
pub mod model;
pub mod netgen;
pub mod spectral;
pub mod stability;

pub use error::{Error, Result};
pub use model::{EpidemicState, ModelSequence, ModelStep};

/// Re-exported so downstream crates use the same matrix types.
pub use nalgebra;
