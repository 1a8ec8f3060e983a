//! Simulation library for a harmonic-oscillator flywheel charged by a
//! two-qubit heat engine and stabilized by continuous two-quadrature
//! monitoring with signal feedback.
//!
//! Layers, bottom up:
//! - [`fock`]: truncated Fock-space operators and states
//! - [`engine`]: two-qubit engine reduced to an effective negative-temperature bath
//! - [`lindblad`]: unconditional generators, propagation, steady states, moments
//! - [`sme`]: conditional stochastic master equation and trajectory ensembles
//! - [`steady`]: closed-form steady state, threshold, efficiency surface
//! - [`energy`]: steady-state heat and power currents
//! - [`tripartite`]: full engine-plus-oscillator model and the classically driven engine

pub mod control;
pub mod energy;
pub mod engine;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod lindblad;
pub mod sme;
pub mod steady;
pub mod tripartite;

pub type C64 = num_complex::Complex64;

pub use control::ControlSpec;
pub use engine::{EffectiveBath, EngineSpec};
pub use error::{ErrorClass, FlywheelError, Result};
pub use fock::{ComplexMatrix, DensityMatrix, FockSpace};
