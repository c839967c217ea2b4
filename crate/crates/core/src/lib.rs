//! Numerical laboratory for phase estimation in a linear Mach-Zehnder
//! interferometer.
//!
//! Two-mode bosonic states live in a Fock basis truncated by total photon
//! number ([`fock::TwoModeState`]). Beam splitters and phase shifts conserve
//! photon number, so every optical element acts block by block through
//! Wigner rotation matrices ([`optics`]). On top of that sit exact and
//! sampled photon-counting statistics ([`measurement`]), the two
//! phase-uncertainty pipelines, error propagation and the pure-state quantum
//! Fisher information ([`estimation`]), and the four interferometer case
//! studies with CSV output ([`scenarios`]).
//!
//! Conventions used throughout:
//!
//! - `J_z = (n1 - n2)/2`, `J_x = (a†b + b†a)/2`, `J_y = (a†b - b†a)/2i`.
//! - A beam splitter is described by its mode matrix `M`, meaning the
//!   substitution `a -> M00 a + M01 b`, `b -> M10 a + M11 b` applied to the
//!   operators that create the input state.

pub mod config;
pub mod error;
pub mod estimation;
pub mod fock;
pub mod measurement;
pub mod numerics;
pub mod optics;
pub mod scenarios;
pub mod state_prep;

pub use error::{Error, Result};
pub use fock::{ComplexAmplitude, JmIndex, TwoModeState};

/// Default bound on the norm lost to Fock-space truncation.
pub const DEFAULT_EPSILON_TRUNC: f64 = 1e-10;
