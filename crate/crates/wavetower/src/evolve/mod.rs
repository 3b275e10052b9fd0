//! Unitary propagation of the massive field plus parametric transport of
//! photon shells.
//!
//! Two schemes are provided: a Crank-Nicolson finite-difference step
//! (exactly norm-preserving up to solver rounding, works with Dirichlet or
//! periodic ends) and a spectral split-step (periodic grids only). Photon
//! shells are analytic objects, not gridded fields; transporting them is
//! exact arithmetic.

mod propagator;
mod shell;

pub use propagator::{Propagator, PropagatorConfig, Scheme, SpongeConfig, StepOutcome};
pub use shell::{advance_shells, emission_envelope, PhotonShell, ShellGeometry};
