//! wavetower: a deterministic desk-scale simulator of measurement as
//! wavefunction slicing.
//!
//! A massive one-body wavefunction on a 1D grid couples to photon-number
//! sectors through adsorption sites. Captured amplitude becomes first-class
//! branch ("slice") records carrying a bound marker, an outgoing photon
//! shell, a weight, and a phase. The slice ledger audits tower-wide norm
//! and energy at every step, aggregates Born statistics, measures branch
//! distinguishability, and can revive interference between slices by
//! re-emitting bound atoms.
//!
//! The `experiments` module packages five turn-key scenarios (event-time
//! measurement, two-site position measurement, phase revival, back-reaction
//! bookkeeping, and nested/fuzzy measurement with a delocalized device),
//! each emitting a structured, byte-reproducible report. The `wavetower`
//! binary drives them from TOML configs.

pub mod detector;
pub mod error;
pub mod evolve;
pub mod lattice;
pub mod tower;

pub use error::{Error, Result};
pub mod config;
pub mod experiments;
pub mod report;
