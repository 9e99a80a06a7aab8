//! Atom-optics quantum kicked rotor under spontaneous-emission decoherence.
//!
//! The crate is split along the lines of the numerical pipeline:
//!
//! * [`params`] holds the shared parameter types and the scattering
//!   probability per kick.
//! * [`propagator`] evolves a single pure-state trajectory over one kick
//!   period on a momentum lattice at fixed quasimomentum.
//! * [`ensemble`] samples initial quasimomenta, runs Monte Carlo trajectories
//!   in parallel and applies the quasimomentum-window detection filter.
//! * [`model`] evaluates the closed-form population and energy rate model.
//! * [`analysis`] fits simulated energy curves to the model, classifies
//!   momentum distributions and runs the classical standard map.
//!
//! Units: momentum `P` is normalized so that `[X, P] = i kbar`; lattice
//! momenta are `P = kbar (n + beta)` with `beta` in `[-1/2, 1/2)`. Energies are
//! `P^2 / 2` in the same units.

pub mod analysis;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod params;
pub mod propagator;
pub mod rng;

pub use error::{Error, Result};
pub use params::{ModelParams, PhysicalParams, SimParams};
