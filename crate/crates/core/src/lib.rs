//! Simulation and analysis of polarization-entanglement distribution over
//! drifting fiber links.
//!
//! The crate models a deployed fiber as a wavelength- and time-dependent
//! Poincaré rotation field, a probabilistic `|Phi+>` pair source with
//! rate-dependent white noise, coincidence detection in eight linear-basis
//! mode pairs, the fidelity bounds derivable from those counts, and a
//! threshold-gated automated polarization compensator with uptime
//! accounting.

pub mod error;
pub mod polarization;

pub use error::{Error, Result};
pub mod apc;
pub mod bounds;
pub mod channel;
pub mod dispersion;
pub mod experiments;
pub mod rng;
pub mod source;

mod table;
