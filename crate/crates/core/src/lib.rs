//! Thermal and chemical equilibrium of interconverting ideal quantum gases.
//!
//! Interconverting species share one particle-number constraint, so the
//! whole mixture is described by a single chemical potential over the
//! joint spectrum of all species. Analytic occupation laws are checked
//! against exact canonical enumeration and Metropolis sampling.

pub mod analysis;
pub mod classical;
pub mod cli;
pub mod error;
pub mod oracle;
pub mod quantum;
pub mod sampler;
pub mod spectrum;
pub mod system;

pub use error::{Error, Result};
pub use quantum::{SolverOptions, Statistics};
pub use spectrum::{EnergyLevel, JointSpectrum, Species};
pub use system::ReactiveSystem;
