//! Executable axiomatic thermodynamics.
//!
//! Systems are finite sets of atoms; processes are footprints recording the
//! initial state, final state and work for each involved atom. On top of
//! that algebra the crate derives internal energy, heat, reservoir
//! temperatures (via Carnot processes) and entropy (via reversible
//! sequences), and checks the laws of thermodynamics against concrete models:
//! the ideal gas and heat reservoirs.

pub mod carnot;
pub mod energy;
pub mod entropy;
pub mod error;
pub mod export;
pub mod gas;
pub mod process;
pub mod quadrature;
pub mod quasistatic;
pub mod reservoir;
pub mod scaling;
pub mod system;
pub mod tolerance;

pub use energy::{EnergyLedger, Reach, WorkCatalog};
pub use error::{Result, ThermoError};
pub use gas::{GasAtom, GasModel, GasState};
pub use process::{Entry, JointState, Process, StateValue};
pub use quasistatic::QuasistaticFamily;
pub use reservoir::Reservoir;
pub use system::{AtomId, AtomKind, System, World};
pub use tolerance::Tolerances;
