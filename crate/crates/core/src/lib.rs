//! Quantum-style market models on truncated bosonic Fock spaces.

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod fpl;
pub mod meanfield;
pub mod models;
pub mod numerics;
pub mod price_ladder;
pub mod stochastic;
pub mod timeseries;

pub use error::{Error, Result};
pub use fock::{FockSpace, LadderKind, MatrixOperator, ModeLabel, NumberState};
pub use timeseries::TimeSeries;
