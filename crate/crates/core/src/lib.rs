pub mod detectors;
pub mod error;
pub mod grid;
pub mod harness;
pub mod integrator;
pub mod ground_state;
pub mod lattice;
pub mod model;
pub mod morawetz;
pub mod nonlinearity;
pub mod operators;
pub mod random;
pub mod snapshot;

pub use error::{Error, Result};
