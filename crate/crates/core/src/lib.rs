//! GNSS position corrections from pseudorange residuals with a permutation-invariant
//! set-transformer network.
//!
//! An epoch's measurements are linearized about an initial position guess; each
//! satellite contributes one `[residual, line-of-sight]` row, and the network maps the
//! row set to a NED correction of the guess. The crate also carries everything needed
//! to reproduce the experiments: a GPS constellation and trajectory simulator, a WLS
//! baseline, dataset ingestion and splitting, error reporting and experiment drivers.

pub mod dataset_io;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod featurize;
pub mod geodesy;
pub mod harness;
pub mod nn;
pub mod rng;
pub mod sim;
pub mod wls;

pub use error::{Error, Result};
pub use exec::Parallelism;
pub use geodesy::{EcefPosition, GeodeticPosition, NedVector};
pub use sim::MeasurementEpoch;
