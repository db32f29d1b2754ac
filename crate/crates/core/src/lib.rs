//! Exact and asymptotic distribution theory for the number of blocks `K` of
//! a random partition drawn from the two-parameter (Pitman) sampling formula.

pub mod asymptotics;
pub mod combinatorics;
pub mod distribution;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod params;
pub mod quadrature;
pub mod sampler;
pub mod scalar;

pub use combinatorics::{CNumberTable, PartitionCounts};
pub use error::{Error, Result};
pub use harness::{run_study, StudyConfig, StudyKind, StudyResult};
pub use params::PitmanParams;
pub use sampler::SeedSpec;
pub use scalar::{ApproxScalar, ExactScalar, Mode, Number};
