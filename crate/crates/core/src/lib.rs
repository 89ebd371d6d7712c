//! Multi-beam symbol-level secure precoding for hybrid near-field and
//! far-field multi-user downlink.
//!
//! The pipeline is: place users ([`geometry`]), draw symbols
//! ([`modulation`]), turn each user's relaxed-phase sector into linear
//! constraints on the transmit vector ([`precoder`]), find the
//! minimum-power vector satisfying them ([`solver`]), and evaluate what
//! legitimate users and eavesdroppers receive ([`metrics`]).

pub mod error;
pub mod geometry;
pub mod metrics;
pub mod modulation;
pub mod precoder;
pub mod rng;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{
    ArrayGeometry, Channel, ChannelModel, FieldRegion, GainMode, Role, SteeringVector, UserSpec,
};
pub use modulation::{in_relaxed_region, PskConstellation, SectorSpec};
pub use precoder::{
    build_constraints, ConstraintSystem, PrecoderSolution, RepairOutcome, SlotAssignment,
};
pub use scenario::{Scenario, SlotSolution};
pub use solver::{solve_iterative, solve_oracle, IterTrace, SolverConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
