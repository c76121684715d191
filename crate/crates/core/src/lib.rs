//! Fully dynamic packing with bounded migration.
//!
//! Items arrive and depart over time. A [`framework::RobustRunner`] keeps a
//! packing whose cost stays within a constant factor of optimal while the
//! total volume of moved items stays proportional to the volume of arrivals
//! and departures. It combines a flexible online algorithm, which extends a
//! packing without moving anything, with an offline repacker run at the end
//! of each phase.

pub mod bins;
pub mod error;
pub mod framework;
pub mod geometry;
pub mod harness;
pub mod model;
pub mod offline;
pub mod online;
pub mod rational;
pub mod shelf;
pub mod trace;

pub use error::{PackError, Result};
pub use framework::{RobustRunner, RunnerConfig, StepDiagnostics};
pub use model::{
    Domain, Event, EventOp, ItemId, ItemKey, ItemKind, ItemSpec, MigrationLedger, PlacementRecord, SolutionState,
};
pub use online::{FlexibleAlgorithm, OnlineAlgorithm, ProblemKind, RatioCertificate};
pub use rational::Rational;
pub use trace::Trace;
