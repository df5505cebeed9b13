//! Distributed opportunistic scheduling with two-level channel probing.
//!
//! Links win the channel by random access, estimate their rate from pilot
//! symbols, and then either transmit, give the channel up, or spend one
//! more slot on additional pilots before deciding. This crate computes the
//! throughput-optimal threshold policies for that decision (with full rate
//! feedback and with ternary `(0, 1, e)` feedback) and checks every
//! analytic throughput against a Monte Carlo simulation of the process.

pub mod chanmodel;
pub mod cli;
pub mod config;
pub mod dist;
pub mod error;
pub mod plot;
pub mod feedback;
pub mod roots;
pub mod simkit;
pub mod solver;

pub use config::{BackoffPolicy, DerivedConstants, Scenario, SystemParams};
pub use error::{DosError, Result};
pub use feedback::{FeedbackSolution, FeedbackSymbol};
pub use simkit::{Policy, RateModel, SimConfig, SimReport};
pub use solver::{Decision, Strategy, TwoLevelSolution};
