//! Adaptive linear neurons compiled to mass-action chemical reaction networks.
//!
//! The crate turns a single-layer linear neuron into two reaction networks:
//! a feedforward network whose steady state is the neuron output, and an
//! online-learning network whose steady state is one LMS weight update. The
//! networks are integrated with an adaptive Runge–Kutta solver and chained
//! into a training loop by transferring species between compartments.

pub mod cli;
pub mod config;
pub mod crn;
pub mod dual_rail;
pub mod error;
pub mod feedforward;
pub mod learner;
pub mod ode;
pub mod pipeline;
pub mod verify;

pub use crn::{Compartment, Reaction, ReactionNetwork, Role, Species, SystemState};
pub use dual_rail::DualRailValue;
pub use error::{Error, Result};
pub use ode::{IntegratorConfig, Termination, Trajectory};
