//! Range-only localization and circumnavigation of a stationary source.
//!
//! An agent that knows its own position and measures only its distance to a
//! source estimates the source position with a filter-bank gradient
//! estimator ([`estimation`]) and simultaneously steers onto a circle of
//! radius `d` around the estimate ([`guidance`]), rotating through a
//! periodic skew-symmetric schedule ([`schedule`]) that keeps its motion
//! persistently exciting. [`simulation`] closes the loop and [`analysis`]
//! certifies the closed loop's properties numerically.

pub mod analysis;
pub mod config;
pub mod error;
pub mod estimation;
pub mod guidance;
pub mod integrator;
pub mod output;
pub mod schedule;
pub mod simulation;
pub mod verify;

pub use config::{LoopParams, ScenarioConfig, ScheduleSpec};
pub use error::{Error, Result};
pub use schedule::RotationSchedule;
pub use simulation::{simulate, NoiseModel, SourceModel, Trajectory};
