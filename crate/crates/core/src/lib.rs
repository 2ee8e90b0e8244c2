//! Information-driven intermittent search on a square grid.
//!
//! A searcher alternates fast, blind ballistic jumps with slow sensing
//! phases. It keeps a Bayesian threat map over the grid and picks each jump
//! destination by expected information gain. The crate provides the sensor
//! and map models, the planner, a single-episode engine and a Monte Carlo
//! batch harness.

pub mod config;
pub mod engine;
pub mod error;
pub mod grid;
pub mod montecarlo;
pub mod planner;
pub mod sensor;
pub mod threatmap;

pub use engine::{run_episode, EpisodeConfig, Outcome, RunResult, StartPlacement, TargetPlacement};
pub use error::{Error, Result};
pub use grid::{CellIndex, GridSpec, Position};
pub use planner::{StrategyKind, StrategyParams};
pub use sensor::SensorParams;
pub use threatmap::ThreatMap;
