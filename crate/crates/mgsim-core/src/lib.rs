//! Simulation engine for zonal medium-voltage DC microgrids.
//!
//! The crate models a shipboard-style DC power system as a directed graph:
//! nodes are power modules (generation, load, or load-plus-storage) that own a
//! bus capacitance and expose their voltage as a state; edges are RL
//! distribution lines whose currents are likewise states. Because every
//! signal exchanged between components is integrator-backed, the network has
//! no algebraic loops and can be advanced with explicit fixed-step methods.
//!
//! On top of the physics sits a three-layer control stack: adaptive droop
//! sharing across generators, a secondary PI loop that restores the main bus
//! voltage, per-generator rectifier control, and per-zone storage that
//! absorbs load fluctuations.
//!
//! Entry points:
//! - [`scenario::load_scenario`] parses a scenario file into a resolved
//!   [`scenario::Scenario`],
//! - [`engine::simulate`] runs it and produces a [`timeseries::TimeSeries`],
//! - [`summary::summarize`] condenses a run into regulation and sharing
//!   metrics.

pub mod components;
pub mod control;
pub mod engine;
pub mod error;
pub mod scenario;
pub mod solver;
pub mod summary;
pub mod timeseries;
pub mod topology;
pub mod units;

pub mod builtin;

pub use builtin::{builtin_names, builtin_scenario};
pub use engine::{simulate, Engine, SystemState};
pub use error::{ControlError, ParseError, SimulationError};
pub use scenario::{load_scenario, load_scenario_text, LoadProfile, Scenario, ScenarioError};
pub use solver::{Method, SolverConfig};
pub use summary::{summarize, RunSummary};
pub use timeseries::TimeSeries;
pub use topology::{parse_netlist, EdgeId, NodeId, NodeKind, Schedule, Topology};
