//! Certification and classification of bipartite pure-state entanglement
//! from velocity fields and momentum weak values.
//!
//! The pipeline goes: build a state on a grid (`state`), derive flow and
//! osmotic velocities and momentum moments (`kinematics`), form weak
//! momentum correlations (`weak`), and turn them into an entanglement
//! verdict (`detector`). `oracle` holds independent closed-form and
//! brute-force routes used to pin down every number the tests rely on.

pub mod detector;
pub mod error;
pub mod exec;
pub mod grid;
pub mod kinematics;
pub mod oracle;
pub mod report;
pub mod state;
pub mod weak;

pub use error::{Error, Result};
pub use grid::{
    make_grid, ComplexField, DiffScheme, Grid, GridAxis, GridSpec, Mask, PhysicsParams, RealField,
};
pub use kinematics::Numerics;
pub use report::{load_config, AnalysisOptions, Report, Representation, RunConfig, SweepSpec};
pub use state::{build_state, StateSpec, WaveFunction};
