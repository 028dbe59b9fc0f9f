//! Centralized MILP control of a two-lane orthogonal intersection, plus the
//! surrounding traffic simulator, metrics, and chart output.

pub mod config;
pub mod dynamics;
pub mod lane;
pub mod model;
pub mod metrics;
pub mod sim;
pub mod svg;
pub mod verify;

pub use config::SimConfig;
pub use lane::Lane;
