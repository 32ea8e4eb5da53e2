//! Keller-Segel chemotaxis with logistic damping: a pseudo-spectral mild
//! solver, the branching moderately interacting particle system that
//! approximates it, and the tooling to measure how fast the two agree.

pub mod config;
pub mod error;
pub mod flat_metric;
pub mod grid;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod kernel_check;
pub mod measure;
pub mod particles;
pub mod pde;
pub mod spectral;

pub use error::{KsError, Result};
pub use grid::{Grid, GridField};
