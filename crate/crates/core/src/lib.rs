//! Simulation and Monte Carlo checks for the stable-driven stochastic heat
//! equation `dY = 1/2 Y'' + Y^beta dL` and its dual process.

pub mod config;
pub mod dual;
pub mod error;
pub mod harness;
pub mod heat;
pub mod model;
pub mod noise;
pub mod pde;
pub mod shape;
pub mod she;
pub mod stats;
pub mod special;

pub use error::{Error, Result};
pub use model::{Field, GridSpec, ModelParams, RngStream};
