//! Characteristic-grid simulation of 1+1 semilinear wave systems
//! `□Φ = Q(∂Φ, ∂Φ)` and the weighted energy diagnostics used to study
//! small-data global existence under the null condition.
//!
//! The pipeline is: [`config`] → [`data`] sampling → [`solver`] stepping,
//! with [`energy`] accumulators updated every step and [`experiments`]
//! driving multi-run studies.

pub mod cli;
pub mod config;
pub mod data;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod nullform;
pub mod output;
pub mod quadrature;
pub mod solver;

pub use config::{parse_config, RunConfig};
pub use data::{DataProfile, FieldData, Profile, Traveling};
pub use energy::{EnergyReport, Verdict};
pub use error::{Error, Result};
pub use geometry::WeightSpec;
pub use nullform::{NonlinearitySpec, NullFrameForm, QuadraticForm};
pub use solver::{CharacteristicState, Grid, Simulation};
