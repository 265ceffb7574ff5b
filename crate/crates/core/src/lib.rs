//! Simulation and analysis of state preparation and measurement for a
//! nuclear-spin-1/2 hyperfine qubit read out by electron shelving.
//!
//! Numerical kernels that do not depend on the level structure (pulse
//! algebra, count statistics, line fits, binomial intervals) are generic
//! over [`Scalar`]; the aliases below fix them to `f64` or `f32`.

pub mod angular;
pub mod atom;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod pulse;
mod quadrature;
pub mod readout;
pub mod rng;
pub mod scalar;
pub mod spectroscopy;
pub mod stats;

pub use config::Config;
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type CountModel = readout::CountModel<f64>;
pub type CountModelF32 = readout::CountModel<f32>;
pub type Pmf = readout::Pmf<f64>;
pub type PmfF32 = readout::Pmf<f32>;
pub type Rotation = pulse::Rotation<f64>;
pub type RotationF32 = pulse::Rotation<f32>;
pub type Unitary2 = pulse::Unitary2<f64>;
pub type Unitary2F32 = pulse::Unitary2<f32>;
pub type LorentzianModel = fit::LorentzianModel<f64>;
pub type LorentzianModelF32 = fit::LorentzianModel<f32>;
pub type FitResult = fit::FitResult<f64>;
pub type FitResultF32 = fit::FitResult<f32>;
