//! Optical pumping over the 36 ground, metastable and excited sublevels.
//!
//! The short-lived P terms are adiabatically eliminated: a drive excites a
//! ground sublevel at a Lorentzian-suppressed rate and the excited state
//! decays at once through its branching channels. The resulting
//! ground-to-ground generator is either exponentiated directly (rate mode)
//! or sampled jump by jump (jump mode).

mod jump;
mod laser;
mod population;
mod rates;
mod scenarios;

pub use jump::{sample_trajectory, JumpEvent, JumpSampler, JumpTrajectory};
pub use laser::LaserField;
pub use population::{evolve, evolve_lasers, propagator, transfer_kernel, PopulationVector};
pub use rates::{build_rate_matrix, lorentzian, scatter_rate, RateMatrix};
pub use scenarios::{
    cycling_lasers, prepare_lasers, prepare_start, shelving_lasers, simulate_cycling_readout,
    simulate_offresonant_shelving_of_zero, simulate_prepare_zero, simulate_shelving, CyclingConfig, CyclingResult,
    Estimate, Mode, PrepareConfig, ShelvingConfig, ShelvingScheme, ShelvingStart,
};

pub(crate) use scenarios::sample_state;
