//! The shared TOML run configuration.
//!
//! Every section may be omitted and then takes its defaults; a section that
//! is present must spell out all of its keys.

use serde::{Deserialize, Serialize};

use crate::atom::{AtomConfig, AtomSpec};
use crate::dynamics::{CyclingConfig, PrepareConfig, ShelvingConfig};
use crate::error::{Error, Result};
use crate::readout::{CountModel, ThresholdClassifier};
use crate::spectroscopy::SpectroscopyConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutConfig {
    pub bright_mean: f64,
    pub dark_mean: f64,
    /// s
    pub window: f64,
    /// D5/2 lifetime, s.
    pub lifetime: f64,
    /// Counts `<= threshold` read as shelved.
    pub threshold: u32,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        let m = CountModel::<f64>::default();
        ReadoutConfig {
            bright_mean: m.bright_mean,
            dark_mean: m.dark_mean,
            window: m.window,
            lifetime: m.lifetime,
            threshold: 12,
        }
    }
}

impl ReadoutConfig {
    pub fn model(&self) -> CountModel<f64> {
        CountModel {
            bright_mean: self.bright_mean,
            dark_mean: self.dark_mean,
            window: self.window,
            lifetime: self.lifetime,
        }
    }

    pub fn classifier(&self) -> ThresholdClassifier {
        ThresholdClassifier { n_th: self.threshold }
    }
}

/// Microwave transfer and the end-to-end run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpamConfig {
    pub trials_zero: u64,
    pub trials_one: u64,
    /// Consecutive trials of one state before switching to the other.
    pub block_size: u64,
    pub rabi_khz: f64,
    pub detuning_khz: f64,
    /// Multiplies every pulse duration of the composite sequence.
    pub area_scale: f64,
    /// Probability that the composite sequence leaves the qubit flipped.
    pub eps_cp: f64,
    /// Probability that a bright ion reads dark.
    pub background_flip: f64,
}

impl Default for SpamConfig {
    fn default() -> Self {
        SpamConfig {
            trials_zero: 156_581,
            trials_one: 157_211,
            block_size: 200,
            rabi_khz: 35.0,
            detuning_khz: 0.0,
            area_scale: 1.0,
            eps_cp: 1e-4,
            background_flip: 3e-5,
        }
    }
}

impl SpamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials_zero == 0 || self.trials_one == 0 {
            return Err(Error::Config("spam.trials_zero and spam.trials_one must be positive".into()));
        }
        if self.block_size == 0 {
            return Err(Error::Config("spam.block_size must be positive".into()));
        }
        for (name, p) in [("eps_cp", self.eps_cp), ("background_flip", self.background_flip)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("spam.{} must lie in [0, 1], got {}", name, p)));
            }
        }
        if !(self.rabi_khz > 0.0 && self.rabi_khz.is_finite()) {
            return Err(Error::Config("spam.rabi_khz must be positive".into()));
        }
        if !(self.detuning_khz.is_finite() && self.area_scale.is_finite() && self.area_scale >= 0.0) {
            return Err(Error::Config("spam.detuning_khz and spam.area_scale must be finite".into()));
        }
        Ok(())
    }
}

/// Microwave scans of the composite sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub rabi_khz: f64,
    pub points: usize,
    /// Full detuning range of a detuning scan, kHz.
    pub detuning_span_khz: f64,
    pub area_min: f64,
    pub area_max: f64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig { rabi_khz: 35.0, points: 201, detuning_span_khz: 140.0, area_min: 0.0, area_max: 2.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub atom: AtomConfig,
    pub prepare: PrepareConfig,
    pub shelving: ShelvingConfig,
    pub cycling: CyclingConfig,
    pub readout: ReadoutConfig,
    pub spam: SpamConfig,
    pub spectroscopy: SpectroscopyConfig,
    pub pulse: PulseConfig,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn atom_spec(&self) -> Result<AtomSpec> {
        AtomSpec::new(self.atom.clone())
    }

    pub fn validate(&self) -> Result<()> {
        self.atom_spec()?;
        self.readout.model().validate()?;
        self.spam.validate()?;
        Ok(())
    }
}
