use serde::{Deserialize, Serialize};

use crate::atom::{Manifold, Polarization};
use crate::error::{Error, Result};

/// One optical drive, addressed by the hyperfine component it is tuned to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserField {
    pub label: String,
    pub lower: Manifold,
    pub upper: Manifold,
    /// Extra detuning from the target component, MHz.
    pub detuning_mhz: f64,
    pub saturation: f64,
    pub polarization: Polarization,
    /// `(t_on, t_off)` in seconds; `None` means on for the whole evolution.
    pub window: Option<(f64, f64)>,
}

impl LaserField {
    /// Resonant, isotropic, unit-saturation drive that is always on.
    pub fn new(label: impl Into<String>, lower: Manifold, upper: Manifold) -> Self {
        LaserField {
            label: label.into(),
            lower,
            upper,
            detuning_mhz: 0.0,
            saturation: 1.0,
            polarization: Polarization::Isotropic,
            window: None,
        }
    }

    pub fn with_saturation(mut self, s: f64) -> Self {
        self.saturation = s;
        self
    }

    pub fn with_detuning(mut self, mhz: f64) -> Self {
        self.detuning_mhz = mhz;
        self
    }

    pub fn with_polarization(mut self, pol: Polarization) -> Self {
        self.polarization = pol;
        self
    }

    pub fn with_window(mut self, t_on: f64, t_off: f64) -> Self {
        self.window = Some((t_on, t_off));
        self
    }

    pub fn is_on(&self, t: f64) -> bool {
        match self.window {
            None => true,
            Some((on, off)) => t >= on && t < off,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.saturation.is_finite() && self.saturation >= 0.0) {
            return Err(Error::InvalidArgument(format!("laser {}: saturation {}", self.label, self.saturation)));
        }
        if !self.detuning_mhz.is_finite() {
            return Err(Error::InvalidArgument(format!("laser {}: detuning {}", self.label, self.detuning_mhz)));
        }
        if let Some((on, off)) = self.window {
            if !(on.is_finite() && off.is_finite() && off >= on) {
                return Err(Error::InvalidArgument(format!("laser {}: window ({}, {})", self.label, on, off)));
            }
        }
        Manifold::new(self.lower.term, self.lower.f)?;
        Manifold::new(self.upper.term, self.upper.f)?;
        if !crate::atom::manifolds_connected(self.lower, self.upper) {
            return Err(Error::NotConnected { lower: self.lower.to_string(), upper: self.upper.to_string() });
        }
        Ok(())
    }
}

/// Splits `[0, t]` at every window edge. Each returned `(start, end, active)`
/// interval has a fixed set of lasers switched on.
pub(crate) fn segments(lasers: &[LaserField], t: f64) -> Vec<(f64, f64, Vec<usize>)> {
    let mut edges = vec![0.0, t];
    for l in lasers {
        if let Some((on, off)) = l.window {
            edges.extend([on, off].into_iter().filter(|&x| x > 0.0 && x < t));
        }
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let active = lasers.iter().enumerate().filter(|(_, l)| l.is_on(mid)).map(|(i, _)| i).collect();
            (w[0], w[1], active)
        })
        .collect()
}
