use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::lines::angular_strength;
use super::{Manifold, Term, N_STATES};
use crate::error::{Error, Result};

/// Radiative lifetimes in seconds. S1/2 has none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lifetimes {
    pub p1_2: f64,
    pub p3_2: f64,
    pub d3_2: f64,
    pub d5_2: f64,
}

impl Default for Lifetimes {
    fn default() -> Self {
        Lifetimes {
            // Literature value; not a measured input here.
            p1_2: 7.9e-9,
            p3_2: 10e-9,
            // Only relevant for very long simulations.
            d3_2: 80.0,
            d5_2: 30.0,
        }
    }
}

/// Splitting between the two hyperfine manifolds of one term.
///
/// `inverted` means the lower-`F` manifold lies higher in energy, which is
/// the case for every term of an ion whose nuclear moment is negative.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperfineSplitting {
    pub mhz: f64,
    pub inverted: bool,
}

impl HyperfineSplitting {
    pub const fn inverted(mhz: f64) -> Self {
        HyperfineSplitting { mhz, inverted: true }
    }
}

/// Hyperfine splittings (MHz) and isotope shifts (MHz, relative to the
/// even-isotope reference line) of the two shelving lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplittingTable {
    pub s1_2: HyperfineSplitting,
    pub p1_2: HyperfineSplitting,
    pub d3_2: HyperfineSplitting,
    pub p3_2: HyperfineSplitting,
    pub d5_2: HyperfineSplitting,
    /// S1/2 - P3/2 line.
    pub isotope_shift_455: f64,
    /// D5/2 - P3/2 line.
    pub isotope_shift_614: f64,
}

impl Default for SplittingTable {
    fn default() -> Self {
        SplittingTable {
            s1_2: HyperfineSplitting::inverted(9925.0),
            // P1/2 and D3/2 values are literature constants, exposed for override.
            p1_2: HyperfineSplitting::inverted(1840.0),
            d3_2: HyperfineSplitting::inverted(937.0),
            p3_2: HyperfineSplitting::inverted(623.0),
            d5_2: HyperfineSplitting::inverted(83.0),
            isotope_shift_455: 358.0,
            isotope_shift_614: 216.0,
        }
    }
}

impl SplittingTable {
    pub fn get(&self, term: Term) -> HyperfineSplitting {
        match term {
            Term::S1_2 => self.s1_2,
            Term::P1_2 => self.p1_2,
            Term::D3_2 => self.d3_2,
            Term::P3_2 => self.p3_2,
            Term::D5_2 => self.d5_2,
        }
    }

    pub fn get_mut(&mut self, term: Term) -> &mut HyperfineSplitting {
        match term {
            Term::S1_2 => &mut self.s1_2,
            Term::P1_2 => &mut self.p1_2,
            Term::D3_2 => &mut self.d3_2,
            Term::P3_2 => &mut self.p3_2,
            Term::D5_2 => &mut self.d5_2,
        }
    }

    /// Energy of a manifold relative to its term's hyperfine centroid, MHz.
    pub fn offset(&self, manifold: Manifold) -> f64 {
        let split = self.get(manifold.term);
        let (lo, hi) = manifold.term.f_values();
        let w_lo = (2 * lo + 1) as f64;
        let w_hi = (2 * hi + 1) as f64;
        // E(hi) - E(lo)
        let gap = if split.inverted { -split.mhz } else { split.mhz };
        let e_lo = -gap * w_hi / (w_lo + w_hi);
        if manifold.f == lo {
            e_lo
        } else {
            e_lo + gap
        }
    }

    /// Isotope shift for the lines that carry one.
    pub fn isotope_shift(&self, lower: Term, upper: Term) -> Option<f64> {
        match (lower, upper) {
            (Term::S1_2, Term::P3_2) => Some(self.isotope_shift_455),
            (Term::D5_2, Term::P3_2) => Some(self.isotope_shift_614),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct P12Branching {
    pub s1_2: f64,
    pub d3_2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct P32Branching {
    pub s1_2: f64,
    pub d5_2: f64,
    pub d3_2: f64,
}

/// Term-level decay fractions of the two excited terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchingTable {
    pub p1_2: P12Branching,
    pub p3_2: P32Branching,
}

impl Default for BranchingTable {
    fn default() -> Self {
        BranchingTable {
            // Literature value, not measured here.
            p1_2: P12Branching { s1_2: 0.73, d3_2: 0.27 },
            p3_2: P32Branching { s1_2: 0.74, d5_2: 0.23, d3_2: 0.03 },
        }
    }
}

impl BranchingTable {
    /// `(lower term, fraction)` pairs for an excited term; empty otherwise.
    pub fn channels(&self, upper: Term) -> Vec<(Term, f64)> {
        match upper {
            Term::P1_2 => vec![(Term::S1_2, self.p1_2.s1_2), (Term::D3_2, self.p1_2.d3_2)],
            Term::P3_2 => vec![
                (Term::S1_2, self.p3_2.s1_2),
                (Term::D5_2, self.p3_2.d5_2),
                (Term::D3_2, self.p3_2.d3_2),
            ],
            _ => Vec::new(),
        }
    }

    pub fn fraction(&self, upper: Term, lower: Term) -> f64 {
        self.channels(upper)
            .into_iter()
            .find(|&(t, _)| t == lower)
            .map_or(0.0, |(_, p)| p)
    }

    fn validate(&self) -> Result<()> {
        for upper in [Term::P1_2, Term::P3_2] {
            let ch = self.channels(upper);
            if ch.iter().any(|&(_, p)| !(p.is_finite() && p >= 0.0)) {
                return Err(Error::Config(format!("negative branching fraction from {}", upper)));
            }
            let total: f64 = ch.iter().map(|&(_, p)| p).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("branching fractions from {} sum to {}", upper, total)));
            }
        }
        Ok(())
    }
}

/// Serializable description of the atom; see [`AtomSpec`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    #[serde(default)]
    pub lifetimes: Lifetimes,
    #[serde(default)]
    pub splitting: SplittingTable,
    #[serde(default)]
    pub branching: BranchingTable,
}

/// Validated level structure with cached line strengths and decay channels.
///
/// Immutable after construction; clones share the cached tables.
#[derive(Clone, Debug)]
pub struct AtomSpec {
    config: AtomConfig,
    /// Row-major `[lower * N_STATES + upper]` dipole strengths.
    strengths: Arc<Vec<f64>>,
    decays: Arc<Vec<Vec<(usize, f64)>>>,
}

impl Default for AtomSpec {
    fn default() -> Self {
        AtomSpec::new(AtomConfig::default()).expect("built-in atom is valid")
    }
}

impl AtomSpec {
    pub fn new(config: AtomConfig) -> Result<Self> {
        let l = &config.lifetimes;
        for (name, tau) in [("p1_2", l.p1_2), ("p3_2", l.p3_2), ("d3_2", l.d3_2), ("d5_2", l.d5_2)] {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(Error::Config(format!("lifetime `{}` must be positive, got {}", name, tau)));
            }
        }
        for term in Term::ALL {
            let s = config.splitting.get(term);
            if !(s.mhz.is_finite() && s.mhz >= 0.0) {
                return Err(Error::Config(format!("splitting of {} must be non-negative, got {}", term, s.mhz)));
            }
        }
        config.branching.validate()?;

        let mut strengths = vec![0.0; N_STATES * N_STATES];
        for g in super::states() {
            for e in super::states() {
                if Term::dipole_connected(g.term, e.term) {
                    strengths[g.index() * N_STATES + e.index()] = angular_strength(g, e);
                }
            }
        }

        let mut decays = vec![Vec::new(); N_STATES];
        for e in super::states().filter(|s| s.term.is_excited()) {
            let channels = config.branching.channels(e.term);
            let total: f64 = channels.iter().map(|&(_, p)| p).sum();
            for (lower, frac) in channels {
                for g in lower.states() {
                    let w = strengths[g.index() * N_STATES + e.index()];
                    if w > 0.0 && frac > 0.0 {
                        decays[e.index()].push((g.index(), frac / total * w));
                    }
                }
            }
        }

        Ok(AtomSpec { config, strengths: Arc::new(strengths), decays: Arc::new(decays) })
    }

    /// Parses a TOML document holding the atom tables at its top level.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: AtomConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        AtomSpec::new(config)
    }

    pub fn config(&self) -> &AtomConfig {
        &self.config
    }

    pub fn splittings(&self) -> &SplittingTable {
        &self.config.splitting
    }

    pub fn branching(&self) -> &BranchingTable {
        &self.config.branching
    }

    pub fn lifetime(&self, term: Term) -> Option<f64> {
        let l = &self.config.lifetimes;
        match term {
            Term::S1_2 => None,
            Term::P1_2 => Some(l.p1_2),
            Term::D3_2 => Some(l.d3_2),
            Term::P3_2 => Some(l.p3_2),
            Term::D5_2 => Some(l.d5_2),
        }
    }

    /// Spontaneous decay rate `1/tau` in 1/s.
    pub fn decay_rate(&self, term: Term) -> Option<f64> {
        self.lifetime(term).map(|tau| 1.0 / tau)
    }

    /// Natural linewidth `1/(2 pi tau)` in MHz.
    pub fn linewidth_mhz(&self, term: Term) -> Option<f64> {
        self.lifetime(term).map(|tau| 1.0 / (2.0 * PI * tau) / 1e6)
    }

    pub fn hyperfine_offset(&self, manifold: Manifold) -> f64 {
        self.config.splitting.offset(manifold)
    }

    /// Frequency of one hyperfine component relative to the centroid of its
    /// optical line, MHz.
    pub fn component_frequency(&self, lower: Manifold, upper: Manifold) -> f64 {
        self.hyperfine_offset(upper) - self.hyperfine_offset(lower)
    }

    /// Frequency of a hyperfine component of the 455 nm or 614 nm line
    /// relative to the same line of the even reference isotope, MHz.
    pub fn reference_frequency(&self, lower: Manifold, upper: Manifold) -> Result<f64> {
        let shift = self
            .config
            .splitting
            .isotope_shift(lower.term, upper.term)
            .ok_or_else(|| Error::NotConnected { lower: lower.to_string(), upper: upper.to_string() })?;
        Ok(shift + self.component_frequency(lower, upper))
    }

    #[inline]
    pub(crate) fn strength(&self, lower: usize, upper: usize) -> f64 {
        self.strengths[lower * N_STATES + upper]
    }

    #[inline]
    pub(crate) fn decays_from(&self, upper: usize) -> &[(usize, f64)] {
        &self.decays[upper]
    }
}
