//! Hyperfine level structure of a nuclear-spin-1/2 alkaline-earth ion.
//!
//! Five electronic terms (S1/2, P1/2, D3/2, P3/2, D5/2), each split into two
//! hyperfine manifolds by the `I = 1/2` nucleus, for 36 Zeeman sublevels in
//! total. States are addressed by a fixed canonical index: terms in the order
//! above, then `F` ascending, then `mF` ascending.

mod lines;
mod spec;

pub(crate) use lines::manifolds_connected;
pub use lines::{decay_channels, line_strength, transition_detuning, LineStrength, Polarization};
pub use spec::{
    AtomConfig, AtomSpec, BranchingTable, HyperfineSplitting, Lifetimes, SplittingTable,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Doubled nuclear spin.
pub const TWO_I: i32 = 1;

/// Number of hyperfine Zeeman sublevels across all five terms.
pub const N_STATES: usize = 36;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    #[serde(rename = "s1_2")]
    S1_2,
    #[serde(rename = "p1_2")]
    P1_2,
    #[serde(rename = "d3_2")]
    D3_2,
    #[serde(rename = "p3_2")]
    P3_2,
    #[serde(rename = "d5_2")]
    D5_2,
}

impl Term {
    pub const ALL: [Term; 5] = [Term::S1_2, Term::P1_2, Term::D3_2, Term::P3_2, Term::D5_2];

    pub fn two_j(self) -> i32 {
        match self {
            Term::S1_2 | Term::P1_2 => 1,
            Term::D3_2 | Term::P3_2 => 3,
            Term::D5_2 => 5,
        }
    }

    /// Short-lived terms that are adiabatically eliminated in the rate picture.
    pub fn is_excited(self) -> bool {
        matches!(self, Term::P1_2 | Term::P3_2)
    }

    /// The two allowed total angular momenta `(F_low, F_high)`.
    pub fn f_values(self) -> (i32, i32) {
        let low = (self.two_j() - TWO_I) / 2;
        (low, low + 1)
    }

    pub fn name(self) -> &'static str {
        match self {
            Term::S1_2 => "S1/2",
            Term::P1_2 => "P1/2",
            Term::D3_2 => "D3/2",
            Term::P3_2 => "P3/2",
            Term::D5_2 => "D5/2",
        }
    }

    fn offset(self) -> usize {
        match self {
            Term::S1_2 => 0,
            Term::P1_2 => 4,
            Term::D3_2 => 8,
            Term::P3_2 => 16,
            Term::D5_2 => 24,
        }
    }

    fn len(self) -> usize {
        2 * (self.two_j() as usize + 1)
    }

    pub fn states(self) -> impl Iterator<Item = HyperfineState> {
        let o = self.offset();
        (o..o + self.len()).map(HyperfineState::from_index)
    }

    /// True for term pairs joined by an electric-dipole line (lower, upper).
    pub fn dipole_connected(lower: Term, upper: Term) -> bool {
        matches!(
            (lower, upper),
            (Term::S1_2, Term::P1_2)
                | (Term::D3_2, Term::P1_2)
                | (Term::S1_2, Term::P3_2)
                | (Term::D3_2, Term::P3_2)
                | (Term::D5_2, Term::P3_2)
        )
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A hyperfine manifold `|term; F>`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Manifold {
    pub term: Term,
    pub f: i32,
}

impl Manifold {
    pub fn new(term: Term, f: i32) -> Result<Self> {
        let (lo, hi) = term.f_values();
        if f != lo && f != hi {
            return Err(Error::InvalidState { term: term.name(), f, m: 0 });
        }
        Ok(Manifold { term, f })
    }

    pub fn states(self) -> impl Iterator<Item = HyperfineState> {
        let term = self.term;
        let f = self.f;
        (-f..=f).map(move |m| HyperfineState { term, f, m })
    }
}

impl fmt::Display for Manifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};F={}", self.term, self.f)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HyperfineState {
    pub term: Term,
    pub f: i32,
    pub m: i32,
}

/// `|S1/2; F=0, mF=0>`
pub const QUBIT_ZERO: HyperfineState = HyperfineState { term: Term::S1_2, f: 0, m: 0 };
/// `|S1/2; F=1, mF=0>`
pub const QUBIT_ONE: HyperfineState = HyperfineState { term: Term::S1_2, f: 1, m: 0 };

impl HyperfineState {
    pub fn new(term: Term, f: i32, m: i32) -> Result<Self> {
        let (lo, hi) = term.f_values();
        if (f != lo && f != hi) || m.abs() > f {
            return Err(Error::InvalidState { term: term.name(), f, m });
        }
        Ok(HyperfineState { term, f, m })
    }

    pub fn manifold(self) -> Manifold {
        Manifold { term: self.term, f: self.f }
    }

    pub fn index(self) -> usize {
        let (lo, _) = self.term.f_values();
        let base = self.term.offset();
        let within = if self.f == lo {
            (self.m + lo) as usize
        } else {
            (2 * lo + 1) as usize + (self.m + self.f) as usize
        };
        base + within
    }

    /// Inverse of [`HyperfineState::index`]. Panics when `i >= N_STATES`.
    pub fn from_index(i: usize) -> Self {
        assert!(i < N_STATES, "state index {} out of range", i);
        let term = *Term::ALL
            .iter()
            .rev()
            .find(|t| t.offset() <= i)
            .expect("offset table starts at zero");
        let (lo, hi) = term.f_values();
        let within = (i - term.offset()) as i32;
        if within < 2 * lo + 1 {
            HyperfineState { term, f: lo, m: within - lo }
        } else {
            HyperfineState { term, f: hi, m: within - (2 * lo + 1) - hi }
        }
    }
}

impl fmt::Display for HyperfineState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};F={},mF={}", self.term, self.f, self.m)
    }
}

/// All 36 sublevels in canonical order.
pub fn states() -> impl Iterator<Item = HyperfineState> {
    (0..N_STATES).map(HyperfineState::from_index)
}
