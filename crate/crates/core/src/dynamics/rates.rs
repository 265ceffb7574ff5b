use nalgebra::DMatrix;

use super::LaserField;
use crate::atom::{transition_detuning, AtomSpec, HyperfineState, Term, N_STATES};
use crate::error::Result;

/// Lorentzian suppression `1 / (1 + (2 δ / γ)²)` with `δ` and the FWHM `γ`
/// in the same units.
pub fn lorentzian(detuning: f64, fwhm: f64) -> f64 {
    let x = 2.0 * detuning / fwhm;
    1.0 / (1.0 + x * x)
}

/// Excitation rate (1/s) of `g -> e` by `laser` in the low-saturation limit.
/// Zero whenever the laser does not address this pair of terms or the
/// component is dipole forbidden.
pub fn scatter_rate(spec: &AtomSpec, g: HyperfineState, e: HyperfineState, laser: &LaserField) -> f64 {
    if g.term != laser.lower.term || e.term != laser.upper.term {
        return 0.0;
    }
    // Cached strengths; identical to `line_strength` for connected terms.
    let w = laser.polarization.weight(e.m - g.m) * spec.strength(g.index(), e.index());
    if w == 0.0 || laser.saturation == 0.0 {
        return 0.0;
    }
    let delta = match transition_detuning(spec, laser, g.manifold(), e.manifold()) {
        Ok(d) => d,
        Err(_) => return 0.0,
    };
    let gamma = spec.decay_rate(e.term).expect("upper term is excited");
    let fwhm = spec.linewidth_mhz(e.term).expect("upper term is excited");
    0.5 * gamma * laser.saturation * w * lorentzian(delta, fwhm)
}

/// Generator of ground-to-ground transfer with the excited terms
/// adiabatically eliminated.
///
/// Column `j` holds the rates out of state `j`; `scatter[j]` additionally
/// counts excitations that decay straight back to `j`, and `fluorescence[j]`
/// is the part of the scatter driven on lines out of S1/2.
#[derive(Clone, Debug)]
pub struct RateMatrix {
    pub generator: DMatrix<f64>,
    pub scatter: [f64; N_STATES],
    pub fluorescence: [f64; N_STATES],
}

impl RateMatrix {
    pub fn zero() -> Self {
        RateMatrix {
            generator: DMatrix::zeros(N_STATES, N_STATES),
            scatter: [0.0; N_STATES],
            fluorescence: [0.0; N_STATES],
        }
    }

    /// Rate from state `from` to state `to` (off-diagonal element).
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.generator[(to, from)]
    }

    /// Total rate of leaving `from` for any other state.
    pub fn outflow(&self, from: usize) -> f64 {
        -self.generator[(from, from)]
    }
}

pub fn build_rate_matrix(spec: &AtomSpec, lasers: &[LaserField]) -> Result<RateMatrix> {
    let mut rm = RateMatrix::zero();
    for laser in lasers {
        laser.validate()?;
        for g in laser.lower.term.states() {
            for e in laser.upper.term.states() {
                let r = scatter_rate(spec, g, e, laser);
                if r == 0.0 {
                    continue;
                }
                let gi = g.index();
                rm.scatter[gi] += r;
                if g.term == Term::S1_2 {
                    rm.fluorescence[gi] += r;
                }
                for &(to, p) in spec.decays_from(e.index()) {
                    if to != gi {
                        rm.generator[(to, gi)] += r * p;
                        rm.generator[(gi, gi)] -= r * p;
                    }
                }
            }
        }
    }
    Ok(rm)
}
