use serde::{Deserialize, Serialize};

use super::{AtomSpec, HyperfineState, Manifold, Term, TWO_I};
use crate::angular::{wigner3j_doubled, wigner6j_doubled};
use crate::dynamics::LaserField;
use crate::error::{Error, Result};

/// Polarization of a drive relative to the quantization axis.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    #[serde(rename = "pi")]
    Pi,
    #[serde(rename = "sigma+")]
    SigmaPlus,
    #[serde(rename = "sigma-")]
    SigmaMinus,
    /// Equal mixture of the three spherical components.
    #[serde(rename = "isotropic")]
    Isotropic,
}

impl Polarization {
    /// Share of the drive intensity in spherical component `q = mF' - mF`.
    pub fn weight(self, q: i32) -> f64 {
        match (self, q) {
            (Polarization::Pi, 0) | (Polarization::SigmaPlus, 1) | (Polarization::SigmaMinus, -1) => 1.0,
            (Polarization::Isotropic, -1..=1) => 1.0 / 3.0,
            _ => 0.0,
        }
    }
}

/// Result of [`line_strength`]: a relative weight, or a flag that the two
/// terms share no electric-dipole line at all.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum LineStrength {
    TermForbidden,
    Weight(f64),
}

impl LineStrength {
    pub fn value(self) -> f64 {
        match self {
            LineStrength::TermForbidden => 0.0,
            LineStrength::Weight(w) => w,
        }
    }

    pub fn is_term_forbidden(self) -> bool {
        matches!(self, LineStrength::TermForbidden)
    }
}

/// Dipole strength between two sublevels of connected terms, normalized so
/// that summing over every lower sublevel of one lower term (and all `q`)
/// gives 1 for any upper sublevel.
pub(crate) fn angular_strength(lower: HyperfineState, upper: HyperfineState) -> f64 {
    let q = upper.m - lower.m;
    if q.abs() > 1 {
        return 0.0;
    }
    let (tjl, tju) = (lower.term.two_j(), upper.term.two_j());
    let (tfl, tfu) = (2 * lower.f, 2 * upper.f);
    let six = wigner6j_doubled([tjl, tju, 2, tfu, tfl, TWO_I]).expect("valid hyperfine quantum numbers");
    let three =
        wigner3j_doubled([tfu, 2, tfl], [-2 * upper.m, 2 * q, 2 * lower.m]).expect("valid hyperfine quantum numbers");
    let w = (tju + 1) as f64 * (tfl + 1) as f64 * (tfu + 1) as f64 * six * six * three * three;
    // Exact zeros come out of the Racah sums as tiny residues only when the
    // symbol genuinely vanishes; clean them so selection rules stay exact.
    if w < 1e-15 {
        0.0
    } else {
        w
    }
}

/// Relative excitation strength of `lower -> upper` for light of the given
/// polarization.
pub fn line_strength(lower: HyperfineState, upper: HyperfineState, pol: Polarization) -> LineStrength {
    if !Term::dipole_connected(lower.term, upper.term) {
        return LineStrength::TermForbidden;
    }
    LineStrength::Weight(pol.weight(upper.m - lower.m) * angular_strength(lower, upper))
}

/// Spontaneous-decay destinations of an excited sublevel with their
/// probabilities. Empty for ground and metastable states.
pub fn decay_channels(spec: &AtomSpec, upper: HyperfineState) -> Vec<(HyperfineState, f64)> {
    if !upper.term.is_excited() {
        return Vec::new();
    }
    spec.decays_from(upper.index())
        .iter()
        .map(|&(g, p)| (HyperfineState::from_index(g), p))
        .collect()
}

/// True when a dipole line joins the two manifolds: connected terms,
/// `|ΔF| <= 1`, and not `F = 0 -> F' = 0`.
pub(crate) fn manifolds_connected(lower: Manifold, upper: Manifold) -> bool {
    Term::dipole_connected(lower.term, upper.term)
        && (lower.f - upper.f).abs() <= 1
        && !(lower.f == 0 && upper.f == 0)
}

/// Signed detuning (laser minus transition, MHz) of `laser` from the
/// `lower -> upper` hyperfine component of the line it drives.
pub fn transition_detuning(spec: &AtomSpec, laser: &LaserField, lower: Manifold, upper: Manifold) -> Result<f64> {
    if !manifolds_connected(lower, upper) {
        return Err(Error::NotConnected { lower: lower.to_string(), upper: upper.to_string() });
    }
    if lower.term != laser.lower.term || upper.term != laser.upper.term {
        return Err(Error::LaserMismatch {
            label: laser.label.clone(),
            lower: lower.to_string(),
            upper: upper.to_string(),
        });
    }
    let target = spec.component_frequency(laser.lower, laser.upper);
    Ok(target + laser.detuning_mhz - spec.component_frequency(lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::states;
    use approx::assert_abs_diff_eq;

    fn st(term: Term, f: i32, m: i32) -> HyperfineState {
        HyperfineState::new(term, f, m).unwrap()
    }

    const QS: [Polarization; 3] = [Polarization::Pi, Polarization::SigmaPlus, Polarization::SigmaMinus];

    #[test]
    fn pi_light_cannot_drive_clock_to_clock() {
        let w = line_strength(st(Term::S1_2, 1, 0), st(Term::P3_2, 1, 0), Polarization::Pi);
        assert_eq!(w, LineStrength::Weight(0.0));
    }

    #[test]
    fn f0_to_f0_is_dark() {
        for pol in QS {
            let w = line_strength(st(Term::S1_2, 0, 0), st(Term::P1_2, 0, 0), pol);
            assert_eq!(w.value(), 0.0);
        }
    }

    #[test]
    fn unconnected_terms_are_flagged() {
        let w = line_strength(st(Term::S1_2, 1, 0), st(Term::D5_2, 2, 0), Polarization::Pi);
        assert!(w.is_term_forbidden());
        assert!(!line_strength(st(Term::S1_2, 1, 0), st(Term::P3_2, 2, 0), Polarization::Pi).is_term_forbidden());
    }

    #[test]
    fn zeros_are_exactly_the_selection_rules() {
        for g in states() {
            for e in states() {
                if !Term::dipole_connected(g.term, e.term) {
                    continue;
                }
                for pol in QS {
                    let q = e.m - g.m;
                    let forbidden = (g.f - e.f).abs() > 1
                        || (g.f == 0 && e.f == 0)
                        || pol.weight(q) == 0.0
                        || (g.f == e.f && g.m == 0 && e.m == 0);
                    let w = line_strength(g, e, pol).value();
                    assert_eq!(w == 0.0, forbidden, "{} -> {} {:?}: {}", g, e, pol, w);
                }
            }
        }
    }

    #[test]
    fn strengths_normalize_per_lower_term() {
        for e in states().filter(|s| s.term.is_excited()) {
            for lower in Term::ALL {
                if !Term::dipole_connected(lower, e.term) {
                    continue;
                }
                let total: f64 = lower
                    .states()
                    .map(|g| QS.iter().map(|&p| line_strength(g, e, p).value()).sum::<f64>())
                    .sum();
                assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn decay_channels_match_branching() {
        let spec = AtomSpec::default();
        for e in states().filter(|s| s.term.is_excited()) {
            let ch = decay_channels(&spec, e);
            let total: f64 = ch.iter().map(|c| c.1).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            for (lower, frac) in spec.branching().channels(e.term) {
                let marginal: f64 = ch.iter().filter(|c| c.0.term == lower).map(|c| c.1).sum();
                assert_abs_diff_eq!(marginal, frac, epsilon = 1e-12);
            }
        }
        assert!(decay_channels(&spec, st(Term::S1_2, 1, 0)).is_empty());
        assert!(decay_channels(&spec, st(Term::D5_2, 3, 1)).is_empty());
    }

    #[test]
    fn p3_2_f1_decays_to_f0_with_two_thirds_of_the_ground_branch() {
        let spec = AtomSpec::default();
        for m in -1..=1 {
            let p: f64 = decay_channels(&spec, st(Term::P3_2, 1, m))
                .iter()
                .filter(|c| c.0.term == Term::S1_2 && c.0.f == 0)
                .map(|c| c.1)
                .sum();
            assert_abs_diff_eq!(p, 0.74 * 2.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn p3_2_f2_never_reaches_f0_and_favours_d5_2_f3() {
        let spec = AtomSpec::default();
        for m in -2..=2 {
            let ch = decay_channels(&spec, st(Term::P3_2, 2, m));
            assert!(ch.iter().all(|c| !(c.0.term == Term::S1_2 && c.0.f == 0)));
            let d5: f64 = ch.iter().filter(|c| c.0.term == Term::D5_2).map(|c| c.1).sum();
            let d5f3: f64 = ch.iter().filter(|c| c.0.term == Term::D5_2 && c.0.f == 3).map(|c| c.1).sum();
            assert_abs_diff_eq!(d5f3 / d5, 0.9333333333333333, epsilon = 1e-12);
        }
    }

    #[test]
    fn detunings_between_hyperfine_components() {
        let spec = AtomSpec::default();
        let m = |t, f| Manifold::new(t, f).unwrap();
        let l455 = LaserField::new("455", m(Term::S1_2, 1), m(Term::P3_2, 2));
        let d = transition_detuning(&spec, &l455, m(Term::S1_2, 1), m(Term::P3_2, 1)).unwrap();
        assert_abs_diff_eq!(d, -623.0, epsilon = 1e-9);
        let d = transition_detuning(&spec, &l455, m(Term::S1_2, 1), m(Term::P3_2, 2)).unwrap();
        assert_eq!(d, 0.0);

        let l614 = LaserField::new("614", m(Term::D5_2, 3), m(Term::P3_2, 2));
        let d = transition_detuning(&spec, &l614, m(Term::D5_2, 2), m(Term::P3_2, 2)).unwrap();
        assert_abs_diff_eq!(d, 83.0, epsilon = 1e-9);

        assert!(transition_detuning(&spec, &l455, m(Term::S1_2, 1), m(Term::P1_2, 1)).is_err());
        assert!(transition_detuning(&spec, &l614, m(Term::D5_2, 3), m(Term::P3_2, 1)).is_err());
    }
}
