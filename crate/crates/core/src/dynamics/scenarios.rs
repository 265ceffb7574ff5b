use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_rate_matrix, evolve_lasers, propagator, JumpSampler, LaserField, PopulationVector, RateMatrix};
use crate::atom::{AtomSpec, HyperfineState, Manifold, Polarization, Term, N_STATES, QUBIT_ONE, QUBIT_ZERO};
use crate::error::{Error, Result};
use crate::readout::poisson_cdf;
use crate::rng::{domain, stream};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rate,
    Jump,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rate" => Ok(Mode::Rate),
            "jump" => Ok(Mode::Jump),
            _ => Err(Error::Unknown { kind: "mode", name: s.to_string() }),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Rate => "rate",
            Mode::Jump => "jump",
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShelvingScheme {
    /// 455 nm only.
    #[serde(rename = "bare-455")]
    Bare455,
    /// 455 nm plus the 650 nm and 585 nm D3/2 repumpers.
    #[serde(rename = "with-repumps")]
    WithRepumps,
    /// As above with the 455 nm beam pi-polarized.
    #[serde(rename = "with-repumps-pi-pol")]
    WithRepumpsPiPol,
}

impl ShelvingScheme {
    pub const ALL: [ShelvingScheme; 3] =
        [ShelvingScheme::Bare455, ShelvingScheme::WithRepumps, ShelvingScheme::WithRepumpsPiPol];

    pub fn name(self) -> &'static str {
        match self {
            ShelvingScheme::Bare455 => "bare-455",
            ShelvingScheme::WithRepumps => "with-repumps",
            ShelvingScheme::WithRepumpsPiPol => "with-repumps-pi-pol",
        }
    }
}

impl FromStr for ShelvingScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ShelvingScheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Unknown { kind: "shelving scheme", name: s.to_string() })
    }
}

impl fmt::Display for ShelvingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where a shelving simulation starts.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShelvingStart {
    /// `|S1/2; F=1, mF=0>`
    Qubit,
    /// Uniform over `|S1/2; F=1>`.
    Manifold,
}

/// Optical pumping into `|0>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepareConfig {
    /// Pumping time, s.
    pub duration: f64,
    /// Saturation of each of the four pumping frequencies.
    pub saturation: f64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig { duration: 20e-6, saturation: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShelvingConfig {
    pub scheme: ShelvingScheme,
    pub start: ShelvingStart,
    /// Pulse length, s; repumpers are on for the same window.
    pub duration: f64,
    pub saturation_455: f64,
    pub saturation_repump: f64,
    /// Extra detuning of the 455 nm beam from its target, MHz.
    pub detuning_455: f64,
}

impl Default for ShelvingConfig {
    fn default() -> Self {
        ShelvingConfig {
            scheme: ShelvingScheme::WithRepumpsPiPol,
            start: ShelvingStart::Qubit,
            duration: 50e-6,
            saturation_455: 0.3,
            saturation_repump: 1.0,
            detuning_455: 0.0,
        }
    }
}

/// Legacy readout by hyperfine-selective cycling on 493/650 nm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CyclingConfig {
    pub saturation_493: f64,
    pub saturation_650: f64,
    /// Mean number of photons scattered by a bright ion during detection.
    pub photon_budget: f64,
    /// Mean detected counts for an ion that stays bright throughout.
    pub bright_mean: f64,
    pub dark_mean: f64,
    /// Counts `<= threshold` are read as dark (`|0>`).
    pub threshold: u32,
    /// Time slices of the rate-mode count distribution.
    pub slices: usize,
}

impl Default for CyclingConfig {
    fn default() -> Self {
        CyclingConfig {
            saturation_493: 1.0,
            saturation_650: 1.0,
            photon_budget: 2.2e4,
            bright_mean: 39.0,
            dark_mean: 1.0,
            threshold: 8,
            slices: 400,
        }
    }
}

/// A probability with its complement computed without cancellation.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub complement: f64,
    /// Binomial standard error; zero in rate mode.
    pub sigma: f64,
    /// Monte Carlo trials; zero in rate mode.
    pub trials: u64,
    pub mode: Mode,
}

impl Estimate {
    pub fn exact(value: f64, complement: f64) -> Self {
        Estimate { value, complement, sigma: 0.0, trials: 0, mode: Mode::Rate }
    }

    pub fn counted(hits: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = hits as f64 / n;
        Estimate {
            value: p,
            complement: (trials - hits) as f64 / n,
            sigma: (p * (1.0 - p) / n).sqrt(),
            trials,
            mode: Mode::Jump,
        }
    }
}

fn manifold(t: Term, f: i32) -> Manifold {
    Manifold { term: t, f }
}

pub fn prepare_lasers(cfg: &PrepareConfig) -> Vec<LaserField> {
    let s = cfg.saturation;
    vec![
        LaserField::new("493c", manifold(Term::S1_2, 1), manifold(Term::P1_2, 0)).with_saturation(s),
        LaserField::new("493op", manifold(Term::S1_2, 1), manifold(Term::P1_2, 1)).with_saturation(s),
        LaserField::new("650c", manifold(Term::D3_2, 1), manifold(Term::P1_2, 0)).with_saturation(s),
        LaserField::new("650sb", manifold(Term::D3_2, 2), manifold(Term::P1_2, 1)).with_saturation(s),
    ]
}

pub fn shelving_lasers(cfg: &ShelvingConfig, scheme: ShelvingScheme) -> Vec<LaserField> {
    let pol = match scheme {
        ShelvingScheme::WithRepumpsPiPol => Polarization::Pi,
        _ => Polarization::Isotropic,
    };
    let mut lasers = vec![LaserField::new("455", manifold(Term::S1_2, 1), manifold(Term::P3_2, 2))
        .with_saturation(cfg.saturation_455)
        .with_detuning(cfg.detuning_455)
        .with_polarization(pol)];
    if scheme != ShelvingScheme::Bare455 {
        let s = cfg.saturation_repump;
        lasers.push(LaserField::new("650c", manifold(Term::D3_2, 1), manifold(Term::P1_2, 0)).with_saturation(s));
        lasers.push(LaserField::new("585", manifold(Term::D3_2, 2), manifold(Term::P3_2, 2)).with_saturation(s));
    }
    lasers
}

pub fn cycling_lasers(cfg: &CyclingConfig) -> Vec<LaserField> {
    vec![
        LaserField::new("493c", manifold(Term::S1_2, 1), manifold(Term::P1_2, 0)).with_saturation(cfg.saturation_493),
        LaserField::new("650c", manifold(Term::D3_2, 1), manifold(Term::P1_2, 0)).with_saturation(cfg.saturation_650),
    ]
}

/// Population entering optical pumping: Doppler cooling leaves the ion spread
/// over S1/2.
pub fn prepare_start() -> PopulationVector {
    PopulationVector::uniform(Term::S1_2.states()).expect("S1/2 has sublevels")
}

fn shelving_start(cfg: &ShelvingConfig) -> PopulationVector {
    match cfg.start {
        ShelvingStart::Qubit => PopulationVector::basis(QUBIT_ONE),
        ShelvingStart::Manifold => PopulationVector::uniform(manifold(Term::S1_2, 1).states()).expect("F=1 exists"),
    }
}

/// Draws a sublevel from a population vector.
pub(crate) fn sample_state<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> HyperfineState {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > 0.0 {
            acc += x;
            last = i;
            if u < acc {
                return HyperfineState::from_index(i);
            }
        }
    }
    HyperfineState::from_index(last)
}

pub(crate) fn count_hits<F>(trials: u64, hit: F) -> u64
where
    F: Fn(u64) -> bool + Sync,
{
    (0..trials).into_par_iter().map(|i| hit(i) as u64).sum()
}

fn check_trials(mode: Mode, trials: u64) -> Result<()> {
    if mode == Mode::Jump && trials == 0 {
        return Err(Error::InvalidArgument("jump mode needs at least one trial".into()));
    }
    Ok(())
}

fn check_duration(name: &str, t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Config(format!("{} must be a non-negative duration, got {}", name, t)));
    }
    Ok(())
}

/// Probability that optical pumping ends in `|0>`.
pub fn simulate_prepare_zero(
    spec: &AtomSpec,
    cfg: &PrepareConfig,
    mode: Mode,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    check_duration("prepare.duration", cfg.duration)?;
    check_trials(mode, trials)?;
    let lasers = prepare_lasers(cfg);
    let start = prepare_start();
    match mode {
        Mode::Rate => {
            let p = evolve_lasers(spec, &lasers, &start, cfg.duration)?;
            Ok(Estimate::exact(p.get(QUBIT_ZERO), p.outside(|s| s == QUBIT_ZERO)))
        }
        Mode::Jump => {
            let sampler = JumpSampler::new(spec, &lasers, cfg.duration)?;
            let hits = count_hits(trials, |i| {
                let mut rng = stream(seed, domain::PREPARE, i);
                let s0 = sample_state(start.as_slice(), &mut rng);
                sampler.sample(s0, &mut rng).final_state == QUBIT_ZERO
            });
            Ok(Estimate::counted(hits, trials))
        }
    }
}

fn shelved_from(
    spec: &AtomSpec,
    lasers: &[LaserField],
    duration: f64,
    start: &PopulationVector,
    mode: Mode,
    trials: u64,
    seed: u64,
    dom: u64,
) -> Result<Estimate> {
    match mode {
        Mode::Rate => {
            let p = evolve_lasers(spec, lasers, start, duration)?;
            Ok(Estimate::exact(p.term(Term::D5_2), p.outside(|s| s.term == Term::D5_2)))
        }
        Mode::Jump => {
            let sampler = JumpSampler::new(spec, lasers, duration)?;
            let hits = count_hits(trials, |i| {
                let mut rng = stream(seed, dom, i);
                let s0 = sample_state(start.as_slice(), &mut rng);
                sampler.sample(s0, &mut rng).final_state.term == Term::D5_2
            });
            Ok(Estimate::counted(hits, trials))
        }
    }
}

/// Probability of ending in D5/2 when shelving `|1>` (or the F=1 manifold).
pub fn simulate_shelving(
    spec: &AtomSpec,
    cfg: &ShelvingConfig,
    scheme: ShelvingScheme,
    mode: Mode,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    check_duration("shelving.duration", cfg.duration)?;
    check_trials(mode, trials)?;
    let lasers = shelving_lasers(cfg, scheme);
    shelved_from(spec, &lasers, cfg.duration, &shelving_start(cfg), mode, trials, seed, domain::SHELVE)
}

/// Probability that the shelving pulses wrongly shelve `|0>`.
pub fn simulate_offresonant_shelving_of_zero(
    spec: &AtomSpec,
    cfg: &ShelvingConfig,
    scheme: ShelvingScheme,
    mode: Mode,
    trials: u64,
    seed: u64,
) -> Result<Estimate> {
    check_duration("shelving.duration", cfg.duration)?;
    check_trials(mode, trials)?;
    let lasers = shelving_lasers(cfg, scheme);
    let start = PopulationVector::basis(QUBIT_ZERO);
    shelved_from(spec, &lasers, cfg.duration, &start, mode, trials, seed, domain::OFFRESONANT)
}

/// Misidentification probabilities of the cycling readout.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CyclingResult {
    /// `|0>` read as bright.
    pub eps_zero: Estimate,
    /// `|1>` read as dark.
    pub eps_one: Estimate,
    /// Steady-state scattering rate of a bright ion, 1/s.
    pub bright_rate: f64,
    /// Detection window implied by the photon budget, s.
    pub window: f64,
}

/// Sublevels that scatter at a rate comparable to the strongest one; the
/// ion counts as fluorescing while it sits in this set.
fn cycling_class(rm: &RateMatrix) -> [bool; N_STATES] {
    let max = rm.scatter.iter().cloned().fold(0.0, f64::max);
    let mut mask = [false; N_STATES];
    for (i, m) in mask.iter_mut().enumerate() {
        *m = max > 0.0 && rm.scatter[i] >= 1e-3 * max;
    }
    mask
}

/// Stationary fluorescence rate of the ion restricted to the cycling class.
fn bright_rate(rm: &RateMatrix, class: &[bool; N_STATES]) -> Result<f64> {
    let idx: Vec<usize> = (0..N_STATES).filter(|&i| class[i]).collect();
    let n = idx.len();
    if n == 0 {
        return Err(Error::InvalidArgument("cycling lasers scatter no light".into()));
    }
    // Restricted generator with losses folded back onto the diagonal so the
    // stationary state is a proper distribution over the class.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (c, &j) in idx.iter().enumerate() {
        for (r, &i) in idx.iter().enumerate() {
            if r != c {
                a[(r, c)] = rm.rate(j, i);
            }
        }
    }
    for c in 0..n {
        let out: f64 = (0..n).filter(|&r| r != c).map(|r| a[(r, c)]).sum();
        a[(c, c)] = -out;
    }
    let mut b = DVector::<f64>::zeros(n);
    for c in 0..n {
        a[(0, c)] = 1.0;
    }
    b[0] = 1.0;
    let ss = a.lu().solve(&b).ok_or_else(|| Error::Propagation("singular cycling generator".into()))?;
    Ok(idx.iter().enumerate().map(|(k, &i)| ss[k] * rm.fluorescence[i]).sum())
}

/// Distribution over (final state, time slices spent fluorescing).
fn bright_time_distribution(
    rm: &RateMatrix,
    class: &[bool; N_STATES],
    start: HyperfineState,
    window: f64,
    slices: usize,
) -> Result<Vec<f64>> {
    let u = propagator(rm, window / slices as f64)?;
    let mut dist = vec![DVector::<f64>::zeros(N_STATES); slices + 1];
    dist[0][start.index()] = 1.0;
    for step in 0..slices {
        let mut next = vec![DVector::<f64>::zeros(N_STATES); slices + 1];
        for k in 0..=step {
            let v = &dist[k];
            if v.iter().all(|&x| x == 0.0) {
                continue;
            }
            let mut lit = DVector::<f64>::zeros(N_STATES);
            let mut unlit = DVector::<f64>::zeros(N_STATES);
            for i in 0..N_STATES {
                if class[i] {
                    lit[i] = v[i];
                } else {
                    unlit[i] = v[i];
                }
            }
            next[k + 1] += &u * lit;
            next[k] += &u * unlit;
        }
        dist = next;
    }
    Ok(dist.iter().map(|v| v.iter().sum::<f64>().max(0.0)).collect())
}

fn check_cycling(cfg: &CyclingConfig) -> Result<()> {
    let ok = cfg.photon_budget.is_finite()
        && cfg.photon_budget > 0.0
        && cfg.bright_mean > cfg.dark_mean
        && cfg.dark_mean >= 0.0
        && cfg.slices > 0;
    if !ok {
        return Err(Error::Config(
            "cycling needs photon_budget > 0, bright_mean > dark_mean >= 0 and slices > 0".into(),
        ));
    }
    Ok(())
}

/// Threshold readout after hyperfine-selective cycling. Off-resonant
/// excitation during detection lets `|1>` fall dark and `|0>` turn bright.
pub fn simulate_cycling_readout(
    spec: &AtomSpec,
    cfg: &CyclingConfig,
    mode: Mode,
    trials: u64,
    seed: u64,
) -> Result<CyclingResult> {
    check_cycling(cfg)?;
    check_trials(mode, trials)?;
    let lasers = cycling_lasers(cfg);
    let rm = build_rate_matrix(spec, &lasers)?;
    let class = cycling_class(&rm);
    let rate = bright_rate(&rm, &class)?;
    let window = cfg.photon_budget / rate;
    let mean = |lit_fraction: f64| cfg.dark_mean + cfg.bright_mean * lit_fraction;

    match mode {
        Mode::Rate => {
            let tail = |start: HyperfineState| -> Result<(f64, f64)> {
                let d = bright_time_distribution(&rm, &class, start, window, cfg.slices)?;
                let mut dark = 0.0;
                let mut bright = 0.0;
                for (k, &w) in d.iter().enumerate() {
                    let c = poisson_cdf(mean(k as f64 / cfg.slices as f64), cfg.threshold);
                    dark += w * c;
                    bright += w * (1.0 - c);
                }
                Ok((dark, bright))
            };
            let (z_dark, z_bright) = tail(QUBIT_ZERO)?;
            let (o_dark, o_bright) = tail(QUBIT_ONE)?;
            Ok(CyclingResult {
                eps_zero: Estimate::exact(z_bright, z_dark),
                eps_one: Estimate::exact(o_dark, o_bright),
                bright_rate: rate,
                window,
            })
        }
        Mode::Jump => {
            let sampler = JumpSampler::new(spec, &lasers, window)?;
            let reads_bright = |start: HyperfineState, dom: u64, i: u64| {
                let mut rng = stream(seed, dom, i);
                let tr = sampler.sample(start, &mut rng);
                let lit = tr.dwell_time(|s| class[s.index()]) / window;
                let n = Poisson::new(mean(lit)).map(|p| p.sample(&mut rng)).unwrap_or(0.0);
                n > cfg.threshold as f64
            };
            let z = count_hits(trials, |i| reads_bright(QUBIT_ZERO, domain::CYCLING_ZERO, i));
            let o = count_hits(trials, |i| !reads_bright(QUBIT_ONE, domain::CYCLING_ONE, i));
            Ok(CyclingResult {
                eps_zero: Estimate::counted(z, trials),
                eps_one: Estimate::counted(o, trials),
                bright_rate: rate,
                window,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scheme_names_round_trip() {
        for s in ShelvingScheme::ALL {
            assert_eq!(s.name().parse::<ShelvingScheme>().unwrap(), s);
        }
        assert!("bare".parse::<ShelvingScheme>().is_err());
        assert!("exact".parse::<Mode>().is_err());
    }

    #[test]
    fn zero_duration_prepare_leaves_start() {
        let spec = AtomSpec::default();
        let cfg = PrepareConfig { duration: 0.0, ..Default::default() };
        let e = simulate_prepare_zero(&spec, &cfg, Mode::Rate, 0, 0).unwrap();
        assert_abs_diff_eq!(e.value, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn zero_duration_offresonant_is_zero() {
        let spec = AtomSpec::default();
        let cfg = ShelvingConfig { duration: 0.0, ..Default::default() };
        for scheme in ShelvingScheme::ALL {
            let e = simulate_offresonant_shelving_of_zero(&spec, &cfg, scheme, Mode::Rate, 0, 0).unwrap();
            assert_eq!(e.value, 0.0);
        }
    }

    #[test]
    fn bare_shelving_matches_branching_quotient() {
        let spec = AtomSpec::default();
        let e = simulate_shelving(&spec, &ShelvingConfig::default(), ShelvingScheme::Bare455, Mode::Rate, 0, 0)
            .unwrap();
        assert_abs_diff_eq!(e.value, 0.23 / 0.26, epsilon = 2e-4);
        assert_abs_diff_eq!(e.value + e.complement, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn jump_mode_needs_trials() {
        let spec = AtomSpec::default();
        assert!(simulate_prepare_zero(&spec, &PrepareConfig::default(), Mode::Jump, 0, 0).is_err());
    }

    #[test]
    fn cycling_background_limit() {
        // A huge ground splitting removes every off-resonant path out of |0>.
        let mut atom = crate::atom::AtomConfig::default();
        atom.splitting.s1_2.mhz = 1e9;
        let spec = AtomSpec::new(atom).unwrap();
        let cfg = CyclingConfig::default();
        let r = simulate_cycling_readout(&spec, &cfg, Mode::Rate, 0, 0).unwrap();
        let background = 1.0 - poisson_cdf(cfg.dark_mean, cfg.threshold);
        assert_abs_diff_eq!(r.eps_zero.value, background, epsilon = 1e-9);
    }
}
