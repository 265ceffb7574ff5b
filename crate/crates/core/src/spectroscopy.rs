//! Synthetic 455 nm and 614 nm line scans and their Lorentzian analysis.
//!
//! Frequencies are offsets from the matching line of the even reference
//! isotope, in MHz.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atom::{AtomSpec, Manifold, Term};
use crate::dynamics::{evolve_lasers, LaserField, PopulationVector};
use crate::error::{Error, Result};
use crate::fit::{extract_splitting, fit_lorentzian, FitResult, Measurement};
use crate::rng::{domain, stream};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScanKind {
    #[serde(rename = "shelve-455")]
    Shelve455,
    #[serde(rename = "deshelve-614")]
    Deshelve614,
}

impl ScanKind {
    pub fn name(self) -> &'static str {
        match self {
            ScanKind::Shelve455 => "shelve-455",
            ScanKind::Deshelve614 => "deshelve-614",
        }
    }

    /// The two hyperfine components resolved by a scan of this kind, lower
    /// frequency first.
    pub fn lines(self) -> [SpectralLine; 2] {
        match self {
            ScanKind::Shelve455 => [SpectralLine::S1P2, SpectralLine::S1P1],
            ScanKind::Deshelve614 => [SpectralLine::D2P2, SpectralLine::D3P2],
        }
    }
}

impl FromStr for ScanKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shelve-455" | "455" => Ok(ScanKind::Shelve455),
            "deshelve-614" | "614" => Ok(ScanKind::Deshelve614),
            _ => Err(Error::Unknown { kind: "scan kind", name: s.to_string() }),
        }
    }
}

impl fmt::Display for ScanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single hyperfine component probed by a scan.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralLine {
    /// S1/2 F=1 to P3/2 F=2
    S1P2,
    /// S1/2 F=1 to P3/2 F=1
    S1P1,
    /// D5/2 F=3 to P3/2 F=2
    D3P2,
    /// D5/2 F=2 to P3/2 F=2
    D2P2,
}

impl SpectralLine {
    pub fn lower(self) -> Manifold {
        match self {
            SpectralLine::S1P2 | SpectralLine::S1P1 => Manifold { term: Term::S1_2, f: 1 },
            SpectralLine::D3P2 => Manifold { term: Term::D5_2, f: 3 },
            SpectralLine::D2P2 => Manifold { term: Term::D5_2, f: 2 },
        }
    }

    pub fn upper(self) -> Manifold {
        match self {
            SpectralLine::S1P1 => Manifold { term: Term::P3_2, f: 1 },
            _ => Manifold { term: Term::P3_2, f: 2 },
        }
    }

    pub fn kind(self) -> ScanKind {
        match self {
            SpectralLine::S1P2 | SpectralLine::S1P1 => ScanKind::Shelve455,
            _ => ScanKind::Deshelve614,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SpectralLine::S1P2 => "s1-p2",
            SpectralLine::S1P1 => "s1-p1",
            SpectralLine::D3P2 => "d3-p2",
            SpectralLine::D2P2 => "d2-p2",
        }
    }

    fn code(self) -> u64 {
        match self {
            SpectralLine::S1P2 => 0,
            SpectralLine::S1P1 => 1,
            SpectralLine::D3P2 => 2,
            SpectralLine::D2P2 => 3,
        }
    }

    /// Resonance frequency relative to the reference isotope.
    pub fn frequency(self, spec: &AtomSpec) -> f64 {
        spec.reference_frequency(self.lower(), self.upper()).expect("scan lines are connected")
    }
}

/// One scan over a frequency grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub kind: ScanKind,
    /// Probe frequencies, MHz, strictly increasing.
    pub grid: Vec<f64>,
    pub trials: u64,
    /// Probe pulse length, s.
    pub probe_duration: f64,
    pub probe_saturation: f64,
    /// D5/2 hyperfine level prepared before a 614 nm scan (2 or 3).
    pub prepare_f: i32,
    /// 455 nm pulse used to prepare the D5/2 level, s.
    pub prepare_duration: f64,
    pub prepare_saturation: f64,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("scan grid is empty".into()));
        }
        if self.grid.iter().any(|x| !x.is_finite()) || self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("scan grid must be finite and strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("scan needs at least one trial per point".into()));
        }
        for (name, v) in [
            ("probe_duration", self.probe_duration),
            ("probe_saturation", self.probe_saturation),
            ("prepare_duration", self.prepare_duration),
            ("prepare_saturation", self.prepare_saturation),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("spectroscopy.{} must be finite and non-negative", name)));
            }
        }
        if self.kind == ScanKind::Deshelve614 && !(self.prepare_f == 2 || self.prepare_f == 3) {
            return Err(Error::Config(format!("D5/2 has no F={} level", self.prepare_f)));
        }
        Ok(())
    }
}

/// One grid point of a scan.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub frequency_mhz: f64,
    /// Expected D5/2 population after the sequence.
    pub probability: f64,
    /// Observed fraction of trials read as shelved.
    pub shelved_fraction: f64,
    pub trials: u64,
}

impl ScanSample {
    /// The quantity that peaks on resonance: shelved fraction for the 455 nm
    /// scan, deshelved fraction for the 614 nm scan.
    pub fn signal(&self, kind: ScanKind) -> f64 {
        match kind {
            ScanKind::Shelve455 => self.shelved_fraction,
            ScanKind::Deshelve614 => 1.0 - self.shelved_fraction,
        }
    }
}

fn probe(kind: ScanKind, frequency: f64, saturation: f64, spec: &AtomSpec) -> LaserField {
    // Any component of the line serves as the laser's nominal target.
    let line = kind.lines()[0];
    LaserField::new("probe", line.lower(), line.upper())
        .with_saturation(saturation)
        .with_detuning(frequency - line.frequency(spec))
}

/// Population before the probe pulse.
fn scan_start(spec: &AtomSpec, cfg: &ScanConfig) -> Result<PopulationVector> {
    let s1 = PopulationVector::uniform(Manifold { term: Term::S1_2, f: 1 }.states())?;
    match cfg.kind {
        ScanKind::Shelve455 => Ok(s1),
        ScanKind::Deshelve614 => {
            // P3/2 F=2 fills D5/2 F=3 and F=2; P3/2 F=1 can only reach F=2.
            let upper_f = if cfg.prepare_f == 3 { 2 } else { 1 };
            let upper = Manifold { term: Term::P3_2, f: upper_f };
            let s1m = Manifold { term: Term::S1_2, f: 1 };
            let pump = LaserField::new("455", s1m, upper).with_saturation(cfg.prepare_saturation);
            evolve_lasers(spec, &[pump], &s1, cfg.prepare_duration)
        }
    }
}

/// Simulates a scan; with `noise` each point is a binomial draw over the
/// configured trials, otherwise the exact expectation is reported.
pub fn synthesize_scan(spec: &AtomSpec, cfg: &ScanConfig, noise: bool, seed: u64) -> Result<Vec<ScanSample>> {
    synthesize(spec, cfg, noise, seed, 0)
}

fn synthesize(spec: &AtomSpec, cfg: &ScanConfig, noise: bool, seed: u64, tag: u64) -> Result<Vec<ScanSample>> {
    cfg.validate()?;
    let start = scan_start(spec, cfg)?;
    cfg.grid
        .par_iter()
        .enumerate()
        .map(|(i, &nu)| {
            let laser = probe(cfg.kind, nu, cfg.probe_saturation, spec);
            let p = evolve_lasers(spec, &[laser], &start, cfg.probe_duration)?.term(Term::D5_2).clamp(0.0, 1.0);
            let shelved_fraction = if noise {
                let mut rng = stream(seed, domain::SPECTROSCOPY, (tag << 32) | i as u64);
                let k = Binomial::new(cfg.trials, p).map_err(|e| Error::InvalidArgument(e.to_string()))?.sample(&mut rng);
                k as f64 / cfg.trials as f64
            } else {
                p
            };
            Ok(ScanSample { frequency_mhz: nu, probability: p, shelved_fraction, trials: cfg.trials })
        })
        .collect()
}

pub fn scan_to_csv(points: &[ScanSample]) -> String {
    let mut s = String::from("frequency_MHz,shelved_fraction,trials\n");
    for p in points {
        s.push_str(&format!("{},{},{}\n", p.frequency_mhz, p.shelved_fraction, p.trials));
    }
    s
}

/// Reads `frequency_MHz,shelved_fraction,trials` rows; `#` lines are skipped.
pub fn scan_from_csv(text: &str) -> Result<Vec<ScanSample>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("frequency") {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let bad = || Error::InvalidArgument(format!("scan CSV line {}: `{}`", n + 1, line));
        if cols.len() != 3 {
            return Err(bad());
        }
        let f: f64 = cols[0].trim().parse().map_err(|_| bad())?;
        let y: f64 = cols[1].trim().parse().map_err(|_| bad())?;
        let t: u64 = cols[2].trim().parse().map_err(|_| bad())?;
        out.push(ScanSample { frequency_mhz: f, probability: y, shelved_fraction: y, trials: t });
    }
    Ok(out)
}

/// Fits the resonance of a scan.
pub fn fit_scan(kind: ScanKind, points: &[ScanSample]) -> Result<FitResult<f64>> {
    let data: Vec<(f64, f64)> = points.iter().map(|p| (p.frequency_mhz, p.signal(kind))).collect();
    fit_lorentzian(&data, None)
}

/// Settings for the two-line scans of either kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectroscopyConfig {
    pub trials: u64,
    pub probe_duration: f64,
    pub saturation_455: f64,
    pub saturation_614: f64,
    /// Full width of the grid around each line, MHz.
    pub span_455: f64,
    pub step_455: f64,
    pub span_614: f64,
    pub step_614: f64,
    pub prepare_duration: f64,
    pub prepare_saturation: f64,
}

impl Default for SpectroscopyConfig {
    fn default() -> Self {
        SpectroscopyConfig {
            trials: 200,
            probe_duration: 50e-6,
            saturation_455: 0.01,
            saturation_614: 0.015,
            span_455: 160.0,
            step_455: 4.0,
            span_614: 120.0,
            step_614: 4.0,
            prepare_duration: 200e-6,
            prepare_saturation: 0.3,
        }
    }
}

impl SpectroscopyConfig {
    /// Evenly spaced grid of `span` MHz around the nominal line frequency.
    pub fn grid(&self, spec: &AtomSpec, line: SpectralLine) -> Vec<f64> {
        let (span, step) = match line.kind() {
            ScanKind::Shelve455 => (self.span_455, self.step_455),
            ScanKind::Deshelve614 => (self.span_614, self.step_614),
        };
        let c = line.frequency(spec);
        let n = (span / step).round().max(0.0) as i64;
        (0..=n).map(|k| c - span / 2.0 + step * k as f64).collect()
    }

    pub fn scan(&self, spec: &AtomSpec, line: SpectralLine) -> ScanConfig {
        let kind = line.kind();
        ScanConfig {
            kind,
            grid: self.grid(spec, line),
            trials: self.trials,
            probe_duration: self.probe_duration,
            probe_saturation: match kind {
                ScanKind::Shelve455 => self.saturation_455,
                ScanKind::Deshelve614 => self.saturation_614,
            },
            prepare_f: line.lower().f,
            prepare_duration: self.prepare_duration,
            prepare_saturation: self.prepare_saturation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LineScan {
    pub line: SpectralLine,
    pub points: Vec<ScanSample>,
    pub fit: FitResult<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectroscopyReport {
    pub kind: ScanKind,
    pub scans: Vec<LineScan>,
    /// Hyperfine splitting of the excited (455 nm) or metastable (614 nm)
    /// term, from the two fitted centers.
    pub splitting: Measurement,
    pub isotope_shift: Measurement,
    pub injected_splitting: f64,
    pub injected_isotope_shift: f64,
}

/// Offset of `manifold` from its term centroid when the term's splitting is
/// `splitting` instead of the configured value.
fn scaled_offset(spec: &AtomSpec, manifold: Manifold, splitting: f64) -> f64 {
    let configured = spec.splittings().get(manifold.term).mhz;
    if configured == 0.0 {
        return 0.0;
    }
    spec.hyperfine_offset(manifold) * splitting / configured
}

/// Line-centroid shift from the two fitted components: the 2F+1 weighted
/// mean of the upper (455 nm) or lower (614 nm) hyperfine levels cancels,
/// leaving the other level's offset to remove.
fn isotope_shift(spec: &AtomSpec, kind: ScanKind, a: &FitResult<f64>, b: &FitResult<f64>) -> Measurement {
    let [la, lb] = kind.lines();
    match kind {
        ScanKind::Shelve455 => {
            let (wa, wb) = ((2 * la.upper().f + 1) as f64, (2 * lb.upper().f + 1) as f64);
            let sum = wa + wb;
            let mean = (wa * a.model.center + wb * b.model.center) / sum;
            Measurement {
                value: mean + spec.hyperfine_offset(la.lower()),
                sigma: (wa * a.std_errors.center).hypot(wb * b.std_errors.center) / sum,
            }
        }
        ScanKind::Deshelve614 => {
            let (wa, wb) = ((2 * la.lower().f + 1) as f64, (2 * lb.lower().f + 1) as f64);
            let sum = wa + wb;
            let mean = (wa * a.model.center + wb * b.model.center) / sum;
            let p = scaled_offset(spec, la.upper(), spec.splittings().get(Term::P3_2).mhz);
            Measurement { value: mean - p, sigma: (wa * a.std_errors.center).hypot(wb * b.std_errors.center) / sum }
        }
    }
}

/// Scans both components of one line, fits each and derives the splitting
/// and isotope shift.
pub fn run_spectroscopy(
    spec: &AtomSpec,
    cfg: &SpectroscopyConfig,
    kind: ScanKind,
    noise: bool,
    seed: u64,
) -> Result<SpectroscopyReport> {
    let mut scans = Vec::new();
    for line in kind.lines() {
        let sc = cfg.scan(spec, line);
        if sc.grid.len() < 4 {
            return Err(Error::InvalidArgument(format!("{} grid has {} points; fitting needs 4", line.name(), sc.grid.len())));
        }
        let points = synthesize(spec, &sc, noise, seed, line.code())?;
        let fit = fit_scan(kind, &points)?;
        scans.push(LineScan { line, points, fit });
    }
    let splitting = extract_splitting(&scans[0].fit, &scans[1].fit)?;
    let isotope_shift = isotope_shift(spec, kind, &scans[0].fit, &scans[1].fit);
    let (injected_splitting, injected_isotope_shift) = match kind {
        ScanKind::Shelve455 => (spec.splittings().p3_2.mhz, spec.splittings().isotope_shift_455),
        ScanKind::Deshelve614 => (spec.splittings().d5_2.mhz, spec.splittings().isotope_shift_614),
    };
    Ok(SpectroscopyReport { kind, scans, splitting, isotope_shift, injected_splitting, injected_isotope_shift })
}
