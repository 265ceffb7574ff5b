//! End-to-end state preparation and measurement of the hyperfine qubit.
//!
//! `|0>` trials: optical pumping, shelving pulses, detection. `|1>` trials:
//! optical pumping, the composite microwave transfer, shelving, detection.
//! Trials run in alternating blocks of one state; each trial draws from its
//! own stream keyed by its position in the schedule.

use std::f64::consts::{LN_2, TAU};
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::atom::{AtomSpec, HyperfineState, Term, N_STATES, QUBIT_ONE, QUBIT_ZERO};
use crate::config::Config;
use crate::dynamics::{
    evolve_lasers, prepare_lasers, prepare_start, sample_state, shelving_lasers, simulate_offresonant_shelving_of_zero,
    simulate_prepare_zero, simulate_shelving, transfer_kernel, JumpSampler, Mode,
};
use crate::error::{Error, Result};
use crate::pulse::{cp_robust_180, sequence_transfer};
use crate::readout::{poisson_sample, sample_counts, Histogram, Outcome};
use crate::rng::{domain, stream};
use crate::stats::{format_fixed, BinomialEstimate};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Qubit {
    Zero,
    One,
}

/// A run of consecutive trials preparing the same state.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Block {
    pub state: Qubit,
    /// Global index of the block's first trial.
    pub first: u64,
    pub len: u64,
}

/// Alternating blocks starting with `|0>`. When one state runs out the
/// other continues alone; the last block of each state may be short.
pub fn block_schedule(trials_zero: u64, trials_one: u64, block_size: u64) -> Result<Vec<Block>> {
    if block_size == 0 {
        return Err(Error::InvalidArgument("block size must be positive".into()));
    }
    let mut left = [trials_zero, trials_one];
    let mut blocks = Vec::new();
    let mut next = 0u64;
    let mut turn = 0usize;
    while left[0] + left[1] > 0 {
        if left[turn] == 0 {
            turn ^= 1;
        }
        let len = left[turn].min(block_size);
        blocks.push(Block { state: if turn == 0 { Qubit::Zero } else { Qubit::One }, first: next, len });
        left[turn] -= len;
        next += len;
        turn ^= 1;
    }
    Ok(blocks)
}

/// Probability that the composite sequence transfers the qubit, at the
/// configured Rabi rate, detuning and area scale.
pub fn composite_transfer(cfg: &Config) -> f64 {
    let rabi = TAU * cfg.spam.rabi_khz * 1e3;
    let detuning = TAU * cfg.spam.detuning_khz * 1e3;
    sequence_transfer(&cp_robust_180::<f64>(), rabi, detuning, cfg.spam.area_scale)
}

/// Swaps `|0>` and `|1>` population with probability `p`.
fn mix_qubit(pop: &mut [f64], p: f64) {
    let (a, b) = (pop[QUBIT_ZERO.index()], pop[QUBIT_ONE.index()]);
    pop[QUBIT_ZERO.index()] = (1.0 - p) * a + p * b;
    pop[QUBIT_ONE.index()] = p * a + (1.0 - p) * b;
}

fn flip_qubit<R: Rng + ?Sized>(s: HyperfineState, p: f64, rng: &mut R) -> HyperfineState {
    if p > 0.0 && (s == QUBIT_ZERO || s == QUBIT_ONE) && rng.random::<f64>() < p {
        if s == QUBIT_ZERO {
            QUBIT_ONE
        } else {
            QUBIT_ZERO
        }
    } else {
        s
    }
}

enum Engine {
    /// Probability of ending shelved for each prepared state.
    Rate { dark: [f64; 2] },
    Jump { prepare: JumpSampler, shelve: JumpSampler, start: Vec<f64> },
}

struct Pipeline<'a> {
    cfg: &'a Config,
    transfer: f64,
    engine: Engine,
}

impl<'a> Pipeline<'a> {
    fn new(spec: &AtomSpec, cfg: &'a Config, mode: Mode) -> Result<Self> {
        cfg.validate()?;
        let transfer = composite_transfer(cfg);
        let prep = prepare_lasers(&cfg.prepare);
        let shelve = shelving_lasers(&cfg.shelving, cfg.shelving.scheme);
        let engine = match mode {
            Mode::Rate => {
                let p0 = evolve_lasers(spec, &prep, &prepare_start(), cfg.prepare.duration)?;
                let kernel = transfer_kernel(spec, &shelve, cfg.shelving.duration)?;
                let shelved: Vec<f64> = (0..N_STATES)
                    .map(|s| {
                        (0..N_STATES)
                            .filter(|&e| HyperfineState::from_index(e).term == Term::D5_2)
                            .map(|e| kernel[s][e])
                            .sum()
                    })
                    .collect();
                let dark_of = |p: &[f64]| p.iter().zip(&shelved).map(|(a, b)| a * b).sum::<f64>().clamp(0.0, 1.0);
                let zero = p0.as_slice().to_vec();
                let mut one = zero.clone();
                mix_qubit(&mut one, transfer);
                mix_qubit(&mut one, cfg.spam.eps_cp);
                Engine::Rate { dark: [dark_of(&zero), dark_of(&one)] }
            }
            Mode::Jump => Engine::Jump {
                prepare: JumpSampler::new(spec, &prep, cfg.prepare.duration)?,
                shelve: JumpSampler::new(spec, &shelve, cfg.shelving.duration)?,
                start: prepare_start().as_slice().to_vec(),
            },
        };
        Ok(Pipeline { cfg, transfer, engine })
    }

    /// Photon count of one trial.
    fn trial(&self, state: Qubit, index: u64, seed: u64) -> u64 {
        let mut rng = stream(seed, domain::SPAM, index);
        let shelved = match &self.engine {
            Engine::Rate { dark } => {
                let p = dark[(state == Qubit::One) as usize];
                rng.random::<f64>() < p
            }
            Engine::Jump { prepare, shelve, start } => {
                let s0 = sample_state(start, &mut rng);
                let mut s = prepare.sample(s0, &mut rng).final_state;
                if state == Qubit::One {
                    s = flip_qubit(s, self.transfer, &mut rng);
                    s = flip_qubit(s, self.cfg.spam.eps_cp, &mut rng);
                }
                shelve.sample(s, &mut rng).final_state.term == Term::D5_2
            }
        };
        let model = self.cfg.readout.model();
        if shelved {
            sample_counts(Outcome::Shelved, &model, &mut rng)
        } else if rng.random::<f64>() < self.cfg.spam.background_flip {
            poisson_sample(model.dark_mean, &mut rng)
        } else {
            sample_counts(Outcome::Bright, &model, &mut rng)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpamReport {
    pub mode: Mode,
    pub seed: u64,
    /// `|0>` read as `|1>`.
    pub eps_zero: BinomialEstimate,
    /// `|1>` read as `|0>`.
    pub eps_one: BinomialEstimate,
    /// `1 - (eps_zero + eps_one) / 2`.
    pub fidelity: f64,
    /// From the one-sigma Wilson half-widths.
    pub fidelity_sigma: f64,
    pub fidelity_wald_sigma: f64,
    pub fidelity_formatted: String,
    pub threshold: u32,
    pub trials_zero: u64,
    pub trials_one: u64,
    pub blocks: usize,
    pub composite_transfer: f64,
    pub histogram_zero: Histogram,
    pub histogram_one: Histogram,
    pub budget: Budget,
    pub config: Config,
}

pub fn run_spam(spec: &AtomSpec, cfg: &Config, mode: Mode, seed: u64) -> Result<SpamReport> {
    let pipeline = Pipeline::new(spec, cfg, mode)?;
    let blocks = block_schedule(cfg.spam.trials_zero, cfg.spam.trials_one, cfg.spam.block_size)?;
    let classifier = cfg.readout.classifier();
    let per_block: Vec<(Qubit, Histogram, u64)> = blocks
        .par_iter()
        .map(|b| {
            let mut h = Histogram::default();
            let mut wrong = 0;
            for i in b.first..b.first + b.len {
                let n = pipeline.trial(b.state, i, seed);
                h.add(n);
                let read = classifier.classify(n);
                let expected = if b.state == Qubit::Zero { Outcome::Bright } else { Outcome::Shelved };
                wrong += (read != expected) as u64;
            }
            (b.state, h, wrong)
        })
        .collect();

    let mut hist = [Histogram::default(), Histogram::default()];
    let mut wrong = [0u64; 2];
    for (state, h, w) in &per_block {
        let k = (*state == Qubit::One) as usize;
        hist[k].merge(h);
        wrong[k] += w;
    }
    let [h0, h1] = hist;
    let eps_zero = BinomialEstimate::new(wrong[0], cfg.spam.trials_zero)?;
    let eps_one = BinomialEstimate::new(wrong[1], cfg.spam.trials_one)?;
    let fidelity = 1.0 - (eps_zero.value + eps_one.value) / 2.0;
    let fidelity_sigma = eps_zero.wilson_half_width.hypot(eps_one.wilson_half_width) / 2.0;
    Ok(SpamReport {
        mode,
        seed,
        fidelity,
        fidelity_sigma,
        fidelity_wald_sigma: eps_zero.wald_sigma.hypot(eps_one.wald_sigma) / 2.0,
        fidelity_formatted: format_fixed(fidelity, fidelity_sigma),
        eps_zero,
        eps_one,
        threshold: cfg.readout.threshold,
        trials_zero: cfg.spam.trials_zero,
        trials_one: cfg.spam.trials_one,
        blocks: blocks.len(),
        composite_transfer: pipeline.transfer,
        histogram_zero: h0,
        histogram_one: h1,
        budget: error_budget(spec, cfg)?,
        config: cfg.clone(),
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Simulated,
    Configured,
    Analytic,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Simulated => "simulated",
            Source::Configured => "configured",
            Source::Analytic => "analytic",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BudgetEntry {
    pub process: String,
    /// Contribution to the average SPAM error.
    pub error: f64,
    pub source: Source,
}

impl BudgetEntry {
    /// Error in units of 1e-4.
    pub fn per_1e4(&self) -> f64 {
        self.error * 1e4
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Budget {
    pub entries: Vec<BudgetEntry>,
    pub total: f64,
}

impl Budget {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("process,error_1e-4,source\n");
        for e in &self.entries {
            s.push_str(&format!("{},{:.4},{}\n", e.process, e.per_1e4(), e.source));
        }
        s.push_str(&format!("total,{:.4},\n", self.total * 1e4));
        s
    }

    pub fn to_table(&self) -> String {
        let width = self.entries.iter().map(|e| e.process.len()).max().unwrap_or(0).max(5);
        let mut s = format!("{:<width$}  {:>10}  {}\n", "process", "err/1e-4", "source", width = width);
        for e in &self.entries {
            s.push_str(&format!("{:<width$}  {:>10.3}  {}\n", e.process, e.per_1e4(), e.source, width = width));
        }
        s.push_str(&format!("{:<width$}  {:>10.3}\n", "total", self.total * 1e4, width = width));
        s
    }
}

/// Average-error contributions of each process, each half of the error it
/// causes on the one state it affects.
pub fn error_budget(spec: &AtomSpec, cfg: &Config) -> Result<Budget> {
    cfg.validate()?;
    let prep = simulate_prepare_zero(spec, &cfg.prepare, Mode::Rate, 0, 0)?;
    let p0 = evolve_lasers(spec, &prepare_lasers(&cfg.prepare), &prepare_start(), cfg.prepare.duration)?;
    // Leftover |1> after pumping is flipped to |0> by the transfer pulse.
    let initialization = (prep.complement + p0.get(QUBIT_ONE)) / 2.0;
    let composite = (cfg.spam.eps_cp + (1.0 - composite_transfer(cfg))) / 2.0;
    let decay = cfg.readout.model().decay_weight() / 2.0;
    let scheme = cfg.shelving.scheme;
    let shelving = simulate_shelving(spec, &cfg.shelving, scheme, Mode::Rate, 0, 0)?.complement / 2.0;
    let offresonant = simulate_offresonant_shelving_of_zero(spec, &cfg.shelving, scheme, Mode::Rate, 0, 0)?.value / 2.0;
    let background = cfg.spam.background_flip / 2.0;

    let entries = vec![
        BudgetEntry { process: "initialization to |0>".into(), error: initialization, source: Source::Simulated },
        BudgetEntry { process: "CP Robust 180".into(), error: composite, source: Source::Configured },
        BudgetEntry { process: "D5/2 decay during readout".into(), error: decay, source: Source::Analytic },
        BudgetEntry { process: "shelving |1>".into(), error: shelving, source: Source::Simulated },
        BudgetEntry { process: "off-resonant shelving |0>".into(), error: offresonant, source: Source::Simulated },
        BudgetEntry { process: "S1/2 readout".into(), error: background, source: Source::Configured },
    ];
    let total = entries.iter().map(|e| e.error).sum();
    Ok(Budget { entries, total })
}

/// Largest register size `floor(ln 2 / eps)` whose all-qubit readout still
/// succeeds with probability above one half.
pub fn qubit_capacity(eps: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("per-qubit error must lie in (0, 1), got {}", eps)));
    }
    Ok((LN_2 / eps).floor() as u64)
}

/// Preparation error when a saturated quadrupole drive moves a fixed
/// fraction of `|1>` straight to D5/2 and optical pumping shelves the rest.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct DirectTransferScenario {
    pub transfer_fraction: f64,
    /// Error of optically pumped shelving alone.
    pub shelving_error: f64,
    /// Probability that directly transferred population decays before
    /// detection starts.
    pub early_decay: f64,
    pub infidelity: f64,
}

pub const DIRECT_TRANSFER_FRACTION: f64 = 0.875;

pub fn scenario_1762(spec: &AtomSpec, cfg: &Config, transfer_fraction: f64) -> Result<DirectTransferScenario> {
    if !(0.0..=1.0).contains(&transfer_fraction) {
        return Err(Error::InvalidArgument(format!("transfer fraction {} outside [0, 1]", transfer_fraction)));
    }
    let shelving_error =
        simulate_shelving(spec, &cfg.shelving, cfg.shelving.scheme, Mode::Rate, 0, 0)?.complement;
    let tau = spec.lifetime(Term::D5_2).unwrap_or(f64::INFINITY);
    let early_decay = -(-cfg.shelving.duration / tau).exp_m1();
    let infidelity = (1.0 - transfer_fraction) * shelving_error + transfer_fraction * early_decay;
    Ok(DirectTransferScenario { transfer_fraction, shelving_error, early_decay, infidelity })
}
