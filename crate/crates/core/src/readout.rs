//! Photon-count statistics of fluorescence detection.
//!
//! A bright ion yields Poisson counts. A shelved ion is dark unless the
//! metastable level decays during the window, after which it fluoresces for
//! the remaining time; the dark distribution is therefore a Poisson mixture
//! over the decay time.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::scalar::Scalar;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountModel<T = f64> {
    /// Mean counts per window from a bright ion.
    pub bright_mean: T,
    /// Mean counts per window from a dark ion (background included).
    pub dark_mean: T,
    /// Detection window, s.
    pub window: T,
    /// Lifetime of the shelf, s.
    pub lifetime: T,
}

impl<T: Scalar> Default for CountModel<T> {
    fn default() -> Self {
        CountModel { bright_mean: T::lit(39.0), dark_mean: T::lit(1.0), window: T::lit(4.5e-3), lifetime: T::lit(30.0) }
    }
}

impl<T: Scalar> CountModel<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dark_mean >= T::zero()
            && self.bright_mean > self.dark_mean
            && self.window > T::zero()
            && self.lifetime > T::zero()
            && self.bright_mean.is_finite()
            && self.window.is_finite();
        if !ok {
            return Err(Error::Config(format!(
                "count model needs bright_mean > dark_mean >= 0, window > 0, lifetime > 0 (got {:?})",
                (self.bright_mean, self.dark_mean, self.window, self.lifetime)
            )));
        }
        Ok(())
    }

    /// Probability that the shelf decays inside the window, `1 - exp(-T/tau)`.
    pub fn decay_weight(&self) -> T {
        -(-(self.window / self.lifetime)).exp_m1()
    }

    /// Count range that holds all but a negligible tail of either state.
    pub fn support(&self) -> usize {
        let top = (self.bright_mean + self.dark_mean).as_f64();
        (top + 15.0 * top.sqrt() + 30.0).ceil() as usize
    }
}

/// Probability mass function on `0..len`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pmf<T = f64> {
    pub probs: Vec<T>,
}

impl<T: Scalar> Pmf<T> {
    pub fn total(&self) -> T {
        self.probs.iter().copied().sum()
    }

    pub fn mean(&self) -> T {
        self.probs.iter().enumerate().map(|(k, &p)| T::lit(k as f64) * p).sum()
    }

    pub fn get(&self, n: usize) -> T {
        self.probs.get(n).copied().unwrap_or_else(T::zero)
    }

    /// `P(n <= k)`
    pub fn cdf(&self, k: usize) -> T {
        self.probs.iter().take(k + 1).copied().sum()
    }

    /// `P(n > k)`, summed from the tail.
    pub fn upper_tail(&self, k: usize) -> T {
        self.probs.iter().skip(k + 1).copied().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("count,probability\n");
        for (k, p) in self.probs.iter().enumerate() {
            s.push_str(&format!("{},{:e}\n", k, p.as_f64()));
        }
        s
    }
}

/// Poisson probabilities `P(k; lambda)` for `k < len`, evaluated in log
/// space so large means do not underflow.
pub fn poisson_pmf<T: Scalar>(lambda: T, len: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(len);
    if lambda == T::zero() {
        out.resize(len, T::zero());
        if len > 0 {
            out[0] = T::one();
        }
        return out;
    }
    let ln_l = lambda.ln();
    let mut ln_fact = T::zero();
    for k in 0..len {
        if k > 0 {
            ln_fact += T::lit(k as f64).ln();
        }
        out.push((T::lit(k as f64) * ln_l - lambda - ln_fact).exp());
    }
    out
}

/// `P(n <= k)` for a Poisson variable.
pub fn poisson_cdf(lambda: f64, k: u32) -> f64 {
    poisson_pmf(lambda, k as usize + 1).iter().sum::<f64>().min(1.0)
}

pub fn bright_pmf<T: Scalar>(m: &CountModel<T>) -> Result<Pmf<T>> {
    m.validate()?;
    Ok(Pmf { probs: poisson_pmf(m.bright_mean, m.support()) })
}

/// Nodes of the decay-time quadrature used by [`dark_pmf_with_decay`].
pub const DECAY_QUADRATURE_NODES: usize = 256;
const PANEL_ORDER: usize = 8;

fn decay_mixture<T: Scalar>(m: &CountModel<T>, len: usize, nodes: usize) -> Vec<T> {
    let (x, w) = gauss_legendre(PANEL_ORDER);
    let panels = nodes / PANEL_ORDER;
    let h = m.window / T::lit(panels as f64);
    let mut acc = vec![T::zero(); len];
    for p in 0..panels {
        let a = h * T::lit(p as f64);
        for (xi, wi) in x.iter().zip(&w) {
            let t = a + h * T::lit(0.5 * (xi + 1.0));
            let density = (-(t / m.lifetime)).exp() / m.lifetime;
            let weight = T::lit(0.5 * wi) * h * density;
            let lam = m.dark_mean + m.bright_mean * (m.window - t) / m.window;
            for (k, q) in poisson_pmf(lam, len).into_iter().enumerate() {
                acc[k] += weight * q;
            }
        }
    }
    acc
}

/// Count distribution of a shelved ion, including decay of the shelf
/// during the window.
pub fn dark_pmf_with_decay<T: Scalar>(m: &CountModel<T>) -> Result<Pmf<T>> {
    dark_pmf_with_nodes(m, DECAY_QUADRATURE_NODES)
}

pub fn dark_pmf_with_nodes<T: Scalar>(m: &CountModel<T>, nodes: usize) -> Result<Pmf<T>> {
    m.validate()?;
    if nodes == 0 || nodes % PANEL_ORDER != 0 {
        return Err(Error::InvalidArgument(format!("node count {} must be a positive multiple of {}", nodes, PANEL_ORDER)));
    }
    let len = m.support();
    let survive = (-(m.window / m.lifetime)).exp();
    let mut probs: Vec<T> = poisson_pmf(m.dark_mean, len).into_iter().map(|p| p * survive).collect();

    let coarse = decay_mixture(m, len, nodes);
    let fine = decay_mixture(m, len, 2 * nodes);
    let err = coarse.iter().zip(&fine).map(|(a, b)| (*a - *b).abs().as_f64()).fold(0.0, f64::max);
    let target = 1e-12_f64.max(100.0 * T::epsilon().as_f64());
    if !(err <= target) {
        return Err(Error::Quadrature { estimate: err, target });
    }
    for (p, q) in probs.iter_mut().zip(fine) {
        *p += q;
    }
    Ok(Pmf { probs })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Bright,
    Shelved,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdClassifier {
    pub n_th: u32,
}

impl ThresholdClassifier {
    pub fn classify(&self, n: u64) -> Outcome {
        classify(n, self)
    }
}

/// Counts at or below the threshold read as shelved.
pub fn classify(n: u64, c: &ThresholdClassifier) -> Outcome {
    if n <= c.n_th as u64 {
        Outcome::Shelved
    } else {
        Outcome::Bright
    }
}

/// Draws a count from a bright or shelved ion.
pub fn sample_counts<T: Scalar, R: Rng + ?Sized>(state: Outcome, m: &CountModel<T>, rng: &mut R) -> u64 {
    let lb = m.bright_mean.as_f64();
    let ld = m.dark_mean.as_f64();
    let lam = match state {
        Outcome::Bright => lb,
        Outcome::Shelved => {
            let a = (m.window / m.lifetime).as_f64();
            let decayed = -(-a).exp_m1();
            let u: f64 = rng.random();
            if u < decayed {
                // Decay time from the exponential truncated to the window.
                let v: f64 = rng.random();
                let frac = -(-(v * decayed)).ln_1p() / a;
                ld + lb * (1.0 - frac.min(1.0))
            } else {
                ld
            }
        }
    };
    poisson_sample(lam, rng)
}

pub(crate) fn poisson_sample<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// `(bright read as shelved, shelved read as bright)` at threshold `n_th`.
pub fn threshold_error<T: Scalar>(m: &CountModel<T>, n_th: u32) -> Result<(T, T)> {
    let b = bright_pmf(m)?;
    let d = dark_pmf_with_decay(m)?;
    Ok(threshold_error_from(&b, &d, n_th))
}

fn threshold_error_from<T: Scalar>(bright: &Pmf<T>, dark: &Pmf<T>, n_th: u32) -> (T, T) {
    let k = n_th as usize;
    (bright.cdf(k).min(T::one()), dark.upper_tail(k).min(T::one()))
}

/// Average misidentification at every threshold in `0..=max`.
pub fn threshold_sweep<T: Scalar>(m: &CountModel<T>, max: u32) -> Result<Vec<(u32, T, T)>> {
    let b = bright_pmf(m)?;
    let d = dark_pmf_with_decay(m)?;
    Ok((0..=max)
        .map(|n| {
            let (e1, e2) = threshold_error_from(&b, &d, n);
            (n, e1, e2)
        })
        .collect())
}

/// Threshold in `0..=60` minimizing the average error; ties go to the
/// smaller threshold.
pub fn optimal_threshold<T: Scalar>(m: &CountModel<T>) -> Result<u32> {
    let sweep = threshold_sweep(m, 60)?;
    let mut best = (0, T::infinity());
    for (n, a, b) in sweep {
        let avg = (a + b) * T::lit(0.5);
        if avg < best.1 {
            best = (n, avg);
        }
    }
    Ok(best.0)
}

/// Thresholds whose average error is within `rel` of the optimum.
pub fn near_optimal_band<T: Scalar>(m: &CountModel<T>, rel: f64) -> Result<Vec<u32>> {
    let sweep = threshold_sweep(m, 60)?;
    let avg: Vec<T> = sweep.iter().map(|&(_, a, b)| (a + b) * T::lit(0.5)).collect();
    let min = avg.iter().copied().fold(T::infinity(), T::min);
    Ok(sweep.iter().zip(&avg).filter(|(_, &v)| v <= min * T::lit(1.0 + rel)).map(|(s, _)| s.0).collect())
}

/// Occurrences per photon count.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: BTreeMap<u64, u64>,
    pub total: u64,
}

impl Histogram {
    pub fn add(&mut self, count: u64) {
        *self.bins.entry(count).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (&k, &v) in &other.bins {
            *self.bins.entry(k).or_insert(0) += v;
        }
        self.total += other.total;
    }

    /// Fraction of entries with count `<= n`.
    pub fn fraction_at_or_below(&self, n: u64) -> f64 {
        let k: u64 = self.bins.range(..=n).map(|(_, &v)| v).sum();
        k as f64 / self.total as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("count,occurrences\n");
        for (k, v) in &self.bins {
            s.push_str(&format!("{},{}\n", k, v));
        }
        s
    }

    /// Parses the output of [`Histogram::to_csv`]; `#` lines are ignored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut h = Histogram::default();
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        match lines.next() {
            Some("count,occurrences") => {}
            other => return Err(Error::InvalidArgument(format!("unexpected histogram header {:?}", other))),
        }
        for line in lines {
            let (k, v) = line
                .split_once(',')
                .ok_or_else(|| Error::InvalidArgument(format!("bad histogram row {:?}", line)))?;
            let parse = |s: &str| s.trim().parse::<u64>().map_err(|e| Error::InvalidArgument(format!("{}: {}", line, e)));
            let (k, v) = (parse(k)?, parse(v)?);
            *h.bins.entry(k).or_insert(0) += v;
            h.total += v;
        }
        Ok(h)
    }
}
