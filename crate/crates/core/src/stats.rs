//! Binomial point estimates, confidence intervals and the compact
//! `value(digit)` uncertainty notation.

use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::Scalar;

fn check_counts(k: u64, n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("binomial estimate needs n >= 1".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("{} successes out of {} trials", k, n)));
    }
    Ok(())
}

/// Normal-approximation standard error `sqrt(p (1 - p) / n)`.
pub fn wald_sigma<T: Scalar>(k: u64, n: u64) -> Result<T> {
    check_counts(k, n)?;
    let n = T::lit(n as f64);
    let p = T::lit(k as f64) / n;
    Ok((p * (T::one() - p) / n).sqrt())
}

/// Wilson score interval at score `z`.
pub fn wilson_interval<T: Scalar>(k: u64, n: u64, z: T) -> Result<(T, T)> {
    check_counts(k, n)?;
    if !(z.is_finite() && z >= T::zero()) {
        return Err(Error::InvalidArgument("score must be finite and non-negative".into()));
    }
    let one = T::one();
    let two = T::lit(2.0);
    let nf = T::lit(n as f64);
    let p = T::lit(k as f64) / nf;
    let z2 = z * z;
    let denom = one + z2 / nf;
    let center = (p + z2 / (two * nf)) / denom;
    let half = z / denom * (p * (one - p) / nf + z2 / (T::lit(4.0) * nf * nf)).sqrt();
    let mut lo = (center - half).max(T::zero());
    let mut hi = (center + half).min(one);
    // Exact ends; rounding otherwise leaves a residue of order eps.
    if k == 0 {
        lo = T::zero();
    }
    if k == n {
        hi = one;
    }
    Ok((lo.min(p), hi.max(p)))
}

/// Half-width of the Wilson interval.
pub fn wilson_half_width<T: Scalar>(k: u64, n: u64, z: T) -> Result<T> {
    let (lo, hi) = wilson_interval(k, n, z)?;
    Ok((hi - lo) / T::lit(2.0))
}

/// A counted probability with both uncertainty estimates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinomialEstimate {
    pub successes: u64,
    pub trials: u64,
    pub value: f64,
    pub wald_sigma: f64,
    /// One-sigma (`z = 1`) Wilson bounds.
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub wilson_half_width: f64,
    /// `value(digit)` with the digit taken from the Wilson half-width.
    pub formatted: String,
}

impl BinomialEstimate {
    pub fn new(successes: u64, trials: u64) -> Result<Self> {
        let value = successes as f64 / trials.max(1) as f64;
        let (wilson_low, wilson_high) = wilson_interval(successes, trials, 1.0)?;
        let half = (wilson_high - wilson_low) / 2.0;
        Ok(BinomialEstimate {
            successes,
            trials,
            value,
            wald_sigma: wald_sigma(successes, trials)?,
            wilson_low,
            wilson_high,
            wilson_half_width: half,
            formatted: format_scientific(value, half),
        })
    }
}

/// Leading digit of `sigma` rounded up, with its decimal exponent.
/// `3.48e-5` gives `(4, -5)`.
pub fn uncertainty_digit(sigma: f64) -> Option<(u32, i32)> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return None;
    }
    let mut e = sigma.log10().floor() as i32;
    let mut d = (sigma / 10f64.powi(e) * (1.0 - 1e-12)).ceil() as u32;
    if d == 0 {
        d = 1;
    }
    if d >= 10 {
        d = 1;
        e += 1;
    }
    Some((d, e))
}

/// `1.9(4)e-4` style: mantissa shown to the uncertainty's leading digit.
pub fn format_scientific(value: f64, sigma: f64) -> String {
    let ev = if value == 0.0 { 0 } else { value.abs().log10().floor() as i32 };
    let Some((d, es)) = uncertainty_digit(sigma) else {
        return format!("{:e}", value);
    };
    let mant = value / 10f64.powi(ev);
    if es > ev {
        // Uncertainty larger than the value's own leading digit.
        return format!("{:.0}({})e{}", value / 10f64.powi(es), d, es);
    }
    let decimals = (ev - es) as usize;
    format!("{:.*}({})e{}", decimals, mant, d, ev)
}

/// `0.99971(6)` style: fixed-point to the uncertainty's leading digit.
pub fn format_fixed(value: f64, sigma: f64) -> String {
    match uncertainty_digit(sigma) {
        Some((d, es)) => {
            let decimals = (-es).max(0) as usize;
            if es > 0 {
                format!("{:.0}({})", value, d as f64 * 10f64.powi(es))
            } else {
                format!("{:.*}({})", decimals, value, d)
            }
        }
        None => format!("{}", value),
    }
}

/// Fraction of synthetic binomial experiments whose Wilson interval at
/// score `z` contains the true `p`.
pub fn wilson_coverage(p: f64, n: u64, z: f64, draws: u64, seed: u64, domain: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("probability {} outside [0, 1]", p)));
    }
    let binom = Binomial::new(n, p).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut covered = 0u64;
    for i in 0..draws {
        let mut rng = stream(seed, domain, i);
        let k = binom.sample(&mut rng);
        let (lo, hi) = wilson_interval(k, n, z)?;
        if lo <= p && p <= hi {
            covered += 1;
        }
    }
    Ok(covered as f64 / draws.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_empty_and_overfull() {
        assert!(wilson_interval(0, 0, 1.0f64).is_err());
        assert!(wilson_interval(3, 2, 1.0f64).is_err());
        assert!(wald_sigma::<f64>(0, 0).is_err());
    }

    #[test]
    fn extremes_hit_the_ends() {
        let (lo, _) = wilson_interval(0, 50, 1.96f64).unwrap();
        assert_eq!(lo, 0.0);
        let (_, hi) = wilson_interval(50, 50, 1.96f64).unwrap();
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn matches_hand_formula() {
        // k=10, n=100, z=1.96
        let z: f64 = 1.96;
        let (p, n) = (0.1, 100.0);
        let c = (p + z * z / (2.0 * n)) / (1.0 + z * z / n);
        let h = z / (1.0 + z * z / n) * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
        let (lo, hi) = wilson_interval(10, 100, z).unwrap();
        assert_relative_eq!(lo, c - h, max_relative = 1e-14);
        assert_relative_eq!(hi, c + h, max_relative = 1e-14);
    }

    #[test]
    fn f32_agrees_with_f64() {
        let (a, b) = wilson_interval(30u64, 157_211, 1.0f32).unwrap();
        let (c, d) = wilson_interval(30u64, 157_211, 1.0f64).unwrap();
        assert_relative_eq!(a as f64, c, max_relative = 1e-4);
        assert_relative_eq!(b as f64, d, max_relative = 1e-4);
    }

    #[test]
    fn digits() {
        assert_eq!(uncertainty_digit(3.48e-5), Some((4, -5)));
        assert_eq!(uncertainty_digit(4.0e-5), Some((4, -5)));
        assert_eq!(uncertainty_digit(9.2e-3), Some((1, -2)));
        assert_eq!(uncertainty_digit(0.0), None);
        assert_eq!(format_scientific(1.9e-4, 3.48e-5), "1.9(4)e-4");
        assert_eq!(format_scientific(3.03e-2, 4.0e-4), "3.03(4)e-2");
        assert_eq!(format_fixed(0.99971, 5.2e-5), "0.99971(6)");
    }
}
