//! Wigner 3-j and 6-j symbols.
//!
//! Angular momenta are carried as doubled integers (`2j`, `2m`) so that the
//! half-integer bookkeeping stays exact; only the final Racah sum is done in
//! floating point, using a table of `ln n!`.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const LN_FACTORIAL_LEN: usize = 256;

fn ln_factorial(n: i32) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_LEN);
        let mut acc = 0.0_f64;
        t.push(0.0);
        for k in 1..LN_FACTORIAL_LEN {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    });
    debug_assert!(n >= 0, "negative factorial argument");
    table[n as usize]
}

fn check_spin(tj: i32) -> Result<()> {
    if tj < 0 {
        return Err(Error::InvalidAngularMomentum(format!("negative j = {}/2", tj)));
    }
    if tj as usize >= LN_FACTORIAL_LEN / 4 {
        return Err(Error::InvalidAngularMomentum(format!("j = {}/2 too large", tj)));
    }
    Ok(())
}

/// Triangle rule `|a-b| <= c <= a+b` together with integer perimeter.
fn triangle(ta: i32, tb: i32, tc: i32) -> bool {
    (ta + tb + tc) % 2 == 0 && tc <= ta + tb && tc >= (ta - tb).abs()
}

/// `ln Δ(abc)` for doubled arguments that satisfy [`triangle`].
fn ln_delta(ta: i32, tb: i32, tc: i32) -> f64 {
    ln_factorial((ta + tb - tc) / 2) + ln_factorial((ta - tb + tc) / 2) + ln_factorial((-ta + tb + tc) / 2)
        - ln_factorial((ta + tb + tc) / 2 + 1)
}

/// Wigner 3-j symbol with doubled arguments: `tj = [2j1, 2j2, 2j3]`,
/// `tm = [2m1, 2m2, 2m3]`.
///
/// Inconsistent input (negative `j`, `|m| > j`, or `j` and `m` of different
/// parity) is rejected. Symbols that merely vanish by the triangle or
/// projection rules return `0.0`.
pub fn wigner3j_doubled(tj: [i32; 3], tm: [i32; 3]) -> Result<f64> {
    for (&j, &m) in tj.iter().zip(tm.iter()) {
        check_spin(j)?;
        if m.abs() > j {
            return Err(Error::InvalidAngularMomentum(format!("|m| > j for j={}/2, m={}/2", j, m)));
        }
        if (j - m) % 2 != 0 {
            return Err(Error::InvalidAngularMomentum(format!("j={}/2 and m={}/2 differ by a half-integer", j, m)));
        }
    }
    let [tj1, tj2, tj3] = tj;
    let [tm1, tm2, tm3] = tm;
    if tm1 + tm2 + tm3 != 0 || !triangle(tj1, tj2, tj3) {
        return Ok(0.0);
    }

    // Integer-valued combinations entering the Racah sum.
    let j1_j2_j3 = (tj1 + tj2 - tj3) / 2;
    let j1_m1 = (tj1 - tm1) / 2;
    let j2_m2 = (tj2 + tm2) / 2;
    let j3_j2_m1 = (tj3 - tj2 + tm1) / 2;
    let j3_j1_m2 = (tj3 - tj1 - tm2) / 2;

    let k_min = 0.max(-j3_j2_m1).max(-j3_j1_m2);
    let k_max = j1_j2_j3.min(j1_m1).min(j2_m2);
    if k_min > k_max {
        return Ok(0.0);
    }

    let mut ln_pref = ln_delta(tj1, tj2, tj3);
    for (&j, &m) in tj.iter().zip(tm.iter()) {
        ln_pref += ln_factorial((j + m) / 2) + ln_factorial((j - m) / 2);
    }
    ln_pref *= 0.5;

    let mut sum = 0.0;
    for k in k_min..=k_max {
        let ln_den = ln_factorial(k)
            + ln_factorial(j3_j2_m1 + k)
            + ln_factorial(j3_j1_m2 + k)
            + ln_factorial(j1_j2_j3 - k)
            + ln_factorial(j1_m1 - k)
            + ln_factorial(j2_m2 - k);
        let term = (ln_pref - ln_den).exp();
        sum += if k % 2 == 0 { term } else { -term };
    }

    // (-1)^(j1 - j2 - m3); the exponent is an integer for valid input.
    let phase = (tj1 - tj2 - tm3) / 2;
    Ok(if phase.rem_euclid(2) == 0 { sum } else { -sum })
}

/// Wigner 6-j symbol `{j1 j2 j3; j4 j5 j6}` with doubled arguments.
///
/// Negative or oversized `j` is rejected; any violated triad returns `0.0`.
pub fn wigner6j_doubled(tj: [i32; 6]) -> Result<f64> {
    for &j in &tj {
        check_spin(j)?;
    }
    let [a, b, c, d, e, f] = tj;
    let triads = [(a, b, c), (a, e, f), (d, b, f), (d, e, c)];
    if !triads.iter().all(|&(x, y, z)| triangle(x, y, z)) {
        return Ok(0.0);
    }

    let alpha = triads.map(|(x, y, z)| (x + y + z) / 2);
    let beta = [(a + b + d + e) / 2, (b + c + e + f) / 2, (c + a + f + d) / 2];
    let t_min = *alpha.iter().max().unwrap();
    let t_max = *beta.iter().min().unwrap();
    if t_min > t_max {
        return Ok(0.0);
    }

    let ln_pref = 0.5 * triads.iter().map(|&(x, y, z)| ln_delta(x, y, z)).sum::<f64>();

    let mut sum = 0.0;
    for t in t_min..=t_max {
        let ln_den: f64 = alpha.iter().map(|&al| ln_factorial(t - al)).sum::<f64>()
            + beta.iter().map(|&be| ln_factorial(be - t)).sum::<f64>();
        let term = (ln_pref + ln_factorial(t + 1) - ln_den).exp();
        sum += if t % 2 == 0 { term } else { -term };
    }
    Ok(sum)
}

fn doubled(x: f64) -> Result<i32> {
    let t = 2.0 * x;
    if (t - t.round()).abs() > 1e-9 {
        return Err(Error::InvalidAngularMomentum(format!("{} is not a multiple of 1/2", x)));
    }
    Ok(t.round() as i32)
}

/// Wigner 3-j symbol for real-valued (integer or half-integer) arguments.
pub fn wigner3j(j1: f64, j2: f64, j3: f64, m1: f64, m2: f64, m3: f64) -> Result<f64> {
    wigner3j_doubled(
        [doubled(j1)?, doubled(j2)?, doubled(j3)?],
        [doubled(m1)?, doubled(m2)?, doubled(m3)?],
    )
}

/// Wigner 6-j symbol `{j1 j2 j3; j4 j5 j6}` for real-valued arguments.
pub fn wigner6j(j1: f64, j2: f64, j3: f64, j4: f64, j5: f64, j6: f64) -> Result<f64> {
    wigner6j_doubled([
        doubled(j1)?,
        doubled(j2)?,
        doubled(j3)?,
        doubled(j4)?,
        doubled(j5)?,
        doubled(j6)?,
    ])
}
