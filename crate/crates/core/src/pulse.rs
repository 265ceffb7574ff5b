//! SU(2) rotations of the hyperfine qubit and composite pulse sequences.

use std::ops::Mul;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `R(theta, phi)`: rotation by `theta` about `cos(phi) x + sin(phi) y`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation<T = f64> {
    pub theta: T,
    pub phi: T,
}

impl<T: Scalar> Rotation<T> {
    /// Rejects negative areas and wraps the phase into `[0, 2 pi)`.
    pub fn new(theta: T, phi: T) -> Result<Self> {
        if !(theta >= T::zero() && theta.is_finite() && phi.is_finite()) {
            return Err(Error::InvalidArgument(format!("rotation ({}, {})", theta, phi)));
        }
        let tau = T::TAU();
        let mut phi = phi % tau;
        if phi < T::zero() {
            phi += tau;
        }
        Ok(Rotation { theta, phi })
    }

    /// Hard-edged pulse realizing this rotation at Rabi rate `rabi` (rad/s).
    /// `area_scale` multiplies the duration.
    pub fn drive(&self, rabi: T, detuning: T, area_scale: T) -> DriveParams<T> {
        let duration = if rabi > T::zero() { self.theta * area_scale / rabi } else { T::zero() };
        DriveParams { rabi, detuning, duration, phase: self.phi }
    }
}

/// One constant-amplitude microwave pulse.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams<T = f64> {
    /// Rabi rate, rad/s.
    pub rabi: T,
    /// Detuning, rad/s.
    pub detuning: T,
    /// s
    pub duration: T,
    pub phase: T,
}

impl<T: Scalar> DriveParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rabi >= T::zero() && self.duration >= T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "drive needs rabi >= 0 and duration >= 0 (got {}, {})",
                self.rabi, self.duration
            )));
        }
        Ok(())
    }
}

/// 2x2 complex matrix acting on `(|0>, |1>)` amplitudes.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Unitary2<T = f64> {
    pub m: [[Complex<T>; 2]; 2],
}

impl<T: Scalar> Unitary2<T> {
    pub fn identity() -> Self {
        let (o, z) = (Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::zero()));
        Unitary2 { m: [[o, z], [z, o]] }
    }

    pub fn scaled(&self, c: Complex<T>) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for x in row.iter_mut() {
                *x = *x * c;
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.m;
        Unitary2 { m: [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]] }
    }

    pub fn det(&self) -> Complex<T> {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// `|<1|U|0>|^2`
    pub fn transfer_probability(&self) -> T {
        self.m[1][0].norm_sqr()
    }

    /// Largest entry of `|U^dagger U - I|`.
    pub fn unitarity_error(&self) -> T {
        let p = self.adjoint() * *self;
        let id = Unitary2::<T>::identity();
        let mut err = T::zero();
        for i in 0..2 {
            for j in 0..2 {
                err = err.max((p.m[i][j] - id.m[i][j]).norm());
            }
        }
        err
    }
}

impl<T: Scalar> Mul for Unitary2<T> {
    type Output = Unitary2<T>;
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (&self.m, &rhs.m);
        let mut m = [[Complex::new(T::zero(), T::zero()); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Unitary2 { m }
    }
}

/// `exp(-i H t)` with `H = (rabi cos(phase) X + rabi sin(phase) Y + detuning Z) / 2`.
pub fn rotation_unitary<T: Scalar>(d: &DriveParams<T>) -> Unitary2<T> {
    let gen = d.rabi.hypot(d.detuning);
    if gen == T::zero() || d.duration == T::zero() {
        return Unitary2::identity();
    }
    let half = gen * d.duration * T::lit(0.5);
    let (s, c) = half.sin_cos();
    let nx = d.rabi * d.phase.cos() / gen;
    let ny = d.rabi * d.phase.sin() / gen;
    let nz = d.detuning / gen;
    // cos(a) I - i sin(a) (n . sigma)
    Unitary2 {
        m: [
            [Complex::new(c, -s * nz), Complex::new(-s * ny, -s * nx)],
            [Complex::new(s * ny, -s * nx), Complex::new(c, s * nz)],
        ],
    }
}

/// Ordered product; the first element acts first.
pub fn compose<T: Scalar>(seq: &[DriveParams<T>]) -> Unitary2<T> {
    seq.iter().fold(Unitary2::identity(), |acc, d| rotation_unitary(d) * acc)
}

/// `R(pi, pi/6) R(pi, 0) R(pi, pi/2) R(pi, 0) R(pi, pi/6)` in application order.
pub fn cp_robust_180<T: Scalar>() -> Vec<Rotation<T>> {
    let pi = T::PI();
    [pi / T::lit(6.0), T::zero(), pi / T::lit(2.0), T::zero(), pi / T::lit(6.0)]
        .into_iter()
        .map(|phi| Rotation { theta: pi, phi })
        .collect()
}

pub fn single_pi<T: Scalar>() -> Vec<Rotation<T>> {
    vec![Rotation { theta: T::PI(), phi: T::zero() }]
}

/// Transfer probability of `seq` with a common detuning and area scale.
pub fn sequence_transfer<T: Scalar>(seq: &[Rotation<T>], rabi: T, detuning: T, area_scale: T) -> T {
    let drives: Vec<DriveParams<T>> = seq.iter().map(|r| r.drive(rabi, detuning, area_scale)).collect();
    compose(&drives).transfer_probability()
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint<T = f64> {
    pub x: T,
    pub composite: T,
    pub single_pi: T,
}

/// Transfer probability versus detuning (rad/s) for `seq` and a plain pi pulse.
pub fn detuning_scan<T: Scalar>(seq: &[Rotation<T>], rabi: T, grid: &[T]) -> Result<Vec<ScanPoint<T>>> {
    check_grid(grid)?;
    let single = single_pi();
    Ok(grid
        .iter()
        .map(|&d| ScanPoint {
            x: d,
            composite: sequence_transfer(seq, rabi, d, T::one()),
            single_pi: sequence_transfer(&single, rabi, d, T::one()),
        })
        .collect())
}

/// Transfer probability versus pulse-area scale at zero detuning.
pub fn area_scan<T: Scalar>(seq: &[Rotation<T>], rabi: T, grid: &[T]) -> Result<Vec<ScanPoint<T>>> {
    check_grid(grid)?;
    let single = single_pi();
    Ok(grid
        .iter()
        .map(|&s| ScanPoint {
            x: s,
            composite: sequence_transfer(seq, rabi, T::zero(), s),
            single_pi: sequence_transfer(&single, rabi, T::zero(), s),
        })
        .collect())
}

fn check_grid<T: Scalar>(grid: &[T]) -> Result<()> {
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("scan grid must be finite".into()));
    }
    Ok(())
}

/// Largest `|P(x) - P(-x')|` over grid points mirrored about zero. Points
/// without a mirror partner are ignored.
pub fn asymmetry<T: Scalar>(curve: &[ScanPoint<T>]) -> T {
    let mut worst = T::zero();
    for p in curve {
        if let Some(q) = curve.iter().find(|q| (q.x + p.x).abs() <= T::epsilon() * (T::one() + p.x.abs())) {
            worst = worst.max((p.composite - q.composite).abs()).max((p.single_pi - q.single_pi).abs());
        }
    }
    worst
}

/// Width of the connected region around `center` where `f >= level`.
///
/// Walks outward in steps of `step` until the level is lost, then bisects
/// each edge to `tol`.
pub fn plateau_width<T: Scalar, F: Fn(T) -> T>(f: F, center: T, level: T, step: T, tol: T) -> Result<T> {
    if f(center) < level {
        return Ok(T::zero());
    }
    let edge = |dir: T| -> Result<T> {
        let mut inside = center;
        let mut k = 1;
        loop {
            let x = center + dir * step * T::lit(k as f64);
            if f(x) < level {
                let mut lo = inside;
                let mut hi = x;
                while (hi - lo).abs() > tol {
                    let mid = (lo + hi) * T::lit(0.5);
                    if f(mid) >= level {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                return Ok((lo + hi) * T::lit(0.5));
            }
            inside = x;
            k += 1;
            if k > 1_000_000 {
                return Err(Error::InvalidArgument("plateau does not end".into()));
            }
        }
    };
    Ok(edge(T::one())? - edge(-T::one())?)
}

/// Plateau widths (`P >= 0.99`) of a sequence and of a single pi pulse, in
/// units of the Rabi rate (detuning) or of the nominal area (area scale).
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauWidths<T = f64> {
    pub composite: T,
    pub single_pi: T,
}

pub fn detuning_plateaus<T: Scalar>(seq: &[Rotation<T>]) -> Result<PlateauWidths<T>> {
    let level = T::lit(0.99);
    let (step, tol) = (T::lit(1e-3), T::lit(1e-10).max(T::epsilon() * T::lit(100.0)));
    let single = single_pi();
    Ok(PlateauWidths {
        composite: plateau_width(|d| sequence_transfer(seq, T::one(), d, T::one()), T::zero(), level, step, tol)?,
        single_pi: plateau_width(|d| sequence_transfer(&single, T::one(), d, T::one()), T::zero(), level, step, tol)?,
    })
}

pub fn area_plateaus<T: Scalar>(seq: &[Rotation<T>]) -> Result<PlateauWidths<T>> {
    let level = T::lit(0.99);
    let (step, tol) = (T::lit(1e-3), T::lit(1e-10).max(T::epsilon() * T::lit(100.0)));
    let single = single_pi();
    Ok(PlateauWidths {
        composite: plateau_width(|s| sequence_transfer(seq, T::one(), T::zero(), s), T::one(), level, step, tol)?,
        single_pi: plateau_width(|s| sequence_transfer(&single, T::one(), T::zero(), s), T::one(), level, step, tol)?,
    })
}
