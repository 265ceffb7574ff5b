//! Least-squares Lorentzian line fits.
//!
//! The model is `offset + amplitude / (1 + (2 (x - center) / fwhm)²)`. Fits
//! start from a coarse grid search, where the linear parameters are solved
//! exactly for each trial center and width, and are refined by damped
//! Gauss-Newton (Levenberg-Marquardt) steps that are only accepted when
//! they lower the residual.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct LorentzianModel<T = f64> {
    pub center: T,
    pub fwhm: T,
    pub amplitude: T,
    pub offset: T,
}

impl<T: Scalar> LorentzianModel<T> {
    pub fn eval(&self, x: T) -> T {
        let u = T::lit(2.0) * (x - self.center) / self.fwhm;
        self.offset + self.amplitude / (T::one() + u * u)
    }

    fn to_params(self) -> [T; 4] {
        [self.offset, self.amplitude, self.center, self.fwhm]
    }

    fn from_params(p: [T; 4]) -> Self {
        LorentzianModel { offset: p[0], amplitude: p[1], center: p[2], fwhm: p[3] }
    }
}

/// One-sigma parameter uncertainties.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct LorentzianErrors<T = f64> {
    pub center: T,
    pub fwhm: T,
    pub amplitude: T,
    pub offset: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult<T = f64> {
    pub model: LorentzianModel<T>,
    pub rss: T,
    pub std_errors: LorentzianErrors<T>,
    pub converged: bool,
    pub iterations: usize,
    /// Residual sum of squares after seeding and after every accepted step.
    pub history: Vec<T>,
}

pub const MAX_ITERATIONS: usize = 200;
const PARAM_TOL: f64 = 1e-8;

fn rss_of<T: Scalar>(data: &[(T, T)], m: &LorentzianModel<T>) -> T {
    data.iter().map(|&(x, y)| (y - m.eval(x)).powi(2)).sum()
}

/// Best offset and amplitude for a fixed center and width.
fn linear_part<T: Scalar>(data: &[(T, T)], center: T, fwhm: T) -> Option<(T, T)> {
    let shape = LorentzianModel { center, fwhm, amplitude: T::one(), offset: T::zero() };
    let n = T::lit(data.len() as f64);
    let (mut sg, mut sgg, mut sy, mut sgy) = (T::zero(), T::zero(), T::zero(), T::zero());
    for &(x, y) in data {
        let g = shape.eval(x);
        sg += g;
        sgg += g * g;
        sy += y;
        sgy += g * y;
    }
    let det = n * sgg - sg * sg;
    if det.abs() <= T::epsilon() * n * sgg {
        return None;
    }
    let amplitude = (n * sgy - sg * sy) / det;
    let offset = (sy - amplitude * sg) / n;
    Some((offset, amplitude))
}

/// Seed from the data alone: peak at the largest response, width from the
/// half-maximum crossings.
fn peak_seed<T: Scalar>(data: &[(T, T)]) -> LorentzianModel<T> {
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let (imax, &(cx, ymax)) = sorted
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap_or(std::cmp::Ordering::Equal))
        .expect("non-empty");
    let ymin = sorted.iter().map(|p| p.1).fold(ymax, T::min);
    let half = (ymax + ymin) / T::lit(2.0);
    let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<T> {
        let mut prev = imax;
        for i in range {
            let (x0, y0) = sorted[prev];
            let (x1, y1) = sorted[i];
            if y1 <= half {
                let t = if y0 == y1 { T::zero() } else { (y0 - half) / (y0 - y1) };
                return Some(x0 + t * (x1 - x0));
            }
            prev = i;
        }
        None
    };
    let left = cross(&mut (0..imax).rev());
    let right = cross(&mut (imax + 1..sorted.len()));
    let span = sorted[sorted.len() - 1].0 - sorted[0].0;
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => T::lit(2.0) * (cx - l),
        (None, Some(r)) => T::lit(2.0) * (r - cx),
        (None, None) => span / T::lit(4.0),
    };
    let fwhm = if fwhm > T::zero() { fwhm } else { span.max(T::one()) / T::lit(4.0) };
    LorentzianModel { center: cx, fwhm, amplitude: ymax - ymin, offset: ymin }
}

fn grid_seed<T: Scalar>(data: &[(T, T)], around: &LorentzianModel<T>) -> LorentzianModel<T> {
    let mut best = *around;
    let mut best_rss = rss_of(data, around);
    for j in -4..=4 {
        let w = around.fwhm * T::lit(2f64.powf(j as f64 / 2.0));
        for k in -8..=8 {
            let c = around.center + around.fwhm * T::lit(k as f64 / 8.0);
            if let Some((offset, amplitude)) = linear_part(data, c, w) {
                let m = LorentzianModel { center: c, fwhm: w, amplitude, offset };
                let r = rss_of(data, &m);
                if r < best_rss {
                    best = m;
                    best_rss = r;
                }
            }
        }
    }
    best
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn solve4<T: Scalar>(mut a: [[T; 4]; 4], mut b: [T; 4]) -> Option<[T; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if !(a[piv][col].abs() > T::zero()) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            for c in col..4 {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    let mut x = [T::zero(); 4];
    for r in (0..4).rev() {
        let mut s = b[r];
        for c in r + 1..4 {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn normal_equations<T: Scalar>(data: &[(T, T)], p: [T; 4]) -> ([[T; 4]; 4], [T; 4]) {
    let m = LorentzianModel::from_params(p);
    let two = T::lit(2.0);
    let mut jtj = [[T::zero(); 4]; 4];
    let mut jtr = [T::zero(); 4];
    for &(x, y) in data {
        let u = two * (x - m.center) / m.fwhm;
        let g = T::one() / (T::one() + u * u);
        let j = [
            T::one(),
            g,
            T::lit(4.0) * m.amplitude * u * g * g / m.fwhm,
            two * m.amplitude * u * u * g * g / m.fwhm,
        ];
        let r = y - m.eval(x);
        for a in 0..4 {
            jtr[a] += j[a] * r;
            for b in 0..4 {
                jtj[a][b] += j[a] * j[b];
            }
        }
    }
    (jtj, jtr)
}

fn std_errors<T: Scalar>(data: &[(T, T)], p: [T; 4], rss: T) -> LorentzianErrors<T> {
    let (jtj, _) = normal_equations(data, p);
    let dof = T::lit((data.len().saturating_sub(4)).max(1) as f64);
    let scale = rss / dof;
    let mut diag = [T::infinity(); 4];
    for (i, d) in diag.iter_mut().enumerate() {
        let mut e = [T::zero(); 4];
        e[i] = T::one();
        if let Some(col) = solve4(jtj, e) {
            *d = (col[i].abs() * scale).sqrt();
        }
    }
    LorentzianErrors { offset: diag[0], amplitude: diag[1], center: diag[2], fwhm: diag[3] }
}

/// Fits a Lorentzian to `(x, y)` samples. `init`, when given, competes with
/// the data-driven seed and the better of the two is refined.
pub fn fit_lorentzian<T: Scalar>(data: &[(T, T)], init: Option<LorentzianModel<T>>) -> Result<FitResult<T>> {
    if data.len() < 4 {
        return Err(Error::InvalidArgument(format!("a Lorentzian fit needs at least 4 points, got {}", data.len())));
    }
    if data.iter().any(|(x, y)| !(x.is_finite() && y.is_finite())) {
        return Err(Error::InvalidArgument("fit data must be finite".into()));
    }
    let mut seed = grid_seed(data, &peak_seed(data));
    if let Some(m) = init {
        if m.fwhm > T::zero() && rss_of(data, &m) < rss_of(data, &seed) {
            seed = m;
        }
    }

    let ys = data.iter().map(|d| d.1);
    let yspan = ys.clone().fold(T::neg_infinity(), T::max) - ys.fold(T::infinity(), T::min);
    let yscale = if yspan > T::zero() { yspan } else { T::one() };

    let mut p = seed.to_params();
    let mut rss = rss_of(data, &seed);
    let mut history = vec![rss];
    let mut lambda = T::lit(1e-3);
    let mut converged = false;
    let mut iterations = 0;
    let tol = T::lit(PARAM_TOL);

    while iterations < MAX_ITERATIONS && !converged {
        iterations += 1;
        let (jtj, jtr) = normal_equations(data, p);
        let mut accepted = false;
        while lambda < T::lit(1e16) {
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(T::epsilon());
            }
            let Some(step) = solve4(a, jtr) else {
                lambda *= T::lit(10.0);
                continue;
            };
            let mut q = p;
            for i in 0..4 {
                q[i] += step[i];
            }
            if !(q[3] > T::zero()) {
                lambda *= T::lit(10.0);
                continue;
            }
            let r = rss_of(data, &LorentzianModel::from_params(q));
            if r <= rss {
                let scales = [yscale, yscale, q[3], q[3]];
                converged = (0..4).all(|i| step[i].abs() <= tol * (q[i].abs() + scales[i]));
                p = q;
                rss = r;
                history.push(rss);
                lambda = (lambda / T::lit(10.0)).max(T::lit(1e-12));
                accepted = true;
                break;
            }
            lambda *= T::lit(10.0);
        }
        if !accepted {
            // No damped step lowers the residual: a numerical minimum.
            converged = true;
        }
    }

    let mut model = LorentzianModel::from_params(p);
    model.fwhm = model.fwhm.abs();
    Ok(FitResult { model, rss, std_errors: std_errors(data, p, rss), converged, iterations, history })
}

/// A derived quantity with its one-sigma uncertainty.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct Measurement {
    pub value: f64,
    pub sigma: f64,
}

/// Center of `b` minus center of `a`, uncertainties added in quadrature.
pub fn extract_splitting(a: &FitResult<f64>, b: &FitResult<f64>) -> Result<Measurement> {
    if !a.converged || !b.converged {
        return Err(Error::Fit("splitting needs two converged fits".into()));
    }
    Ok(Measurement {
        value: b.model.center - a.model.center,
        sigma: a.std_errors.center.hypot(b.std_errors.center),
    })
}
