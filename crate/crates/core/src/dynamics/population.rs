use std::ops::Index;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{build_rate_matrix, laser::segments, LaserField, RateMatrix};
use crate::atom::{AtomSpec, HyperfineState, Manifold, Term, N_STATES};
use crate::error::{Error, Result};

/// Probability distribution over the 36 sublevels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationVector(Vec<f64>);

impl PopulationVector {
    pub fn basis(state: HyperfineState) -> Self {
        let mut p = vec![0.0; N_STATES];
        p[state.index()] = 1.0;
        PopulationVector(p)
    }

    /// Equal weight on every sublevel yielded by `states`.
    pub fn uniform<I: IntoIterator<Item = HyperfineState>>(states: I) -> Result<Self> {
        let idx: Vec<usize> = states.into_iter().map(|s| s.index()).collect();
        if idx.is_empty() {
            return Err(Error::InvalidArgument("uniform population over no states".into()));
        }
        let mut p = vec![0.0; N_STATES];
        for &i in &idx {
            p[i] += 1.0 / idx.len() as f64;
        }
        Ok(PopulationVector(p))
    }

    pub fn from_vec(p: Vec<f64>) -> Result<Self> {
        if p.len() != N_STATES {
            return Err(Error::InvalidArgument(format!("population needs {} entries, got {}", N_STATES, p.len())));
        }
        if p.iter().any(|&x| !x.is_finite() || x < -1e-12) {
            return Err(Error::InvalidArgument("population entries must be finite and non-negative".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("population sums to {}", total)));
        }
        Ok(PopulationVector(p.into_iter().map(|x| x.max(0.0)).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, state: HyperfineState) -> f64 {
        self.0[state.index()]
    }

    pub fn term(&self, term: Term) -> f64 {
        term.states().map(|s| self.get(s)).sum()
    }

    pub fn manifold(&self, manifold: Manifold) -> f64 {
        manifold.states().map(|s| self.get(s)).sum()
    }

    /// Total population outside `keep`, summed directly so that small
    /// errors are not lost to cancellation in `1 - p`.
    pub fn outside<F: Fn(HyperfineState) -> bool>(&self, keep: F) -> f64 {
        crate::atom::states().filter(|&s| !keep(s)).map(|s| self.get(s)).sum()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl Index<usize> for PopulationVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Propagator `exp(G t)` of a rate matrix, checked for finiteness.
pub fn propagator(rm: &RateMatrix, t: f64) -> Result<DMatrix<f64>> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!("evolution time {}", t)));
    }
    let u = (&rm.generator * t).exp();
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Propagation(format!("matrix exponential diverged at t = {} s", t)));
    }
    Ok(u)
}

fn apply(u: &DMatrix<f64>, p: &PopulationVector) -> Result<PopulationVector> {
    let out = u * DVector::from_column_slice(&p.0);
    let mut v: Vec<f64> = out.iter().copied().collect();
    for x in &mut v {
        if !x.is_finite() {
            return Err(Error::Propagation("non-finite population".into()));
        }
        if *x < -1e-9 {
            return Err(Error::Propagation(format!("population went negative ({})", x)));
        }
        *x = x.max(0.0);
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Propagation(format!("probability not conserved (sum {})", total)));
    }
    for x in &mut v {
        *x /= total;
    }
    Ok(PopulationVector(v))
}

/// `p(t) = exp(G t) p0`.
pub fn evolve(rm: &RateMatrix, p0: &PopulationVector, t: f64) -> Result<PopulationVector> {
    if t == 0.0 {
        return Ok(p0.clone());
    }
    apply(&propagator(rm, t)?, p0)
}

/// Evolves under a set of lasers with on/off windows over `[0, t]`.
pub fn evolve_lasers(spec: &AtomSpec, lasers: &[LaserField], p0: &PopulationVector, t: f64) -> Result<PopulationVector> {
    let mut p = p0.clone();
    for (start, end, active) in segments(lasers, t) {
        let set: Vec<LaserField> = active.iter().map(|&i| lasers[i].clone()).collect();
        let rm = build_rate_matrix(spec, &set)?;
        p = evolve(&rm, &p, end - start)?;
    }
    Ok(p)
}

/// Final populations from every basis start, `out[start][end]`, for a laser
/// protocol of duration `t`.
pub fn transfer_kernel(spec: &AtomSpec, lasers: &[LaserField], t: f64) -> Result<Vec<Vec<f64>>> {
    let mut u = DMatrix::<f64>::identity(N_STATES, N_STATES);
    for (start, end, active) in segments(lasers, t) {
        let set: Vec<LaserField> = active.iter().map(|&i| lasers[i].clone()).collect();
        let rm = build_rate_matrix(spec, &set)?;
        u = propagator(&rm, end - start)? * u;
    }
    let mut rows = Vec::with_capacity(N_STATES);
    for start in 0..N_STATES {
        let p = apply(&u, &PopulationVector::basis(HyperfineState::from_index(start)))?;
        rows.push(p.0);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::QUBIT_ONE;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_time_is_identity() {
        let spec = AtomSpec::default();
        let l = LaserField::new("455", Manifold::new(Term::S1_2, 1).unwrap(), Manifold::new(Term::P3_2, 2).unwrap());
        let rm = build_rate_matrix(&spec, &[l]).unwrap();
        let p0 = PopulationVector::basis(QUBIT_ONE);
        assert_eq!(evolve(&rm, &p0, 0.0).unwrap(), p0);
        assert!(evolve(&rm, &p0, -1.0).is_err());
    }

    #[test]
    fn bare_455_limit_is_branching_quotient() {
        let spec = AtomSpec::default();
        let l = LaserField::new("455", Manifold::new(Term::S1_2, 1).unwrap(), Manifold::new(Term::P3_2, 2).unwrap())
            .with_saturation(0.3);
        let rm = build_rate_matrix(&spec, &[l]).unwrap();
        let p = evolve(&rm, &PopulationVector::basis(QUBIT_ONE), 1e-3).unwrap();
        assert_abs_diff_eq!(p.term(Term::D5_2), 0.23 / 0.26, epsilon = 1e-4);
        assert_abs_diff_eq!(p.total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn population_validation() {
        assert!(PopulationVector::from_vec(vec![1.0]).is_err());
        let mut v = vec![0.0; N_STATES];
        v[3] = 0.5;
        assert!(PopulationVector::from_vec(v.clone()).is_err());
        v[4] = 0.5;
        assert!(PopulationVector::from_vec(v).is_ok());
    }
}
