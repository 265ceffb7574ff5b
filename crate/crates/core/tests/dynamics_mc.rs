//! Quantum-jump sampling against the rate-equation solution, and
//! conservation properties of the population dynamics.

use proptest::prelude::*;

use spamsim::atom::{AtomSpec, Manifold, Term, N_STATES, QUBIT_ONE};
use spamsim::dynamics::{
    evolve_lasers, prepare_lasers, shelving_lasers, simulate_cycling_readout, simulate_offresonant_shelving_of_zero,
    simulate_prepare_zero, simulate_shelving, transfer_kernel, CyclingConfig, Estimate, LaserField, Mode,
    PopulationVector, PrepareConfig, ShelvingConfig, ShelvingScheme,
};

fn within_3_sigma(jump: &Estimate, rate: &Estimate) {
    let sigma = jump.sigma.max(1.0 / jump.trials as f64);
    assert!(
        (jump.value - rate.value).abs() <= 3.0 * sigma,
        "jump {} (sigma {}) vs rate {}",
        jump.value,
        jump.sigma,
        rate.value
    );
}

#[test]
fn optical_pumping_jump_matches_rate() {
    let spec = AtomSpec::default();
    // Short pumping leaves a visible residue to compare.
    let cfg = PrepareConfig { duration: 1e-6, saturation: 0.3 };
    let rate = simulate_prepare_zero(&spec, &cfg, Mode::Rate, 0, 0).unwrap();
    let jump = simulate_prepare_zero(&spec, &cfg, Mode::Jump, 40_000, 11).unwrap();
    assert!(rate.value > 0.3 && rate.value < 0.99, "{}", rate.value);
    within_3_sigma(&jump, &rate);
}

#[test]
fn shelving_jump_matches_rate_for_every_scheme() {
    let spec = AtomSpec::default();
    let cfg = ShelvingConfig { duration: 5e-6, ..Default::default() };
    for scheme in ShelvingScheme::ALL {
        let rate = simulate_shelving(&spec, &cfg, scheme, Mode::Rate, 0, 0).unwrap();
        let jump = simulate_shelving(&spec, &cfg, scheme, Mode::Jump, 40_000, 5).unwrap();
        within_3_sigma(&jump, &rate);
    }
}

#[test]
fn offresonant_shelving_jump_matches_rate() {
    let spec = AtomSpec::default();
    let cfg = ShelvingConfig { saturation_455: 3.0, ..Default::default() };
    let scheme = ShelvingScheme::WithRepumps;
    let rate = simulate_offresonant_shelving_of_zero(&spec, &cfg, scheme, Mode::Rate, 0, 0).unwrap();
    let jump = simulate_offresonant_shelving_of_zero(&spec, &cfg, scheme, Mode::Jump, 200_000, 2).unwrap();
    within_3_sigma(&jump, &rate);
}

#[test]
fn cycling_jump_matches_rate() {
    let spec = AtomSpec::default();
    let cfg = CyclingConfig::default();
    let rate = simulate_cycling_readout(&spec, &cfg, Mode::Rate, 0, 0).unwrap();
    let jump = simulate_cycling_readout(&spec, &cfg, Mode::Jump, 4_000, 8).unwrap();
    // The rate-mode count distribution is built on discrete time slices.
    let slack = |e: &Estimate| 3.0 * e.sigma + 2e-3;
    assert!((jump.eps_zero.value - rate.eps_zero.value).abs() <= slack(&jump.eps_zero));
    assert!((jump.eps_one.value - rate.eps_one.value).abs() <= slack(&jump.eps_one));
    assert_eq!(jump.window, rate.window);
}

#[test]
fn jump_estimates_are_seed_reproducible() {
    let spec = AtomSpec::default();
    let cfg = ShelvingConfig::default();
    let a = simulate_shelving(&spec, &cfg, ShelvingScheme::Bare455, Mode::Jump, 5_000, 42).unwrap();
    let b = simulate_shelving(&spec, &cfg, ShelvingScheme::Bare455, Mode::Jump, 5_000, 42).unwrap();
    let c = simulate_shelving(&spec, &cfg, ShelvingScheme::Bare455, Mode::Jump, 5_000, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.value, c.value);
}

#[test]
fn jump_mode_needs_trials() {
    let spec = AtomSpec::default();
    assert!(simulate_shelving(&spec, &ShelvingConfig::default(), ShelvingScheme::Bare455, Mode::Jump, 0, 1).is_err());
}

fn any_lasers() -> impl Strategy<Value = Vec<LaserField>> {
    (0.0f64..3.0, 0.0f64..3.0, -50.0f64..50.0, 0usize..3).prop_map(|(s1, s2, det, which)| {
        let mut l = match which {
            0 => prepare_lasers(&PrepareConfig { duration: 1e-6, saturation: s1 }),
            1 => shelving_lasers(&ShelvingConfig { saturation_455: s1, saturation_repump: s2, ..Default::default() }, ShelvingScheme::WithRepumps),
            _ => shelving_lasers(&ShelvingConfig { saturation_455: s1, ..Default::default() }, ShelvingScheme::Bare455),
        };
        l[0] = l[0].clone().with_detuning(det);
        l
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn populations_stay_normalized_and_non_negative(lasers in any_lasers(), t in 0.0f64..2e-4) {
        let spec = AtomSpec::default();
        let p0 = PopulationVector::uniform(Term::S1_2.states()).unwrap();
        let p = evolve_lasers(&spec, &lasers, &p0, t).unwrap();
        prop_assert!((p.total() - 1.0).abs() < 1e-9);
        prop_assert!(p.as_slice().iter().all(|&x| x >= -1e-12));
        // Adiabatic elimination leaves no population in the P terms.
        prop_assert!(p.term(Term::P1_2).abs() < 1e-12 && p.term(Term::P3_2).abs() < 1e-12);
    }

    #[test]
    fn transfer_kernel_rows_are_distributions(lasers in any_lasers(), t in 0.0f64..1e-4) {
        let spec = AtomSpec::default();
        let k = transfer_kernel(&spec, &lasers, t).unwrap();
        prop_assert_eq!(k.len(), N_STATES);
        for row in &k {
            let s: f64 = row.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shelving_is_monotone_in_time(t in 1e-7f64..1e-4) {
        let spec = AtomSpec::default();
        let lasers = shelving_lasers(&ShelvingConfig::default(), ShelvingScheme::WithRepumpsPiPol);
        let p0 = PopulationVector::basis(QUBIT_ONE);
        let a = evolve_lasers(&spec, &lasers, &p0, t).unwrap().term(Term::D5_2);
        let b = evolve_lasers(&spec, &lasers, &p0, t * 1.5).unwrap().term(Term::D5_2);
        prop_assert!(b >= a - 1e-12);
    }
}

#[test]
fn dark_manifold_stays_dark_without_lasers() {
    let spec = AtomSpec::default();
    let p0 = PopulationVector::uniform(Manifold { term: Term::S1_2, f: 1 }.states()).unwrap();
    let p = evolve_lasers(&spec, &[], &p0, 1e-3).unwrap();
    assert_eq!(p, p0);
}
