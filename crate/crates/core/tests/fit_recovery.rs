use proptest::prelude::*;
use rand_distr::{Distribution, Normal};

use spamsim::fit::{extract_splitting, fit_lorentzian, LorentzianModel};
use spamsim::rng::stream;

fn grid(m: &LorentzianModel<f64>, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            (x, m.eval(x))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recovers_random_noiseless_lines(
        center in -50.0f64..50.0,
        fwhm in 5.0f64..40.0,
        amplitude in 0.05f64..1.0,
        offset in 0.0f64..0.3,
    ) {
        let truth = LorentzianModel { center, fwhm, amplitude, offset };
        let data = grid(&truth, -120.0, 120.0, 61);
        let fit = fit_lorentzian(&data, None).unwrap();
        prop_assert!(fit.converged);
        prop_assert!((fit.model.center - center).abs() < 1e-6 * fwhm);
        prop_assert!((fit.model.fwhm - fwhm).abs() < 1e-6 * fwhm);
        prop_assert!((fit.model.amplitude - amplitude).abs() < 1e-6);
    }

    #[test]
    fn splitting_ignores_a_common_frequency_offset(shift in -500.0f64..500.0) {
        let a = LorentzianModel { center: 0.0, fwhm: 15.0, amplitude: 0.4, offset: 0.02 };
        let b = LorentzianModel { center: 83.0, fwhm: 15.0, amplitude: 0.2, offset: 0.02 };
        let mut rng = stream(5, 0, 0);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut da = grid(&a, -60.0, 60.0, 31);
        let mut db = grid(&b, 23.0, 143.0, 31);
        for p in da.iter_mut().chain(db.iter_mut()) {
            p.1 += noise.sample(&mut rng);
        }
        let base = extract_splitting(&fit_lorentzian(&da, None).unwrap(), &fit_lorentzian(&db, None).unwrap()).unwrap();
        let moved = |d: &[(f64, f64)]| d.iter().map(|&(x, y)| (x + shift, y)).collect::<Vec<_>>();
        let s = extract_splitting(&fit_lorentzian(&moved(&da), None).unwrap(), &fit_lorentzian(&moved(&db), None).unwrap()).unwrap();
        prop_assert!((s.value - base.value).abs() < 1e-6, "{} vs {}", s.value, base.value);
        prop_assert!((s.sigma - base.sigma).abs() < 1e-6 * base.sigma.max(1.0));
    }
}

/// Standard errors match the scatter of fitted centers over repeated noise.
#[test]
fn reported_center_error_matches_scatter() {
    let truth = LorentzianModel { center: 10.0, fwhm: 20.0, amplitude: 0.5, offset: 0.0 };
    let clean = grid(&truth, -70.0, 90.0, 41);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let mut centers = Vec::new();
    let mut reported = Vec::new();
    for i in 0..400 {
        let mut rng = stream(21, 0, i);
        let data: Vec<(f64, f64)> = clean.iter().map(|&(x, y)| (x, y + noise.sample(&mut rng))).collect();
        let fit = fit_lorentzian(&data, None).unwrap();
        centers.push(fit.model.center);
        reported.push(fit.std_errors.center);
    }
    let n = centers.len() as f64;
    let mean = centers.iter().sum::<f64>() / n;
    let sd = (centers.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let typical = reported.iter().sum::<f64>() / n;
    assert!((mean - truth.center).abs() < 4.0 * sd / n.sqrt());
    assert!((typical / sd - 1.0).abs() < 0.2, "reported {} vs scatter {}", typical, sd);
}
