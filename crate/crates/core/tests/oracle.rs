use proptest::prelude::*;
use wdmopt::io::parse_oracle_params;
use wdmopt::oracle::{
    generate_dataset, generate_profiles, oracle_response, perturb_unit, DatasetConfig, OracleParams,
    ProfileConfig,
};
use wdmopt::spectral::{db_to_lin, lin_to_db};
use wdmopt::surrogate::{ase_from_nf, nf_from_ase};
use wdmopt::PowerSpectrum;

const PLANCK: f64 = 6.626_070_15e-34;

fn toy3() -> OracleParams {
    parse_oracle_params(include_str!("../fixtures/oracle_toy3.toml"), "oracle_toy3.toml").unwrap()
}

fn gain_at(p: &OracleParams, x: f64, n: usize) -> f64 {
    p.length_m * (x * (p.absorption[n] + p.emission[n]) - p.absorption[n] - p.background_loss)
}

#[test]
fn toy_oracle_matches_a_brute_force_inversion_scan() {
    let p = toy3();
    for (input_dbm, target) in [([-3.0, 0.0, -1.0], 15.0), ([2.0, 2.0, 2.0], 18.0), ([-9.0, -12.0, -10.0], 12.0)] {
        let input = PowerSpectrum::from_dbm(p.grid.clone(), input_dbm.to_vec()).unwrap();
        let pin: Vec<f64> = input_dbm.iter().map(|d| db_to_lin(*d)).collect();
        let goal = db_to_lin(target);
        let total = |x: f64| -> f64 { (0..3).map(|n| pin[n] * db_to_lin(gain_at(&p, x, n))).sum() };
        // Output power rises with inversion: take the first grid point at or past the target.
        let steps = 1_000_000;
        let k = (1..steps).find(|&k| total(k as f64 / steps as f64) >= goal).unwrap();
        let x = k as f64 / steps as f64;

        let r = oracle_response(&p, &input, target).unwrap();
        assert!((r.inversion - x).abs() <= 1e-6, "inversion {} vs scan {x}", r.inversion);
        for n in 0..3 {
            let g = gain_at(&p, x, n);
            assert!((r.gain_db[n] - g).abs() < 1e-4, "channel {n}: gain {} vs {g}", r.gain_db[n]);
            let g_lin = db_to_lin(g);
            // Spontaneous source x·g* over the net coefficient, background loss included.
            let net = g / p.length_m;
            let h_nu = PLANCK * p.grid.frequencies_thz()[n] * 1e12;
            let rho = 2.0 * h_nu * x * p.emission[n] / net * (g_lin - 1.0);
            let nf = lin_to_db(rho / (g_lin * h_nu) + 1.0 / g_lin);
            assert!((r.nf_db[n] - nf).abs() < 1e-4, "channel {n}: NF {} vs {nf}", r.nf_db[n]);
        }
    }
}

#[test]
fn toy_oracle_rejects_targets_above_its_maximum() {
    let p = toy3();
    let input = PowerSpectrum::from_dbm(p.grid.clone(), vec![0.0; 3]).unwrap();
    assert!(oracle_response(&p, &input, 21.0).is_err());
}

#[test]
fn mean_nf_falls_as_average_gain_rises() {
    let p = OracleParams::reference_unit();
    let d = generate_dataset(&p, &DatasetConfig::new(4, 20)).unwrap();
    let mut buckets = std::collections::BTreeMap::<i64, (f64, usize)>::new();
    for s in &d.samples {
        // 3 dB wide buckets.
        let key = (s.average_gain_db() / 3.0).floor() as i64;
        let e = buckets.entry(key).or_default();
        e.0 += s.nf_db.iter().sum::<f64>() / s.nf_db.len() as f64;
        e.1 += 1;
    }
    let means: Vec<f64> = buckets.values().map(|(s, n)| s / *n as f64).collect();
    assert!(means.len() >= 5);
    for w in means.windows(2) {
        assert!(w[1] < w[0], "bucket means {means:?}");
    }
}

#[test]
fn generated_samples_stay_in_the_characterized_range() {
    let d = generate_dataset(&OracleParams::reference_unit(), &DatasetConfig::new(9, 6)).unwrap();
    assert!(!d.samples.is_empty());
    for s in &d.samples {
        assert!((-9.0..=9.0).contains(&s.total_input_dbm));
        assert!((15.0..=18.0).contains(&s.total_output_dbm));
        assert!((6.0..=27.0).contains(&s.average_gain_db()));
        assert!(s.gain_db.iter().chain(&s.nf_db).all(|v| v.is_finite()));
    }
}

#[test]
fn perturbed_unit_gain_stays_within_the_bound() {
    let p = OracleParams::reference_unit();
    let q = perturb_unit(&p, 7, 0.05).unwrap();
    assert_ne!(q.unit_id, p.unit_id);
    assert_eq!(q, perturb_unit(&p, 7, 0.05).unwrap());
    let flat = PowerSpectrum::flat(p.grid.clone(), 0.0);
    let a = oracle_response(&p, &flat, 17.0).unwrap();
    let b = oracle_response(&q, &flat, 17.0).unwrap();
    let peak = (0..p.grid.len())
        .map(|n| p.absorption[n] + p.emission[n])
        .fold(0.0, f64::max);
    let bound = p.length_m * 2.0 * 0.05 * peak;
    for (x, y) in a.gain_db.iter().zip(&b.gain_db) {
        assert!((x - y).abs() <= bound);
    }
    assert!(perturb_unit(&p, 1, 0.3).is_err());
}

fn shape() -> impl Strategy<Value = (u64, f64, f64)> {
    (0u64..1000, -9.0..9.0f64, 15.0..18.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn output_hits_the_target((seed, pin, pout) in shape()) {
        let p = OracleParams::reference_unit();
        let cfg = ProfileConfig { seed, count: 1, excursion_max_db: 10.0, tilt_max_db: 5.0 };
        let prof = &generate_profiles(&p.grid, &cfg)[0];
        let input = prof.normalize_total(pin).unwrap();
        let r = oracle_response(&p, &input, pout).unwrap();
        let out: f64 = input.values().iter().zip(&r.gain_db).map(|(i, g)| db_to_lin(i + g)).sum();
        prop_assert!((out / db_to_lin(pout) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gain_saturates_with_input_power((seed, pin, pout) in shape(), step in 0.1..3.0f64) {
        let p = OracleParams::reference_unit();
        let cfg = ProfileConfig { seed, count: 1, excursion_max_db: 10.0, tilt_max_db: 5.0 };
        let prof = &generate_profiles(&p.grid, &cfg)[0];
        let lo = oracle_response(&p, &prof.normalize_total(pin).unwrap(), pout).unwrap();
        let hi = oracle_response(&p, &prof.normalize_total(pin + step).unwrap(), pout).unwrap();
        for (a, b) in lo.gain_db.iter().zip(&hi.gain_db) {
            prop_assert!(b < a);
        }
    }

    #[test]
    fn nf_respects_physical_floors((seed, pin, pout) in shape()) {
        let p = OracleParams::reference_unit();
        let cfg = ProfileConfig { seed, count: 1, excursion_max_db: 10.0, tilt_max_db: 5.0 };
        let prof = &generate_profiles(&p.grid, &cfg)[0];
        let r = oracle_response(&p, &prof.normalize_total(pin).unwrap(), pout).unwrap();
        for (g, nf) in r.gain_db.iter().zip(&r.nf_db) {
            prop_assert!(*nf >= lin_to_db(1.0 / db_to_lin(*g) + 1e-12) - 1e-9);
            if pout - pin >= 20.0 {
                prop_assert!(*nf >= 2.8);
            }
        }
    }

    #[test]
    fn ase_round_trip(g_db in -10.0..35.0f64, excess in 0.0..30.0f64, f in 191.0..197.0f64) {
        let g = db_to_lin(g_db);
        let nf = 1.0 / g + excess;
        let back = nf_from_ase(ase_from_nf(nf, g, f).unwrap(), g, f);
        prop_assert!((back / nf - 1.0).abs() < 1e-12);
    }
}
