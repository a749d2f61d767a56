use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wdmopt::fiber::{
    nli_power, nli_power_vjp, propagate_noise, srs_propagate, srs_propagate_vjp, FiberParams,
};
use wdmopt::{ChannelGrid, NoiseSpectrum, PowerSpectrum};

fn c_band() -> Arc<ChannelGrid> {
    Arc::new(ChannelGrid::c_band())
}

fn random_launch(grid: &Arc<ChannelGrid>, seed: u64, mean_mw: f64) -> PowerSpectrum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mw = (0..grid.len())
        .map(|_| mean_mw * rng.gen_range(0.3..1.7))
        .collect();
    PowerSpectrum::from_mw(grid.clone(), mw).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn single_channel_sees_plain_loss() {
    let grid = Arc::new(ChannelGrid::uniform(1, 193.1, 100.0, 32.0).unwrap());
    let mut p = FiberParams::ssmf(100.0);
    p.connector_loss_db = 0.0;
    let launch = PowerSpectrum::from_dbm(grid, vec![3.0]).unwrap();
    let out = srs_propagate(&launch, &p).unwrap();
    assert!((out.values()[0] - (-17.0)).abs() < 1e-12);
}

#[test]
fn two_channel_logistic_solution() {
    let grid = Arc::new(ChannelGrid::uniform(2, 192.1, 3900.0, 32.0).unwrap());
    let mut p = FiberParams::ssmf(100.0);
    p.attenuation_db_per_km = 0.0;
    p.connector_loss_db = 0.0;
    let launch = PowerSpectrum::from_mw(grid, vec![10.0, 10.0]).unwrap();
    let out = srs_propagate(&launch, &p).unwrap();
    let k: f64 = 0.028 * 3.9;
    let total: f64 = 0.020;
    let low = total / (1.0 + (-k * total * 100.0).exp()) * 1e3;
    assert!(rel(out.values()[0], low) < 1e-6);
    assert!(rel(out.values()[1], 20.0 - low) < 1e-6);
    assert!((out.values()[0] - 11.088).abs() < 1e-3);
    assert!((out.values()[1] - 8.912).abs() < 1e-3);
}

#[test]
fn lossless_fiber_conserves_power() {
    let grid = c_band();
    let mut p = FiberParams::ssmf(120.0);
    p.attenuation_db_per_km = 0.0;
    p.connector_loss_db = 0.0;
    let launch = random_launch(&grid, 1, 5.0);
    let out = srs_propagate(&launch, &p).unwrap();
    assert!(rel(out.total_mw(), launch.total_mw()) < 1e-9);
    assert!(out.values()[0] > launch.values()[0]);
}

#[test]
fn no_raman_is_exponential_loss() {
    let grid = c_band();
    let mut p = FiberParams::ssmf(87.3);
    p.raman_slope = 0.0;
    let launch = random_launch(&grid, 2, 1.0);
    let out = srs_propagate(&launch, &p).unwrap();
    let t = 10f64.powf(-(0.2 * 87.3 + 0.5) / 10.0);
    for (o, i) in out.values().iter().zip(launch.values()) {
        assert!(rel(*o, i * t) < 1e-12);
    }
}

#[test]
fn halving_the_step_barely_moves_the_output() {
    let grid = c_band();
    let mut p = FiberParams::ssmf(100.0);
    let launch = random_launch(&grid, 3, 2.0);
    let a = srs_propagate(&launch, &p).unwrap();
    p.max_step_km = 0.05;
    let b = srs_propagate(&launch, &p).unwrap();
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!(rel(*x, *y) < 1e-8);
    }
}

#[test]
fn clamped_coupling_beyond_the_peak() {
    // Band wider than the peak shift exercises the quadratic path.
    let grid = Arc::new(ChannelGrid::uniform(12, 190.0, 1000.0, 32.0).unwrap());
    let mut p = FiberParams::ssmf(50.0);
    p.raman_peak_shift_thz = 4.0;
    p.attenuation_db_per_km = 0.0;
    p.connector_loss_db = 0.0;
    let launch = random_launch(&grid, 4, 20.0);
    let out = srs_propagate(&launch, &p).unwrap();
    assert!(rel(out.total_mw(), launch.total_mw()) < 1e-9);
}

fn fd_check(f: impl Fn(&[f64]) -> f64, x: &[f64], grad: &[f64]) {
    for n in [0, 7, 19, 33, x.len() - 1] {
        let h = x[n] * 1e-5;
        let mut xp = x.to_vec();
        xp[n] += h;
        let mut xm = x.to_vec();
        xm[n] -= h;
        let fd = (f(&xp) - f(&xm)) / (2.0 * h);
        assert!(rel(grad[n], fd) < 1e-3, "channel {n}: {} vs {fd}", grad[n]);
    }
}

#[test]
fn srs_gradient_matches_finite_differences() {
    let grid = c_band();
    let p = FiberParams::ssmf(80.0);
    // High power so the Raman coupling matters.
    let launch = random_launch(&grid, 5, 10.0);
    let w: Vec<f64> = (0..40).map(|i| 1.0 + 0.05 * i as f64).collect();
    let objective = |x: &[f64]| {
        let s = PowerSpectrum::from_mw(grid.clone(), x.to_vec()).unwrap();
        srs_propagate(&s, &p)
            .unwrap()
            .values()
            .iter()
            .zip(&w)
            .map(|(o, w)| o * w)
            .sum::<f64>()
    };
    // Output in mW and input in mW: the W-based VJP carries over unchanged.
    let g = srs_propagate_vjp(&launch, &p, &w).unwrap();
    fd_check(objective, launch.values(), &g);
}

#[test]
fn nli_is_cubic_and_vanishes_without_kerr() {
    let grid = c_band();
    let p = FiberParams::ssmf(80.0);
    let launch = random_launch(&grid, 6, 1.0);
    let base = nli_power(&launch, &p).unwrap();
    let doubled = PowerSpectrum::from_mw(grid.clone(), launch.values().iter().map(|v| 2.0 * v).collect()).unwrap();
    for (a, b) in nli_power(&doubled, &p).unwrap().iter().zip(&base) {
        assert_eq!(*a, 8.0 * b);
    }
    let s = 1.37;
    let scaled = PowerSpectrum::from_mw(grid.clone(), launch.values().iter().map(|v| s * v).collect()).unwrap();
    for (a, b) in nli_power(&scaled, &p).unwrap().iter().zip(&base) {
        assert!(rel(*a, s * s * s * b) < 1e-13);
    }
    let mut linear = p.clone();
    linear.gamma_per_w_km = 0.0;
    assert!(nli_power(&launch, &linear).unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn nli_is_mirror_symmetric_for_equal_powers() {
    let grid = c_band();
    let launch = PowerSpectrum::flat(grid, 18.0);
    let nli = nli_power(&launch, &FiberParams::ssmf(100.0)).unwrap();
    for i in 0..20 {
        assert!(rel(nli[i], nli[39 - i]) < 1e-12);
    }
    // Center channels collect more XPM than edge channels.
    assert!(nli[20] > nli[0]);
}

#[test]
fn nli_gradient_matches_finite_differences() {
    let grid = c_band();
    let p = FiberParams::ssmf(80.0);
    let launch = random_launch(&grid, 7, 1.0);
    let w: Vec<f64> = (0..40).map(|i| ((i * 13) % 7) as f64 + 0.5).collect();
    let objective = |x: &[f64]| {
        let s = PowerSpectrum::from_mw(grid.clone(), x.to_vec()).unwrap();
        nli_power(&s, &p).unwrap().iter().zip(&w).map(|(o, w)| o * w).sum::<f64>()
    };
    let g_w = nli_power_vjp(&launch, &p, &w).unwrap();
    // Objective is in W of a mW argument.
    let g_mw: Vec<f64> = g_w.iter().map(|g| g * 1e-3).collect();
    fd_check(objective, launch.values(), &g_mw);
}

/// Midpoint-rule evaluation of the GN reference integral at channel `i`:
/// `(16/27)·γ²·∫∫ G(f1)·G(f2)·G(f1+f2−f)·|(1 − e^{−aL}·e^{jφL})/(a − jφ)|² df1 df2`
/// with `φ = 4π²·β2·(f1−f)(f2−f)`, times the symbol-rate bandwidth.
fn gn_integral(freqs: &[f64], psd: &[f64], b: f64, a: f64, l: f64, beta2: f64, gamma: f64, i: usize, m: usize) -> f64 {
    let f = freqs[i];
    let d = b / m as f64;
    let g_at = |x: f64| -> f64 {
        freqs
            .iter()
            .zip(psd)
            .find(|(fc, _)| (x - *fc).abs() < b / 2.0)
            .map_or(0.0, |(_, g)| *g)
    };
    let decay = (-a * l).exp();
    let mut total = 0.0;
    for (fj, gj) in freqs.iter().zip(psd) {
        for (fk, gk) in freqs.iter().zip(psd) {
            for u in 0..m {
                let f1 = fj - b / 2.0 + (u as f64 + 0.5) * d;
                for v in 0..m {
                    let f2 = fk - b / 2.0 + (v as f64 + 0.5) * d;
                    let g3 = g_at(f1 + f2 - f);
                    if g3 == 0.0 {
                        continue;
                    }
                    let phi = 4.0 * PI * PI * beta2 * (f1 - f) * (f2 - f);
                    let (s, c) = (phi * l).sin_cos();
                    let (re_n, im_n) = (1.0 - decay * c, -decay * s);
                    let den = a * a + phi * phi;
                    total += gj * gk * g3 * (re_n * re_n + im_n * im_n) / den;
                }
            }
        }
    }
    16.0 / 27.0 * gamma * gamma * total * d * d * b
}

#[test]
fn closed_form_tracks_the_gn_integral() {
    let grid = Arc::new(ChannelGrid::uniform(3, 193.0, 100.0, 32.0).unwrap());
    let p = FiberParams::ssmf(80.0);
    let launch = PowerSpectrum::from_mw(grid.clone(), vec![1.0, 2.0, 1.5]).unwrap();
    let closed = nli_power(&launch, &p).unwrap();
    let b = grid.bandwidth_hz();
    let freqs: Vec<f64> = grid.frequencies_thz().iter().map(|f| f * 1e12).collect();
    let psd: Vec<f64> = launch.watts().iter().map(|w| w / b).collect();
    for i in 0..3 {
        let brute = gn_integral(&freqs, &psd, b, p.loss_per_km(), 80.0, 21.7e-24, 1.3, i, 400);
        let r = closed[i] / brute;
        assert!((r - 1.0).abs() < 0.15, "channel {i}: ratio {r}");
    }
}

#[test]
fn noise_follows_the_signal_transfer() {
    let grid = c_band();
    let p = FiberParams::ssmf(100.0);
    let launch = random_launch(&grid, 8, 2.0);
    let zero = NoiseSpectrum::zero(grid.clone());
    let out = propagate_noise(&zero, &launch, &p, true).unwrap();
    assert!(out.ase_w.iter().chain(&out.nli_w).all(|v| *v == 0.0));

    let noise = NoiseSpectrum {
        grid: grid.clone(),
        ase_w: vec![1e-6; 40],
        nli_w: vec![2e-7; 40],
        impl_nsr: vec![0.01; 40],
    };
    let flat = propagate_noise(&noise, &launch, &p, false).unwrap();
    let t = p.transmission();
    assert!(flat.ase_w.iter().all(|v| rel(*v, 1e-6 * t) < 1e-12));
    assert_eq!(flat.impl_nsr, noise.impl_nsr);

    let tilted = propagate_noise(&noise, &launch, &p, true).unwrap();
    let sig = srs_propagate(&launch, &p).unwrap();
    for n in 0..40 {
        let ratio = sig.values()[n] / launch.values()[n];
        assert!(rel(tilted.ase_w[n] / 1e-6, ratio) < 1e-9);
        assert!(rel(tilted.nli_w[n] / 2e-7, ratio) < 1e-9);
    }
}

#[test]
fn zero_length_span_keeps_only_connector_loss() {
    let grid = c_band();
    let p = FiberParams::ssmf(0.0);
    let launch = random_launch(&grid, 9, 1.0);
    let out = srs_propagate(&launch, &p).unwrap();
    assert!(rel(out.values()[3], launch.values()[3] * 10f64.powf(-0.05)) < 1e-12);
    assert!(nli_power(&launch, &p).unwrap().iter().all(|v| *v == 0.0));
}
