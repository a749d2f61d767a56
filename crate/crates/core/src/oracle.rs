//! Synthetic EDFA used as ground truth for surrogate training.
//!
//! The amplifier is a homogeneous two-level fiber described by a single
//! spatially averaged inversion `x`. Per-channel gain in dB is linear in `x`:
//!
//! ```text
//! G_dB(n, x) = L · (x·(α_n + g*_n) − α_n − l)
//! ```
//!
//! with absorption `α`, emission `g*` and background loss `l` in dB/m. In
//! constant-output mode `x` is found by bisection so the amplified input sums
//! to the requested total output. ASE follows from integrating the
//! constant-coefficient noise equation along the fiber, which keeps the
//! noise figure finite at transparency.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{db_to_lin, dbm_to_watt, lin_to_db, ChannelGrid, PowerSpectrum};

const BISECTION_ITERS: usize = 200;
/// Net gain coefficients closer than this to zero (dB/m) are flagged.
const TRANSPARENCY_FLAG: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTerm {
    pub amplitude: f64,
    pub center_thz: f64,
    pub width_thz: f64,
}

impl GaussianTerm {
    pub fn eval(&self, f_thz: f64) -> f64 {
        let z = (f_thz - self.center_thz) / self.width_thz;
        self.amplitude * (-0.5 * z * z).exp()
    }
}

pub fn sum_of_gaussians(terms: &[GaussianTerm], grid: &ChannelGrid) -> Vec<f64> {
    grid.frequencies_thz()
        .iter()
        .map(|&f| terms.iter().map(|t| t.eval(f)).sum())
        .collect()
}

/// Physical description of one synthetic amplifier unit.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleParams {
    pub unit_id: String,
    pub grid: Arc<ChannelGrid>,
    /// α(ν), dB/m.
    pub absorption: Vec<f64>,
    /// g*(ν), dB/m.
    pub emission: Vec<f64>,
    pub length_m: f64,
    pub background_loss: f64,
    pub max_total_output_dbm: f64,
}

impl OracleParams {
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if self.absorption.len() != n || self.emission.len() != n {
            return Err(Error::InvalidOracle(format!(
                "spectra must have {n} entries (got {} and {})",
                self.absorption.len(),
                self.emission.len()
            )));
        }
        if !(self.length_m > 0.0) || !(self.background_loss >= 0.0) {
            return Err(Error::InvalidOracle(
                "length must be positive and background loss non-negative".into(),
            ));
        }
        for (i, (&a, &g)) in self.absorption.iter().zip(&self.emission).enumerate() {
            if !(a > 0.0 && g > 0.0) {
                return Err(Error::InvalidOracle(format!(
                    "absorption and emission must be positive (channel {i})"
                )));
            }
            // x = 1 gives the largest gain coefficient.
            if g - self.background_loss <= 0.0 {
                return Err(Error::InvalidOracle(format!(
                    "no inversion yields positive gain at channel {i}"
                )));
            }
        }
        Ok(())
    }

    /// The reference unit shipped with the crate.
    pub fn reference_unit() -> Self {
        crate::io::parse_oracle_params(
            include_str!("../fixtures/oracle_a1.toml"),
            "fixtures/oracle_a1.toml",
        )
        .expect("bundled oracle fixture is valid")
    }

    fn gain_db(&self, x: f64, n: usize) -> f64 {
        self.length_m
            * (x * (self.absorption[n] + self.emission[n])
                - self.absorption[n]
                - self.background_loss)
    }

    fn total_output_w(&self, input_w: &[f64], x: f64) -> f64 {
        input_w
            .iter()
            .enumerate()
            .map(|(n, p)| p * db_to_lin(self.gain_db(x, n)))
            .sum()
    }

    /// Solves the average inversion reaching `target_w` total output.
    pub(crate) fn solve_inversion(&self, input_w: &[f64], target_w: f64) -> Result<f64> {
        let infeasible = || Error::InfeasibleOperatingPoint {
            total_input_dbm: crate::spectral::watt_to_dbm(input_w.iter().sum()),
            target_output_dbm: crate::spectral::watt_to_dbm(target_w),
        };
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        if self.total_output_w(input_w, lo) > target_w || self.total_output_w(input_w, hi) < target_w
        {
            return Err(infeasible());
        }
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.total_output_w(input_w, mid) < target_w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Gain and NF (dB) at inversion `x`. The ASE term solves the transport
    /// equation with the net coefficient `x·(α+g*) − α − loss`:
    /// `n_sp·(G − 1) = x·g*·(G − 1)/net`, written with exprel to stay finite
    /// at `net = 0`.
    pub(crate) fn channel_response(&self, x: f64, n: usize) -> (f64, f64) {
        let k = self.length_m * crate::spectral::DB_NEPER;
        let net = x * (self.absorption[n] + self.emission[n])
            - self.absorption[n]
            - self.background_loss;
        let y = k * net;
        let gain = y.exp();
        let nsp_g1 = x * self.emission[n] * k * exprel(y);
        let nf = (2.0 * nsp_g1 + 1.0) / gain;
        (lin_to_db(gain), lin_to_db(nf))
    }
}

/// `(e^y − 1)/y`, continuous at 0.
pub(crate) fn exprel(y: f64) -> f64 {
    if y.abs() < 1e-5 {
        1.0 + y / 2.0 + y * y / 6.0
    } else {
        y.exp_m1() / y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResponse {
    /// Solved average inversion in (0, 1).
    pub inversion: f64,
    pub gain_db: Vec<f64>,
    pub nf_db: Vec<f64>,
    /// Channels whose net gain coefficient is within 1e-3 dB/m of zero.
    pub near_transparency: Vec<usize>,
}

pub fn oracle_response(
    params: &OracleParams,
    input: &PowerSpectrum,
    target_total_output_dbm: f64,
) -> Result<OracleResponse> {
    if input.grid().as_ref() != params.grid.as_ref() {
        return Err(Error::GridMismatch);
    }
    if target_total_output_dbm > params.max_total_output_dbm + 1e-9 {
        return Err(Error::InfeasibleOperatingPoint {
            total_input_dbm: input.total_dbm(),
            target_output_dbm: target_total_output_dbm,
        });
    }
    let input_w = input.watts();
    let x = params.solve_inversion(&input_w, dbm_to_watt(target_total_output_dbm))?;
    let (gain_db, nf_db) = (0..params.grid.len())
        .map(|n| params.channel_response(x, n))
        .unzip();
    let near_transparency = (0..params.grid.len())
        .filter(|&n| {
            let net = x * (params.absorption[n] + params.emission[n])
                - params.absorption[n]
                - params.background_loss;
            net.abs() < TRANSPARENCY_FLAG
        })
        .collect();
    Ok(OracleResponse {
        inversion: x,
        gain_db,
        nf_db,
        near_transparency,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileConfig {
    pub seed: u64,
    pub count: usize,
    pub excursion_max_db: f64,
    pub tilt_max_db: f64,
}

/// Random smooth input shapes, peak-normalized to 0 dB.
///
/// Profile `i` draws from a ChaCha8 stream `i` keyed by the seed:
/// `K ∈ {1..4}` cosine terms, each with order `k ∈ {1..4}`, amplitude
/// `U[0,1)` and phase `U[0,2π)`, evaluated at `t = i/(N−1)`. The ripple is
/// scaled to a peak-to-peak of `excursion_max`, a tilt `U[−tilt_max, tilt_max]`
/// across the band is added, and the sum is rescaled to a peak-to-peak drawn
/// from `U[0, excursion_max]`.
pub fn generate_profiles(grid: &Arc<ChannelGrid>, config: &ProfileConfig) -> Vec<PowerSpectrum> {
    (0..config.count)
        .map(|i| {
            let values = profile_shape(grid.len(), config, i as u64);
            PowerSpectrum::from_dbm(grid.clone(), values).expect("shape matches grid")
        })
        .collect()
}

fn profile_shape(n: usize, config: &ProfileConfig, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);
    let t: Vec<f64> = (0..n)
        .map(|i| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 })
        .collect();

    let terms = rng.gen_range(1..=4);
    let mut ripple = vec![0.0; n];
    for _ in 0..terms {
        let order = rng.gen_range(1..=4) as f64;
        let amplitude: f64 = rng.gen();
        let phase = rng.gen::<f64>() * std::f64::consts::TAU;
        for (r, &ti) in ripple.iter_mut().zip(&t) {
            *r += amplitude * (std::f64::consts::PI * order * ti + phase).cos();
        }
    }
    let tilt = if config.tilt_max_db > 0.0 {
        rng.gen_range(-config.tilt_max_db..=config.tilt_max_db)
    } else {
        0.0
    };
    let excursion = rng.gen::<f64>() * config.excursion_max_db;

    rescale_ptp(&mut ripple, config.excursion_max_db);
    let mut shape: Vec<f64> = ripple
        .iter()
        .zip(&t)
        .map(|(r, ti)| r + tilt * (ti - 0.5))
        .collect();
    rescale_ptp(&mut shape, excursion);
    let peak = shape.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    shape.iter_mut().for_each(|v| *v -= peak);
    shape
}

fn peak_to_peak(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

fn rescale_ptp(v: &mut [f64], target: f64) {
    let ptp = peak_to_peak(v);
    if ptp > 0.0 {
        let s = target / ptp;
        v.iter_mut().for_each(|x| *x *= s);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationSample {
    pub unit_id: String,
    pub profile_id: u32,
    pub total_input_dbm: f64,
    pub total_output_dbm: f64,
    /// Absolute input power per channel, dBm.
    pub input_dbm: Vec<f64>,
    pub gain_db: Vec<f64>,
    pub nf_db: Vec<f64>,
}

impl CharacterizationSample {
    pub fn average_gain_db(&self) -> f64 {
        self.total_output_dbm - self.total_input_dbm
    }

    /// Output PSD in dBm.
    pub fn output_dbm(&self) -> Vec<f64> {
        self.input_dbm
            .iter()
            .zip(&self.gain_db)
            .map(|(p, g)| p + g)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub grid: Arc<ChannelGrid>,
    pub samples: Vec<CharacterizationSample>,
    /// Operating points the oracle could not reach.
    pub skipped: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub seed: u64,
    pub n_profiles: usize,
    pub excursion_max_db: f64,
    pub tilt_max_db: f64,
    pub total_inputs_dbm: Vec<f64>,
    pub total_outputs_dbm: Vec<f64>,
}

impl DatasetConfig {
    pub fn new(seed: u64, n_profiles: usize) -> Self {
        Self {
            seed,
            n_profiles,
            excursion_max_db: 15.0,
            tilt_max_db: 10.0,
            total_inputs_dbm: (0..10).map(|i| -9.0 + 2.0 * i as f64).collect(),
            total_outputs_dbm: vec![15.0, 16.0, 17.0, 18.0],
        }
    }
}

/// Sweeps every generated profile over the total input/output grid.
pub fn generate_dataset(params: &OracleParams, config: &DatasetConfig) -> Result<Dataset> {
    params.validate()?;
    let profiles = generate_profiles(
        &params.grid,
        &ProfileConfig {
            seed: config.seed,
            count: config.n_profiles,
            excursion_max_db: config.excursion_max_db,
            tilt_max_db: config.tilt_max_db,
        },
    );
    let per_profile: Vec<(Vec<CharacterizationSample>, usize)> = profiles
        .par_iter()
        .enumerate()
        .map(|(pid, shape)| {
            let mut out = Vec::new();
            let mut skipped = 0;
            for &pin in &config.total_inputs_dbm {
                let input = shape.normalize_total(pin).expect("dB spectrum");
                for &pout in &config.total_outputs_dbm {
                    match oracle_response(params, &input, pout) {
                        Ok(r) => out.push(CharacterizationSample {
                            unit_id: params.unit_id.clone(),
                            profile_id: pid as u32,
                            total_input_dbm: pin,
                            total_output_dbm: pout,
                            input_dbm: input.values().to_vec(),
                            gain_db: r.gain_db,
                            nf_db: r.nf_db,
                        }),
                        Err(Error::InfeasibleOperatingPoint { .. }) => skipped += 1,
                        Err(e) => panic!("unexpected oracle failure: {e}"),
                    }
                }
            }
            (out, skipped)
        })
        .collect();
    let mut samples = Vec::new();
    let mut skipped = 0;
    for (s, k) in per_profile {
        samples.extend(s);
        skipped += k;
    }
    if skipped > 0 {
        log::info!("{}: skipped {skipped} infeasible operating points", params.unit_id);
    }
    Ok(Dataset {
        grid: params.grid.clone(),
        samples,
        skipped,
    })
}

/// A smooth function on the band with `max |s| = 1`: three cosine orders
/// with amplitudes `U[−1,1)` and phases `U[0,2π)`.
fn smooth_unit_perturbation(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut s = vec![0.0; n];
    for order in 1..=3 {
        let amplitude = rng.gen_range(-1.0..1.0);
        let phase = rng.gen::<f64>() * std::f64::consts::TAU;
        for (i, v) in s.iter_mut().enumerate() {
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            *v += amplitude * (std::f64::consts::PI * order as f64 * t + phase).cos();
        }
    }
    let peak = s.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        s.iter_mut().for_each(|v| *v /= peak);
    }
    s
}

/// Share of the perturbation common to absorption and emission (dopant
/// concentration scales both coefficients together).
pub const PERTURB_COMMON_SHARE: f64 = 0.7;

/// A different unit of the same make: `α` and `g*` scaled by smooth factors
/// `1 + m·(0.7·c + 0.3·s)` where `c` is shared and `s` is independent per
/// spectrum. The three functions are drawn in the order `c`, `s_α`, `s_g`
/// from `ChaCha8Rng::seed_from_u64(seed)`.
pub fn perturb_unit(params: &OracleParams, seed: u64, magnitude: f64) -> Result<OracleParams> {
    if !(0.0..=0.2).contains(&magnitude) {
        return Err(Error::InvalidOracle(format!(
            "perturbation magnitude {magnitude} outside [0, 0.2]"
        )));
    }
    let n = params.grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let common = smooth_unit_perturbation(&mut rng, n);
    let own_a = smooth_unit_perturbation(&mut rng, n);
    let own_g = smooth_unit_perturbation(&mut rng, n);
    let scale = |base: &[f64], own: &[f64]| -> Vec<f64> {
        base.iter()
            .zip(common.iter().zip(own))
            .map(|(b, (c, o))| {
                b * (1.0 + magnitude * (PERTURB_COMMON_SHARE * c + (1.0 - PERTURB_COMMON_SHARE) * o))
            })
            .collect()
    };
    let out = OracleParams {
        unit_id: format!("{}~{seed}", params.unit_id),
        absorption: scale(&params.absorption, &own_a),
        emission: scale(&params.emission, &own_g),
        ..params.clone()
    };
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn flat_params(n: usize, coeff: f64, length: f64) -> OracleParams {
        let grid = Arc::new(ChannelGrid::uniform(n, 193.0, 100.0, 32.0).unwrap());
        OracleParams {
            unit_id: "flat".into(),
            grid,
            absorption: vec![coeff; n],
            emission: vec![coeff; n],
            length_m: length,
            background_loss: 0.0,
            max_total_output_dbm: 30.0,
        }
    }

    #[test]
    fn flat_spectra_give_flat_gain() {
        // G_dB = L·a·(2x − 1); choosing L·a = 2·10·log10(3) puts a 3× target at x = 0.75.
        let la = 2.0 * lin_to_db(3.0);
        let p = flat_params(4, 1.0, la);
        let input = PowerSpectrum::from_dbm(p.grid.clone(), vec![-10.0, -7.0, -12.0, -9.0]).unwrap();
        let r = oracle_response(&p, &input, input.total_dbm() + lin_to_db(3.0)).unwrap();
        assert_relative_eq!(r.inversion, 0.75, epsilon = 1e-9);
        for g in &r.gain_db {
            assert_relative_eq!(*g, lin_to_db(3.0), epsilon = 1e-8);
        }
    }

    #[test]
    fn unity_average_gain_at_transparent_target() {
        let p = OracleParams::reference_unit();
        let input = PowerSpectrum::flat(p.grid.clone(), 3.0);
        let r = oracle_response(&p, &input, 3.0).unwrap();
        let out: f64 = input
            .mw()
            .iter()
            .zip(&r.gain_db)
            .map(|(pin, g)| pin * db_to_lin(*g))
            .sum();
        assert_relative_eq!(out, input.total_mw(), max_relative = 1e-6);
    }

    #[test]
    fn infeasible_target_is_reported() {
        let p = OracleParams::reference_unit();
        let input = PowerSpectrum::flat(p.grid.clone(), -30.0);
        assert!(matches!(
            oracle_response(&p, &input, 18.0),
            Err(Error::InfeasibleOperatingPoint { .. })
        ));
        let input = PowerSpectrum::flat(p.grid.clone(), 0.0);
        assert!(oracle_response(&p, &input, 19.0).is_err());
    }

    #[test]
    fn exprel_is_continuous() {
        for y in [-1e-4_f64, -1e-6, 0.0, 1e-6, 1e-4] {
            let direct = if y == 0.0 { 1.0 } else { y.exp_m1() / y };
            assert_relative_eq!(exprel(y), direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn absorbing_channels_keep_a_finite_nf_above_the_floor() {
        let mut p = flat_params(4, 2.0, 10.0);
        p.absorption[3] = 4.0;
        p.emission[3] = 0.5;
        let input = PowerSpectrum::flat(p.grid.clone(), 0.0);
        let r = oracle_response(&p, &input, 10.0).unwrap();
        assert!(r.gain_db[3] < 0.0);
        assert!(r.nf_db[3].is_finite() && r.nf_db[3] > -r.gain_db[3]);
    }

    #[test]
    fn flat_profiles_for_zero_excursion() {
        let grid = Arc::new(ChannelGrid::c_band());
        let cfg = ProfileConfig {
            seed: 3,
            count: 20,
            excursion_max_db: 0.0,
            tilt_max_db: 0.0,
        };
        for p in generate_profiles(&grid, &cfg) {
            assert!(p.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn profiles_are_deterministic() {
        let grid = Arc::new(ChannelGrid::c_band());
        let cfg = ProfileConfig {
            seed: 11,
            count: 30,
            excursion_max_db: 12.0,
            tilt_max_db: 6.0,
        };
        assert_eq!(generate_profiles(&grid, &cfg), generate_profiles(&grid, &cfg));
    }

    #[test]
    fn excursion_is_uniform() {
        let grid = Arc::new(ChannelGrid::c_band());
        let cfg = ProfileConfig {
            seed: 1,
            count: 1000,
            excursion_max_db: 20.0,
            tilt_max_db: 5.0,
        };
        let mut ex: Vec<f64> = generate_profiles(&grid, &cfg)
            .iter()
            .map(|p| peak_to_peak(p.values()))
            .collect();
        ex.sort_by(f64::total_cmp);
        // Kolmogorov–Smirnov distance to U[0, 20].
        let n = ex.len() as f64;
        let ks = ex
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = x / 20.0;
                (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.05, "KS statistic {ks}");
    }

    #[test]
    fn flat_profile_dataset_counts() {
        let p = OracleParams::reference_unit();
        let mut cfg = DatasetConfig::new(5, 1);
        cfg.excursion_max_db = 0.0;
        cfg.tilt_max_db = 0.0;
        let d = generate_dataset(&p, &cfg).unwrap();
        assert_eq!(d.len() + d.skipped, 40);
        for s in &d.samples {
            let gav = s.average_gain_db();
            assert!((6.0..=27.0).contains(&gav));
            assert!(s.gain_db.iter().chain(&s.nf_db).all(|v| v.is_finite()));
        }
    }

    #[test]
    fn perturbation_identity_and_bound() {
        let p = OracleParams::reference_unit();
        let same = perturb_unit(&p, 9, 0.0).unwrap();
        assert_eq!(same.absorption, p.absorption);
        assert_eq!(same.emission, p.emission);
        assert_ne!(same.unit_id, p.unit_id);
        assert!(perturb_unit(&p, 9, 0.3).is_err());

        let m = 0.1;
        let q = perturb_unit(&p, 4, m).unwrap();
        let max_sum = p
            .absorption
            .iter()
            .zip(&p.emission)
            .map(|(a, g)| a + g)
            .fold(0.0, f64::max);
        let bound = p.length_m * 2.0 * m * max_sum;
        let input = PowerSpectrum::flat(p.grid.clone(), -2.0);
        let a = oracle_response(&p, &input, 18.0).unwrap();
        let b = oracle_response(&q, &input, 18.0).unwrap();
        for (ga, gb) in a.gain_db.iter().zip(&b.gain_db) {
            assert!((ga - gb).abs() <= bound);
        }
        for (i, (a0, a1)) in p.absorption.iter().zip(&q.absorption).enumerate() {
            assert!((a1 / a0 - 1.0).abs() <= m + 1e-12, "channel {i}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn output_total_hits_target(
            shape_seed in 0u64..1000,
            pin in -9f64..9.0,
            pout in 15f64..18.0,
        ) {
            let p = OracleParams::reference_unit();
            let shape = &generate_profiles(&p.grid, &ProfileConfig {
                seed: shape_seed, count: 1, excursion_max_db: 10.0, tilt_max_db: 5.0,
            })[0];
            let input = shape.normalize_total(pin).unwrap();
            let r = oracle_response(&p, &input, pout).unwrap();
            let out: f64 = input.mw().iter().zip(&r.gain_db).map(|(a, g)| a * db_to_lin(*g)).sum();
            prop_assert!((out / db_to_lin(pout) - 1.0).abs() < 1e-6);
            for (g, nf) in r.gain_db.iter().zip(&r.nf_db) {
                // ASE is non-negative, so NF ≥ 1/G.
                prop_assert!(*nf >= -g - 1e-9);
                if pout - pin >= 20.0 {
                    prop_assert!(*nf >= 3.0 - 0.2);
                }
            }
        }

        #[test]
        fn gain_saturates_with_input(pin in -9f64..8.0, step in 0.1f64..1.0) {
            let p = OracleParams::reference_unit();
            let lo = oracle_response(&p, &PowerSpectrum::flat(p.grid.clone(), pin), 17.0).unwrap();
            let hi = oracle_response(&p, &PowerSpectrum::flat(p.grid.clone(), pin + step), 17.0).unwrap();
            for (a, b) in lo.gain_db.iter().zip(&hi.gain_db) {
                prop_assert!(b < a);
            }
        }
    }
}
