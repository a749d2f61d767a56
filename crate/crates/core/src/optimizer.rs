//! Gradient-based launch-profile optimization.
//!
//! Parameters are per-channel dB offsets `θ`; every candidate is
//! `normalize_total(θ, first_edfa_total_input)`, so the total input power is
//! conserved exactly. Steps use Adam. With the min-SNR cost the first part of
//! the budget runs on a log-sum-exp soft-min, then a refinement phase raises
//! the temperature geometrically (100x by the end) while the step decays, so
//! the objective approaches the hard minimum.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cascade::{simulate, LinkConfig, ModelVariant, SnrReport};
use crate::error::{Error, Result};
use crate::spectral::{db_to_lin, PowerSpectrum, DB_NEPER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    /// Flat input, no optimization.
    FlatInputReference,
    /// Flatten the received PSD.
    FlatReceivedPower,
    /// Flatten the SNR with SRS and NLI disabled in the model.
    FlatSnrLinear,
    /// Flatten the SNR with only SRS in the model.
    FlatSnrSrs,
    /// Flatten the SNR with the full model.
    FlatSnrFull,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::FlatInputReference,
        Strategy::FlatReceivedPower,
        Strategy::FlatSnrLinear,
        Strategy::FlatSnrSrs,
        Strategy::FlatSnrFull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::FlatInputReference => "flat-input-reference",
            Strategy::FlatReceivedPower => "flat-received-power",
            Strategy::FlatSnrLinear => "flat-snr-linear",
            Strategy::FlatSnrSrs => "flat-snr-srs",
            Strategy::FlatSnrFull => "flat-snr-full",
        }
    }

    /// Fiber effects the model includes while optimizing.
    pub fn model_variant(self) -> ModelVariant {
        match self {
            Strategy::FlatSnrLinear => ModelVariant::LINEAR,
            Strategy::FlatSnrSrs => ModelVariant::SRS_ONLY,
            _ => ModelVariant::FULL,
        }
    }

    pub fn default_cost(self) -> Cost {
        match self {
            Strategy::FlatReceivedPower => Cost::PsdFlatness,
            _ => Cost::MinSnr,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Strategy::ALL.iter().map(|k| k.name()).collect();
                format!("unknown strategy '{s}' (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cost {
    MinSnr,
    Throughput,
    PsdFlatness,
}

impl Cost {
    pub const ALL: [Cost; 3] = [Cost::MinSnr, Cost::Throughput, Cost::PsdFlatness];

    pub fn name(self) -> &'static str {
        match self {
            Cost::MinSnr => "min-snr",
            Cost::Throughput => "throughput",
            Cost::PsdFlatness => "psd-flatness",
        }
    }

    /// Exact cost of a simulation result.
    pub fn evaluate(self, report: &SnrReport) -> f64 {
        match self {
            Cost::MinSnr => cost_min_snr(&report.snr_db),
            Cost::Throughput => {
                let lin: Vec<f64> = report.snr_db.iter().map(|s| db_to_lin(*s)).collect();
                cost_throughput(&lin)
            }
            Cost::PsdFlatness => cost_psd_flatness(report.received_psd.values()),
        }
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Cost {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Cost::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown cost '{s}' (expected min-snr, throughput or psd-flatness)"))
    }
}

/// `−min_n SNR(n)`.
pub fn cost_min_snr(snr_db: &[f64]) -> f64 {
    -snr_db.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Smoothed `−min`: `(1/β)·(ln Σ e^{−β·s} − ln N)`, with its gradient.
/// Equal inputs give exactly `−s`; β → ∞ recovers the hard minimum.
pub fn cost_soft_min(snr_db: &[f64], beta: f64) -> (f64, Vec<f64>) {
    let lo = snr_db.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = snr_db.iter().map(|s| (-beta * (s - lo)).exp()).collect();
    let z: f64 = w.iter().sum();
    let cost = -lo + (z.ln() - (snr_db.len() as f64).ln()) / beta;
    (cost, w.iter().map(|v| -v / z).collect())
}

/// `−Σ log2(1 + SNR)` with SNR linear.
pub fn cost_throughput(snr_linear: &[f64]) -> f64 {
    -snr_linear.iter().map(|s| (1.0 + s).log2()).sum::<f64>()
}

/// Mean squared deviation of the received PSD from its mean, dB².
pub fn cost_psd_flatness(psd_db: &[f64]) -> f64 {
    let n = psd_db.len() as f64;
    let mean = psd_db.iter().sum::<f64>() / n;
    psd_db.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationSpec {
    pub strategy: Strategy,
    pub cost: Cost,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Soft-min temperature, 1/dB.
    pub softmin_temperature: f64,
    /// Seeds the optional initial jitter.
    pub seed: u64,
    /// Uniform jitter amplitude applied to the starting profile, dB.
    pub initial_jitter_db: f64,
    /// Starting profile in dB (flat when absent).
    pub initial: Option<Vec<f64>>,
}

impl OptimizationSpec {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            cost: strategy.default_cost(),
            iterations: 500,
            learning_rate: 0.05,
            softmin_temperature: 10.0,
            seed: 0,
            initial_jitter_db: 0.0,
            initial: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidOptimization("learning rate must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidOptimization("at least one iteration is required".into()));
        }
        if !(self.softmin_temperature > 0.0 && self.softmin_temperature.is_finite()) {
            return Err(Error::InvalidOptimization("soft-min temperature must be positive".into()));
        }
        if !(self.initial_jitter_db >= 0.0 && self.initial_jitter_db.is_finite()) {
            return Err(Error::InvalidOptimization("initial jitter must be non-negative".into()));
        }
        if let Some(init) = &self.initial {
            if init.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidOptimization("initial profile must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    /// Objective on the optimization model.
    pub cost: f64,
    /// Full-model minimum SNR, dB.
    pub min_snr_db: f64,
    /// Full-model SNR excursion, dB.
    pub excursion_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    BudgetExhausted,
    /// Non-finite cost at this iteration.
    Aborted { iteration: usize },
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub strategy: Strategy,
    pub cost: Cost,
    /// Best candidate, dBm, normalized to the first-amplifier total.
    pub input: PowerSpectrum,
    /// Full-model simulation of `input`.
    pub report: SnrReport,
    pub full_cost: f64,
    pub initial_full_cost: f64,
    pub best_iteration: usize,
    pub trace: Vec<TraceRow>,
    pub status: Status,
}

impl OptimizationResult {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// Smoothed objective and its gradient with respect to `θ` (dB).
pub fn objective(
    link: &LinkConfig,
    theta: &[f64],
    cost: Cost,
    beta: f64,
) -> Result<(f64, Vec<f64>, SnrReport)> {
    let input = PowerSpectrum::from_dbm(link.grid.clone(), theta.to_vec())?
        .normalize_total(link.first_edfa_total_input_dbm)?;
    let n = theta.len();
    let tape = crate::cascade::Tape::forward(link, &input)?;
    let report = &tape.report;
    let (value, d_snr, d_rx) = match cost {
        Cost::MinSnr => {
            let (c, g) = cost_soft_min(&report.snr_db, beta);
            (c, g, vec![0.0; n])
        }
        Cost::Throughput => {
            let mut g = Vec::with_capacity(n);
            let mut c = 0.0;
            for s in &report.snr_db {
                let lin = db_to_lin(*s);
                c -= (1.0 + lin).log2();
                g.push(-lin / (1.0 + lin) / std::f64::consts::LN_2 * DB_NEPER);
            }
            (c, g, vec![0.0; n])
        }
        Cost::PsdFlatness => {
            let p = report.received_psd.values();
            let mean = p.iter().sum::<f64>() / n as f64;
            let g = p.iter().map(|v| 2.0 * (v - mean) / n as f64).collect();
            (cost_psd_flatness(p), vec![0.0; n], g)
        }
    };
    let grad = tape.backward(&d_snr, &d_rx)?;
    Ok((value, grad, tape.report))
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            theta[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

const SOFT_FRACTION: f64 = 0.8;
const STALL_WINDOW: usize = 20;
const STALL_TOL: f64 = 1e-6;

fn stalled(history: &[f64]) -> bool {
    if history.len() <= STALL_WINDOW {
        return false;
    }
    let now = history[history.len() - 1];
    let then = history[history.len() - 1 - STALL_WINDOW];
    (now - then).abs() <= STALL_TOL * now.abs().max(1e-12)
}

/// Optimizes the input profile of `link` under `spec`. The optimization
/// model is `link` restricted to the strategy's fiber effects; every
/// candidate is scored on `link` itself and the best one is returned.
pub fn optimize(link: &LinkConfig, spec: &OptimizationSpec) -> Result<OptimizationResult> {
    spec.validate()?;
    link.validate()?;
    let n = link.grid.len();
    let full = link;
    let model = link.restricted(spec.strategy.model_variant());
    let same_model = model.spans == link.spans;

    let mut theta = match (&spec.initial, spec.strategy) {
        (_, Strategy::FlatInputReference) | (None, _) => vec![0.0; n],
        (Some(init), _) => {
            link.grid.check_len(init.len())?;
            init.clone()
        }
    };
    if spec.initial_jitter_db > 0.0 && spec.strategy != Strategy::FlatInputReference {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for t in theta.iter_mut() {
            *t += rng.gen_range(-spec.initial_jitter_db..=spec.initial_jitter_db);
        }
    }

    let candidate = |theta: &[f64]| -> Result<PowerSpectrum> {
        PowerSpectrum::from_dbm(link.grid.clone(), theta.to_vec())?
            .normalize_total(link.first_edfa_total_input_dbm)
    };
    let score = |theta: &[f64]| -> Result<(PowerSpectrum, SnrReport, f64)> {
        let input = candidate(theta)?;
        let report = simulate(full, &input)?;
        let c = spec.cost.evaluate(&report);
        Ok((input, report, c))
    };

    let (input0, report0, cost0) = score(&theta)?;
    if !cost0.is_finite() {
        return Err(Error::NonFiniteCost { iteration: 0 });
    }
    let mut best = (input0, report0, cost0, 0usize);

    if spec.strategy == Strategy::FlatInputReference {
        let r = &best.1;
        let trace = vec![TraceRow {
            iteration: 0,
            cost: cost0,
            min_snr_db: r.min_snr_db(),
            excursion_db: r.excursion_db(),
        }];
        return Ok(OptimizationResult {
            strategy: spec.strategy,
            cost: spec.cost,
            input: best.0,
            report: best.1,
            full_cost: cost0,
            initial_full_cost: cost0,
            best_iteration: 0,
            trace,
            status: Status::Converged,
        });
    }

    let soft_iters = ((spec.iterations as f64 * SOFT_FRACTION).round() as usize).min(spec.iterations);
    let refine_iters = spec.iterations - soft_iters;
    let uses_soft = spec.cost == Cost::MinSnr && refine_iters > 0;
    let mut adam = Adam::new(n);
    let mut trace = Vec::with_capacity(spec.iterations + 1);
    let mut history = Vec::new();
    let mut status = Status::BudgetExhausted;
    let mut refine_start: Option<usize> = None;
    let mut last_min_snr = best.1.min_snr_db();
    let mut last_excursion = best.1.excursion_db();

    for it in 0..=spec.iterations {
        let (beta, lr) = match refine_start {
            None => (spec.softmin_temperature, spec.learning_rate),
            Some(start) => {
                let p = (it - start) as f64 / refine_iters.max(1) as f64;
                (
                    spec.softmin_temperature * 100f64.powf(p.min(1.0)),
                    spec.learning_rate * 0.2 * (1.0 - p).max(0.05),
                )
            }
        };
        let (value, grad, model_report) = objective(&model, &theta, spec.cost, beta)?;
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            trace.push(TraceRow {
                iteration: it,
                cost: value,
                min_snr_db: f64::NAN,
                excursion_db: f64::NAN,
            });
            status = Status::Aborted { iteration: it };
            break;
        }
        if it > 0 {
            let (input, report, c) = if same_model {
                let c = spec.cost.evaluate(&model_report);
                (candidate(&theta)?, model_report, c)
            } else {
                score(&theta)?
            };
            last_min_snr = report.min_snr_db();
            last_excursion = report.excursion_db();
            if !c.is_finite() {
                status = Status::Aborted { iteration: it };
                trace.push(TraceRow {
                    iteration: it,
                    cost: value,
                    min_snr_db: last_min_snr,
                    excursion_db: last_excursion,
                });
                break;
            }
            if c < best.2 {
                best = (input, report, c, it);
            }
        }
        trace.push(TraceRow {
            iteration: it,
            cost: value,
            min_snr_db: last_min_snr,
            excursion_db: last_excursion,
        });
        history.push(value);
        if it == spec.iterations {
            break;
        }

        match refine_start {
            None => {
                if uses_soft && (it + 1 >= soft_iters || stalled(&history)) {
                    refine_start = Some(it + 1);
                    history.clear();
                } else if stalled(&history) {
                    status = Status::Converged;
                    break;
                }
            }
            Some(start) => {
                if it + 1 - start > STALL_WINDOW && stalled(&history) {
                    status = Status::Converged;
                    break;
                }
            }
        }

        adam.step(&mut theta, &grad, lr);
        let mean = theta.iter().sum::<f64>() / n as f64;
        theta.iter_mut().for_each(|t| *t -= mean);
    }

    Ok(OptimizationResult {
        strategy: spec.strategy,
        cost: spec.cost,
        input: best.0,
        report: best.1,
        full_cost: best.2,
        initial_full_cost: cost0,
        best_iteration: best.3,
        trace,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_snr_examples() {
        assert_eq!(cost_min_snr(&[10.0, 20.0, 30.0]), -10.0);
        let (c, _) = cost_soft_min(&[12.5; 4], 10.0);
        assert!((c + 12.5).abs() < 1e-12);
        assert_eq!(cost_min_snr(&[12.5; 4]), -12.5);
        let (c, _) = cost_soft_min(&[15.0, 15.5], 10.0);
        let expected = -(15.0 - (1.0 + (-5.0f64).exp()).ln() / 10.0 + 2f64.ln() / 10.0);
        assert!((c - expected).abs() < 1e-12);
        assert!((c + 15.0686).abs() < 1e-4);
    }

    #[test]
    fn soft_min_tends_to_hard_min() {
        let s = [14.0, 15.0, 17.0, 14.2];
        let (c, _) = cost_soft_min(&s, 1e4);
        assert!((c - cost_min_snr(&s)).abs() < 1e-3);
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(cost_throughput(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(cost_throughput(&[1.0]), -1.0);
        let c = cost_throughput(&[10.0, 20.0, 30.0]);
        assert!((c - -(11f64.log2() + 21f64.log2() + 31f64.log2())).abs() < 1e-12);
        assert!((c + 12.806).abs() < 1e-3);
    }

    #[test]
    fn flatness_examples() {
        assert_eq!(cost_psd_flatness(&[3.0; 5]), 0.0);
        assert_eq!(cost_psd_flatness(&[-1.0, 1.0]), 1.0);
        assert_eq!(cost_psd_flatness(&[4.0, 6.0]), 1.0);
    }

    #[test]
    fn names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        for c in Cost::ALL {
            assert_eq!(c.name().parse::<Cost>().unwrap(), c);
        }
        assert!("best".parse::<Strategy>().is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = OptimizationSpec::new(Strategy::FlatSnrFull);
        assert!(s.validate().is_ok());
        s.learning_rate = 0.0;
        assert!(s.validate().is_err());
        let mut s = OptimizationSpec::new(Strategy::FlatSnrFull);
        s.iterations = 0;
        assert!(s.validate().is_err());
    }
}
