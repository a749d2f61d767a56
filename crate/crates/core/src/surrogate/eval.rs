use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;

use super::train::input_normalized;
use super::{predict_gain, predict_nf, ModelKind, SurrogateModel};
use crate::error::{Error, Result};
use crate::oracle::{CharacterizationSample, Dataset};

/// Half-width of the average-gain buckets, dB.
pub const GAV_WINDOW_DB: f64 = 1.0;
const HISTOGRAM_BINS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Intra,
    Inter,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::Intra => "intra",
            EvalMode::Inter => "inter",
        })
    }
}

impl std::str::FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "intra" => Ok(EvalMode::Intra),
            "inter" => Ok(EvalMode::Inter),
            other => Err(format!("unknown evaluation mode '{other}' (expected intra or inter)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketStat {
    pub center: f64,
    pub mse: f64,
    pub count: usize,
}

/// Probability density of per-sample MAE on uniform bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
}

impl Histogram {
    fn from_values(values: &[f64]) -> Self {
        let max = values.iter().copied().fold(0.0, f64::max);
        let width = if max > 0.0 {
            max * (1.0 + 1e-9) / HISTOGRAM_BINS as f64
        } else {
            1e-3
        };
        let edges: Vec<f64> = (0..=HISTOGRAM_BINS).map(|i| i as f64 * width).collect();
        let mut counts = vec![0usize; HISTOGRAM_BINS];
        for v in values {
            let bin = ((v / width) as usize).min(HISTOGRAM_BINS - 1);
            counts[bin] += 1;
        }
        let norm = values.len().max(1) as f64 * width;
        Self {
            edges,
            density: counts.iter().map(|&c| c as f64 / norm).collect(),
        }
    }

    pub fn integral(&self) -> f64 {
        self.density
            .iter()
            .zip(self.edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub kind: ModelKind,
    /// Buckets centered on integer G_av with ±1 dB windows; empty ones omitted.
    pub mse_per_gav: Vec<BucketStat>,
    pub mse_per_pout: Vec<BucketStat>,
    pub mse_per_channel: Vec<f64>,
    pub mae_pdf: Histogram,
    /// Per-sample `(G_av, MSE, MAE)`.
    pub samples: Vec<(f64, f64, f64)>,
}

impl EvalReport {
    pub fn overall_mse(&self) -> f64 {
        mean(self.samples.iter().map(|s| s.1))
    }

    /// Mean per-sample MSE over samples whose G_av satisfies `keep`.
    pub fn mse_where(&self, keep: impl Fn(f64) -> bool) -> Option<f64> {
        let v: Vec<f64> = self.samples.iter().filter(|s| keep(s.0)).map(|s| s.1).collect();
        (!v.is_empty()).then(|| mean(v.into_iter()))
    }

    pub fn bucket(&self, center: f64) -> Option<&BucketStat> {
        self.mse_per_gav.iter().find(|b| b.center == center)
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}

/// Maximum absolute per-channel deviation, dB.
pub fn mae(prediction: &[f64], truth: &[f64]) -> Result<f64> {
    if prediction.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: prediction.len(),
        });
    }
    Ok(prediction
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .fold(0.0, f64::max))
}

/// What the model is scored on: per-channel output PSD (equivalently gain)
/// for gain models, per-channel NF for NF models.
fn truth_of(sample: &CharacterizationSample, kind: ModelKind) -> &[f64] {
    match kind {
        ModelKind::Gain => &sample.gain_db,
        ModelKind::Nf => &sample.nf_db,
    }
}

/// Scores precomputed predictions against the samples' ground truth.
pub fn evaluate_predictions(
    samples: &[CharacterizationSample],
    predictions: &[Vec<f64>],
    kind: ModelKind,
    mode: EvalMode,
) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if samples.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            expected: samples.len(),
            found: predictions.len(),
        });
    }
    let n_ch = truth_of(&samples[0], kind).len();
    let mut per_channel = vec![0.0; n_ch];
    let mut rows = Vec::with_capacity(samples.len());
    for (s, p) in samples.iter().zip(predictions) {
        let truth = truth_of(s, kind);
        if truth.len() != n_ch {
            return Err(Error::LengthMismatch {
                expected: n_ch,
                found: truth.len(),
            });
        }
        let m = mae(p, truth)?;
        let mut se = 0.0;
        for ((acc, p), t) in per_channel.iter_mut().zip(p).zip(truth) {
            let e2 = (p - t).powi(2);
            *acc += e2;
            se += e2;
        }
        rows.push((s.average_gain_db(), se / n_ch as f64, m));
    }
    per_channel.iter_mut().for_each(|v| *v /= samples.len() as f64);

    let lo = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min).floor() as i64;
    let hi = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max).ceil() as i64;
    let mse_per_gav = (lo..=hi)
        .filter_map(|c| {
            let c = c as f64;
            let inside: Vec<f64> = rows
                .iter()
                .filter(|r| (r.0 - c).abs() <= GAV_WINDOW_DB + 1e-9)
                .map(|r| r.1)
                .collect();
            (!inside.is_empty()).then(|| BucketStat {
                center: c,
                count: inside.len(),
                mse: mean(inside.into_iter()),
            })
        })
        .collect();

    let mut by_pout: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for (s, r) in samples.iter().zip(&rows) {
        let key = (s.total_output_dbm * 1e6).round() as i64;
        by_pout.entry(key).or_default().push(r.1);
    }
    let mse_per_pout = by_pout
        .into_iter()
        .map(|(k, v)| BucketStat {
            center: k as f64 / 1e6,
            count: v.len(),
            mse: mean(v.into_iter()),
        })
        .collect();

    let maes: Vec<f64> = rows.iter().map(|r| r.2).collect();
    Ok(EvalReport {
        mode,
        kind,
        mse_per_gav,
        mse_per_pout,
        mse_per_channel: per_channel,
        mae_pdf: Histogram::from_values(&maes),
        samples: rows,
    })
}

/// Runs the model on every sample and scores it.
pub fn evaluate(model: &SurrogateModel, dataset: &Dataset, mode: EvalMode) -> Result<EvalReport> {
    if dataset.grid.as_ref() != &model.grid {
        return Err(Error::GridMismatch);
    }
    let predictions: Vec<Vec<f64>> = dataset
        .samples
        .par_iter()
        .map(|s| {
            let u = input_normalized(s);
            let p = match model.kind {
                ModelKind::Gain => predict_gain(model, &u, s.total_input_dbm, s.total_output_dbm),
                ModelKind::Nf => predict_nf(model, &u, s.total_input_dbm, s.total_output_dbm),
            }?;
            Ok(p.values)
        })
        .collect::<Result<_>>()?;
    evaluate_predictions(&dataset.samples, &predictions, model.kind, mode)
}
