//! Neural surrogates for EDFA gain and noise figure.
//!
//! Both networks see the same 42 features: the peak-normalized input PSD
//! (40 values, dB) followed by total input and total output power (dBm),
//! standardized with training statistics. The gain network predicts the
//! zero-mean gain shape; adding it to the normalized input and re-normalizing
//! the peak gives the normalized output PSD. The NF network predicts NF in dB.

mod eval;
mod mlp;
mod train;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{db_to_lin, lin_to_db, ChannelGrid, PLANCK};

pub use eval::{evaluate, evaluate_predictions, mae, BucketStat, EvalMode, EvalReport, Histogram};
pub use mlp::{Adam, Mlp};
pub use train::{train, TrainConfig, TrainReport};

pub const MODEL_FORMAT: &str = "wdmopt-surrogate";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gain,
    Nf,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gain => "gain",
            ModelKind::Nf => "nf",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "gain" => Ok(ModelKind::Gain),
            "nf" => Ok(ModelKind::Nf),
            other => Err(format!("unknown model kind '{other}' (expected gain or nf)")),
        }
    }
}

/// Per-feature affine standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        // Constant features keep unit scale.
        let scale = var
            .into_iter()
            .map(|v| if v.sqrt() > 1e-9 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

/// Operating range covered by the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub total_input_dbm: (f64, f64),
    pub total_output_dbm: (f64, f64),
    /// Deepest normalized input level seen, dB (≤ 0).
    pub min_input_db: f64,
}

impl Envelope {
    pub fn contains(&self, input_norm_db: &[f64], total_in: f64, total_out: f64) -> bool {
        const SLACK: f64 = 0.5;
        let (a, b) = self.total_input_dbm;
        let (c, d) = self.total_output_dbm;
        total_in >= a - SLACK
            && total_in <= b + SLACK
            && total_out >= c - SLACK
            && total_out <= d + SLACK
            && input_norm_db.iter().all(|&u| u >= self.min_input_db - SLACK)
    }
}

/// Trained network plus everything needed to run inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub grid: ChannelGrid,
    pub unit_id: String,
    pub training_seed: u64,
    pub net: Mlp,
    pub input_scaler: Scaler,
    pub output_scaler: Scaler,
    pub envelope: Envelope,
}

/// Model output with an out-of-envelope flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub values: Vec<f64>,
    pub out_of_envelope: bool,
}

impl SurrogateModel {
    pub fn channels(&self) -> usize {
        self.grid.len()
    }

    fn features(&self, input_norm_db: &[f64], total_in: f64, total_out: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(input_norm_db.len() + 2);
        x.extend_from_slice(input_norm_db);
        x.push(total_in);
        x.push(total_out);
        self.input_scaler.transform(&x)
    }

    /// Network output in physical units: zero-mean gain shape (gain kind)
    /// or NF in dB (nf kind).
    pub fn raw(&self, input_norm_db: &[f64], total_in: f64, total_out: f64) -> Vec<f64> {
        let z = self.net.forward(&self.features(input_norm_db, total_in, total_out));
        self.output_scaler.inverse(&z)
    }

    /// VJP of [`raw`](Self::raw): returns `(d_input_norm, d_total_in, d_total_out)`.
    pub fn raw_vjp(
        &self,
        input_norm_db: &[f64],
        total_in: f64,
        total_out: f64,
        d_raw: &[f64],
    ) -> (Vec<f64>, f64, f64) {
        let d_z: Vec<f64> = d_raw
            .iter()
            .zip(&self.output_scaler.scale)
            .map(|(d, s)| d * s)
            .collect();
        let x = self.features(input_norm_db, total_in, total_out);
        let d_x = self.net.input_vjp(&x, &d_z);
        let d_feat: Vec<f64> = d_x
            .iter()
            .zip(&self.input_scaler.scale)
            .map(|(d, s)| d / s)
            .collect();
        let n = input_norm_db.len();
        (d_feat[..n].to_vec(), d_feat[n], d_feat[n + 1])
    }

    fn check(&self, kind: ModelKind, input_norm_db: &[f64]) -> Result<()> {
        if self.kind != kind {
            return Err(Error::WrongModelKind {
                expected: kind.name(),
                found: self.kind.name(),
            });
        }
        if input_norm_db.len() != self.channels() {
            return Err(Error::LengthMismatch {
                expected: self.channels(),
                found: input_norm_db.len(),
            });
        }
        Ok(())
    }

    /// Peak-normalized output PSD (dB) predicted by a gain model.
    pub fn predict_output_norm(
        &self,
        input_norm_db: &[f64],
        total_in: f64,
        total_out: f64,
    ) -> Result<Prediction> {
        self.check(ModelKind::Gain, input_norm_db)?;
        let shape = self.raw(input_norm_db, total_in, total_out);
        let mut out: Vec<f64> = input_norm_db.iter().zip(&shape).map(|(u, r)| u + r).collect();
        let peak = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.iter_mut().for_each(|v| *v -= peak);
        Ok(Prediction {
            values: out,
            out_of_envelope: !self.envelope.contains(input_norm_db, total_in, total_out),
        })
    }
}

/// `10·log10 Σ 10^(z/10)`.
pub(crate) fn log_sum_db(z: &[f64]) -> f64 {
    let peak = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    peak + lin_to_db(z.iter().map(|v| db_to_lin(v - peak)).sum())
}

/// Weights `10^(z/10) / Σ 10^(z/10)`: the gradient of [`log_sum_db`].
pub(crate) fn db_softmax(z: &[f64]) -> Vec<f64> {
    let peak = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = z.iter().map(|v| db_to_lin(v - peak)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Absolute gain (dB) from a gain shape `r` applied to normalized input `u`,
/// with the offset fixed by the total powers:
/// `G = r + P_out − P_in − LSE(u + r) + LSE(u)`.
pub fn shape_to_gain(input_norm_db: &[f64], shape: &[f64], total_in: f64, total_out: f64) -> Vec<f64> {
    let shifted: Vec<f64> = input_norm_db.iter().zip(shape).map(|(u, r)| u + r).collect();
    let c = total_out - total_in - log_sum_db(&shifted) + log_sum_db(input_norm_db);
    shape.iter().map(|r| r + c).collect()
}

/// VJP of [`shape_to_gain`]: returns `(d_input_norm, d_shape, d_total_in, d_total_out)`.
pub fn shape_to_gain_vjp(
    input_norm_db: &[f64],
    shape: &[f64],
    d_gain: &[f64],
) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let shifted: Vec<f64> = input_norm_db.iter().zip(shape).map(|(u, r)| u + r).collect();
    let total: f64 = d_gain.iter().sum();
    let q = db_softmax(&shifted);
    let p = db_softmax(input_norm_db);
    let d_shape = d_gain.iter().zip(&q).map(|(d, q)| d - total * q).collect();
    let d_u = p.iter().zip(&q).map(|(p, q)| total * (p - q)).collect();
    (d_u, d_shape, -total, total)
}

/// Per-channel gain (dB) predicted by a gain model, see [`shape_to_gain`].
pub fn predict_gain(
    model: &SurrogateModel,
    input_norm_db: &[f64],
    total_in: f64,
    total_out: f64,
) -> Result<Prediction> {
    model.check(ModelKind::Gain, input_norm_db)?;
    let r = model.raw(input_norm_db, total_in, total_out);
    Ok(Prediction {
        values: shape_to_gain(input_norm_db, &r, total_in, total_out),
        out_of_envelope: !model.envelope.contains(input_norm_db, total_in, total_out),
    })
}

/// VJP of [`predict_gain`]: returns `(d_input_norm, d_total_in, d_total_out)`.
pub fn predict_gain_vjp(
    model: &SurrogateModel,
    input_norm_db: &[f64],
    total_in: f64,
    total_out: f64,
    d_gain: &[f64],
) -> Result<(Vec<f64>, f64, f64)> {
    model.check(ModelKind::Gain, input_norm_db)?;
    let r = model.raw(input_norm_db, total_in, total_out);
    let (mut d_u, d_r, d_in, d_out) = shape_to_gain_vjp(input_norm_db, &r, d_gain);
    let (d_u_net, d_in_net, d_out_net) = model.raw_vjp(input_norm_db, total_in, total_out, &d_r);
    for (a, b) in d_u.iter_mut().zip(&d_u_net) {
        *a += b;
    }
    Ok((d_u, d_in + d_in_net, d_out + d_out_net))
}

/// VJP of [`predict_nf`]: returns `(d_input_norm, d_total_in, d_total_out)`.
pub fn predict_nf_vjp(
    model: &SurrogateModel,
    input_norm_db: &[f64],
    total_in: f64,
    total_out: f64,
    d_nf: &[f64],
) -> Result<(Vec<f64>, f64, f64)> {
    model.check(ModelKind::Nf, input_norm_db)?;
    Ok(model.raw_vjp(input_norm_db, total_in, total_out, d_nf))
}

/// Per-channel NF (dB) predicted by an NF model.
pub fn predict_nf(
    model: &SurrogateModel,
    input_norm_db: &[f64],
    total_in: f64,
    total_out: f64,
) -> Result<Prediction> {
    model.check(ModelKind::Nf, input_norm_db)?;
    Ok(Prediction {
        values: model.raw(input_norm_db, total_in, total_out),
        out_of_envelope: !model.envelope.contains(input_norm_db, total_in, total_out),
    })
}

/// Noise figure (linear) from dual-polarization ASE density:
/// `NF = ρ/(G·h·ν) + 1/G`.
pub fn nf_from_ase(rho_ase_w_per_hz: f64, gain_linear: f64, frequency_thz: f64) -> f64 {
    let h_nu = PLANCK * frequency_thz * 1e12;
    rho_ase_w_per_hz / (gain_linear * h_nu) + 1.0 / gain_linear
}

/// Inverse of [`nf_from_ase`]: `ρ = (NF − 1/G)·G·h·ν`.
pub fn ase_from_nf(nf_linear: f64, gain_linear: f64, frequency_thz: f64) -> Result<f64> {
    let excess = nf_linear * gain_linear - 1.0;
    if excess < -1e-12 {
        return Err(Error::NegativeAse {
            nf_linear,
            floor: 1.0 / gain_linear,
        });
    }
    Ok(excess.max(0.0) * PLANCK * frequency_thz * 1e12)
}
