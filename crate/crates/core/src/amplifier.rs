//! Amplifier models the cascade can query: the trained surrogate pair and
//! analytic stubs used in tests and toy scenarios.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::oracle::{oracle_response, OracleParams};
use crate::spectral::{db_to_lin, ChannelGrid, PowerSpectrum};
use crate::surrogate::{
    predict_gain, predict_gain_vjp, predict_nf, predict_nf_vjp, shape_to_gain, shape_to_gain_vjp,
    ModelKind, SurrogateModel,
};

/// Per-channel response at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplifierResponse {
    pub gain_db: Vec<f64>,
    pub nf_db: Vec<f64>,
    pub out_of_envelope: bool,
}

/// Gain and NF as functions of the peak-normalized input (dB) and the total
/// input and output powers (dBm). The gain must bring the input to exactly
/// the requested total output.
pub trait AmplifierModel: Send + Sync + fmt::Debug {
    fn grid(&self) -> &ChannelGrid;

    fn response(&self, input_norm_db: &[f64], total_in: f64, total_out: f64) -> Result<AmplifierResponse>;

    /// Pulls cotangents on gain and NF back to `(input_norm, total_in, total_out)`.
    fn vjp(
        &self,
        input_norm_db: &[f64],
        total_in: f64,
        total_out: f64,
        d_gain: &[f64],
        d_nf: &[f64],
    ) -> Result<(Vec<f64>, f64, f64)>;
}

/// Trained gain and NF networks for one amplifier make.
#[derive(Debug, Clone)]
pub struct SurrogateAmplifier {
    gain: Arc<SurrogateModel>,
    nf: Arc<SurrogateModel>,
}

impl SurrogateAmplifier {
    pub fn new(gain: Arc<SurrogateModel>, nf: Arc<SurrogateModel>) -> Result<Self> {
        if gain.kind != ModelKind::Gain {
            return Err(Error::WrongModelKind {
                expected: "gain",
                found: gain.kind.name(),
            });
        }
        if nf.kind != ModelKind::Nf {
            return Err(Error::WrongModelKind {
                expected: "nf",
                found: nf.kind.name(),
            });
        }
        if gain.grid != nf.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self { gain, nf })
    }

    pub fn gain_model(&self) -> &SurrogateModel {
        &self.gain
    }

    pub fn nf_model(&self) -> &SurrogateModel {
        &self.nf
    }
}

impl AmplifierModel for SurrogateAmplifier {
    fn grid(&self) -> &ChannelGrid {
        &self.gain.grid
    }

    fn response(&self, u: &[f64], total_in: f64, total_out: f64) -> Result<AmplifierResponse> {
        let g = predict_gain(&self.gain, u, total_in, total_out)?;
        let nf = predict_nf(&self.nf, u, total_in, total_out)?;
        Ok(AmplifierResponse {
            gain_db: g.values,
            nf_db: nf.values,
            out_of_envelope: g.out_of_envelope || nf.out_of_envelope,
        })
    }

    fn vjp(
        &self,
        u: &[f64],
        total_in: f64,
        total_out: f64,
        d_gain: &[f64],
        d_nf: &[f64],
    ) -> Result<(Vec<f64>, f64, f64)> {
        let (mut du, di, do_) = predict_gain_vjp(&self.gain, u, total_in, total_out, d_gain)?;
        let (du2, di2, do2) = predict_nf_vjp(&self.nf, u, total_in, total_out, d_nf)?;
        du.iter_mut().zip(&du2).for_each(|(a, b)| *a += b);
        Ok((du, di + di2, do_ + do2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StubNoise {
    /// Constant NF, dB.
    Constant(f64),
    /// Quantum-free amplifier: `NF = 1/G`, so no ASE is added.
    Noiseless,
}

/// Fixed gain shape; the offset follows from the total powers.
#[derive(Debug, Clone)]
pub struct StubAmplifier {
    grid: ChannelGrid,
    shape_db: Vec<f64>,
    noise: StubNoise,
}

impl StubAmplifier {
    pub fn new(grid: ChannelGrid, shape_db: Vec<f64>, noise: StubNoise) -> Result<Self> {
        grid.check_len(shape_db.len())?;
        Ok(Self {
            grid,
            shape_db,
            noise,
        })
    }

    pub fn flat(grid: ChannelGrid, noise: StubNoise) -> Self {
        let n = grid.len();
        Self {
            grid,
            shape_db: vec![0.0; n],
            noise,
        }
    }

    pub fn shape_db(&self) -> &[f64] {
        &self.shape_db
    }
}

impl AmplifierModel for StubAmplifier {
    fn grid(&self) -> &ChannelGrid {
        &self.grid
    }

    fn response(&self, u: &[f64], total_in: f64, total_out: f64) -> Result<AmplifierResponse> {
        self.grid.check_len(u.len())?;
        let gain_db = shape_to_gain(u, &self.shape_db, total_in, total_out);
        let nf_db = match self.noise {
            StubNoise::Constant(nf) => vec![nf; u.len()],
            StubNoise::Noiseless => gain_db.iter().map(|g| -g).collect(),
        };
        Ok(AmplifierResponse {
            gain_db,
            nf_db,
            out_of_envelope: false,
        })
    }

    fn vjp(
        &self,
        u: &[f64],
        _total_in: f64,
        _total_out: f64,
        d_gain: &[f64],
        d_nf: &[f64],
    ) -> Result<(Vec<f64>, f64, f64)> {
        let d_total: Vec<f64> = match self.noise {
            StubNoise::Constant(_) => d_gain.to_vec(),
            StubNoise::Noiseless => d_gain.iter().zip(d_nf).map(|(g, n)| g - n).collect(),
        };
        let (du, _, di, do_) = shape_to_gain_vjp(u, &self.shape_db, &d_total);
        Ok((du, di, do_))
    }
}

/// The physical oracle used directly as an amplifier (ground-truth runs).
/// Gradients use implicit differentiation through the inversion equation.
#[derive(Debug, Clone)]
pub struct OracleAmplifier {
    params: OracleParams,
}

impl OracleAmplifier {
    pub fn new(params: OracleParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    fn input_spectrum(&self, u: &[f64], total_in: f64) -> Result<PowerSpectrum> {
        PowerSpectrum::from_dbm(self.params.grid.clone(), u.to_vec())?.normalize_total(total_in)
    }
}

impl AmplifierModel for OracleAmplifier {
    fn grid(&self) -> &ChannelGrid {
        &self.params.grid
    }

    fn response(&self, u: &[f64], total_in: f64, total_out: f64) -> Result<AmplifierResponse> {
        let r = oracle_response(&self.params, &self.input_spectrum(u, total_in)?, total_out)?;
        Ok(AmplifierResponse {
            gain_db: r.gain_db,
            nf_db: r.nf_db,
            out_of_envelope: false,
        })
    }

    fn vjp(
        &self,
        u: &[f64],
        total_in: f64,
        total_out: f64,
        d_gain: &[f64],
        d_nf: &[f64],
    ) -> Result<(Vec<f64>, f64, f64)> {
        // The output only depends on u and the totals through x, solved from
        // F(x) = Σ_n w_n·10^{G_n(x)/10} − 1 = 0 with w = input share scaled
        // by 10^{(P_in − P_out)/10}.
        let input = self.input_spectrum(u, total_in)?;
        let r = oracle_response(&self.params, &input, total_out)?;
        let x = r.inversion;
        let p = &self.params;
        let n = u.len();
        let l = p.length_m;

        let h = 1e-7;
        let mut d_x = 0.0;
        for i in 0..n {
            let (gp, nfp) = p.channel_response(x + h, i);
            let (gm, nfm) = p.channel_response(x - h, i);
            d_x += d_gain[i] * (gp - gm) / (2.0 * h) + d_nf[i] * (nfp - nfm) / (2.0 * h);
        }

        // share_n = 10^{u_n/10}/Σ 10^{u/10}; F = Σ share_n·g_n·ρ − 1, ρ = 10^{(P_in−P_out)/10}.
        let share: Vec<f64> = {
            let w: Vec<f64> = u.iter().map(|v| db_to_lin(*v)).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        };
        let rho = db_to_lin(total_in - total_out);
        let g_lin: Vec<f64> = (0..n).map(|i| db_to_lin(r.gain_db[i])).collect();
        let ln = std::f64::consts::LN_10 / 10.0;
        let dfdx: f64 = (0..n)
            .map(|i| share[i] * g_lin[i] * rho * ln * l * (p.absorption[i] + p.emission[i]))
            .sum();
        let lam = -d_x / dfdx;
        // ∂F/∂u_k = ρ·ln·share_k·(g_k − Σ share·g); Σ share·g·ρ = 1.
        let mean_g: f64 = (0..n).map(|i| share[i] * g_lin[i]).sum();
        let du = (0..n)
            .map(|k| lam * rho * ln * share[k] * (g_lin[k] - mean_g))
            .collect();
        let f_total = rho * mean_g;
        Ok((du, lam * ln * f_total, -lam * ln * f_total))
    }
}
