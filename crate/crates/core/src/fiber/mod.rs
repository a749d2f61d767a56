//! Single-span fiber propagation: flat loss, inter-channel SRS and Kerr NLI.

mod nli;
mod srs;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{db_to_lin, ChannelGrid, NoiseSpectrum, PowerSpectrum, DB_NEPER};

pub(crate) use nli::GnKernel;
pub(crate) use srs::{Coupling, SrsRun};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberParams {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    pub beta2_ps2_per_km: f64,
    pub gamma_per_w_km: f64,
    /// Raman gain slope, 1/(W·km·THz).
    pub raman_slope: f64,
    /// Offset beyond which the Raman gain stops growing, THz.
    pub raman_peak_shift_thz: f64,
    pub connector_loss_db: f64,
    /// Upper bound on the RK4 step, km.
    pub max_step_km: f64,
}

impl FiberParams {
    /// Standard single-mode fiber.
    pub fn ssmf(length_km: f64) -> Self {
        Self {
            length_km,
            attenuation_db_per_km: 0.2,
            beta2_ps2_per_km: -21.7,
            gamma_per_w_km: 1.3,
            raman_slope: 0.028,
            raman_peak_shift_thz: 13.0,
            connector_loss_db: 0.5,
            max_step_km: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidLink(format!("fiber {what}")));
        if !(self.length_km >= 0.0 && self.length_km.is_finite()) {
            return bad("length must be non-negative");
        }
        if !(self.attenuation_db_per_km >= 0.0) {
            return bad("attenuation must be non-negative");
        }
        if !(self.raman_slope >= 0.0) || !(self.raman_peak_shift_thz >= 0.0) {
            return bad("Raman slope and peak shift must be non-negative");
        }
        if !(self.connector_loss_db >= 0.0) {
            return bad("connector loss must be non-negative");
        }
        if !(self.max_step_km > 0.0) {
            return bad("integration step must be positive");
        }
        if !(self.beta2_ps2_per_km.is_finite() && self.gamma_per_w_km >= 0.0) {
            return bad("dispersion must be finite and the nonlinear coefficient non-negative");
        }
        Ok(())
    }

    /// Power attenuation, 1/km.
    pub fn loss_per_km(&self) -> f64 {
        self.attenuation_db_per_km * DB_NEPER
    }

    /// Linear transmission of the span without SRS, connector included.
    pub fn transmission(&self) -> f64 {
        db_to_lin(-(self.attenuation_db_per_km * self.length_km + self.connector_loss_db))
    }

    pub(crate) fn gn_kernel(&self, grid: &ChannelGrid) -> GnKernel {
        let freqs: Vec<f64> = grid.frequencies_thz().iter().map(|f| f * 1e12).collect();
        GnKernel::new(
            &freqs,
            grid.bandwidth_hz(),
            self.loss_per_km(),
            self.length_km,
            self.beta2_ps2_per_km * 1e-24,
            self.gamma_per_w_km,
        )
    }
}

/// Signal transfer through one span, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) enum SignalTransfer {
    /// Flat loss: `P_out = t·P_in`.
    Linear(f64),
    Raman(SrsRun),
}

impl SignalTransfer {
    /// Runs the span on launch powers in W.
    pub(crate) fn solve(launch_w: &[f64], grid: &ChannelGrid, params: &FiberParams, include_srs: bool) -> Result<Self> {
        grid.check_len(launch_w.len())?;
        if !include_srs || params.raman_slope == 0.0 || params.length_km == 0.0 {
            return Ok(Self::Linear(params.transmission()));
        }
        let coupling = Coupling::new(grid.frequencies_thz(), params.raman_slope, params.raman_peak_shift_thz);
        Ok(Self::Raman(SrsRun::solve(
            launch_w,
            coupling,
            params.loss_per_km(),
            params.length_km,
            params.max_step_km,
            db_to_lin(-params.connector_loss_db),
        )?))
    }

    pub(crate) fn output(&self, launch_w: &[f64]) -> Vec<f64> {
        match self {
            Self::Linear(t) => launch_w.iter().map(|p| p * t).collect(),
            Self::Raman(run) => run.output(),
        }
    }

    /// Cotangent of the output pulled back to the launch powers.
    pub(crate) fn vjp(&self, d_out: &[f64]) -> Vec<f64> {
        match self {
            Self::Linear(t) => d_out.iter().map(|d| d * t).collect(),
            Self::Raman(run) => run.vjp(d_out),
        }
    }
}

fn linear_launch(launch: &PowerSpectrum) -> Vec<f64> {
    launch.watts()
}

/// Launch spectrum after one span with SRS, connector loss included.
pub fn srs_propagate(launch: &PowerSpectrum, params: &FiberParams) -> Result<PowerSpectrum> {
    params.validate()?;
    let w = linear_launch(launch);
    let out = SignalTransfer::solve(&w, launch.grid(), params, true)?.output(&w);
    let spectrum = PowerSpectrum::from_watts(launch.grid().clone(), &out)?;
    Ok(match launch.domain() {
        crate::spectral::Domain::Dbm => spectrum.to_db()?,
        crate::spectral::Domain::Milliwatt => spectrum,
    })
}

/// Gradient of `Σ_n d_out[n]·P_out[n]` (W) with respect to launch powers (W).
pub fn srs_propagate_vjp(launch: &PowerSpectrum, params: &FiberParams, d_out: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    let w = linear_launch(launch);
    Ok(SignalTransfer::solve(&w, launch.grid(), params, true)?.vjp(d_out))
}

/// Per-channel NLI power (W) in the symbol-rate bandwidth, referred to the
/// span input.
pub fn nli_power(launch: &PowerSpectrum, params: &FiberParams) -> Result<Vec<f64>> {
    params.validate()?;
    Ok(params.gn_kernel(launch.grid()).power(&linear_launch(launch)))
}

/// Gradient of `Σ_n d_nli[n]·P_NLI[n]` with respect to launch powers (W).
pub fn nli_power_vjp(launch: &PowerSpectrum, params: &FiberParams, d_nli: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    Ok(params.gn_kernel(launch.grid()).vjp(&linear_launch(launch), d_nli))
}

/// Attenuates accumulated noise by the per-channel transfer `P_out/P_in`
/// that the launch signal experiences. The implementation NSR is a ratio
/// and passes unchanged.
pub fn propagate_noise(
    noise: &NoiseSpectrum,
    launch: &PowerSpectrum,
    params: &FiberParams,
    include_srs: bool,
) -> Result<NoiseSpectrum> {
    params.validate()?;
    if noise.grid.as_ref() != launch.grid().as_ref() {
        return Err(Error::GridMismatch);
    }
    let w = linear_launch(launch);
    let out = SignalTransfer::solve(&w, launch.grid(), params, include_srs)?.output(&w);
    let t: Vec<f64> = out.iter().zip(&w).map(|(o, i)| o / i).collect();
    let scale = |v: &[f64]| v.iter().zip(&t).map(|(v, t)| v * t).collect();
    Ok(NoiseSpectrum {
        grid: noise.grid.clone(),
        ase_w: scale(&noise.ase_w),
        nli_w: scale(&noise.nli_w),
        impl_nsr: noise.impl_nsr.clone(),
    })
}
