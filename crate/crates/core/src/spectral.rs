//! Channel grid, per-channel power spectra and unit conversions.
//!
//! Every spectrum in the crate lives on a [`ChannelGrid`]: a uniform comb of
//! carriers. Powers cross module boundaries as [`PowerSpectrum`] values that
//! carry an explicit dBm / mW domain tag; numerical kernels work on plain
//! slices of watts.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant in J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// `ln(10) / 10`: derivative factor of `10^(x/10)`.
pub const DB_NEPER: f64 = std::f64::consts::LN_10 / 10.0;

#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[inline]
pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * db_to_lin(dbm)
}

#[inline]
pub fn watt_to_dbm(w: f64) -> f64 {
    lin_to_db(w * 1e3)
}

/// Uniform comb of carrier frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGrid {
    frequencies_thz: Vec<f64>,
    spacing_ghz: f64,
    symbol_rate_gbd: f64,
}

impl ChannelGrid {
    pub fn uniform(
        count: usize,
        start_thz: f64,
        spacing_ghz: f64,
        symbol_rate_gbd: f64,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidGrid("channel count must be positive".into()));
        }
        if !(start_thz.is_finite() && start_thz > 0.0) {
            return Err(Error::InvalidGrid(format!("bad start frequency {start_thz}")));
        }
        if !(spacing_ghz.is_finite() && spacing_ghz > 0.0) {
            return Err(Error::InvalidGrid(format!("bad spacing {spacing_ghz}")));
        }
        if !(symbol_rate_gbd > 0.0 && symbol_rate_gbd <= spacing_ghz) {
            return Err(Error::InvalidGrid(format!(
                "symbol rate {symbol_rate_gbd} GBd must lie in (0, {spacing_ghz}]"
            )));
        }
        let frequencies_thz = (0..count)
            .map(|i| start_thz + i as f64 * spacing_ghz * 1e-3)
            .collect();
        Ok(Self {
            frequencies_thz,
            spacing_ghz,
            symbol_rate_gbd,
        })
    }

    /// 40 channels, 192.1 to 196.0 THz on the 100 GHz grid, 32 GBd.
    pub fn c_band() -> Self {
        Self::uniform(40, 192.1, 100.0, 32.0).expect("default grid is valid")
    }

    pub fn len(&self) -> usize {
        self.frequencies_thz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies_thz.is_empty()
    }

    pub fn frequencies_thz(&self) -> &[f64] {
        &self.frequencies_thz
    }

    pub fn start_thz(&self) -> f64 {
        self.frequencies_thz[0]
    }

    pub fn spacing_ghz(&self) -> f64 {
        self.spacing_ghz
    }

    pub fn symbol_rate_gbd(&self) -> f64 {
        self.symbol_rate_gbd
    }

    /// Noise-integration bandwidth in Hz.
    pub fn bandwidth_hz(&self) -> f64 {
        self.symbol_rate_gbd * 1e9
    }

    /// Photon energy `h·ν` per channel in joules.
    pub fn photon_energies(&self) -> Vec<f64> {
        self.frequencies_thz
            .iter()
            .map(|f| PLANCK * f * 1e12)
            .collect()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if n != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: n,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    /// dBm per channel.
    Dbm,
    /// mW per channel.
    Milliwatt,
}

impl Domain {
    fn name(self) -> &'static str {
        match self {
            Domain::Dbm => "dBm",
            Domain::Milliwatt => "mW",
        }
    }
}

/// Per-channel power on a grid, tagged with its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    grid: Arc<ChannelGrid>,
    values: Vec<f64>,
    domain: Domain,
}

impl PowerSpectrum {
    pub fn from_dbm(grid: Arc<ChannelGrid>, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        Ok(Self {
            grid,
            values,
            domain: Domain::Dbm,
        })
    }

    pub fn from_mw(grid: Arc<ChannelGrid>, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        check_positive(&values)?;
        Ok(Self {
            grid,
            values,
            domain: Domain::Milliwatt,
        })
    }

    pub fn from_watts(grid: Arc<ChannelGrid>, watts: &[f64]) -> Result<Self> {
        Self::from_mw(grid, watts.iter().map(|w| w * 1e3).collect())
    }

    /// Flat spectrum carrying `total_dbm` in total.
    pub fn flat(grid: Arc<ChannelGrid>, total_dbm: f64) -> Self {
        let per_channel = total_dbm - lin_to_db(grid.len() as f64);
        let values = vec![per_channel; grid.len()];
        Self {
            grid,
            values,
            domain: Domain::Dbm,
        }
    }

    pub fn grid(&self) -> &Arc<ChannelGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_db(&self) -> Result<Self> {
        self.expect(Domain::Milliwatt)?;
        check_positive(&self.values)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&p| lin_to_db(p)).collect(),
            domain: Domain::Dbm,
        })
    }

    pub fn to_linear(&self) -> Result<Self> {
        self.expect(Domain::Dbm)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&p| db_to_lin(p)).collect(),
            domain: Domain::Milliwatt,
        })
    }

    /// Per-channel values in dBm regardless of the stored domain.
    pub fn dbm(&self) -> Vec<f64> {
        match self.domain {
            Domain::Dbm => self.values.clone(),
            Domain::Milliwatt => self.values.iter().map(|&p| lin_to_db(p)).collect(),
        }
    }

    /// Per-channel values in mW regardless of the stored domain.
    pub fn mw(&self) -> Vec<f64> {
        match self.domain {
            Domain::Dbm => self.values.iter().map(|&p| db_to_lin(p)).collect(),
            Domain::Milliwatt => self.values.clone(),
        }
    }

    pub fn watts(&self) -> Vec<f64> {
        self.mw().into_iter().map(|p| p * 1e-3).collect()
    }

    pub fn total_mw(&self) -> f64 {
        self.mw().iter().sum()
    }

    pub fn total_dbm(&self) -> f64 {
        lin_to_db(self.total_mw())
    }

    /// Shifts a dB spectrum so its maximum is exactly 0 dB. Adding the
    /// returned offset back restores the input.
    pub fn normalize_peak(&self) -> Result<(Self, f64)> {
        self.expect(Domain::Dbm)?;
        let offset = self
            .values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let values = self.values.iter().map(|v| v - offset).collect();
        Ok((
            Self {
                grid: self.grid.clone(),
                values,
                domain: Domain::Dbm,
            },
            offset,
        ))
    }

    /// Rescales the spectrum so its linear sum equals `target_total_dbm`,
    /// keeping the channel ratios and the domain tag.
    pub fn normalize_total(&self, target_total_dbm: f64) -> Result<Self> {
        match self.domain {
            Domain::Dbm => {
                let shift = target_total_dbm - self.total_dbm();
                Ok(Self {
                    grid: self.grid.clone(),
                    values: self.values.iter().map(|v| v + shift).collect(),
                    domain: Domain::Dbm,
                })
            }
            Domain::Milliwatt => {
                check_positive(&self.values)?;
                let scale = db_to_lin(target_total_dbm) / self.total_mw();
                Ok(Self {
                    grid: self.grid.clone(),
                    values: self.values.iter().map(|v| v * scale).collect(),
                    domain: Domain::Milliwatt,
                })
            }
        }
    }

    fn expect(&self, domain: Domain) -> Result<()> {
        if self.domain != domain {
            return Err(Error::WrongDomain {
                expected: domain.name(),
                found: self.domain.name(),
            });
        }
        Ok(())
    }
}

fn check_positive(values: &[f64]) -> Result<()> {
    match values.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(channel) => Err(Error::NonPositivePower {
            channel,
            value: values[channel],
        }),
        None => Ok(()),
    }
}

/// Accumulated noise riding with the signal, per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpectrum {
    pub grid: Arc<ChannelGrid>,
    /// ASE power within the symbol-rate bandwidth, W.
    pub ase_w: Vec<f64>,
    /// Kerr NLI power within the symbol-rate bandwidth, W.
    pub nli_w: Vec<f64>,
    /// Transceiver implementation noise-to-signal ratio (linear).
    pub impl_nsr: Vec<f64>,
}

impl NoiseSpectrum {
    pub fn zero(grid: Arc<ChannelGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            ase_w: vec![0.0; n],
            nli_w: vec![0.0; n],
            impl_nsr: vec![0.0; n],
        }
    }
}
