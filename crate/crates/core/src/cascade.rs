//! End-to-end link model: EDFA, optional ideal GFF and fiber per span,
//! followed by a receiver with a back-to-back implementation penalty.
//!
//! The state carried from span to span is signal `s`, accumulated ASE `a`
//! and accumulated NLI `n`, all per-channel powers in W. The received SNR is
//! `s / (a + n + s/SNR_b2b)`. Every step has a hand-written backward pass so
//! the SNR gradient with respect to the input profile is exact.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::amplifier::{AmplifierModel, AmplifierResponse};
use crate::error::{Error, Result};
use crate::fiber::{FiberParams, GnKernel, SignalTransfer};
use crate::spectral::{
    db_to_lin, lin_to_db, watt_to_dbm, ChannelGrid, NoiseSpectrum, PowerSpectrum, DB_NEPER,
};

/// Largest total output the modeled amplifiers can deliver, dBm.
pub const MAX_EDFA_OUTPUT_DBM: f64 = 18.0;
/// Noise figure of the extra amplifier in front of an ideal GFF, dB.
pub const GFF_NF_DB: f64 = 3.0;

const DB_PER_NEPER: f64 = 1.0 / DB_NEPER;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GffMode {
    None,
    Ideal,
}

impl GffMode {
    pub fn name(self) -> &'static str {
        match self {
            GffMode::None => "none",
            GffMode::Ideal => "ideal",
        }
    }
}

impl std::str::FromStr for GffMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(GffMode::None),
            "ideal" => Ok(GffMode::Ideal),
            other => Err(format!("unknown GFF mode '{other}' (expected none or ideal)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanConfig {
    /// Key into [`LinkConfig::amplifiers`].
    pub amplifier: String,
    pub target_output_dbm: f64,
    pub fiber: FiberParams,
    pub include_srs: bool,
    pub include_nli: bool,
    pub gff: GffMode,
}

impl SpanConfig {
    pub fn new(amplifier: impl Into<String>, target_output_dbm: f64, fiber: FiberParams) -> Self {
        Self {
            amplifier: amplifier.into(),
            target_output_dbm,
            fiber,
            include_srs: true,
            include_nli: true,
            gff: GffMode::None,
        }
    }
}

/// Which fiber effects the model includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelVariant {
    pub srs: bool,
    pub nli: bool,
}

impl ModelVariant {
    pub const FULL: Self = Self { srs: true, nli: true };
    pub const LINEAR: Self = Self { srs: false, nli: false };
    pub const SRS_ONLY: Self = Self { srs: true, nli: false };
    pub const NLI_ONLY: Self = Self { srs: false, nli: true };

    pub const ALL: [Self; 4] = [Self::LINEAR, Self::SRS_ONLY, Self::NLI_ONLY, Self::FULL];
}

#[derive(Debug, Clone)]
pub struct LinkConfig {
    pub grid: Arc<ChannelGrid>,
    pub spans: Vec<SpanConfig>,
    pub first_edfa_total_input_dbm: f64,
    /// Back-to-back SNR per channel, dB.
    pub b2b_snr_db: Vec<f64>,
    pub amplifiers: BTreeMap<String, Arc<dyn AmplifierModel>>,
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spans.is_empty() {
            return Err(Error::InvalidLink("a link needs at least one span".into()));
        }
        self.grid.check_len(self.b2b_snr_db.len())?;
        if self.b2b_snr_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidLink("back-to-back SNR must be finite".into()));
        }
        if !self.first_edfa_total_input_dbm.is_finite() {
            return Err(Error::InvalidLink("first amplifier input power must be finite".into()));
        }
        for (i, span) in self.spans.iter().enumerate() {
            let amp = self.amplifiers.get(&span.amplifier).ok_or_else(|| {
                Error::InvalidLink(format!("span {}: unknown amplifier '{}'", i + 1, span.amplifier))
            })?;
            if amp.grid() != self.grid.as_ref() {
                return Err(Error::GridMismatch);
            }
            if !(span.target_output_dbm <= MAX_EDFA_OUTPUT_DBM + 1e-9) {
                return Err(Error::InvalidLink(format!(
                    "span {}: target output {} dBm exceeds the {MAX_EDFA_OUTPUT_DBM} dBm amplifier limit",
                    i + 1,
                    span.target_output_dbm
                )));
            }
            span.fiber
                .validate()
                .map_err(|e| Error::InvalidLink(format!("span {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Same link with the fiber effects of every span set to `variant`.
    pub fn with_variant(&self, variant: ModelVariant) -> Self {
        let mut out = self.clone();
        for s in &mut out.spans {
            s.include_srs = variant.srs;
            s.include_nli = variant.nli;
        }
        out
    }

    /// Same link with effects outside `variant` switched off; effects the
    /// configuration already disables stay off.
    pub fn restricted(&self, variant: ModelVariant) -> Self {
        let mut out = self.clone();
        for s in &mut out.spans {
            s.include_srs &= variant.srs;
            s.include_nli &= variant.nli;
        }
        out
    }

    pub fn with_gff(&self, gff: GffMode) -> Self {
        let mut out = self.clone();
        for s in &mut out.spans {
            s.gff = gff;
        }
        out
    }

    pub fn with_launch_power(&self, target_output_dbm: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.spans {
            s.target_output_dbm = target_output_dbm;
        }
        out
    }

    /// Flat input at the configured first-amplifier total.
    pub fn flat_input(&self) -> PowerSpectrum {
        PowerSpectrum::flat(self.grid.clone(), self.first_edfa_total_input_dbm)
    }

    pub fn total_length_km(&self) -> f64 {
        self.spans.iter().map(|s| s.fiber.length_km).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrReport {
    pub received_psd: PowerSpectrum,
    pub noise: NoiseSpectrum,
    pub snr_db: Vec<f64>,
    /// Signal launched into each fiber span (after EDFA and GFF), dBm.
    pub span_launch_psds: Vec<PowerSpectrum>,
    pub warnings: Vec<String>,
}

impl SnrReport {
    pub fn min_snr_db(&self) -> f64 {
        self.snr_db.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_snr_db(&self) -> f64 {
        self.snr_db.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Peak-to-peak SNR spread, dB.
    pub fn excursion_db(&self) -> f64 {
        self.max_snr_db() - self.min_snr_db()
    }

    /// SNR recomputed from the stored signal and noise fields.
    pub fn recomputed_snr_db(&self) -> Vec<f64> {
        self.received_psd
            .watts()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let d = self.noise.ase_w[i] + self.noise.nli_w[i] + self.noise.impl_nsr[i] * s;
                lin_to_db(s / d)
            })
            .collect()
    }
}

struct EdfaStep {
    amp: Arc<dyn AmplifierModel>,
    s_in: Vec<f64>,
    a_in: Vec<f64>,
    n_in: Vec<f64>,
    u: Vec<f64>,
    imax: usize,
    pin: f64,
    pout: f64,
    gain: Vec<f64>,
    nf: Vec<f64>,
    ase_active: Vec<bool>,
}

struct GffStep {
    s1: Vec<f64>,
    a3: Vec<f64>,
    n3: Vec<f64>,
    imin: usize,
    imax: usize,
    q: f64,
}

struct FiberStep {
    s_l: Vec<f64>,
    a_l: Vec<f64>,
    n_l: Vec<f64>,
    nli: Option<(GnKernel, Vec<f64>)>,
    transfer: SignalTransfer,
    s_out: Vec<f64>,
    t: Vec<f64>,
}

struct SpanTape {
    edfa: EdfaStep,
    gff: Option<GffStep>,
    fiber: FiberStep,
}

/// Forward pass with everything the backward pass needs.
pub(crate) struct Tape {
    s0: Vec<f64>,
    hv_r: Vec<f64>,
    spans: Vec<SpanTape>,
    s: Vec<f64>,
    denom: Vec<f64>,
    r: Vec<f64>,
    pub(crate) report: SnrReport,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

impl Tape {
    /// Runs the link on `input` rescaled to the first-amplifier total.
    pub(crate) fn forward(link: &LinkConfig, input: &PowerSpectrum) -> Result<Self> {
        link.validate()?;
        if input.grid().as_ref() != link.grid.as_ref() {
            return Err(Error::GridMismatch);
        }
        let grid = &link.grid;
        let n_ch = grid.len();
        let s0 = input
            .normalize_total(link.first_edfa_total_input_dbm)?
            .watts();
        let hv_r: Vec<f64> = grid
            .photon_energies()
            .iter()
            .map(|e| e * grid.bandwidth_hz())
            .collect();
        let f3 = db_to_lin(GFF_NF_DB);

        let mut s = s0.clone();
        let mut a = vec![0.0; n_ch];
        let mut n = vec![0.0; n_ch];
        let mut spans = Vec::with_capacity(link.spans.len());
        let mut launches = Vec::with_capacity(link.spans.len());
        let mut warnings = Vec::new();

        for (k, span) in link.spans.iter().enumerate() {
            let amp = link.amplifiers[&span.amplifier].clone();
            let pin = watt_to_dbm(s.iter().sum());
            let s_dbm: Vec<f64> = s.iter().map(|w| watt_to_dbm(*w)).collect();
            let imax = argmax(&s_dbm);
            let u: Vec<f64> = s_dbm.iter().map(|v| v - s_dbm[imax]).collect();
            let AmplifierResponse {
                gain_db,
                nf_db,
                out_of_envelope,
            } = amp.response(&u, pin, span.target_output_dbm)?;
            if out_of_envelope {
                warnings.push(format!(
                    "span {}: amplifier '{}' queried outside its training envelope (input {pin:.2} dBm, output {:.2} dBm)",
                    k + 1,
                    span.amplifier,
                    span.target_output_dbm
                ));
            }
            let gain: Vec<f64> = gain_db.iter().map(|g| db_to_lin(*g)).collect();
            let nf: Vec<f64> = nf_db.iter().map(|f| db_to_lin(*f)).collect();
            let mut ase_active = vec![true; n_ch];
            let mut clamped = 0;
            let mut s1 = vec![0.0; n_ch];
            let mut a1 = vec![0.0; n_ch];
            let mut n1 = vec![0.0; n_ch];
            for i in 0..n_ch {
                let excess = nf[i] * gain[i] - 1.0;
                let ase = if excess >= 0.0 {
                    excess * hv_r[i]
                } else {
                    ase_active[i] = false;
                    if excess < -1e-9 {
                        clamped += 1;
                    }
                    0.0
                };
                s1[i] = s[i] * gain[i];
                a1[i] = a[i] * gain[i] + ase;
                n1[i] = n[i] * gain[i];
            }
            if clamped > 0 {
                warnings.push(format!(
                    "span {}: NF below the 1/G floor on {clamped} channels, ASE clamped to zero",
                    k + 1
                ));
            }
            let edfa = EdfaStep {
                amp,
                s_in: std::mem::take(&mut s),
                a_in: std::mem::take(&mut a),
                n_in: std::mem::take(&mut n),
                u,
                imax,
                pin,
                pout: span.target_output_dbm,
                gain,
                nf,
                ase_active,
            };

            let (s2, a2, n2, gff) = match span.gff {
                GffMode::None => (s1, a1, n1, None),
                GffMode::Ideal => {
                    let imin = argmin(&s1);
                    let imax = argmax(&s1);
                    let rho = s1[imin] / s1[imax];
                    let q = s1.iter().sum::<f64>() / n_ch as f64;
                    let a3: Vec<f64> = (0..n_ch)
                        .map(|i| q * (a1[i] + (f3 - rho) * hv_r[i]) / s1[i])
                        .collect();
                    let n3: Vec<f64> = (0..n_ch).map(|i| q * n1[i] / s1[i]).collect();
                    let step = GffStep {
                        s1,
                        a3: a3.clone(),
                        n3: n3.clone(),
                        imin,
                        imax,
                        q,
                    };
                    (vec![q; n_ch], a3, n3, Some(step))
                }
            };

            launches.push(PowerSpectrum::from_watts(grid.clone(), &s2)?.to_db()?);
            let nli = if span.include_nli {
                let kernel = span.fiber.gn_kernel(grid);
                let p = kernel.power(&s2);
                Some((kernel, p))
            } else {
                None
            };
            let transfer = SignalTransfer::solve(&s2, grid, &span.fiber, span.include_srs)?;
            let s_out = transfer.output(&s2);
            let t: Vec<f64> = s_out.iter().zip(&s2).map(|(o, i)| o / i).collect();
            for i in 0..n_ch {
                let nli_i = nli.as_ref().map_or(0.0, |(_, p)| p[i]);
                a.push(a2[i] * t[i]);
                n.push((n2[i] + nli_i) * t[i]);
            }
            s = s_out.clone();
            spans.push(SpanTape {
                edfa,
                gff,
                fiber: FiberStep {
                    s_l: s2,
                    a_l: a2,
                    n_l: n2,
                    nli,
                    transfer,
                    s_out,
                    t,
                },
            });
        }

        let r: Vec<f64> = link.b2b_snr_db.iter().map(|b| 1.0 / db_to_lin(*b)).collect();
        let denom: Vec<f64> = (0..n_ch).map(|i| a[i] + n[i] + s[i] * r[i]).collect();
        let snr_db: Vec<f64> = (0..n_ch).map(|i| lin_to_db(s[i] / denom[i])).collect();
        let report = SnrReport {
            received_psd: PowerSpectrum::from_watts(grid.clone(), &s)?.to_db()?,
            noise: NoiseSpectrum {
                grid: grid.clone(),
                ase_w: a,
                nli_w: n,
                impl_nsr: r.clone(),
            },
            snr_db,
            span_launch_psds: launches,
            warnings,
        };
        Ok(Self {
            s0,
            hv_r,
            spans,
            s,
            denom,
            r,
            report,
        })
    }

    /// Gradient with respect to the input profile in dB (total power held
    /// fixed by the normalization), given cotangents on SNR (dB) and on the
    /// received PSD (dBm).
    pub(crate) fn backward(&self, d_snr_db: &[f64], d_rx_dbm: &[f64]) -> Result<Vec<f64>> {
        let n_ch = self.s.len();
        let mut ds: Vec<f64> = (0..n_ch)
            .map(|i| {
                DB_PER_NEPER
                    * (d_snr_db[i] * (1.0 / self.s[i] - self.r[i] / self.denom[i])
                        + d_rx_dbm[i] / self.s[i])
            })
            .collect();
        let mut da: Vec<f64> = (0..n_ch)
            .map(|i| -DB_PER_NEPER * d_snr_db[i] / self.denom[i])
            .collect();
        let mut dn = da.clone();

        for span in self.spans.iter().rev() {
            // Fiber.
            let f = &span.fiber;
            let mut dt = vec![0.0; n_ch];
            let mut d_nli = vec![0.0; n_ch];
            for i in 0..n_ch {
                let nli_i = f.nli.as_ref().map_or(0.0, |(_, p)| p[i]);
                dt[i] = da[i] * f.a_l[i] + dn[i] * (f.n_l[i] + nli_i);
                d_nli[i] = dn[i] * f.t[i];
                da[i] *= f.t[i];
                dn[i] *= f.t[i];
            }
            let ds_out: Vec<f64> = (0..n_ch).map(|i| ds[i] + dt[i] / f.s_l[i]).collect();
            ds = f.transfer.vjp(&ds_out);
            for i in 0..n_ch {
                ds[i] -= dt[i] * f.s_out[i] / (f.s_l[i] * f.s_l[i]);
            }
            if let Some((kernel, _)) = &f.nli {
                for (d, g) in ds.iter_mut().zip(kernel.vjp(&f.s_l, &d_nli)) {
                    *d += g;
                }
            }

            // Ideal GFF.
            if let Some(g) = &span.gff {
                let q = g.q;
                let mut dq: f64 = ds.iter().sum();
                let mut d_rho = 0.0;
                let mut ds1 = vec![0.0; n_ch];
                for i in 0..n_ch {
                    dq += da[i] * g.a3[i] / q + dn[i] * g.n3[i] / q;
                    ds1[i] = -da[i] * g.a3[i] / g.s1[i] - dn[i] * g.n3[i] / g.s1[i];
                    d_rho -= da[i] * q * self.hv_r[i] / g.s1[i];
                    da[i] *= q / g.s1[i];
                    dn[i] *= q / g.s1[i];
                }
                for v in ds1.iter_mut() {
                    *v += dq / n_ch as f64;
                }
                let (smin, smax) = (g.s1[g.imin], g.s1[g.imax]);
                ds1[g.imin] += d_rho / smax;
                ds1[g.imax] -= d_rho * smin / (smax * smax);
                ds = ds1;
            }

            // EDFA.
            let e = &span.edfa;
            let mut d_gain_db = vec![0.0; n_ch];
            let mut d_nf_db = vec![0.0; n_ch];
            for i in 0..n_ch {
                let mut dg = ds[i] * e.s_in[i] + da[i] * e.a_in[i] + dn[i] * e.n_in[i];
                if e.ase_active[i] {
                    dg += da[i] * e.nf[i] * self.hv_r[i];
                    d_nf_db[i] = da[i] * e.gain[i] * self.hv_r[i] * e.nf[i] * DB_NEPER;
                }
                d_gain_db[i] = dg * e.gain[i] * DB_NEPER;
                ds[i] *= e.gain[i];
                da[i] *= e.gain[i];
                dn[i] *= e.gain[i];
            }
            let (du, d_pin, _) = e.amp.vjp(&e.u, e.pin, e.pout, &d_gain_db, &d_nf_db)?;
            let total: f64 = e.s_in.iter().sum();
            let du_sum: f64 = du.iter().sum();
            for i in 0..n_ch {
                ds[i] += DB_PER_NEPER * (du[i] / e.s_in[i] + d_pin / total);
            }
            ds[e.imax] -= DB_PER_NEPER * du_sum / e.s_in[e.imax];
        }

        // Input normalization: s0 = P·10^{θ/10}/Σ 10^{θ/10}.
        let total: f64 = self.s0.iter().sum();
        let mean: f64 = ds.iter().zip(&self.s0).map(|(d, s)| d * s).sum::<f64>() / total;
        Ok((0..n_ch)
            .map(|i| DB_NEPER * self.s0[i] * (ds[i] - mean))
            .collect())
    }
}

/// Back-to-back SNR measured at a few frequencies, spread over `grid` by
/// linear interpolation in dB and held constant beyond the end points.
pub fn interpolate_b2b(freqs_thz: &[f64], snr_db: &[f64], grid: &ChannelGrid) -> Result<Vec<f64>> {
    if freqs_thz.is_empty() || freqs_thz.len() != snr_db.len() {
        return Err(Error::InvalidLink(
            "back-to-back profile needs matching, non-empty frequency and SNR columns".into(),
        ));
    }
    if freqs_thz.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidLink(
            "back-to-back frequencies must be strictly increasing".into(),
        ));
    }
    if snr_db.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidLink("back-to-back SNR must be finite".into()));
    }
    let last = freqs_thz.len() - 1;
    Ok(grid
        .frequencies_thz()
        .iter()
        .map(|&f| {
            if f <= freqs_thz[0] {
                return snr_db[0];
            }
            if f >= freqs_thz[last] {
                return snr_db[last];
            }
            let k = freqs_thz.partition_point(|x| *x <= f) - 1;
            let t = (f - freqs_thz[k]) / (freqs_thz[k + 1] - freqs_thz[k]);
            snr_db[k] + t * (snr_db[k + 1] - snr_db[k])
        })
        .collect())
}

/// Runs the link on `input` (rescaled to the first-amplifier total).
pub fn simulate(link: &LinkConfig, input: &PowerSpectrum) -> Result<SnrReport> {
    Ok(Tape::forward(link, input)?.report)
}

/// Report plus the gradient of `Σ d_snr_db·SNR_dB + Σ d_rx_dbm·P_rx,dBm`
/// with respect to the input PSD in dB.
pub fn simulate_with_gradient(
    link: &LinkConfig,
    input: &PowerSpectrum,
    d_snr_db: &[f64],
    d_rx_dbm: &[f64],
) -> Result<(SnrReport, Vec<f64>)> {
    link.grid.check_len(d_snr_db.len())?;
    link.grid.check_len(d_rx_dbm.len())?;
    let tape = Tape::forward(link, input)?;
    let grad = tape.backward(d_snr_db, d_rx_dbm)?;
    Ok((tape.report, grad))
}

/// Ideal gain-flattening stage on its own: an extra amplifier with gain
/// `G_e = max P / min P` and the given NF, then per-channel attenuation
/// `A(n) = G_e·P(n)/max P` leaving every channel at `max P`. Returns the
/// flattened signal (W), the noise after the stage and the attenuations.
pub fn apply_ideal_gff(
    signal_w: &[f64],
    noise: &NoiseSpectrum,
    nf_extra_db: f64,
) -> Result<(Vec<f64>, NoiseSpectrum, Vec<f64>)> {
    noise.grid.check_len(signal_w.len())?;
    if signal_w.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidLink("GFF input powers must be positive".into()));
    }
    let n_ch = signal_w.len();
    let smax = signal_w[argmax(signal_w)];
    let smin = signal_w[argmin(signal_w)];
    let ge = smax / smin;
    let f = db_to_lin(nf_extra_db);
    let hv_r: Vec<f64> = noise
        .grid
        .photon_energies()
        .iter()
        .map(|e| e * noise.grid.bandwidth_hz())
        .collect();
    let atten: Vec<f64> = signal_w.iter().map(|s| ge * s / smax).collect();
    let ase: Vec<f64> = (0..n_ch)
        .map(|i| (noise.ase_w[i] * ge + (f * ge - 1.0).max(0.0) * hv_r[i]) / atten[i])
        .collect();
    let nli: Vec<f64> = (0..n_ch).map(|i| noise.nli_w[i] * ge / atten[i]).collect();
    Ok((
        vec![smax; n_ch],
        NoiseSpectrum {
            grid: noise.grid.clone(),
            ase_w: ase,
            nli_w: nli,
            impl_nsr: noise.impl_nsr.clone(),
        },
        atten,
    ))
}
