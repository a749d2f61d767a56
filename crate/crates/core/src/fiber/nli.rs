//! Closed-form incoherent GN model for a comb of rectangular channels.
//!
//! ```text
//! G_NLI,i = (16/27)·γ²·L_eff² / (2π·|β2|·L_a) · G_i · Σ_j G_j²·ψ_ij
//! ψ_ii = asinh(π²/2·L_a·|β2|·B²)
//! ψ_ij = asinh(π²·L_a·|β2|·B·(Δf + B/2)) − asinh(π²·L_a·|β2|·B·(Δf − B/2))
//! ```
//!
//! with PSDs `G = P/B`, `L_eff = (1 − e^{−aL})/a` and asymptotic length
//! `L_a = 1/a` for power attenuation `a`. The `1/|β2|` prefactor is folded
//! into the kernel so that `β2 → 0` stays finite.

use std::f64::consts::PI;

/// `asinh(x)/x`, equal to 1 at 0.
fn asinhc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.asinh() / x
    }
}

/// Per-span constants of the closed form.
#[derive(Debug, Clone)]
pub(crate) struct GnKernel {
    /// `K_ij` such that `P_NLI,i = P_i·Σ_j K_ij·P_j²`.
    kernel: Vec<f64>,
    n: usize,
}

impl GnKernel {
    /// `loss` is the power attenuation in 1/km, `beta2` in s²/km, `gamma`
    /// in 1/(W·km), frequencies in Hz.
    pub(crate) fn new(
        freqs_hz: &[f64],
        bandwidth_hz: f64,
        loss: f64,
        length_km: f64,
        beta2: f64,
        gamma: f64,
    ) -> Self {
        let n = freqs_hz.len();
        let (l_eff, l_asym) = if loss > 0.0 {
            (-(-loss * length_km).exp_m1() / loss, 1.0 / loss)
        } else {
            (length_km, length_km)
        };
        let b = bandwidth_hz;
        let c = PI * PI * l_asym * beta2.abs() * b;
        // ψ/(|β2|·L_a) with asinh(c·x) = c·x·asinhc(c·x).
        let scaled = |x: f64| PI * PI * b * x * asinhc(c * x);
        let prefactor = 16.0 / 27.0 * gamma * gamma * l_eff * l_eff / (2.0 * PI) / (b * b);
        let mut kernel = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let df = (freqs_hz[j] - freqs_hz[i]).abs();
                let psi = if i == j {
                    scaled(b / 2.0)
                } else {
                    scaled(df + b / 2.0) - scaled(df - b / 2.0)
                };
                kernel[i * n + j] = prefactor * psi;
            }
        }
        Self { kernel, n }
    }

    /// NLI power per channel (W) for launch powers in W.
    pub(crate) fn power(&self, p: &[f64]) -> Vec<f64> {
        let sq: Vec<f64> = p.iter().map(|v| v * v).collect();
        (0..self.n)
            .map(|i| {
                let row = &self.kernel[i * self.n..(i + 1) * self.n];
                p[i] * row.iter().zip(&sq).map(|(k, s)| k * s).sum::<f64>()
            })
            .collect()
    }

    pub(crate) fn vjp(&self, p: &[f64], d_nli: &[f64]) -> Vec<f64> {
        let sq: Vec<f64> = p.iter().map(|v| v * v).collect();
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.kernel[i * self.n..(i + 1) * self.n];
            out[i] += d_nli[i] * row.iter().zip(&sq).map(|(k, s)| k * s).sum::<f64>();
            let w = 2.0 * d_nli[i] * p[i];
            for j in 0..self.n {
                out[j] += w * row[j] * p[j];
            }
        }
        out
    }
}
