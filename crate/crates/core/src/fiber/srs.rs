//! Stimulated Raman scattering between WDM channels.
//!
//! Powers obey `dP_n/dz = P_n·(−a + Σ_m C_nm·P_m)` with the triangular gain
//! approximation `C_nm = C_r·clamp(f_m − f_n, ±Δf_peak)`. The loss is taken
//! out analytically, `P = e^{−az}·Q`, and `Q` is integrated with fixed-step
//! RK4. Gradients come from the exact adjoint of the discrete scheme.

use crate::error::{Error, Result};

/// Antisymmetric Raman coupling matrix applied without storing it.
#[derive(Debug, Clone)]
pub(crate) struct Coupling {
    freqs_thz: Vec<f64>,
    slope: f64,
    peak_thz: f64,
    /// No offset exceeds the peak: `C v = C_r·(Σ f_m v_m − f_n Σ v_m)`.
    linear: bool,
}

impl Coupling {
    pub(crate) fn new(freqs_thz: &[f64], slope: f64, peak_thz: f64) -> Self {
        let span = freqs_thz.last().unwrap_or(&0.0) - freqs_thz.first().unwrap_or(&0.0);
        Self {
            freqs_thz: freqs_thz.to_vec(),
            slope,
            peak_thz,
            linear: span <= peak_thz,
        }
    }

    /// `(C v)_n`, in 1/km when `v` is in W.
    pub(crate) fn apply(&self, v: &[f64]) -> Vec<f64> {
        let f = &self.freqs_thz;
        if self.linear {
            let sum: f64 = v.iter().sum();
            let moment: f64 = f.iter().zip(v).map(|(f, v)| f * v).sum();
            f.iter().map(|fn_| self.slope * (moment - fn_ * sum)).collect()
        } else {
            f.iter()
                .map(|fn_| {
                    self.slope
                        * f.iter()
                            .zip(v)
                            .map(|(fm, vm)| (fm - fn_).clamp(-self.peak_thz, self.peak_thz) * vm)
                            .sum::<f64>()
                })
                .collect()
        }
    }
}

/// Forward solution with the per-step states needed for the adjoint.
#[derive(Debug, Clone)]
pub(crate) struct SrsRun {
    coupling: Coupling,
    /// Power attenuation, 1/km.
    loss: f64,
    step_km: f64,
    /// Connector transmission (linear) applied at the end.
    connector: f64,
    /// `Q` at the start of every step, plus the final state.
    states: Vec<Vec<f64>>,
}

fn axpy(y: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(y, k)| y + h * k).collect()
}

impl SrsRun {
    fn rhs(&self, z: f64, q: &[f64]) -> Vec<f64> {
        let e = (-self.loss * z).exp();
        let cq = self.coupling.apply(q);
        q.iter().zip(&cq).map(|(q, c)| e * q * c).collect()
    }

    /// `J(z, q)ᵀ·λ` for the right-hand side above. `C` is antisymmetric, so
    /// `Cᵀ(q∘λ) = −C(q∘λ)`.
    fn rhs_vjp(&self, z: f64, q: &[f64], lambda: &[f64]) -> Vec<f64> {
        let e = (-self.loss * z).exp();
        let cq = self.coupling.apply(q);
        let ql: Vec<f64> = q.iter().zip(lambda).map(|(q, l)| q * l).collect();
        let cql = self.coupling.apply(&ql);
        lambda
            .iter()
            .zip(&cq)
            .zip(&cql)
            .map(|((l, c), d)| e * (l * c - d))
            .collect()
    }

    pub(crate) fn solve(
        launch_w: &[f64],
        coupling: Coupling,
        loss_per_km: f64,
        length_km: f64,
        max_step_km: f64,
        connector: f64,
    ) -> Result<Self> {
        let steps = if length_km > 0.0 {
            (length_km / max_step_km).ceil().max(1.0) as usize
        } else {
            0
        };
        let h = if steps > 0 { length_km / steps as f64 } else { 0.0 };
        let mut run = Self {
            coupling,
            loss: loss_per_km,
            step_km: h,
            connector,
            states: Vec::with_capacity(steps + 1),
        };
        let mut q = launch_w.to_vec();
        for i in 0..steps {
            let z = i as f64 * h;
            let k1 = run.rhs(z, &q);
            let k2 = run.rhs(z + h / 2.0, &axpy(&q, h / 2.0, &k1));
            let k3 = run.rhs(z + h / 2.0, &axpy(&q, h / 2.0, &k2));
            let k4 = run.rhs(z + h, &axpy(&q, h, &k3));
            let next: Vec<f64> = (0..q.len())
                .map(|n| q[n] + h / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]))
                .collect();
            if next.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::NegativeIntegratorPower { z_km: z + h });
            }
            run.states.push(std::mem::replace(&mut q, next));
        }
        run.states.push(q);
        Ok(run)
    }

    fn length_km(&self) -> f64 {
        self.step_km * (self.states.len() - 1) as f64
    }

    fn output_scale(&self) -> f64 {
        (-self.loss * self.length_km()).exp() * self.connector
    }

    pub(crate) fn output(&self) -> Vec<f64> {
        let s = self.output_scale();
        self.states.last().expect("at least one state").iter().map(|q| q * s).collect()
    }

    /// Pulls a cotangent on the output back to the launch powers.
    pub(crate) fn vjp(&self, d_out: &[f64]) -> Vec<f64> {
        let s = self.output_scale();
        let mut lambda: Vec<f64> = d_out.iter().map(|d| d * s).collect();
        let h = self.step_km;
        for i in (0..self.states.len() - 1).rev() {
            let z = i as f64 * h;
            let q1 = &self.states[i];
            let k1 = self.rhs(z, q1);
            let q2 = axpy(q1, h / 2.0, &k1);
            let k2 = self.rhs(z + h / 2.0, &q2);
            let q3 = axpy(q1, h / 2.0, &k2);
            let k3 = self.rhs(z + h / 2.0, &q3);
            let q4 = axpy(q1, h, &k3);

            let mu4: Vec<f64> = lambda.iter().map(|l| h / 6.0 * l).collect();
            let l4 = self.rhs_vjp(z + h, &q4, &mu4);
            let mu3: Vec<f64> = (0..l4.len()).map(|n| h / 3.0 * lambda[n] + h * l4[n]).collect();
            let l3 = self.rhs_vjp(z + h / 2.0, &q3, &mu3);
            let mu2: Vec<f64> = (0..l3.len()).map(|n| h / 3.0 * lambda[n] + h / 2.0 * l3[n]).collect();
            let l2 = self.rhs_vjp(z + h / 2.0, &q2, &mu2);
            let mu1: Vec<f64> = (0..l2.len()).map(|n| h / 6.0 * lambda[n] + h / 2.0 * l2[n]).collect();
            let l1 = self.rhs_vjp(z, q1, &mu1);
            for n in 0..lambda.len() {
                lambda[n] += l1[n] + l2[n] + l3[n] + l4[n];
            }
        }
        lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamped_and_linear_coupling_agree_inside_the_peak() {
        let f = [192.0, 192.5, 193.7, 195.0];
        let v = [1e-3, 3e-3, 2e-3, 5e-4];
        let fast = Coupling::new(&f, 0.028, 13.0);
        let mut slow = Coupling::new(&f, 0.028, 13.0);
        slow.linear = false;
        for (a, b) in fast.apply(&v).iter().zip(slow.apply(&v)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn peak_clamps_large_offsets() {
        let c = Coupling::new(&[190.0, 200.0], 1.0, 4.0);
        let out = c.apply(&[0.0, 1.0]);
        assert_eq!(out[0], 4.0);
    }
}
