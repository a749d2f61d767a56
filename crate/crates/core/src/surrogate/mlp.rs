//! Dense → ReLU → dense network with hand-written backward pass and Adam.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    /// hidden × input, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// output × hidden, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Mlp {
    /// He-uniform first layer, Glorot-uniform output layer, zero biases.
    pub fn new(input_dim: usize, hidden_dim: usize, output_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let l1 = (6.0 / input_dim as f64).sqrt();
        let l2 = (6.0 / (hidden_dim + output_dim) as f64).sqrt();
        let w1 = (0..hidden_dim * input_dim)
            .map(|_| rng.gen_range(-l1..l1))
            .collect();
        let w2 = (0..output_dim * hidden_dim)
            .map(|_| rng.gen_range(-l2..l2))
            .collect();
        Self {
            input_dim,
            hidden_dim,
            output_dim,
            w1,
            b1: vec![0.0; hidden_dim],
            w2,
            b2: vec![0.0; output_dim],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
            ..*self
        }
    }

    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim);
        (0..self.hidden_dim)
            .map(|h| {
                let row = &self.w1[h * self.input_dim..(h + 1) * self.input_dim];
                self.b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    fn output_from_hidden(&self, hidden: &[f64]) -> Vec<f64> {
        (0..self.output_dim)
            .map(|o| {
                let row = &self.w2[o * self.hidden_dim..(o + 1) * self.hidden_dim];
                self.b2[o] + row.iter().zip(hidden).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let hidden: Vec<f64> = self.hidden_pre(x).into_iter().map(|z| z.max(0.0)).collect();
        self.output_from_hidden(&hidden)
    }

    /// Vector-Jacobian product with respect to the input.
    pub fn input_vjp(&self, x: &[f64], d_out: &[f64]) -> Vec<f64> {
        let pre = self.hidden_pre(x);
        let d_hidden = self.hidden_grad(&pre, d_out);
        let mut dx = vec![0.0; self.input_dim];
        for (h, dh) in d_hidden.iter().enumerate() {
            if *dh == 0.0 {
                continue;
            }
            let row = &self.w1[h * self.input_dim..(h + 1) * self.input_dim];
            for (d, w) in dx.iter_mut().zip(row) {
                *d += dh * w;
            }
        }
        dx
    }

    fn hidden_grad(&self, pre: &[f64], d_out: &[f64]) -> Vec<f64> {
        (0..self.hidden_dim)
            .map(|h| {
                if pre[h] <= 0.0 {
                    return 0.0;
                }
                (0..self.output_dim)
                    .map(|o| d_out[o] * self.w2[o * self.hidden_dim + h])
                    .sum()
            })
            .collect()
    }

    /// Adds `0.5·|f(x) − target|²` gradients into `grads`, returns that loss.
    pub fn accumulate_squared_error(&self, x: &[f64], target: &[f64], grads: &mut Mlp) -> f64 {
        let pre = self.hidden_pre(x);
        let hidden: Vec<f64> = pre.iter().map(|z| z.max(0.0)).collect();
        let out = self.output_from_hidden(&hidden);
        let d_out: Vec<f64> = out.iter().zip(target).map(|(o, t)| o - t).collect();
        let loss = 0.5 * d_out.iter().map(|d| d * d).sum::<f64>();

        for o in 0..self.output_dim {
            grads.b2[o] += d_out[o];
            let row = &mut grads.w2[o * self.hidden_dim..(o + 1) * self.hidden_dim];
            for (g, h) in row.iter_mut().zip(&hidden) {
                *g += d_out[o] * h;
            }
        }
        let d_hidden = self.hidden_grad(&pre, &d_out);
        for (h, dh) in d_hidden.iter().enumerate() {
            if *dh == 0.0 {
                continue;
            }
            grads.b1[h] += dh;
            let row = &mut grads.w1[h * self.input_dim..(h + 1) * self.input_dim];
            for (g, v) in row.iter_mut().zip(x) {
                *g += dh * v;
            }
        }
        loss
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    fn tensors(&self) -> [&Vec<f64>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Mlp,
    v: Mlp,
    t: i32,
}

impl Adam {
    pub fn new(shape: &Mlp, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: shape.zeros_like(),
            v: shape.zeros_like(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut Mlp, grads: &Mlp) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        let g = grads.tensors();
        for (((p, m), v), g) in params
            .tensors_mut()
            .into_iter()
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
            .zip(g)
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
    }
}
