use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

use super::tensor::{sigmoid, Tensor};
use super::Rng;

/// Single-layer GRU cell.
///
/// ```text
/// z  = sigmoid(Wz x + Uz h + bz)
/// r  = sigmoid(Wr x + Ur h + br)
/// h~ = tanh(Wh x + Uh (r * h) + bh)
/// h' = (1 - z) * h + z * h~
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Tensor,
    pub u_z: Tensor,
    pub b_z: Tensor,
    pub w_r: Tensor,
    pub u_r: Tensor,
    pub b_r: Tensor,
    pub w_h: Tensor,
    pub u_h: Tensor,
    pub b_h: Tensor,
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub candidate: Vec<f64>,
    pub h: Vec<f64>,
}

impl GruParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Tensor::zeros(hidden_dim, input_dim);
        let u = || Tensor::zeros(hidden_dim, hidden_dim);
        let b = || Tensor::vector(hidden_dim);
        GruParams {
            w_z: w(),
            u_z: u(),
            b_z: b(),
            w_r: w(),
            u_r: u(),
            b_r: b(),
            w_h: w(),
            u_h: u(),
            b_h: b(),
        }
    }

    pub fn uniform(input_dim: usize, hidden_dim: usize, bound: f64, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        for t in p.tensors_mut() {
            *t = Tensor::uniform(t.rows(), t.cols(), bound, rng);
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.rows()
    }

    /// Storage order: z gate, r gate, candidate; each as input matrix, hidden matrix, bias.
    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![
            &self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_h,
            &self.u_h, &self.b_h,
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.w_z,
            &mut self.u_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.u_h,
            &mut self.b_h,
        ]
    }

    /// One recurrence step, checking dimensions.
    pub fn step(&self, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "gru input",
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        if h.len() != self.hidden_dim() {
            return Err(Error::DimensionMismatch {
                what: "gru hidden state",
                expected: self.hidden_dim(),
                found: h.len(),
            });
        }
        Ok(self.forward(x, h).h)
    }

    pub fn forward(&self, x: &[f64], h_prev: &[f64]) -> GruCache {
        let mut z = self.b_z.data().to_vec();
        self.w_z.mul_vec_acc(x, &mut z);
        self.u_z.mul_vec_acc(h_prev, &mut z);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));

        let mut r = self.b_r.data().to_vec();
        self.w_r.mul_vec_acc(x, &mut r);
        self.u_r.mul_vec_acc(h_prev, &mut r);
        r.iter_mut().for_each(|v| *v = sigmoid(*v));

        let reset: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
        let mut candidate = self.b_h.data().to_vec();
        self.w_h.mul_vec_acc(x, &mut candidate);
        self.u_h.mul_vec_acc(&reset, &mut candidate);
        candidate.iter_mut().for_each(|v| *v = libm::tanh(*v));

        let h = (0..h_prev.len())
            .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * candidate[i])
            .collect();
        GruCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            z,
            r,
            candidate,
            h,
        }
    }

    /// Back-propagates `dh` (gradient w.r.t. the step output) through one step.
    /// Parameter gradients are added into `grads`; input and previous-state
    /// gradients are added into `dx` and `dh_prev`.
    pub fn backward(
        &self,
        cache: &GruCache,
        dh: &[f64],
        grads: &mut GruParams,
        dx: &mut [f64],
        dh_prev: &mut [f64],
    ) {
        let n = dh.len();
        let mut da_z = vec![0.0; n];
        let mut da_h = vec![0.0; n];
        for i in 0..n {
            let z = cache.z[i];
            let c = cache.candidate[i];
            dh_prev[i] += dh[i] * (1.0 - z);
            da_z[i] = dh[i] * (c - cache.h_prev[i]) * z * (1.0 - z);
            da_h[i] = dh[i] * z * (1.0 - c * c);
        }

        let reset: Vec<f64> = cache.r.iter().zip(&cache.h_prev).map(|(r, h)| r * h).collect();
        grads.w_h.add_outer(&da_h, &cache.x);
        grads.u_h.add_outer(&da_h, &reset);
        grads.b_h.add_slice(&da_h);
        self.w_h.mul_t_vec_acc(&da_h, dx);
        let mut d_reset = vec![0.0; n];
        self.u_h.mul_t_vec_acc(&da_h, &mut d_reset);

        let mut da_r = vec![0.0; n];
        for i in 0..n {
            let r = cache.r[i];
            dh_prev[i] += d_reset[i] * r;
            da_r[i] = d_reset[i] * cache.h_prev[i] * r * (1.0 - r);
        }

        grads.w_r.add_outer(&da_r, &cache.x);
        grads.u_r.add_outer(&da_r, &cache.h_prev);
        grads.b_r.add_slice(&da_r);
        self.w_r.mul_t_vec_acc(&da_r, dx);
        self.u_r.mul_t_vec_acc(&da_r, dh_prev);

        grads.w_z.add_outer(&da_z, &cache.x);
        grads.u_z.add_outer(&da_z, &cache.h_prev);
        grads.b_z.add_slice(&da_z);
        self.w_z.mul_t_vec_acc(&da_z, dx);
        self.u_z.mul_t_vec_acc(&da_z, dh_prev);
    }
}
