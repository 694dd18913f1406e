use alloc::vec;
use alloc::vec::Vec;

use super::tensor::Tensor;
use super::Rng;

/// Affine map `W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Affine {
    pub fn zeros(input: usize, output: usize) -> Self {
        Affine {
            weight: Tensor::zeros(output, input),
            bias: Tensor::vector(output),
        }
    }

    pub fn uniform(input: usize, output: usize, bound: f64, rng: &mut Rng) -> Self {
        Affine {
            weight: Tensor::uniform(output, input, bound, rng),
            bias: Tensor::uniform(output, 1, bound, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weight.affine(x, &self.bias)
    }

    pub fn backward(&self, x: &[f64], dy: &[f64], grads: &mut Affine, dx: &mut [f64]) {
        grads.weight.add_outer(dy, x);
        grads.bias.add_slice(dy);
        self.weight.mul_t_vec_acc(dy, dx);
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.weight, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Elementwise maximum over `k` affine pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct Maxout {
    pub pieces: Vec<Affine>,
}

impl Maxout {
    pub fn uniform(input: usize, output: usize, pieces: usize, bound: f64, rng: &mut Rng) -> Self {
        Maxout {
            pieces: (0..pieces.max(1))
                .map(|_| Affine::uniform(input, output, bound, rng))
                .collect(),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.pieces[0].output_dim()
    }

    /// Logits plus the winning piece of each coordinate (first piece wins ties).
    pub fn forward(&self, h: &[f64]) -> (Vec<f64>, Vec<u8>) {
        let mut logits = self.pieces[0].forward(h);
        let mut winner = vec![0u8; logits.len()];
        for (k, piece) in self.pieces.iter().enumerate().skip(1) {
            for (j, v) in piece.forward(h).into_iter().enumerate() {
                if v > logits[j] {
                    logits[j] = v;
                    winner[j] = k as u8;
                }
            }
        }
        (logits, winner)
    }

    pub fn backward(&self, h: &[f64], winner: &[u8], dlogits: &[f64], grads: &mut Maxout, dh: &mut [f64]) {
        let mut routed = vec![0.0; dlogits.len()];
        for (k, (piece, grad)) in self.pieces.iter().zip(&mut grads.pieces).enumerate() {
            let mut any = false;
            for j in 0..dlogits.len() {
                routed[j] = if winner[j] as usize == k {
                    any = true;
                    dlogits[j]
                } else {
                    0.0
                };
            }
            if any {
                piece.backward(h, &routed, grad, dh);
            }
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.pieces.iter().flat_map(Affine::tensors).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.pieces.iter_mut().flat_map(Affine::tensors_mut).collect()
    }
}

/// `logits[j] = max_i (W_i h + b_i)[j]`
pub fn maxout(h: &[f64], pieces: &[Affine]) -> Vec<f64> {
    let mut out = pieces[0].forward(h);
    for piece in &pieces[1..] {
        for (o, v) in out.iter_mut().zip(piece.forward(h)) {
            *o = o.max(v);
        }
    }
    out
}

/// Numerically stable log-softmax. Entries at `-inf` stay `-inf`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&x| libm::exp(x - max)).sum();
    let log_z = max + libm::log(sum);
    logits.iter().map(|&x| x - log_z).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(libm::exp).collect()
}

/// Negative log-likelihood of `target` and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let log_p = log_softmax(logits);
    let loss = -log_p[target];
    let mut grad: Vec<f64> = log_p.into_iter().map(libm::exp).collect();
    grad[target] -= 1.0;
    (loss, grad)
}
