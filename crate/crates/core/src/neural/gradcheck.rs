//! Finite-difference validation of the hand-written backward passes, plus a
//! few small differentiable fragments to check in isolation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

use super::gru::GruParams;
use super::layers::{softmax_cross_entropy, Affine, Maxout};
use super::model::{LossStat, Objective, Parameters};
use super::tensor::Tensor;
use super::Rng;

/// Gradients smaller than this are compared absolutely rather than relatively.
pub const RELATIVE_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// `(tensor index, element index)` of the worst coordinate.
    pub worst: (usize, usize),
}

/// Compares the analytic gradient of `model.loss(example).total` with central
/// differences of width `2 * step`.
///
/// The relative error of a coordinate is `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`.
/// At most `per_tensor` evenly spaced coordinates are checked in each tensor.
pub fn grad_check<M: Objective>(
    model: &M,
    example: &M::Example,
    step: f64,
    per_tensor: usize,
) -> Result<GradCheckReport> {
    let base = model.loss(example).total;
    if !base.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    let mut grads = model.zeros_like();
    model.accumulate_gradient(example, &mut grads);
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.data().to_vec()).collect();

    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        worst: (0, 0),
    };
    for (ti, grad) in analytic.iter().enumerate() {
        let len = grad.len();
        let stride = len.div_ceil(per_tensor.max(1)).max(1);
        for j in (0..len).step_by(stride) {
            let original = probe.tensors()[ti].data()[j];
            probe.tensors_mut()[ti].data_mut()[j] = original + step;
            let plus = probe.loss(example).total;
            probe.tensors_mut()[ti].data_mut()[j] = original - step;
            let minus = probe.loss(example).total;
            probe.tensors_mut()[ti].data_mut()[j] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite("loss"));
            }
            let numeric = (plus - minus) / (2.0 * step);
            let a = grad[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
            report.checked += 1;
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst = (ti, j);
            }
        }
    }
    Ok(report)
}

/// Affine layer followed by softmax cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSoftmax {
    pub layer: Affine,
}

impl AffineSoftmax {
    pub fn new(input: usize, classes: usize, scale: f64, rng: &mut Rng) -> Self {
        AffineSoftmax {
            layer: Affine::uniform(input, classes, scale, rng),
        }
    }
}

impl Parameters for AffineSoftmax {
    fn tensors(&self) -> Vec<&Tensor> {
        self.layer.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layer.tensors_mut()
    }
}

impl Objective for AffineSoftmax {
    type Example = (Vec<f64>, usize);

    fn loss(&self, (x, target): &Self::Example) -> LossStat {
        LossStat {
            total: softmax_cross_entropy(&self.layer.forward(x), *target).0,
            count: 1,
        }
    }

    fn accumulate_gradient(&self, (x, target): &Self::Example, grads: &mut Self) -> LossStat {
        let (loss, dlogits) = softmax_cross_entropy(&self.layer.forward(x), *target);
        let mut dx = vec![0.0; x.len()];
        self.layer.backward(x, &dlogits, &mut grads.layer, &mut dx);
        LossStat { total: loss, count: 1 }
    }
}

/// A GRU unrolled over a fixed input sequence, read out by softmax on the final state.
#[derive(Debug, Clone, PartialEq)]
pub struct GruChain {
    pub gru: GruParams,
    pub readout: Affine,
}

impl GruChain {
    pub fn new(input: usize, hidden: usize, classes: usize, scale: f64, rng: &mut Rng) -> Self {
        GruChain {
            gru: GruParams::uniform(input, hidden, scale, rng),
            readout: Affine::uniform(hidden, classes, scale, rng),
        }
    }
}

impl Parameters for GruChain {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = self.gru.tensors();
        out.extend(self.readout.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.gru.tensors_mut();
        out.extend(self.readout.tensors_mut());
        out
    }
}

/// Input sequence, initial state and target class.
pub type GruChainExample = (Vec<Vec<f64>>, Vec<f64>, usize);

impl Objective for GruChain {
    type Example = GruChainExample;

    fn loss(&self, (xs, h0, target): &GruChainExample) -> LossStat {
        let mut h = h0.clone();
        for x in xs {
            h = self.gru.forward(x, &h).h;
        }
        LossStat {
            total: softmax_cross_entropy(&self.readout.forward(&h), *target).0,
            count: 1,
        }
    }

    fn accumulate_gradient(&self, (xs, h0, target): &GruChainExample, grads: &mut Self) -> LossStat {
        let mut h = h0.clone();
        let mut caches = Vec::with_capacity(xs.len());
        for x in xs {
            let cache = self.gru.forward(x, &h);
            h.clone_from(&cache.h);
            caches.push(cache);
        }
        let (loss, dlogits) = softmax_cross_entropy(&self.readout.forward(&h), *target);
        let mut dh = vec![0.0; h.len()];
        self.readout.backward(&h, &dlogits, &mut grads.readout, &mut dh);
        for (cache, x) in caches.iter().zip(xs).rev() {
            let mut dx = vec![0.0; x.len()];
            let mut dh_prev = vec![0.0; dh.len()];
            self.gru.backward(cache, &dh, &mut grads.gru, &mut dx, &mut dh_prev);
            dh = dh_prev;
        }
        LossStat { total: loss, count: 1 }
    }
}

/// Maxout layer followed by softmax cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxoutSoftmax {
    pub layer: Maxout,
}

impl MaxoutSoftmax {
    pub fn new(input: usize, classes: usize, pieces: usize, scale: f64, rng: &mut Rng) -> Self {
        MaxoutSoftmax {
            layer: Maxout::uniform(input, classes, pieces, scale, rng),
        }
    }

    /// Moves the winning piece of every near-tied coordinate away from the
    /// runner-up so that finite differences of width `step` stay on one side
    /// of the kink.
    pub fn separate_ties(&mut self, h: &[f64], margin: f64) {
        let outputs: Vec<Vec<f64>> = self.layer.pieces.iter().map(|p| p.forward(h)).collect();
        for j in 0..outputs[0].len() {
            let mut ranked: Vec<(f64, usize)> = outputs.iter().enumerate().map(|(k, o)| (o[j], k)).collect();
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
            if ranked.len() > 1 && ranked[0].0 - ranked[1].0 < margin {
                let bias = self.layer.pieces[ranked[0].1].bias.data_mut();
                bias[j] += margin;
            }
        }
    }
}

impl Parameters for MaxoutSoftmax {
    fn tensors(&self) -> Vec<&Tensor> {
        self.layer.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layer.tensors_mut()
    }
}

impl Objective for MaxoutSoftmax {
    type Example = (Vec<f64>, usize);

    fn loss(&self, (h, target): &Self::Example) -> LossStat {
        LossStat {
            total: softmax_cross_entropy(&self.layer.forward(h).0, *target).0,
            count: 1,
        }
    }

    fn accumulate_gradient(&self, (h, target): &Self::Example, grads: &mut Self) -> LossStat {
        let (logits, winner) = self.layer.forward(h);
        let (loss, dlogits) = softmax_cross_entropy(&logits, *target);
        let mut dh = vec![0.0; h.len()];
        self.layer.backward(h, &winner, &dlogits, &mut grads.layer, &mut dh);
        LossStat { total: loss, count: 1 }
    }
}
