use alloc::vec::Vec;

use super::tensor::Tensor;

/// A set of trainable tensors with a fixed traversal order.
///
/// The order returned by [`tensors`](Parameters::tensors) is also the
/// on-disk order of model files.
pub trait Parameters: Clone {
    fn tensors(&self) -> Vec<&Tensor>;

    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        z
    }

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Summed loss over `count` predictions (tokens, or decisions for a classifier).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStat {
    pub total: f64,
    pub count: usize,
}

impl LossStat {
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.total / self.count as f64
        }
    }
}

impl core::ops::AddAssign for LossStat {
    fn add_assign(&mut self, rhs: Self) {
        self.total += rhs.total;
        self.count += rhs.count;
    }
}

/// A differentiable per-example loss.
pub trait Objective: Parameters {
    type Example;

    fn loss(&self, example: &Self::Example) -> LossStat;

    /// Adds the gradient of `loss(example).total` into `grads` and returns the loss.
    fn accumulate_gradient(&self, example: &Self::Example, grads: &mut Self) -> LossStat;
}
