//! Adadelta (Zeiler, 2012).
//!
//! ```text
//! E[g^2]  <- rho E[g^2]  + (1 - rho) g^2
//! delta   <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
//! E[dx^2] <- rho E[dx^2] + (1 - rho) delta^2
//! x       <- x + lr * delta
//! ```
//!
//! `lr` is 1 in the original method and kept as a multiplier only.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdadeltaConfig {
    pub rho: f64,
    pub eps: f64,
    pub lr: f64,
}

impl Default for AdadeltaConfig {
    fn default() -> Self {
        AdadeltaConfig {
            rho: 0.95,
            eps: 1e-6,
            lr: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdadeltaState {
    config: AdadeltaConfig,
    sq_grad: Vec<Vec<f64>>,
    sq_update: Vec<Vec<f64>>,
}

impl AdadeltaState {
    /// Zero accumulators shaped like `params`.
    pub fn new(config: AdadeltaConfig, params: &[&Tensor]) -> Result<Self> {
        if !(config.rho > 0.0 && config.rho < 1.0) || !(config.eps > 0.0) {
            return Err(Error::InvalidConfig(
                "adadelta needs 0 < rho < 1 and eps > 0".into(),
            ));
        }
        Ok(AdadeltaState {
            config,
            sq_grad: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            sq_update: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        })
    }

    pub fn config(&self) -> AdadeltaConfig {
        self.config
    }

    /// Running average of squared gradients for parameter tensor `i`.
    pub fn sq_grad(&self, i: usize) -> &[f64] {
        &self.sq_grad[i]
    }

    pub fn sq_update(&self, i: usize) -> &[f64] {
        &self.sq_update[i]
    }

    /// Applies one update. Fails without touching anything on a non-finite gradient.
    pub fn update(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<()> {
        if params.len() != self.sq_grad.len() || grads.len() != self.sq_grad.len() {
            return Err(Error::LengthMismatch {
                left: params.len(),
                right: self.sq_grad.len(),
            });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.len() != g.len() {
                return Err(Error::DimensionMismatch {
                    what: "adadelta gradient",
                    expected: p.len(),
                    found: g.len(),
                });
            }
            if !g.is_finite() {
                return Err(Error::NonFinite("gradient"));
            }
        }
        let AdadeltaConfig { rho, eps, lr } = self.config;
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let acc_g = &mut self.sq_grad[i];
            let acc_u = &mut self.sq_update[i];
            for (j, (x, &g)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                acc_g[j] = rho * acc_g[j] + (1.0 - rho) * g * g;
                let delta = -(libm::sqrt(acc_u[j] + eps) / libm::sqrt(acc_g[j] + eps)) * g;
                acc_u[j] = rho * acc_u[j] + (1.0 - rho) * delta * delta;
                *x += lr * delta;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::from_vec(1, 1, vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_accumulators() {
        let mut p = scalar(0.7);
        let mut state = AdadeltaState::new(AdadeltaConfig::default(), &[&p]).unwrap();
        state.update(&mut [&mut p], &[&scalar(1.0)]).unwrap();
        let before = p.data()[0];
        let (g0, u0) = (state.sq_grad(0)[0], state.sq_update(0)[0]);
        state.update(&mut [&mut p], &[&scalar(0.0)]).unwrap();
        assert_eq!(p.data()[0], before);
        assert_eq!(state.sq_grad(0)[0], 0.95 * g0);
        assert_eq!(state.sq_update(0)[0], 0.95 * u0);
    }

    #[test]
    fn first_step_closed_form() {
        // E[g^2] = 0.05, delta = -sqrt(1e-6) / sqrt(0.05 + 1e-6).
        let mut p = scalar(0.0);
        let mut state = AdadeltaState::new(AdadeltaConfig::default(), &[&p]).unwrap();
        state.update(&mut [&mut p], &[&scalar(1.0)]).unwrap();
        let expected = -0.001 / 0.050_001f64.sqrt();
        assert!((p.data()[0] - expected).abs() < 1e-15);
        assert!((p.data()[0] + 0.004_472_091_4).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = scalar(1.0);
        let mut state = AdadeltaState::new(AdadeltaConfig::default(), &[&p]).unwrap();
        let err = state.update(&mut [&mut p], &[&scalar(f64::NAN)]).unwrap_err();
        assert_eq!(err, Error::NonFinite("gradient"));
        assert_eq!(p.data()[0], 1.0);
    }

    #[test]
    fn invalid_hyperparameters() {
        let p = scalar(0.0);
        let bad = AdadeltaConfig {
            rho: 1.0,
            ..AdadeltaConfig::default()
        };
        assert!(AdadeltaState::new(bad, &[&p]).is_err());
    }
}
