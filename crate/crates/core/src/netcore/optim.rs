//! First-order optimizers over flat parameter vectors.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Adam state: bias-corrected first/second moment estimates per parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(param_count: usize, learning_rate: f64) -> Self {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update. Rejects non-finite gradients without
    /// touching the parameters.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam state holds {} parameters, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(bad) = grads.iter().find(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient(format!("gradient entry {bad}")));
        }
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Plain gradient descent, available as a config alternative to Adam.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SgdState {
    pub learning_rate: f64,
    step: u64,
}

impl SgdState {
    pub fn new(learning_rate: f64) -> Self {
        SgdState {
            learning_rate,
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape("sgd params/grads length mismatch".into()));
        }
        if let Some(bad) = grads.iter().find(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient(format!("gradient entry {bad}")));
        }
        self.step += 1;
        for (p, g) in params.iter_mut().zip(grads) {
            *p -= self.learning_rate * g;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Optimizer {
    Adam(AdamState),
    Sgd(SgdState),
}

impl Optimizer {
    pub fn adam(param_count: usize, lr: f64) -> Self {
        Optimizer::Adam(AdamState::new(param_count, lr))
    }

    pub fn sgd(lr: f64) -> Self {
        Optimizer::Sgd(SgdState::new(lr))
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        match self {
            Optimizer::Adam(s) => s.step(params, grads),
            Optimizer::Sgd(s) => s.step(params, grads),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut state = AdamState::new(3, 1e-2);
        let mut params = vec![1.0, -2.0, 0.5];
        let before = params.clone();
        state.step(&mut params, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_magnitude_is_about_learning_rate() {
        // With a constant gradient the bias-corrected first step is
        // lr * g / (|g| + eps) ~= lr * sign(g).
        let lr = 0.05;
        let mut state = AdamState::new(2, lr);
        let mut params = vec![0.0, 0.0];
        state.step(&mut params, &[3.0, -0.7]).unwrap();
        assert!((params[0] + lr).abs() < 1e-6);
        assert!((params[1] - lr).abs() < 1e-6);
    }

    #[test]
    fn nan_gradient_is_rejected() {
        let mut state = AdamState::new(1, 1e-2);
        let mut params = vec![1.0];
        let err = state.step(&mut params, &[f64::NAN]).unwrap_err();
        assert!(err.to_string().contains("non-finite gradient"));
        assert_eq!(params, vec![1.0]);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut state = AdamState::new(2, 0.0);
        let mut params = vec![0.3, -0.4];
        let before = params.clone();
        state.step(&mut params, &[1.0, 2.0]).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn sgd_takes_plain_steps() {
        let mut state = SgdState::new(0.1);
        let mut params = vec![1.0];
        state.step(&mut params, &[2.0]).unwrap();
        assert!((params[0] - 0.8).abs() < 1e-15);
    }
}
