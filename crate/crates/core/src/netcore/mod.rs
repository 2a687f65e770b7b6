//! Minimal dense-network substrate: row-major matrices, linear/relu/sigmoid
//! layers with hand-derived gradients, an Adam-style optimizer, and a central
//! finite-difference gradient checker. Everything is f64.

mod dense;
mod gradcheck;
mod mat;
mod optim;

pub use dense::{DenseNet, ForwardCache, Layer, LayerGrad};
pub use gradcheck::grad_check;
pub use mat::Mat;
pub use optim::{AdamState, Optimizer, SgdState};

use serde::{Deserialize, Serialize};

/// Layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative with respect to the pre-activation `z`.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Stable log(1 + e^x).
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Binary cross-entropy of sigmoid(u) against a 0/1 label, written in terms
/// of the pre-sigmoid value so it never overflows.
pub fn bce_from_logit(u: f64, y: f64) -> f64 {
    y * softplus(-u) + (1.0 - y) * softplus(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable_and_centered() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) <= 1.0 && sigmoid(800.0) > 0.999);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0) < 1e-10);
    }

    #[test]
    fn bce_matches_direct_formula_in_safe_range() {
        for &(u, y) in &[(0.3, 1.0), (-1.2, 0.0), (2.0, 0.0), (-0.5, 1.0)] {
            let p = sigmoid(u);
            let direct = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            assert!((bce_from_logit(u, y) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn relu_and_identity_derivatives() {
        assert_eq!(Activation::Relu.apply(-1.0), 0.0);
        assert_eq!(Activation::Relu.apply(2.0), 2.0);
        assert_eq!(Activation::Relu.derivative(-1.0), 0.0);
        assert_eq!(Activation::Identity.derivative(123.0), 1.0);
        // sigma'(0) = 1/4
        assert!((Activation::Sigmoid.derivative(0.0) - 0.25).abs() < 1e-15);
    }
}
