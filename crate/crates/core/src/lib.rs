//! Controlled model debiasing for binary tabular classifiers.
//!
//! Given a pretrained probabilistic classifier `f`, this crate learns a
//! minimal, interpretable multiplicative update to its logits,
//! `g(x) = sigmoid(r(x) * logit(f(x)))`, where the ratio `r` is a sparse
//! linear concept bottleneck trained adversarially against a network that
//! tries to recover the sensitive attribute. Alongside the trainer it ships:
//!
//! - tabular loading/encoding/splitting ([`tabular`]),
//! - a tiny dense-network substrate with hand-derived gradients and a
//!   finite-difference checker ([`netcore`]),
//! - the pretrained logistic base model ([`basemodel`]),
//! - fairness/accuracy/change metrics ([`metrics`]),
//! - exact finite-distribution implementations and brute-force verifiers of
//!   the cost-sensitive Bayes-optimal classifier and of flip-budget fairness
//!   optima ([`theory`]),
//! - depth-limited decision trees and quartile segmentation used to judge
//!   how interpretable the prediction changes are ([`interp_eval`]),
//! - a synthetic biased dataset generator for self-contained runs ([`synth`]).

pub mod basemodel;
pub mod commod;
pub mod error;
pub mod interp_eval;
pub mod metrics;
pub mod netcore;
pub mod synth;
pub mod tabular;
pub mod theory;

pub use error::{Error, Result};
