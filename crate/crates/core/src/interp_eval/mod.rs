//! Interpretability-of-changes evaluation: depth-limited decision trees on
//! change labels, quartile segmentation of (fairness, accuracy) space, and
//! the post-hoc-vs-self-explainable comparison harness.

mod segment;
mod tree;

pub use segment::{FairnessOrientation, SegmentGrid};
pub use tree::{fit_regression_tree, fit_tree, DecisionTree};

use crate::error::{Error, Result};
use crate::netcore::{sigmoid, Mat};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// F1 of the positive (changed) class. No positive predictions while
/// positives exist gives 0; no positives anywhere on either side gives 1.
pub fn tree_f1(tree: &DecisionTree, x: &Mat, labels: &[u8]) -> Result<f64> {
    let preds = tree.predict_class(x)?;
    Ok(f1_positive(&preds, labels))
}

pub(crate) fn f1_positive(preds: &[u8], labels: &[u8]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &l) in preds.iter().zip(labels) {
        match (p, l) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        if fp == 0 && fn_ == 0 {
            return 1.0;
        }
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    2.0 * precision * recall / (precision + recall)
}

/// One model's change labels for the locality comparison.
#[derive(Debug, Clone)]
pub struct LocalityInput {
    pub name: String,
    pub change_labels: Vec<u8>,
}

impl LocalityInput {
    pub fn from_predictions(name: &str, yhat_f: &[u8], yhat_g: &[u8]) -> Result<Self> {
        if yhat_f.len() != yhat_g.len() {
            return Err(Error::Shape("locality inputs disagree on n".into()));
        }
        Ok(LocalityInput {
            name: name.to_string(),
            change_labels: yhat_f
                .iter()
                .zip(yhat_g)
                .map(|(a, b)| u8::from(a != b))
                .collect(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalityRow {
    pub model: String,
    pub depth: usize,
    pub mean_f1: f64,
    pub std_f1: f64,
    /// Set when the model changed nothing (all-negative labels).
    pub degenerate: bool,
}

/// For each model and depth, fit trees on the change labels over `seeds`
/// bootstrap resamples and report the F1 mean and standard deviation,
/// evaluated on the original rows.
pub fn locality_curve(
    models: &[LocalityInput],
    x: &Mat,
    depths: &[usize],
    seeds: u64,
) -> Result<Vec<LocalityRow>> {
    if seeds == 0 {
        return Err(Error::Config("locality_curve needs at least one seed".into()));
    }
    let n = x.rows();
    let mut rows = Vec::new();
    for (m_idx, model) in models.iter().enumerate() {
        if model.change_labels.len() != n {
            return Err(Error::Shape(format!(
                "model '{}' labels disagree with x on n",
                model.name
            )));
        }
        let degenerate = model.change_labels.iter().all(|&l| l == 0);
        for &depth in depths {
            let mut scores = Vec::with_capacity(seeds as usize);
            for seed in 0..seeds {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed ^ (m_idx as u64) << 32 ^ (depth as u64) << 48);
                let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let boot_x = x.select_rows(&idx);
                let boot_labels: Vec<u8> = idx.iter().map(|&i| model.change_labels[i]).collect();
                let tree = fit_tree(&boot_x, &boot_labels, depth)?;
                scores.push(tree_f1(&tree, x, &model.change_labels)?);
            }
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            let var = scores.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / scores.len() as f64;
            rows.push(LocalityRow {
                model: model.name.clone(),
                depth,
                mean_f1: mean,
                std_f1: var.sqrt(),
                degenerate,
            });
        }
    }
    Ok(rows)
}

/// How a scalar per-row signal rebuilds updated scores from the base logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalKind {
    /// Signal is r(x) - 1; rebuilt score is sigmoid((1 + s) * logit).
    RatioDeviation,
    /// Signal is an additive logit correction; rebuilt score is
    /// sigmoid(logit + s).
    LogitAdditive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosthocRow {
    /// None means an uncapped tree.
    pub depth: Option<usize>,
    pub p_rule: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosthocReport {
    pub rows: Vec<PosthocRow>,
    /// Fairness of the self-explainable model itself, depth-independent.
    pub self_p_rule: f64,
}

/// Approximate the update signal with regression trees of bounded depth and
/// measure how much fairness survives the approximation.
pub fn posthoc_compare(
    x: &Mat,
    f_logit: &[f64],
    s: &[u8],
    signal: &[f64],
    kind: SignalKind,
    depths: &[Option<usize>],
    self_p_rule: f64,
) -> Result<PosthocReport> {
    let n = x.rows();
    if f_logit.len() != n || s.len() != n || signal.len() != n {
        return Err(Error::Shape("posthoc inputs disagree on n".into()));
    }
    let mut rows = Vec::with_capacity(depths.len());
    for &depth in depths {
        let tree = fit_regression_tree(x, signal, depth)?;
        let approx = tree.predict(x)?;
        let yhat: Vec<u8> = approx
            .iter()
            .zip(f_logit)
            .map(|(&sig, &l)| {
                let u = match kind {
                    SignalKind::RatioDeviation => (1.0 + sig) * l,
                    SignalKind::LogitAdditive => l + sig,
                };
                u8::from(sigmoid(u) > 0.5)
            })
            .collect();
        rows.push(PosthocRow {
            depth,
            p_rule: crate::metrics::p_rule(&yhat, s)?,
        });
    }
    Ok(PosthocReport { rows, self_p_rule })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_points(n_side: usize) -> Mat {
        let mut rows = Vec::new();
        for i in 0..n_side {
            for j in 0..n_side {
                rows.push(vec![i as f64 / n_side as f64, j as f64 / n_side as f64]);
            }
        }
        Mat::from_rows(rows).unwrap()
    }

    #[test]
    fn f1_edge_cases() {
        assert_eq!(f1_positive(&[0, 0], &[0, 0]), 1.0);
        assert_eq!(f1_positive(&[0, 0], &[1, 0]), 0.0);
        assert_eq!(f1_positive(&[1, 1], &[1, 1]), 1.0);
        // TP=1, FP=1, FN=1 -> F1 = 0.5
        assert_eq!(f1_positive(&[1, 1, 0], &[1, 0, 1]), 0.5);
    }

    #[test]
    fn concentrated_changes_are_easier_to_localize_than_scattered() {
        let x = grid_points(20); // 400 points
        let n = x.rows();
        // Concentrated: a corner box. Scattered: same count, pseudo-random.
        let concentrated: Vec<u8> = (0..n)
            .map(|i| u8::from(x.get(i, 0) < 0.35 && x.get(i, 1) < 0.35))
            .collect();
        let count = concentrated.iter().filter(|&&v| v == 1).count();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut scattered = vec![0u8; n];
        let mut placed = 0;
        while placed < count {
            let i = rng.gen_range(0..n);
            if scattered[i] == 0 {
                scattered[i] = 1;
                placed += 1;
            }
        }
        let models = vec![
            LocalityInput {
                name: "concentrated".into(),
                change_labels: concentrated,
            },
            LocalityInput {
                name: "scattered".into(),
                change_labels: scattered,
            },
        ];
        let rows = locality_curve(&models, &x, &[3], 5).unwrap();
        let conc = rows.iter().find(|r| r.model == "concentrated").unwrap();
        let scat = rows.iter().find(|r| r.model == "scattered").unwrap();
        assert!(
            conc.mean_f1 > scat.mean_f1,
            "concentrated {} vs scattered {}",
            conc.mean_f1,
            scat.mean_f1
        );
    }

    #[test]
    fn zero_change_model_is_degenerate() {
        let x = grid_points(5);
        let models = vec![LocalityInput {
            name: "noop".into(),
            change_labels: vec![0; x.rows()],
        }];
        let rows = locality_curve(&models, &x, &[1, 2], 3).unwrap();
        assert!(rows.iter().all(|r| r.degenerate));
    }

    #[test]
    fn unambiguous_splits_have_zero_std() {
        // Labels = 1[x0 > 0.5]: perfectly separable at depth 1 under any
        // bootstrap that keeps both classes.
        let x = grid_points(10);
        let labels: Vec<u8> = (0..x.rows()).map(|i| u8::from(x.get(i, 0) > 0.5)).collect();
        let models = vec![LocalityInput {
            name: "separable".into(),
            change_labels: labels,
        }];
        let rows = locality_curve(&models, &x, &[1, 2, 3, 4, 5, 6], 5).unwrap();
        assert_eq!(rows.len(), 6);
        for r in &rows {
            assert_eq!(r.std_f1, 0.0, "depth {}", r.depth);
            assert_eq!(r.mean_f1, 1.0);
        }
    }

    #[test]
    fn posthoc_uncapped_tree_recovers_the_signal() {
        let x = grid_points(8);
        let n = x.rows();
        // Ratio deviation signal: negative (flip) in one region.
        let signal: Vec<f64> = (0..n)
            .map(|i| if x.get(i, 0) > 0.6 && x.get(i, 1) > 0.6 { -2.0 } else { 0.0 })
            .collect();
        let f_logit: Vec<f64> = (0..n).map(|i| if x.get(i, 1) > 0.4 { 1.2 } else { -0.8 }).collect();
        let s: Vec<u8> = (0..n).map(|i| u8::from(x.get(i, 0) > 0.5)).collect();
        // Self-explainable arm: exact signal.
        let exact_yhat: Vec<u8> = signal
            .iter()
            .zip(&f_logit)
            .map(|(&sig, &l)| u8::from(sigmoid((1.0 + sig) * l) > 0.5))
            .collect();
        let self_p_rule = crate::metrics::p_rule(&exact_yhat, &s).unwrap();
        let report = posthoc_compare(
            &x,
            &f_logit,
            &s,
            &signal,
            SignalKind::RatioDeviation,
            &[Some(1), None],
            self_p_rule,
        )
        .unwrap();
        let uncapped = report.rows.iter().find(|r| r.depth.is_none()).unwrap();
        assert!((uncapped.p_rule - self_p_rule).abs() < 1e-12);
    }

    #[test]
    fn posthoc_shallow_tree_degrades_a_multi_feature_signal() {
        // Signal needs both features; a depth-1 tree cannot represent it, so
        // fairness falls back toward the base model's.
        let x = grid_points(12);
        let n = x.rows();
        let s: Vec<u8> = (0..n).map(|i| u8::from(x.get(i, 0) > 0.5)).collect();
        // The base model favors group s=1 but still gives s=0 a few
        // positives, so P-Rule ratios stay meaningful.
        let f_logit: Vec<f64> = (0..n)
            .map(|i| {
                if x.get(i, 0) > 0.5 || x.get(i, 1) > 0.8 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        // Flip exactly the s=1 rows that sit inside a two-feature box.
        let signal: Vec<f64> = (0..n)
            .map(|i| {
                if x.get(i, 0) > 0.5 && x.get(i, 1) < 0.75 {
                    -2.0
                } else {
                    0.0
                }
            })
            .collect();
        let exact_yhat: Vec<u8> = signal
            .iter()
            .zip(&f_logit)
            .map(|(&sig, &l)| u8::from(sigmoid((1.0 + sig) * l) > 0.5))
            .collect();
        let self_p_rule = crate::metrics::p_rule(&exact_yhat, &s).unwrap();
        let report = posthoc_compare(
            &x,
            &f_logit,
            &s,
            &signal,
            SignalKind::RatioDeviation,
            &[Some(1), None],
            self_p_rule,
        )
        .unwrap();
        let shallow = report.rows.iter().find(|r| r.depth == Some(1)).unwrap();
        let uncapped = report.rows.iter().find(|r| r.depth.is_none()).unwrap();
        assert!(shallow.p_rule < uncapped.p_rule);
        assert!((uncapped.p_rule - self_p_rule).abs() < 1e-12);
    }
}
