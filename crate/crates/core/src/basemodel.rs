//! The pretrained "biased" classifier f: a logistic model trained for
//! accuracy only, exposing probabilities and clamped logits to the debiasing
//! stage. Any external model can stand in through a scores file, since only
//! probabilities are consumed downstream.

use crate::error::{Error, Result};
use crate::netcore::{sigmoid, Mat};
use crate::tabular::Dataset;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DEFAULT_CLAMP_EPS: f64 = 1e-6;

/// Logistic regression with probability clamping for finite logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub clamp_eps: f64,
}

/// Anything that can score a dataset with probabilities in (0,1).
pub trait Scorer {
    fn predict_proba_ds(&self, ds: &Dataset) -> Result<Vec<f64>>;
    fn clamp_eps(&self) -> f64 {
        DEFAULT_CLAMP_EPS
    }
}

impl LogisticModel {
    pub fn d(&self) -> usize {
        self.w.len()
    }

    /// sigma(Xw + b) per row.
    pub fn predict_proba(&self, x: &Mat) -> Result<Vec<f64>> {
        if x.cols() != self.w.len() {
            return Err(Error::Shape(format!(
                "model has {} weights but x has {} columns",
                self.w.len(),
                x.cols()
            )));
        }
        Ok((0..x.rows())
            .map(|i| {
                let z: f64 = x
                    .row(i)
                    .iter()
                    .zip(&self.w)
                    .map(|(xi, wi)| xi * wi)
                    .sum::<f64>()
                    + self.b;
                sigmoid(z)
            })
            .collect())
    }

    /// logit(clamp(f(x), eps, 1-eps)); always finite.
    pub fn logits(&self, x: &Mat) -> Result<Vec<f64>> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| clamped_logit(p, self.clamp_eps))
            .collect())
    }

    pub fn predict(&self, x: &Mat) -> Result<Vec<u8>> {
        Ok(self
            .predict_proba(x)?
            .into_iter()
            .map(|p| u8::from(p > 0.5))
            .collect())
    }
}

impl Scorer for LogisticModel {
    fn predict_proba_ds(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.predict_proba(&ds.x)
    }

    fn clamp_eps(&self) -> f64 {
        self.clamp_eps
    }
}

/// Clamp a probability away from {0,1} and take its log-odds.
pub fn clamped_logit(p: f64, eps: f64) -> f64 {
    let p = p.clamp(eps, 1.0 - eps);
    (p / (1.0 - p)).ln()
}

/// Train by full-batch gradient descent on mean binary cross-entropy.
/// Deterministic under `seed` (tiny uniform weight initialization).
pub fn train_logreg(train: &Dataset, epochs: usize, lr: f64, seed: u64) -> Result<LogisticModel> {
    if train.n() == 0 {
        return Err(Error::Degenerate("empty training set".into()));
    }
    let n = train.n();
    let d = train.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1e-2..1e-2)).collect();
    let mut b = 0.0f64;
    let mut last_finite: Option<(usize, f64)> = None;
    for epoch in 0..epochs {
        let mut grad_w = vec![0.0; d];
        let mut grad_b = 0.0;
        let mut loss = 0.0;
        for i in 0..n {
            let row = train.x.row(i);
            let z: f64 = row.iter().zip(&w).map(|(xi, wi)| xi * wi).sum::<f64>() + b;
            let p = sigmoid(z);
            let y = f64::from(train.y[i]);
            loss += crate::netcore::bce_from_logit(z, y);
            let err = p - y;
            for (gw, xi) in grad_w.iter_mut().zip(row) {
                *gw += err * xi;
            }
            grad_b += err;
        }
        loss /= n as f64;
        if !loss.is_finite() {
            let (last_epoch, last_loss) = last_finite.unwrap_or((0, f64::NAN));
            return Err(Error::Diverged {
                epoch,
                last_epoch,
                last_loss,
            });
        }
        last_finite = Some((epoch, loss));
        let inv_n = 1.0 / n as f64;
        for (wi, gw) in w.iter_mut().zip(&grad_w) {
            *wi -= lr * gw * inv_n;
        }
        b -= lr * grad_b * inv_n;
    }
    Ok(LogisticModel {
        w,
        b,
        clamp_eps: DEFAULT_CLAMP_EPS,
    })
}

/// Mean binary cross-entropy of the model on a dataset (for monitoring).
pub fn logreg_loss(model: &LogisticModel, ds: &Dataset) -> Result<f64> {
    let mut loss = 0.0;
    for i in 0..ds.n() {
        let z: f64 = ds
            .x
            .row(i)
            .iter()
            .zip(&model.w)
            .map(|(xi, wi)| xi * wi)
            .sum::<f64>()
            + model.b;
        loss += crate::netcore::bce_from_logit(z, f64::from(ds.y[i]));
    }
    Ok(loss / ds.n() as f64)
}

/// External probabilities keyed by original row index, enabling
/// model-agnostic use: split halves look up their rows through `row_ids`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalScores {
    pub probs: Vec<f64>,
    pub clamp_eps: f64,
}

impl ExternalScores {
    /// Load a CSV of `row_index,probability` pairs (header optional).
    /// `n_rows` is the size of the full dataset the file must cover.
    pub fn load_csv(path: &Path, n_rows: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut probs = vec![f64::NAN; n_rows];
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let first = parts.next().unwrap_or("").trim();
            let second = parts.next().unwrap_or("").trim();
            let Ok(idx) = first.parse::<usize>() else {
                if line_no == 0 {
                    continue; // header
                }
                return Err(Error::Csv(format!(
                    "scores file line {}: bad row index '{first}'",
                    line_no + 1
                )));
            };
            let p: f64 = second.parse().map_err(|_| {
                Error::Csv(format!(
                    "scores file line {}: bad probability '{second}'",
                    line_no + 1
                ))
            })?;
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Degenerate(format!(
                    "scores file line {}: probability {p} outside (0,1)",
                    line_no + 1
                )));
            }
            if idx >= n_rows {
                return Err(Error::Degenerate(format!(
                    "scores file line {}: row index {idx} out of range (n={n_rows})",
                    line_no + 1
                )));
            }
            probs[idx] = p;
        }
        if let Some(missing) = probs.iter().position(|p| p.is_nan()) {
            return Err(Error::Degenerate(format!(
                "scores file covers {} of {n_rows} rows (first missing: {missing})",
                probs.iter().filter(|p| !p.is_nan()).count()
            )));
        }
        Ok(ExternalScores {
            probs,
            clamp_eps: DEFAULT_CLAMP_EPS,
        })
    }
}

impl Scorer for ExternalScores {
    fn predict_proba_ds(&self, ds: &Dataset) -> Result<Vec<f64>> {
        ds.row_ids
            .iter()
            .map(|&i| {
                self.probs.get(i).copied().ok_or_else(|| {
                    Error::Degenerate(format!("scores file missing row {i}"))
                })
            })
            .collect()
    }

    fn clamp_eps(&self) -> f64 {
        self.clamp_eps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Dataset, DatasetMeta};

    fn dataset_from(x: Mat, y: Vec<u8>, s: Vec<u8>) -> Dataset {
        let d = x.cols();
        let n = x.rows();
        Dataset {
            x,
            y,
            s,
            feature_names: (0..d).map(|j| format!("f{j}")).collect(),
            standardization: vec![None; d],
            meta: DatasetMeta {
                positive_label: "1".into(),
                sensitive_positive: "1".into(),
                standardization_scope: "full".into(),
                warnings: vec![],
            },
            row_ids: (0..n).collect(),
        }
    }

    fn separable_toy(n: usize) -> Dataset {
        // y = 1[x1 > 0]; second feature is noise-free padding.
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let mut s = Vec::new();
        for i in 0..n {
            let x1 = if i % 2 == 0 { 1.0 + (i % 5) as f64 * 0.1 } else { -1.0 - (i % 7) as f64 * 0.1 };
            rows.push(vec![x1, 0.5]);
            y.push(u8::from(x1 > 0.0));
            s.push(u8::from(i % 3 == 0));
        }
        dataset_from(Mat::from_rows(rows).unwrap(), y, s)
    }

    #[test]
    fn separable_data_reaches_perfect_train_accuracy() {
        let ds = separable_toy(40);
        let model = train_logreg(&ds, 500, 1.0, 0).unwrap();
        let preds = model.predict(&ds.x).unwrap();
        let acc = preds
            .iter()
            .zip(&ds.y)
            .filter(|(p, y)| p == y)
            .count() as f64
            / ds.n() as f64;
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn zero_model_outputs_half() {
        let model = LogisticModel {
            w: vec![0.0, 0.0],
            b: 0.0,
            clamp_eps: DEFAULT_CLAMP_EPS,
        };
        let x = Mat::from_rows(vec![vec![3.0, -4.0], vec![0.1, 0.2]]).unwrap();
        assert_eq!(model.predict_proba(&x).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn saturated_bias_approaches_one() {
        let model = LogisticModel {
            w: vec![0.0],
            b: 50.0,
            clamp_eps: DEFAULT_CLAMP_EPS,
        };
        let x = Mat::from_rows(vec![vec![0.0]]).unwrap();
        let p = model.predict_proba(&x).unwrap()[0];
        assert!(p > 1.0 - 1e-12 && p <= 1.0);
    }

    #[test]
    fn probability_point_eight_from_log_four() {
        // x . w + b = ln 4 gives sigma(ln 4) = 4/5.
        let model = LogisticModel {
            w: vec![1.0],
            b: 0.0,
            clamp_eps: DEFAULT_CLAMP_EPS,
        };
        let x = Mat::from_rows(vec![vec![4.0f64.ln()]]).unwrap();
        let p = model.predict_proba(&x).unwrap()[0];
        assert!((p - 0.8).abs() < 1e-12);
    }

    #[test]
    fn logit_examples() {
        assert_eq!(clamped_logit(0.5, 1e-6), 0.0);
        assert!((clamped_logit(0.8, 1e-6) - 4.0f64.ln()).abs() < 1e-12);
        let l = clamped_logit(1.0, 1e-6);
        assert!(l.is_finite());
        assert!((l - 13.8155).abs() < 1e-3);
    }

    #[test]
    fn proba_logit_round_trip() {
        let model = LogisticModel {
            w: vec![0.7, -1.3],
            b: 0.2,
            clamp_eps: 1e-6,
        };
        let x = Mat::from_rows(vec![vec![0.3, 0.9], vec![-2.0, 1.0], vec![8.0, -9.0]]).unwrap();
        let probs = model.predict_proba(&x).unwrap();
        let logits = model.logits(&x).unwrap();
        for (p, l) in probs.iter().zip(&logits) {
            let clamped = p.clamp(1e-6, 1.0 - 1e-6);
            assert!((sigmoid(*l) - clamped).abs() < 1e-12);
        }
    }

    #[test]
    fn thresholded_prediction_matches_logit_sign() {
        let model = LogisticModel {
            w: vec![2.0],
            b: -0.5,
            clamp_eps: 1e-6,
        };
        let x = Mat::from_rows((0..20).map(|i| vec![i as f64 * 0.37 - 3.0]).collect()).unwrap();
        let probs = model.predict_proba(&x).unwrap();
        let logits = model.logits(&x).unwrap();
        for (p, l) in probs.iter().zip(&logits) {
            if (p - 0.5).abs() > 1e-12 {
                assert_eq!(*p > 0.5, *l > 0.0);
            }
        }
    }

    #[test]
    fn training_loss_is_non_increasing_at_small_lr() {
        let ds = separable_toy(30);
        let mut losses = Vec::new();
        for epochs in [1usize, 5, 20, 100] {
            let m = train_logreg(&ds, epochs, 1e-3, 7).unwrap();
            losses.push(logreg_loss(&m, &ds).unwrap());
        }
        for pair in losses.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn external_scores_align_through_row_ids() {
        let mut ds = separable_toy(10);
        ds.row_ids = vec![5, 3, 8, 0, 1, 2, 4, 6, 7, 9];
        let scores = ExternalScores {
            probs: (0..10).map(|i| 0.05 + i as f64 * 0.09).collect(),
            clamp_eps: DEFAULT_CLAMP_EPS,
        };
        let got = scores.predict_proba_ds(&ds).unwrap();
        assert!((got[0] - (0.05 + 5.0 * 0.09)).abs() < 1e-15);
        assert!((got[3] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn scores_file_round_trip_and_validation() {
        let dir = std::env::temp_dir();
        let path = dir.join(format!("commod-scores-{}.csv", std::process::id()));
        std::fs::write(&path, "row_index,probability\n0,0.2\n2,0.9\n1,0.5\n").unwrap();
        let scores = ExternalScores::load_csv(&path, 3).unwrap();
        assert_eq!(scores.probs, vec![0.2, 0.5, 0.9]);
        std::fs::write(&path, "0,0.2\n1,1.5\n2,0.9\n").unwrap();
        assert!(ExternalScores::load_csv(&path, 3).is_err());
        std::fs::write(&path, "0,0.2\n2,0.9\n").unwrap();
        assert!(ExternalScores::load_csv(&path, 3).is_err());
        let _ = std::fs::remove_file(&path);
    }
}
