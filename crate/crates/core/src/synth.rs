//! Built-in biased synthetic dataset: two Gaussian clusters per class with a
//! sensitive-correlated shift, plus pure-noise padding features. The label
//! is independent of the sensitive attribute, so the bias a classifier picks
//! up comes entirely from the feature shift; debiasing it costs little
//! accuracy, which makes the generator a good self-contained test bed.

use crate::error::Result;
use crate::netcore::Mat;
use crate::tabular::{Dataset, DatasetMeta};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub seed: u64,
    /// Distance of the class cluster centers from the origin.
    #[serde(default = "default_class_sep")]
    pub class_sep: f64,
    /// Magnitude of the sensitive-attribute shift applied to the two
    /// informative features.
    #[serde(default = "default_shift")]
    pub sensitive_shift: f64,
    /// Fraction of rows with s = 1 (the minority group).
    #[serde(default = "default_minority")]
    pub minority_fraction: f64,
    /// Pure-noise features appended after the two informative ones.
    #[serde(default = "default_noise_features")]
    pub noise_features: usize,
    /// Label noise: probability of flipping y after sampling the cluster.
    #[serde(default = "default_label_noise")]
    pub label_noise: f64,
    /// Base-rate gap: P(y=1|s=0) - P(y=1|s=1), the historical-bias component.
    #[serde(default = "default_label_gap")]
    pub label_gap: f64,
}

fn default_class_sep() -> f64 {
    0.55
}
fn default_shift() -> f64 {
    1.2
}
fn default_minority() -> f64 {
    0.4
}
fn default_noise_features() -> usize {
    4
}
fn default_label_noise() -> f64 {
    0.03
}
fn default_label_gap() -> f64 {
    0.12
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n: 4000,
            seed: 0,
            class_sep: default_class_sep(),
            sensitive_shift: default_shift(),
            minority_fraction: default_minority(),
            noise_features: default_noise_features(),
            label_noise: default_label_noise(),
            label_gap: default_label_gap(),
        }
    }
}

/// Sample the dataset. Per row: s ~ Bernoulli(minority_fraction) picks the
/// group and y ~ Bernoulli(0.5 +- label_gap/2) its (optionally group-skewed)
/// label, which picks the cluster. The first feature mixes a weak class
/// signal with the sensitive shift (group 1 pushed toward the unfavorable
/// side), so an accuracy-only classifier leans on it and inherits the bias,
/// while dropping it costs little; the second feature carries the full clean
/// class separation, and the remaining features are standard normal noise.
/// Columns are standardized like any loaded dataset.
pub fn generate(cfg: &SyntheticConfig) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let n = cfg.n;
    let d = 2 + cfg.noise_features;
    let mut x = Mat::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for i in 0..n {
        let si = u8::from(rng.gen_bool(cfg.minority_fraction));
        let p_pos = if si == 1 {
            0.5 - cfg.label_gap / 2.0
        } else {
            0.5 + cfg.label_gap / 2.0
        };
        let yi = u8::from(rng.gen_bool(p_pos));
        let class_sign = if yi == 1 { 1.0 } else { -1.0 };
        // Group s=1 is shifted toward the negative (unfavorable) side.
        let shift_sign = if si == 1 { -1.0 } else { 1.0 };
        let mut yi_obs = yi;
        if cfg.label_noise > 0.0 && rng.gen_bool(cfg.label_noise) {
            yi_obs = 1 - yi_obs;
        }
        x.set(
            i,
            0,
            class_sign * cfg.class_sep * 0.3
                + shift_sign * cfg.sensitive_shift
                + normal.sample(&mut rng),
        );
        x.set(i, 1, class_sign * cfg.class_sep + normal.sample(&mut rng));
        for j in 2..d {
            x.set(i, j, normal.sample(&mut rng));
        }
        y.push(yi_obs);
        s.push(si);
    }

    // Standardize every column on the full sample, like preprocess does.
    let mut standardization = Vec::with_capacity(d);
    for j in 0..d {
        let mean = (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (x.get(i, j) - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        for i in 0..n {
            let v = (x.get(i, j) - mean) / std;
            x.set(i, j, v);
        }
        standardization.push(Some((mean, std)));
    }

    let mut feature_names: Vec<String> = vec!["x0".into(), "x1".into()];
    for j in 0..cfg.noise_features {
        feature_names.push(format!("noise{j}"));
    }
    let ds = Dataset {
        x,
        y,
        s,
        feature_names,
        standardization,
        meta: DatasetMeta {
            positive_label: "1".into(),
            sensitive_positive: "1".into(),
            standardization_scope: "full".into(),
            warnings: vec![],
        },
        row_ids: (0..n).collect(),
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basemodel::train_logreg;
    use crate::metrics;

    #[test]
    fn generation_is_deterministic_and_valid() {
        let cfg = SyntheticConfig {
            n: 500,
            seed: 9,
            ..SyntheticConfig::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        a.validate().unwrap();
        assert_eq!(a.d(), 6);
    }

    #[test]
    fn base_model_on_synthetic_data_is_accurate_but_biased() {
        let ds = generate(&SyntheticConfig {
            n: 3000,
            seed: 0,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let model = train_logreg(&ds, 300, 0.5, 0).unwrap();
        let preds = model.predict(&ds.x).unwrap();
        let acc = metrics::accuracy(&preds, &ds.y).unwrap();
        let pr = metrics::p_rule(&preds, &ds.s).unwrap();
        assert!(acc > 0.75, "accuracy {acc}");
        assert!(pr < 0.65, "p-rule {pr} not biased enough");
    }
}
