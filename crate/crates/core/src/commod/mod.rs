//! The concept-bottleneck ratio network and its adversarial trainer.
//!
//! The debiased score is `g(x) = sigmoid(r(x) * f_logit(x))`: a purely linear
//! ratio network rescales the base model's logit, so a negative ratio is
//! exactly a flipped label. Training pits the ratio against an adversary
//! that tries to recover the sensitive attribute from the updated logit,
//! while penalties keep the update small (ratio near 1), sparse, and built
//! from diverse concepts.

mod train;

pub use train::{train_advdebias_baseline, train_commod, TrainedBaseline, TrainedCommod};

use crate::error::{Error, Result};
use crate::netcore::{bce_from_logit, sigmoid, Activation, DenseNet, Mat};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Linear bottleneck `W` (k concepts from d features) and linear head `v`
/// producing the scalar ratio `r(x) = v . (W x) + v_bias`. No activation
/// functions anywhere, so every weight reads as a direct contribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptRatioNet {
    pub w: Mat,
    pub v: Vec<f64>,
    pub v_bias: f64,
    /// When set the input is augmented with the base logit as an extra column.
    pub include_flogit_input: bool,
}

impl ConceptRatioNet {
    pub fn k(&self) -> usize {
        self.w.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    /// Warm start at the exact identity update: random bottleneck, zero
    /// head, unit bias. With v = 0 the ratio is exactly 1 whatever W holds,
    /// so training begins at g = f with zero changes while the concepts
    /// already carry usable signal.
    pub fn identity_init<R: Rng>(k: usize, d_in: usize, rng: &mut R) -> Result<Self> {
        if k == 0 || d_in == 0 {
            return Err(Error::Config("concept net needs k >= 1 and d >= 1".into()));
        }
        let limit = (6.0 / (k + d_in) as f64).sqrt();
        let data: Vec<f64> = (0..k * d_in).map(|_| rng.gen_range(-limit..limit)).collect();
        Ok(ConceptRatioNet {
            w: Mat::from_vec(k, d_in, data)?,
            v: vec![0.0; k],
            v_bias: 1.0,
            include_flogit_input: false,
        })
    }

    /// Concepts for one (possibly augmented) input row.
    pub fn concepts(&self, x_row: &[f64]) -> Vec<f64> {
        (0..self.k())
            .map(|a| {
                self.w
                    .row(a)
                    .iter()
                    .zip(x_row)
                    .map(|(w, x)| w * x)
                    .sum::<f64>()
            })
            .collect()
    }

    /// r(x) for one row.
    pub fn ratio_row(&self, x_row: &[f64]) -> Result<f64> {
        if x_row.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "ratio net expects {} inputs, got {}",
                self.input_dim(),
                x_row.len()
            )));
        }
        Ok(self
            .concepts(x_row)
            .iter()
            .zip(&self.v)
            .map(|(c, v)| c * v)
            .sum::<f64>()
            + self.v_bias)
    }

    /// Batch ratios against a feature matrix, augmenting with the logit
    /// column when configured.
    pub fn ratios(&self, x: &Mat, f_logit: &[f64]) -> Result<Vec<f64>> {
        let expect = x.cols() + usize::from(self.include_flogit_input);
        if expect != self.input_dim() {
            return Err(Error::Shape(format!(
                "ratio net expects {} inputs, got {} features{}",
                self.input_dim(),
                x.cols(),
                if self.include_flogit_input { " plus f_logit" } else { "" }
            )));
        }
        if self.include_flogit_input && f_logit.len() != x.rows() {
            return Err(Error::Shape("f_logit length mismatch".into()));
        }
        let mut out = Vec::with_capacity(x.rows());
        let mut buf = Vec::with_capacity(self.input_dim());
        for i in 0..x.rows() {
            buf.clear();
            buf.extend_from_slice(x.row(i));
            if self.include_flogit_input {
                buf.push(f_logit[i]);
            }
            out.push(self.ratio_row(&buf)?);
        }
        Ok(out)
    }

    /// Flatten as [W row-major, v, v_bias].
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(self.w.data());
        out.extend_from_slice(&self.v);
        out.push(self.v_bias);
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let nw = self.w.rows() * self.w.cols();
        let nv = self.v.len();
        self.w.data_mut().copy_from_slice(&flat[..nw]);
        self.v.copy_from_slice(&flat[nw..nw + nv]);
        self.v_bias = flat[nw + nv];
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.w.rows() * self.w.cols() + self.v.len() + 1
    }
}

/// The debiased probability for one instance.
pub fn debiased_score(r_val: f64, f_logit: f64) -> f64 {
    sigmoid(r_val * f_logit)
}

/// Fairness criterion the adversary enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FairnessMode {
    /// Demographic parity: adversary sees the updated logit.
    Dp,
    /// Equalized odds: adversary sees the updated logit and the true label.
    Eo,
}

/// Adversary reconstructing the sensitive attribute from the updated logit.
/// One hidden layer of 32 relu units; the output layer emits a logit and the
/// sigmoid lives in the loss for stability, so `predict_proba` is still a
/// probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adversary {
    pub net: DenseNet,
    pub mode: FairnessMode,
}

pub const ADVERSARY_HIDDEN: usize = 32;

impl Adversary {
    pub fn new<R: Rng>(mode: FairnessMode, rng: &mut R) -> Result<Self> {
        let input_dim = match mode {
            FairnessMode::Dp => 1,
            FairnessMode::Eo => 2,
        };
        Ok(Adversary {
            net: DenseNet::new(
                &[input_dim, ADVERSARY_HIDDEN, 1],
                &[Activation::Relu, Activation::Identity],
                rng,
            )?,
            mode,
        })
    }

    /// Assemble the adversary input matrix from updated logits and labels.
    pub fn input_matrix(&self, updated_logit: &[f64], y: &[u8]) -> Result<Mat> {
        match self.mode {
            FairnessMode::Dp => Mat::from_vec(updated_logit.len(), 1, updated_logit.to_vec()),
            FairnessMode::Eo => {
                if y.len() != updated_logit.len() {
                    return Err(Error::Shape("labels missing for EO adversary".into()));
                }
                let mut data = Vec::with_capacity(updated_logit.len() * 2);
                for (u, yi) in updated_logit.iter().zip(y) {
                    data.push(*u);
                    data.push(f64::from(*yi));
                }
                Mat::from_vec(updated_logit.len(), 2, data)
            }
        }
    }

    pub fn predict_proba(&self, updated_logit: &[f64], y: &[u8]) -> Result<Vec<f64>> {
        let input = self.input_matrix(updated_logit, y)?;
        let (out, _) = self.net.forward(&input)?;
        Ok(out.data().iter().map(|&z| sigmoid(z)).collect())
    }
}

fn default_k() -> usize {
    2
}
fn default_epochs() -> usize {
    150
}
fn default_batch_size() -> usize {
    128
}
fn default_adv_steps() -> usize {
    1
}
fn default_warmup() -> usize {
    5
}
fn default_lr() -> f64 {
    1e-2
}

/// Ratio architectures. Only the linear bottleneck is implemented; the enum
/// is the config hook for nonlinear variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RatioArchitecture {
    #[default]
    LinearBottleneck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommodConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    pub lambda_fair: f64,
    pub lambda_ratio: f64,
    #[serde(default)]
    pub lambda_sparsity: f64,
    #[serde(default)]
    pub lambda_diversity: f64,
    pub fairness_mode: FairnessMode,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_adv_steps")]
    pub adv_steps_per_gen_step: usize,
    #[serde(default = "default_warmup")]
    pub adv_warmup_epochs: usize,
    #[serde(default = "default_lr")]
    pub lr_gen: f64,
    #[serde(default = "default_lr")]
    pub lr_adv: f64,
    pub seed: u64,
    #[serde(default)]
    pub include_flogit_input: bool,
    /// Audit switch: score the diversity penalty with the literal cosine
    /// distance instead of |cosine similarity|.
    #[serde(default)]
    pub literal_cosine_distance: bool,
    /// Optional per-instance weights for the ratio penalty (diagonal M hook);
    /// indexed by position in the training set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub ratio_architecture: RatioArchitecture,
}

impl Default for CommodConfig {
    fn default() -> Self {
        CommodConfig {
            k: default_k(),
            lambda_fair: 1.0,
            lambda_ratio: 0.05,
            lambda_sparsity: 0.0,
            lambda_diversity: 0.0,
            fairness_mode: FairnessMode::Dp,
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            adv_steps_per_gen_step: default_adv_steps(),
            adv_warmup_epochs: default_warmup(),
            lr_gen: default_lr(),
            lr_adv: default_lr(),
            seed: 0,
            include_flogit_input: false,
            literal_cosine_distance: false,
            ratio_weights: None,
            ratio_architecture: RatioArchitecture::LinearBottleneck,
        }
    }
}

impl CommodConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_fair", self.lambda_fair),
            ("lambda_ratio", self.lambda_ratio),
            ("lambda_sparsity", self.lambda_sparsity),
            ("lambda_diversity", self.lambda_diversity),
        ] {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.adv_steps_per_gen_step == 0 {
            return Err(Error::Config("adv_steps_per_gen_step must be at least 1".into()));
        }
        if let Some(w) = &self.ratio_weights {
            if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::Config("ratio_weights must be nonnegative and finite".into()));
            }
        }
        Ok(())
    }
}

/// All terms of the training objective for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub l_y: f64,
    pub l_s: f64,
    pub l_ratio: f64,
    pub l_sparsity: f64,
    pub l_diversity: f64,
    pub total: f64,
}

/// Mean BCE of the debiased scores against labels plus the penalties;
/// `total = L_Y - lambda_fair L_S + lambda_ratio L_ratio
///          + lambda_sparsity L_sparsity + lambda_diversity L_diversity`.
pub fn loss_components(
    x: &Mat,
    y: &[u8],
    s: &[u8],
    f_logit: &[f64],
    net: &ConceptRatioNet,
    adv: &Adversary,
    cfg: &CommodConfig,
    instance_weights: Option<&[f64]>,
) -> Result<LossComponents> {
    let n = x.rows();
    if n == 0 {
        return Err(Error::Degenerate("empty batch".into()));
    }
    if y.len() != n || s.len() != n || f_logit.len() != n {
        return Err(Error::Shape("loss inputs disagree on n".into()));
    }
    let r = net.ratios(x, f_logit)?;
    let u: Vec<f64> = r.iter().zip(f_logit).map(|(ri, li)| ri * li).collect();

    let l_y = u
        .iter()
        .zip(y)
        .map(|(ui, yi)| bce_from_logit(*ui, f64::from(*yi)))
        .sum::<f64>()
        / n as f64;

    let adv_in = adv.input_matrix(&u, y)?;
    let (adv_out, _) = adv.net.forward(&adv_in)?;
    let l_s = adv_out
        .data()
        .iter()
        .zip(s)
        .map(|(zi, si)| bce_from_logit(*zi, f64::from(*si)))
        .sum::<f64>()
        / n as f64;

    let l_ratio = r
        .iter()
        .enumerate()
        .map(|(i, ri)| {
            let w = instance_weights.map_or(1.0, |w| w[i]);
            w * (ri - 1.0) * (ri - 1.0)
        })
        .sum::<f64>()
        / n as f64;

    let l_sparsity =
        net.w.data().iter().map(|v| v.abs()).sum::<f64>() / (net.k() * net.input_dim()) as f64;

    let l_diversity = diversity_penalty(&net.w, cfg.literal_cosine_distance);

    let total = l_y - cfg.lambda_fair * l_s
        + cfg.lambda_ratio * l_ratio
        + cfg.lambda_sparsity * l_sparsity
        + cfg.lambda_diversity * l_diversity;
    Ok(LossComponents {
        l_y,
        l_s,
        l_ratio,
        l_sparsity,
        l_diversity,
        total,
    })
}

/// Sum over unordered concept pairs of |cosine similarity| (default) or of
/// the literal cosine distance 1 - cos (audit mode). Zero-norm rows
/// contribute nothing.
pub fn diversity_penalty(w: &Mat, literal_cosine_distance: bool) -> f64 {
    let k = w.rows();
    let norms: Vec<f64> = (0..k)
        .map(|a| w.row(a).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut total = 0.0;
    for a in 0..k {
        for b in a + 1..k {
            if norms[a] < 1e-12 || norms[b] < 1e-12 {
                log::warn!("zero-norm concept row in diversity penalty; pair ({a},{b}) skipped");
                continue;
            }
            let dot: f64 = w.row(a).iter().zip(w.row(b)).map(|(x, y)| x * y).sum();
            let cos = dot / (norms[a] * norms[b]);
            total += if literal_cosine_distance { 1.0 - cos } else { cos.abs() };
        }
    }
    total
}

/// Reject-option post-processing baseline: inside the critical band
/// |score - 0.5| < theta the deprived group (s=1) gets 1 and the favored
/// group gets 0; outside the band the threshold rule stands.
pub fn roc_postprocess(scores: &[f64], s: &[u8], theta: f64) -> Result<Vec<u8>> {
    if scores.len() != s.len() {
        return Err(Error::Shape("roc inputs disagree on n".into()));
    }
    if !(0.0..0.5).contains(&theta) {
        return Err(Error::Config(format!("theta must be in [0, 0.5), got {theta}")));
    }
    if scores.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(Error::Degenerate("scores must lie in (0,1)".into()));
    }
    Ok(scores
        .iter()
        .zip(s)
        .map(|(&p, &si)| {
            if (p - 0.5).abs() < theta {
                si
            } else {
                u8::from(p > 0.5)
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConceptEntry {
    pub index: usize,
    pub head_weight: f64,
    /// "positive" when the concept pushes toward changes, "negative" otherwise.
    pub direction: String,
    /// (feature name, bottleneck weight), sorted by |weight| descending,
    /// thresholded at eps.
    pub features: Vec<(String, f64)>,
    pub empty: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConceptReport {
    pub eps: f64,
    pub concepts: Vec<ConceptEntry>,
}

pub const EXPLAIN_EPS: f64 = 0.01;

/// Human-readable summary of a trained ratio net: per concept, the signed
/// head weight and the features it actually uses.
pub fn explain(net: &ConceptRatioNet, feature_names: &[String], eps: f64) -> Result<ConceptReport> {
    let mut names: Vec<String> = feature_names.to_vec();
    if net.include_flogit_input {
        names.push("f_logit".to_string());
    }
    if names.len() != net.input_dim() {
        return Err(Error::Shape(format!(
            "explain got {} feature names for input width {}",
            names.len(),
            net.input_dim()
        )));
    }
    let mut concepts = Vec::with_capacity(net.k());
    for a in 0..net.k() {
        let mut features: Vec<(String, f64)> = net
            .w
            .row(a)
            .iter()
            .enumerate()
            .filter(|(_, w)| w.abs() > eps)
            .map(|(j, w)| (names[j].clone(), *w))
            .collect();
        features.sort_by(|x, y| y.1.abs().total_cmp(&x.1.abs()));
        let empty = features.is_empty();
        if empty {
            log::warn!("concept {a} has no weights above eps={eps}");
        }
        let head = net.v[a];
        concepts.push(ConceptEntry {
            index: a,
            head_weight: head,
            direction: if head >= 0.0 { "positive" } else { "negative" }.to_string(),
            features,
            empty,
        });
    }
    Ok(ConceptReport { eps, concepts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant_one_net(d: usize) -> ConceptRatioNet {
        ConceptRatioNet {
            w: Mat::zeros(2, d),
            v: vec![0.0, 0.0],
            v_bias: 1.0,
            include_flogit_input: false,
        }
    }

    #[test]
    fn constant_head_gives_constant_ratio() {
        let net = constant_one_net(3);
        assert_eq!(net.ratio_row(&[5.0, -2.0, 0.3]).unwrap(), 1.0);
        assert_eq!(net.ratio_row(&[0.0, 0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn coordinate_projection_ratio() {
        // W = I (k = d), v = e1, bias 0: r(x) = x[0].
        let mut w = Mat::zeros(2, 2);
        w.set(0, 0, 1.0);
        w.set(1, 1, 1.0);
        let net = ConceptRatioNet {
            w,
            v: vec![1.0, 0.0],
            v_bias: 0.0,
            include_flogit_input: false,
        };
        assert_eq!(net.ratio_row(&[3.0, -2.0]).unwrap(), 3.0);
    }

    #[test]
    fn ratio_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = ConceptRatioNet::identity_init(3, 4, &mut rng).unwrap();
        net.v = vec![0.4, -1.1, 0.9];
        net.v_bias = 0.7;
        let x1 = [0.3, -0.2, 1.5, 0.9];
        let x2 = [-1.0, 0.4, 0.2, -0.6];
        let (alpha, beta) = (0.6, -1.3);
        let combo: Vec<f64> = x1
            .iter()
            .zip(&x2)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let lhs = net.ratio_row(&combo).unwrap();
        let rhs = alpha * net.ratio_row(&x1).unwrap()
            + beta * net.ratio_row(&x2).unwrap()
            + (1.0 - alpha - beta) * net.v_bias;
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn debiased_score_cases() {
        // r = 1 reproduces the base probability.
        let logit = 4.0f64.ln(); // f = 0.8
        assert!((debiased_score(1.0, logit) - 0.8).abs() < 1e-12);
        // r = 0 collapses to 0.5.
        assert_eq!(debiased_score(0.0, 17.0), 0.5);
        // r = -1 flips through sigmoid antisymmetry.
        assert!((debiased_score(-1.0, logit) - 0.2).abs() < 1e-12);
    }

    fn tiny_setup() -> (Mat, Vec<u8>, Vec<u8>, Vec<f64>, Adversary, CommodConfig) {
        let x = Mat::from_rows(vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.5],
            vec![0.5, -0.5],
        ])
        .unwrap();
        let y = vec![1, 0, 0, 1];
        let s = vec![0, 1, 0, 1];
        let f_logit = vec![0.8, -0.3, -1.2, 0.4];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let adv = Adversary::new(FairnessMode::Dp, &mut rng).unwrap();
        let cfg = CommodConfig {
            lambda_fair: 0.5,
            lambda_ratio: 0.3,
            lambda_sparsity: 0.1,
            lambda_diversity: 0.2,
            ..CommodConfig::default()
        };
        (x, y, s, f_logit, adv, cfg)
    }

    #[test]
    fn identity_ratio_has_zero_ratio_loss() {
        let (x, y, s, f_logit, adv, cfg) = tiny_setup();
        let net = constant_one_net(2);
        let lc = loss_components(&x, &y, &s, &f_logit, &net, &adv, &cfg, None).unwrap();
        assert_eq!(lc.l_ratio, 0.0);
    }

    #[test]
    fn diversity_penalty_extremes() {
        let orth = Mat::from_rows(vec![vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(diversity_penalty(&orth, false), 0.0);
        let parallel = Mat::from_rows(vec![vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert!((diversity_penalty(&parallel, false) - 1.0).abs() < 1e-12);
        // Literal cosine distance rewards collinearity instead.
        assert!(diversity_penalty(&parallel, true).abs() < 1e-12);
        let zero_row = Mat::from_rows(vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(diversity_penalty(&zero_row, false), 0.0);
    }

    #[test]
    fn roc_postprocess_examples() {
        // theta = 0: thresholding only.
        let scores = vec![0.7, 0.3, 0.51];
        let s = vec![1, 1, 0];
        assert_eq!(roc_postprocess(&scores, &s, 0.0).unwrap(), vec![1, 0, 1]);
        // Whole band: predictions equal s.
        let scores = vec![0.5, 0.5, 0.5];
        let s = vec![1, 0, 1];
        assert_eq!(roc_postprocess(&scores, &s, 0.1).unwrap(), vec![1, 0, 1]);
        // Band membership flips both rows.
        let scores = vec![0.52, 0.48];
        let s = vec![0, 1];
        assert_eq!(roc_postprocess(&scores, &s, 0.05).unwrap(), vec![0, 1]);
        assert!(roc_postprocess(&scores, &s, 0.5).is_err());
    }

    #[test]
    fn explain_signs_and_thresholds() {
        let net = ConceptRatioNet {
            w: Mat::from_rows(vec![vec![0.5, 0.0, 0.02], vec![0.005, -0.3, 0.0]]).unwrap(),
            v: vec![0.41, -0.23],
            v_bias: 1.0,
            include_flogit_input: false,
        };
        let names: Vec<String> = ["age", "crime", "priors"].iter().map(|s| s.to_string()).collect();
        let report = explain(&net, &names, EXPLAIN_EPS).unwrap();
        assert_eq!(report.concepts[0].direction, "positive");
        assert_eq!(report.concepts[1].direction, "negative");
        let c0: Vec<&str> = report.concepts[0].features.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(c0, vec!["age", "priors"]);
        // All-below-eps row reports empty.
        let net = ConceptRatioNet {
            w: Mat::from_rows(vec![vec![0.001, 0.002, 0.0]]).unwrap(),
            v: vec![0.1],
            v_bias: 1.0,
            include_flogit_input: false,
        };
        let report = explain(&net, &names, EXPLAIN_EPS).unwrap();
        assert!(report.concepts[0].empty);
    }
}
