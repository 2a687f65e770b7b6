//! Alternating min-max training: per batch the adversary takes one or more
//! descent steps on its own reconstruction loss, then the ratio net takes
//! one descent step on the full objective, whose gradient flows through the
//! frozen adversary. An optional adversary-only warm-up runs first.

use super::{loss_components, Adversary, CommodConfig, ConceptRatioNet, LossComponents};
use crate::basemodel::{clamped_logit, Scorer};
use crate::error::{Error, Result};
use crate::metrics;
use crate::netcore::{sigmoid, Activation, DenseNet, Mat, Optimizer};
use crate::tabular::Dataset;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Loss terms and training-set metrics recorded at the end of each epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_y: f64,
    pub l_s: f64,
    pub l_ratio: f64,
    pub l_sparsity: f64,
    pub l_diversity: f64,
    pub total: f64,
    pub accuracy: f64,
    pub p_rule: f64,
    pub dm: f64,
    pub change_proportion: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedCommod {
    pub ratio_net: ConceptRatioNet,
    pub adversary: Adversary,
    pub history: Vec<EpochRecord>,
    pub warmup_history: Vec<EpochRecord>,
    pub config: CommodConfig,
    /// Names of the training features, kept so explanations can be produced
    /// from the serialized model alone.
    pub feature_names: Vec<String>,
}

impl TrainedCommod {
    pub fn scores(&self, x: &Mat, f_logit: &[f64]) -> Result<Vec<f64>> {
        let r = self.ratio_net.ratios(x, f_logit)?;
        Ok(r.iter().zip(f_logit).map(|(ri, li)| sigmoid(ri * li)).collect())
    }

    pub fn predictions(&self, x: &Mat, f_logit: &[f64]) -> Result<Vec<u8>> {
        Ok(self
            .scores(x, f_logit)?
            .into_iter()
            .map(|g| u8::from(g > 0.5))
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trained model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Gradient of the full objective with respect to the flattened ratio-net
/// parameters, holding the adversary fixed. Returns the loss terms alongside.
pub fn generator_loss_and_grads(
    x: &Mat,
    y: &[u8],
    s: &[u8],
    f_logit: &[f64],
    net: &ConceptRatioNet,
    adv: &Adversary,
    cfg: &CommodConfig,
    instance_weights: Option<&[f64]>,
) -> Result<(LossComponents, Vec<f64>)> {
    let n = x.rows();
    let lc = loss_components(x, y, s, f_logit, net, adv, cfg, instance_weights)?;
    let inv_n = 1.0 / n as f64;
    let k = net.k();
    let d_in = net.input_dim();

    // Forward pieces (recomputed; batches are small).
    let r = net.ratios(x, f_logit)?;
    let u: Vec<f64> = r.iter().zip(f_logit).map(|(ri, li)| ri * li).collect();

    // d total / d u through the prediction loss and the adversary.
    let adv_in = adv.input_matrix(&u, y)?;
    let (adv_out, adv_cache) = adv.net.forward(&adv_in)?;
    let mut upstream = Mat::zeros(n, 1);
    for i in 0..n {
        upstream.set(i, 0, (sigmoid(adv_out.get(i, 0)) - f64::from(s[i])) * inv_n);
    }
    let (_, adv_input_grad) = adv.net.backward(&adv_cache, &upstream)?;

    let mut du = vec![0.0f64; n];
    for i in 0..n {
        let pred_term = (sigmoid(u[i]) - f64::from(y[i])) * inv_n;
        let fair_term = adv_input_grad.get(i, 0); // column 0 = updated logit
        du[i] = pred_term - cfg.lambda_fair * fair_term;
    }

    // d total / d r adds the ratio penalty.
    let mut dr = vec![0.0f64; n];
    for i in 0..n {
        let w_i = instance_weights.map_or(1.0, |w| w[i]);
        dr[i] = du[i] * f_logit[i] + cfg.lambda_ratio * w_i * 2.0 * (r[i] - 1.0) * inv_n;
    }

    // Backprop through the linear bottleneck: r = v . (W x) + v_bias.
    let mut dw = Mat::zeros(k, d_in);
    let mut dv = vec![0.0f64; k];
    let mut dv_bias = 0.0f64;
    let mut row_buf = Vec::with_capacity(d_in);
    for i in 0..n {
        row_buf.clear();
        row_buf.extend_from_slice(x.row(i));
        if net.include_flogit_input {
            row_buf.push(f_logit[i]);
        }
        let c = net.concepts(&row_buf);
        for a in 0..k {
            dv[a] += dr[i] * c[a];
            let va = net.v[a];
            if va != 0.0 || dr[i] != 0.0 {
                let wrow = dw.row_mut(a);
                for (b, xb) in row_buf.iter().enumerate() {
                    wrow[b] += dr[i] * va * xb;
                }
            }
        }
        dv_bias += dr[i];
    }

    // Sparsity (mean |W|) and diversity penalties act on W only.
    let denom = (k * d_in) as f64;
    let div_grad = diversity_gradient(&net.w, cfg.literal_cosine_distance);
    for a in 0..k {
        for b in 0..d_in {
            let sp = net.w.get(a, b).signum() / denom;
            let v = dw.get(a, b)
                + cfg.lambda_sparsity * sp
                + cfg.lambda_diversity * div_grad.get(a, b);
            dw.set(a, b, v);
        }
    }

    let mut flat = Vec::with_capacity(net.param_count());
    flat.extend_from_slice(dw.data());
    flat.extend_from_slice(&dv);
    flat.push(dv_bias);
    Ok((lc, flat))
}

/// Gradient of the diversity penalty with respect to W.
fn diversity_gradient(w: &Mat, literal_cosine_distance: bool) -> Mat {
    let k = w.rows();
    let d = w.cols();
    let norms: Vec<f64> = (0..k)
        .map(|a| w.row(a).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut grad = Mat::zeros(k, d);
    for a in 0..k {
        for b in a + 1..k {
            if norms[a] < 1e-12 || norms[b] < 1e-12 {
                continue;
            }
            let dot: f64 = w.row(a).iter().zip(w.row(b)).map(|(x, y)| x * y).sum();
            let cos = dot / (norms[a] * norms[b]);
            let factor = if literal_cosine_distance {
                -1.0
            } else if cos > 0.0 {
                1.0
            } else if cos < 0.0 {
                -1.0
            } else {
                0.0
            };
            if factor == 0.0 {
                continue;
            }
            for j in 0..d {
                let da = factor * (w.get(b, j) / (norms[a] * norms[b]) - cos * w.get(a, j) / (norms[a] * norms[a]));
                let db = factor * (w.get(a, j) / (norms[a] * norms[b]) - cos * w.get(b, j) / (norms[b] * norms[b]));
                grad.set(a, j, grad.get(a, j) + da);
                grad.set(b, j, grad.get(b, j) + db);
            }
        }
    }
    grad
}

/// Adversary reconstruction loss and its gradient with respect to the
/// adversary's flattened parameters, with the generator frozen.
pub fn adversary_loss_and_grads(
    updated_logit: &[f64],
    y: &[u8],
    s: &[u8],
    adv: &Adversary,
) -> Result<(f64, Vec<f64>)> {
    let n = updated_logit.len();
    let adv_in = adv.input_matrix(updated_logit, y)?;
    let (out, cache) = adv.net.forward(&adv_in)?;
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut upstream = Mat::zeros(n, 1);
    for i in 0..n {
        let z = out.get(i, 0);
        loss += crate::netcore::bce_from_logit(z, f64::from(s[i]));
        upstream.set(i, 0, (sigmoid(z) - f64::from(s[i])) * inv_n);
    }
    let (grads, _) = adv.net.backward(&cache, &upstream)?;
    Ok((loss * inv_n, adv.net.grads_flat(&grads)))
}

struct Batcher {
    order: Vec<usize>,
    batch_size: usize,
}

impl Batcher {
    fn new(n: usize, batch_size: usize) -> Self {
        Batcher {
            order: (0..n).collect(),
            batch_size,
        }
    }

    fn shuffle(&mut self, rng: &mut ChaCha8Rng) {
        self.order.shuffle(rng);
    }

    fn batches(&self) -> impl Iterator<Item = &[usize]> {
        self.order.chunks(self.batch_size)
    }
}

fn gather(idx: &[usize], x: &Mat, y: &[u8], s: &[u8], l: &[f64]) -> (Mat, Vec<u8>, Vec<u8>, Vec<f64>) {
    (
        x.select_rows(idx),
        idx.iter().map(|&i| y[i]).collect(),
        idx.iter().map(|&i| s[i]).collect(),
        idx.iter().map(|&i| l[i]).collect(),
    )
}

fn adversary_step(
    opt: &mut Optimizer,
    adv: &mut Adversary,
    u: &[f64],
    y: &[u8],
    s: &[u8],
) -> Result<f64> {
    let (loss, grads) = adversary_loss_and_grads(u, y, s, adv)?;
    let mut params = adv.net.params_flat();
    opt.step(&mut params, &grads)?;
    adv.net.set_params_flat(&params)?;
    Ok(loss)
}

#[allow(clippy::too_many_arguments)]
fn epoch_record(
    epoch: usize,
    x: &Mat,
    y: &[u8],
    s: &[u8],
    f_logit: &[f64],
    yhat_f: &[u8],
    net: &ConceptRatioNet,
    adv: &Adversary,
    cfg: &CommodConfig,
    weights: Option<&[f64]>,
) -> Result<EpochRecord> {
    let lc = loss_components(x, y, s, f_logit, net, adv, cfg, weights)?;
    let r = net.ratios(x, f_logit)?;
    let yhat_g: Vec<u8> = r
        .iter()
        .zip(f_logit)
        .map(|(ri, li)| u8::from(sigmoid(ri * li) > 0.5))
        .collect();
    let dm = metrics::disparate_mistreatment(&yhat_g, y, s)?;
    Ok(EpochRecord {
        epoch,
        l_y: lc.l_y,
        l_s: lc.l_s,
        l_ratio: lc.l_ratio,
        l_sparsity: lc.l_sparsity,
        l_diversity: lc.l_diversity,
        total: lc.total,
        accuracy: metrics::accuracy(&yhat_g, y)?,
        p_rule: metrics::p_rule(&yhat_g, s)?,
        dm: dm.dm,
        change_proportion: metrics::change_proportion(yhat_f, &yhat_g)?,
    })
}

/// Train the concept ratio net against a pretrained scorer. Deterministic
/// under `cfg.seed`; the per-epoch history is computed on the full training
/// set after each epoch.
pub fn train_commod(train: &Dataset, base: &dyn Scorer, cfg: &CommodConfig) -> Result<TrainedCommod> {
    cfg.validate()?;
    let n = train.n();
    let probs = base.predict_proba_ds(train)?;
    let eps = base.clamp_eps();
    let f_logit: Vec<f64> = probs.iter().map(|&p| clamped_logit(p, eps)).collect();
    let yhat_f: Vec<u8> = f_logit.iter().map(|&l| u8::from(l > 0.0)).collect();
    if let Some(w) = &cfg.ratio_weights {
        if w.len() != n {
            return Err(Error::Config(format!(
                "ratio_weights has {} entries for {} training rows",
                w.len(),
                n
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d_in = train.d() + usize::from(cfg.include_flogit_input);
    let mut net = ConceptRatioNet::identity_init(cfg.k, d_in, &mut rng)?;
    net.include_flogit_input = cfg.include_flogit_input;
    let mut adv = Adversary::new(cfg.fairness_mode, &mut rng)?;

    let mut gen_opt = Optimizer::adam(net.param_count(), cfg.lr_gen);
    let mut adv_opt = Optimizer::adam(adv.net.param_count(), cfg.lr_adv);
    let mut batcher = Batcher::new(n, cfg.batch_size);

    let weights_of = |idx: &[usize]| -> Option<Vec<f64>> {
        cfg.ratio_weights
            .as_ref()
            .map(|w| idx.iter().map(|&i| w[i]).collect())
    };

    let mut warmup_history = Vec::with_capacity(cfg.adv_warmup_epochs);
    for epoch in 0..cfg.adv_warmup_epochs {
        batcher.shuffle(&mut rng);
        for idx in batcher.batches() {
            let (xb, yb, sb, lb) = gather(idx, &train.x, &train.y, &train.s, &f_logit);
            let r = net.ratios(&xb, &lb)?;
            let u: Vec<f64> = r.iter().zip(&lb).map(|(ri, li)| ri * li).collect();
            adversary_step(&mut adv_opt, &mut adv, &u, &yb, &sb)?;
        }
        warmup_history.push(epoch_record(
            epoch,
            &train.x,
            &train.y,
            &train.s,
            &f_logit,
            &yhat_f,
            &net,
            &adv,
            cfg,
            cfg.ratio_weights.as_deref(),
        )?);
    }

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        batcher.shuffle(&mut rng);
        for (batch_no, idx) in batcher.batches().enumerate() {
            let (xb, yb, sb, lb) = gather(idx, &train.x, &train.y, &train.s, &f_logit);
            let wb = weights_of(idx);
            for _ in 0..cfg.adv_steps_per_gen_step {
                let r = net.ratios(&xb, &lb)?;
                let u: Vec<f64> = r.iter().zip(&lb).map(|(ri, li)| ri * li).collect();
                adversary_step(&mut adv_opt, &mut adv, &u, &yb, &sb)?;
            }
            let (lc, grads) =
                generator_loss_and_grads(&xb, &yb, &sb, &lb, &net, &adv, cfg, wb.as_deref())?;
            if !lc.total.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss at epoch {epoch}, batch {batch_no}"
                )));
            }
            let mut params = net.params_flat();
            gen_opt.step(&mut params, &grads)?;
            net.set_params_flat(&params)?;
        }
        history.push(epoch_record(
            epoch,
            &train.x,
            &train.y,
            &train.s,
            &f_logit,
            &yhat_f,
            &net,
            &adv,
            cfg,
            cfg.ratio_weights.as_deref(),
        )?);
    }

    Ok(TrainedCommod {
        ratio_net: net,
        adversary: adv,
        history,
        warmup_history,
        config: cfg.clone(),
        feature_names: train.feature_names.clone(),
    })
}

/// In-processing comparison baseline: the same adversarial loop, but the
/// predictor is a fresh dense network on the features, with no base model,
/// no ratio, and no concept penalties.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedBaseline {
    pub net: DenseNet,
    pub adversary: Adversary,
    pub history: Vec<EpochRecord>,
    pub config: CommodConfig,
}

impl TrainedBaseline {
    pub fn scores(&self, x: &Mat) -> Result<Vec<f64>> {
        let (out, _) = self.net.forward(x)?;
        Ok(out.data().iter().map(|&z| sigmoid(z)).collect())
    }

    pub fn predictions(&self, x: &Mat) -> Result<Vec<u8>> {
        Ok(self.scores(x)?.into_iter().map(|g| u8::from(g > 0.5)).collect())
    }
}

pub const BASELINE_HIDDEN: usize = 32;

/// Train the from-scratch adversarial baseline. `yhat_ref`, when given, is
/// the base model's predictions used only to fill the change column of the
/// history.
pub fn train_advdebias_baseline(
    train: &Dataset,
    cfg: &CommodConfig,
    yhat_ref: Option<&[u8]>,
) -> Result<TrainedBaseline> {
    cfg.validate()?;
    let n = train.n();
    if let Some(r) = yhat_ref {
        if r.len() != n {
            return Err(Error::Shape("yhat_ref length mismatch".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = DenseNet::new(
        &[train.d(), BASELINE_HIDDEN, 1],
        &[Activation::Relu, Activation::Identity],
        &mut rng,
    )?;
    let mut adv = Adversary::new(cfg.fairness_mode, &mut rng)?;
    let mut gen_opt = Optimizer::adam(net.param_count(), cfg.lr_gen);
    let mut adv_opt = Optimizer::adam(adv.net.param_count(), cfg.lr_adv);
    let mut batcher = Batcher::new(n, cfg.batch_size);

    let logits_of = |net: &DenseNet, x: &Mat| -> Result<Vec<f64>> {
        let (out, _) = net.forward(x)?;
        Ok(out.data().to_vec())
    };

    let record = |epoch: usize, net: &DenseNet, adv: &Adversary| -> Result<EpochRecord> {
        let z = logits_of(net, &train.x)?;
        let yhat_g: Vec<u8> = z.iter().map(|&v| u8::from(sigmoid(v) > 0.5)).collect();
        let l_y = z
            .iter()
            .zip(&train.y)
            .map(|(zi, yi)| crate::netcore::bce_from_logit(*zi, f64::from(*yi)))
            .sum::<f64>()
            / n as f64;
        let adv_in = adv.input_matrix(&z, &train.y)?;
        let (adv_out, _) = adv.net.forward(&adv_in)?;
        let l_s = adv_out
            .data()
            .iter()
            .zip(&train.s)
            .map(|(zi, si)| crate::netcore::bce_from_logit(*zi, f64::from(*si)))
            .sum::<f64>()
            / n as f64;
        let dm = metrics::disparate_mistreatment(&yhat_g, &train.y, &train.s)?;
        let change = match yhat_ref {
            Some(r) => metrics::change_proportion(r, &yhat_g)?,
            None => 0.0,
        };
        Ok(EpochRecord {
            epoch,
            l_y,
            l_s,
            l_ratio: 0.0,
            l_sparsity: 0.0,
            l_diversity: 0.0,
            total: l_y - cfg.lambda_fair * l_s,
            accuracy: metrics::accuracy(&yhat_g, &train.y)?,
            p_rule: metrics::p_rule(&yhat_g, &train.s)?,
            dm: dm.dm,
            change_proportion: change,
        })
    };

    for _ in 0..cfg.adv_warmup_epochs {
        batcher.shuffle(&mut rng);
        for idx in batcher.batches() {
            let xb = train.x.select_rows(idx);
            let yb: Vec<u8> = idx.iter().map(|&i| train.y[i]).collect();
            let sb: Vec<u8> = idx.iter().map(|&i| train.s[i]).collect();
            let z = logits_of(&net, &xb)?;
            adversary_step(&mut adv_opt, &mut adv, &z, &yb, &sb)?;
        }
    }

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        batcher.shuffle(&mut rng);
        for (batch_no, idx) in batcher.batches().enumerate() {
            let xb = train.x.select_rows(idx);
            let yb: Vec<u8> = idx.iter().map(|&i| train.y[i]).collect();
            let sb: Vec<u8> = idx.iter().map(|&i| train.s[i]).collect();
            for _ in 0..cfg.adv_steps_per_gen_step {
                let z = logits_of(&net, &xb)?;
                adversary_step(&mut adv_opt, &mut adv, &z, &yb, &sb)?;
            }
            // Predictor step: d total / d z flows through prediction loss and
            // the frozen adversary.
            let b = xb.rows();
            let inv_b = 1.0 / b as f64;
            let (out, cache) = net.forward(&xb)?;
            let z: Vec<f64> = out.data().to_vec();
            let adv_in = adv.input_matrix(&z, &yb)?;
            let (adv_out, adv_cache) = adv.net.forward(&adv_in)?;
            let mut adv_upstream = Mat::zeros(b, 1);
            let mut l_y = 0.0;
            for i in 0..b {
                adv_upstream.set(
                    i,
                    0,
                    (sigmoid(adv_out.get(i, 0)) - f64::from(sb[i])) * inv_b,
                );
                l_y += crate::netcore::bce_from_logit(z[i], f64::from(yb[i]));
            }
            l_y *= inv_b;
            if !l_y.is_finite() {
                return Err(Error::NonFinite(format!(
                    "baseline loss at epoch {epoch}, batch {batch_no}"
                )));
            }
            let (_, adv_input_grad) = adv.net.backward(&adv_cache, &adv_upstream)?;
            let mut upstream = Mat::zeros(b, 1);
            for i in 0..b {
                let pred_term = (sigmoid(z[i]) - f64::from(yb[i])) * inv_b;
                upstream.set(i, 0, pred_term - cfg.lambda_fair * adv_input_grad.get(i, 0));
            }
            let (grads, _) = net.backward(&cache, &upstream)?;
            let flat = net.grads_flat(&grads);
            let mut params = net.params_flat();
            gen_opt.step(&mut params, &flat)?;
            net.set_params_flat(&params)?;
        }
        history.push(record(epoch, &net, &adv)?);
    }

    Ok(TrainedBaseline {
        net,
        adversary: adv,
        history,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basemodel::train_logreg;
    use crate::commod::FairnessMode;
    use crate::netcore::grad_check;
    use crate::synth::{generate, SyntheticConfig};
    use rand::Rng;

    fn small_synthetic(n: usize, seed: u64) -> Dataset {
        generate(&SyntheticConfig {
            n,
            seed,
            ..SyntheticConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn generator_gradient_matches_finite_differences() {
        let ds = small_synthetic(64, 1);
        let base = train_logreg(&ds, 200, 0.5, 0).unwrap();
        let probs = base.predict_proba(&ds.x).unwrap();
        let f_logit: Vec<f64> = probs.iter().map(|&p| clamped_logit(p, 1e-6)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for mode in [FairnessMode::Dp, FairnessMode::Eo] {
            let cfg = CommodConfig {
                k: 3,
                lambda_fair: 0.7,
                lambda_ratio: 0.3,
                lambda_sparsity: 0.15,
                lambda_diversity: 0.25,
                fairness_mode: mode,
                ..CommodConfig::default()
            };
            let adv = Adversary::new(mode, &mut rng).unwrap();
            let mut net = ConceptRatioNet::identity_init(3, ds.d(), &mut rng).unwrap();
            // Random interior point, away from kinks.
            let params: Vec<f64> = (0..net.param_count())
                .map(|_| rng.gen_range(-0.5..0.5))
                .collect();
            net.set_params_flat(&params).unwrap();
            let (_, analytic) = generator_loss_and_grads(
                &ds.x, &ds.y, &ds.s, &f_logit, &net, &adv, &cfg, None,
            )
            .unwrap();
            let mut probe = net.clone();
            let err = grad_check(
                |p| {
                    probe.set_params_flat(p)?;
                    Ok(loss_components(&ds.x, &ds.y, &ds.s, &f_logit, &probe, &adv, &cfg, None)?
                        .total)
                },
                &params,
                &analytic,
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-5, "{mode:?}: max relative error {err}");
        }
    }

    #[test]
    fn lambda_fair_zero_removes_adversary_dependence() {
        let ds = small_synthetic(32, 2);
        let f_logit: Vec<f64> = (0..ds.n()).map(|i| (i as f64 % 5.0) - 2.0).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = CommodConfig {
            lambda_fair: 0.0,
            lambda_ratio: 0.2,
            ..CommodConfig::default()
        };
        let net = {
            let mut net = ConceptRatioNet::identity_init(2, ds.d(), &mut rng).unwrap();
            let params: Vec<f64> = (0..net.param_count()).map(|_| rng.gen_range(-0.4..0.4)).collect();
            net.set_params_flat(&params).unwrap();
            net
        };
        let adv1 = Adversary::new(FairnessMode::Dp, &mut rng).unwrap();
        let adv2 = Adversary::new(FairnessMode::Dp, &mut rng).unwrap();
        let (_, g1) =
            generator_loss_and_grads(&ds.x, &ds.y, &ds.s, &f_logit, &net, &adv1, &cfg, None).unwrap();
        let (_, g2) =
            generator_loss_and_grads(&ds.x, &ds.y, &ds.s, &f_logit, &net, &adv2, &cfg, None).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn flip_criterion_holds_on_random_nets() {
        let ds = small_synthetic(64, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let f_logit: Vec<f64> = (0..ds.n()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        for _ in 0..5 {
            let mut net = ConceptRatioNet::identity_init(2, ds.d(), &mut rng).unwrap();
            let params: Vec<f64> = (0..net.param_count()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            net.set_params_flat(&params).unwrap();
            let r = net.ratios(&ds.x, &f_logit).unwrap();
            for i in 0..ds.n() {
                let li = f_logit[i];
                if li == 0.0 {
                    continue;
                }
                let yf = u8::from(li > 0.0);
                let g = sigmoid(r[i] * li);
                let yg = u8::from(g > 0.5);
                let changed = yf != yg;
                let expected = r[i] < 0.0 || (r[i] * li == 0.0 && li > 0.0);
                assert_eq!(changed, expected, "r={} l={}", r[i], li);
            }
        }
    }

    #[test]
    fn identity_favoring_objective_changes_almost_nothing() {
        let ds = small_synthetic(400, 4);
        let base = train_logreg(&ds, 300, 0.5, 0).unwrap();
        let cfg = CommodConfig {
            lambda_fair: 0.0,
            lambda_ratio: 0.5,
            epochs: 60,
            ..CommodConfig::default()
        };
        let trained = train_commod(&ds, &base, &cfg).unwrap();
        let last = trained.history.last().unwrap();
        assert!(
            last.change_proportion < 0.01,
            "change proportion {}",
            last.change_proportion
        );
    }

    #[test]
    fn training_is_deterministic() {
        let ds = small_synthetic(200, 6);
        let base = train_logreg(&ds, 200, 0.5, 0).unwrap();
        let cfg = CommodConfig {
            epochs: 8,
            adv_warmup_epochs: 2,
            ..CommodConfig::default()
        };
        let a = train_commod(&ds, &base, &cfg).unwrap();
        let b = train_commod(&ds, &base, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a.history).unwrap(),
            serde_json::to_string(&b.history).unwrap()
        );
        let ba = train_advdebias_baseline(&ds, &cfg, None).unwrap();
        let bb = train_advdebias_baseline(&ds, &cfg, None).unwrap();
        assert_eq!(
            serde_json::to_string(&ba.history).unwrap(),
            serde_json::to_string(&bb.history).unwrap()
        );
    }

    #[test]
    fn history_length_matches_epochs() {
        let ds = small_synthetic(100, 7);
        let base = train_logreg(&ds, 100, 0.5, 0).unwrap();
        let cfg = CommodConfig {
            epochs: 5,
            adv_warmup_epochs: 3,
            ..CommodConfig::default()
        };
        let trained = train_commod(&ds, &base, &cfg).unwrap();
        assert_eq!(trained.history.len(), 5);
        assert_eq!(trained.warmup_history.len(), 3);
    }

    #[test]
    fn baseline_without_adversary_matches_plain_training() {
        let ds = small_synthetic(300, 8);
        let cfg = CommodConfig {
            lambda_fair: 0.0,
            epochs: 40,
            ..CommodConfig::default()
        };
        let baseline = train_advdebias_baseline(&ds, &cfg, None).unwrap();
        let acc = baseline.history.last().unwrap().accuracy;
        // Plain network training should fit the synthetic task decently.
        assert!(acc > 0.7, "accuracy {acc}");
    }

    #[test]
    fn adversary_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 32;
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
        let s: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
        for mode in [FairnessMode::Dp, FairnessMode::Eo] {
            let adv = Adversary::new(mode, &mut rng).unwrap();
            let params = adv.net.params_flat();
            let (_, analytic) = adversary_loss_and_grads(&u, &y, &s, &adv).unwrap();
            let mut probe = adv.clone();
            let err = grad_check(
                |p| {
                    probe.net.set_params_flat(p)?;
                    Ok(adversary_loss_and_grads(&u, &y, &s, &probe)?.0)
                },
                &params,
                &analytic,
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-5, "{mode:?}: max relative error {err}");
        }
    }
}
