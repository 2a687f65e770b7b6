// Temporary tuning driver for the synthetic acceptance scenarios.

use commod::basemodel::{clamped_logit, train_logreg, Scorer};
use commod::commod::{train_advdebias_baseline, train_commod, CommodConfig, FairnessMode};
use commod::metrics;
use commod::synth::{generate, SyntheticConfig};
use commod::tabular::{split, SplitSpec};
use std::time::Instant;

fn read_env<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

#[test]
#[ignore]
fn sweep_behavior() {
    let t0 = Instant::now();
    let epochs: usize = read_env("TUNE_EPOCHS", 120);
    let lr_gen: f64 = read_env("TUNE_LR_GEN", 1e-2);
    let lr_adv: f64 = read_env("TUNE_LR_ADV", 1e-2);
    let adv_steps: usize = read_env("TUNE_ADV_STEPS", 1);
    let lambda_ratio: f64 = read_env("TUNE_LR_RATIO", 0.05);
    println!("epochs={epochs} lr_gen={lr_gen} lr_adv={lr_adv} adv_steps={adv_steps} lambda_ratio={lambda_ratio}");
    for seed in [0u64, 1, 2] {
        let full = generate(&SyntheticConfig {
            n: 4000,
            seed,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let (train, test) = split(&full, &SplitSpec::new(0.7, seed)).unwrap();
        let base = train_logreg(&train, 400, 0.5, seed).unwrap();
        let test_probs = base.predict_proba(&test.x).unwrap();
        let test_logits: Vec<f64> = test_probs.iter().map(|&p| clamped_logit(p, 1e-6)).collect();
        let yhat_f: Vec<u8> = test_logits.iter().map(|&l| u8::from(l > 0.0)).collect();
        let acc_f = metrics::accuracy(&yhat_f, &test.y).unwrap();
        let pr_f = metrics::p_rule(&yhat_f, &test.s).unwrap();
        println!("seed {seed}: base acc {acc_f:.4} p-rule {pr_f:.4}");
        for lf in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let cfg = CommodConfig {
                k: 2,
                lambda_fair: lf,
                lambda_ratio,
                fairness_mode: FairnessMode::Dp,
                epochs,
                lr_gen,
                lr_adv,
                adv_steps_per_gen_step: adv_steps,
                seed,
                ..CommodConfig::default()
            };
            let t = Instant::now();
            let trained = train_commod(&train, &base, &cfg).unwrap();
            let yhat_g = trained.predictions(&test.x, &test_logits).unwrap();
            let acc = metrics::accuracy(&yhat_g, &test.y).unwrap();
            let pr = metrics::p_rule(&yhat_g, &test.s).unwrap();
            let ch = metrics::change_proportion(&yhat_f, &yhat_g).unwrap();
            println!(
                "  commod lf={lf}: acc {acc:.4} p-rule {pr:.4} changes {ch:.4}  ({:.2}s)",
                t.elapsed().as_secs_f64()
            );
            let t = Instant::now();
            let baseline = train_advdebias_baseline(&train, &cfg, None).unwrap();
            let yhat_b = baseline.predictions(&test.x).unwrap();
            let acc_b = metrics::accuracy(&yhat_b, &test.y).unwrap();
            let pr_b = metrics::p_rule(&yhat_b, &test.s).unwrap();
            let ch_b = metrics::change_proportion(&yhat_f, &yhat_b).unwrap();
            println!(
                "  advdeb lf={lf}: acc {acc_b:.4} p-rule {pr_b:.4} changes {ch_b:.4}  ({:.2}s)",
                t.elapsed().as_secs_f64()
            );
        }
    }
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
}

#[test]
#[ignore]
fn concept_regularization_behavior() {
    for seed in [0u64, 1, 2] {
        let full = generate(&SyntheticConfig {
            n: 4000,
            seed,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let (train, test) = split(&full, &SplitSpec::new(0.7, seed)).unwrap();
        let base = train_logreg(&train, 400, 0.5, seed).unwrap();
        let test_probs = base.predict_proba(&test.x).unwrap();
        let test_logits: Vec<f64> = test_probs.iter().map(|&p| clamped_logit(p, 1e-6)).collect();
        for (ls, ld) in [(0.0, 0.0), (0.1, 0.1)] {
            let cfg = CommodConfig {
                k: 2,
                lambda_fair: 2.0,
                lambda_ratio: 0.05,
                lambda_sparsity: ls,
                lambda_diversity: ld,
                fairness_mode: FairnessMode::Dp,
                epochs: 120,
                seed,
                ..CommodConfig::default()
            };
            let trained = train_commod(&train, &base, &cfg).unwrap();
            let yhat_g = trained.predictions(&test.x, &test_logits).unwrap();
            let pr = metrics::p_rule(&yhat_g, &test.s).unwrap();
            let (active, frac) = metrics::concept_sparsity(&trained.ratio_net.w, 0.01).unwrap();
            let cos = metrics::max_abs_cosine(&trained.ratio_net.w);
            println!(
                "seed {seed} ls={ls} ld={ld}: p-rule {pr:.4} active {active} sparsity {frac:.3} maxcos {cos:.4}"
            );
        }
    }
}

#[test]
#[ignore]
fn minimal_change_limit_behavior() {
    let full = generate(&SyntheticConfig {
        n: 4000,
        seed: 0,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let (train, _) = split(&full, &SplitSpec::new(0.7, 0)).unwrap();
    let base = train_logreg(&train, 400, 0.5, 0).unwrap();
    let train_probs = base.predict_proba(&train.x).unwrap();
    let train_logits: Vec<f64> = train_probs.iter().map(|&p| clamped_logit(p, 1e-6)).collect();
    for lr_ratio in [0.5, 0.0] {
        let cfg = CommodConfig {
            k: 2,
            lambda_fair: 0.0,
            lambda_ratio: lr_ratio,
            fairness_mode: FairnessMode::Dp,
            epochs: 200,
            seed: 0,
            ..CommodConfig::default()
        };
        let t = Instant::now();
        let trained = train_commod(&train, &base, &cfg).unwrap();
        let g = trained.scores(&train.x, &train_logits).unwrap();
        let yhat_g: Vec<u8> = g.iter().map(|&v| u8::from(v > 0.5)).collect();
        let yhat_f: Vec<u8> = train_logits.iter().map(|&l| u8::from(l > 0.0)).collect();
        let ch = metrics::change_proportion(&yhat_f, &yhat_g).unwrap();
        // Mean |g - f| on unflipped instances.
        let mut dev = 0.0;
        let mut count = 0;
        for i in 0..train.n() {
            if yhat_f[i] == yhat_g[i] {
                dev += (g[i] - train_probs[i]).abs();
                count += 1;
            }
        }
        println!(
            "lambda_ratio={lr_ratio}: changes {ch:.5} mean|g-f| (unflipped) {:.5} ({:.2}s)",
            dev / count as f64,
            t.elapsed().as_secs_f64()
        );
    }
}

#[test]
#[ignore]
fn base_scorer_trait_sanity() {
    let full = generate(&SyntheticConfig {
        n: 1000,
        seed: 0,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let base = train_logreg(&full, 200, 0.5, 0).unwrap();
    let probs = base.predict_proba_ds(&full).unwrap();
    assert_eq!(probs.len(), 1000);
}

#[test]
#[ignore]
fn training_dynamics() {
    let full = generate(&SyntheticConfig {
        n: 4000,
        seed: 2,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let (train, _) = split(&full, &SplitSpec::new(0.7, 2)).unwrap();
    let base = train_logreg(&train, 400, 0.5, 2).unwrap();
    let lf: f64 = read_env("TUNE_LF", 4.0);
    let cfg = CommodConfig {
        k: 2,
        lambda_fair: lf,
        lambda_ratio: read_env("TUNE_LR_RATIO", 0.05),
        fairness_mode: FairnessMode::Dp,
        epochs: read_env("TUNE_EPOCHS", 300),
        lr_gen: read_env("TUNE_LR_GEN", 0.005),
        lr_adv: read_env("TUNE_LR_ADV", 0.01),
        adv_steps_per_gen_step: read_env("TUNE_ADV_STEPS", 2),
        seed: 2,
        ..CommodConfig::default()
    };
    let trained = train_commod(&train, &base, &cfg).unwrap();
    for r in trained.history.iter().step_by(cfg.epochs / 30) {
        println!(
            "epoch {:3}: l_y {:.4} l_s {:.4} l_ratio {:.4} total {:.4} acc {:.4} pr {:.4} ch {:.4}",
            r.epoch, r.l_y, r.l_s, r.l_ratio, r.total, r.accuracy, r.p_rule, r.change_proportion
        );
    }
    let w = &trained.ratio_net.w;
    println!("v = {:?}, v_bias = {}", trained.ratio_net.v, trained.ratio_net.v_bias);
    for a in 0..w.rows() {
        println!("W[{a}] = {:?}", w.row(a));
    }
}

#[test]
#[ignore]
fn logit_scale() {
    let full = generate(&SyntheticConfig {
        n: 4000,
        seed: 0,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let (train, _) = split(&full, &SplitSpec::new(0.7, 0)).unwrap();
    for (epochs, lr) in [(400usize, 0.5f64), (200, 0.2), (120, 0.15)] {
        let base = train_logreg(&train, epochs, lr, 0).unwrap();
        let probs = base.predict_proba(&train.x).unwrap();
        let mut logits: Vec<f64> = probs.iter().map(|&p| clamped_logit(p, 1e-6)).collect();
        logits.sort_by(f64::total_cmp);
        let pct = |p: f64| logits[((logits.len() - 1) as f64 * p) as usize];
        let preds: Vec<u8> = probs.iter().map(|&p| u8::from(p > 0.5)).collect();
        let acc = metrics::accuracy(&preds, &train.y).unwrap();
        let pr = metrics::p_rule(&preds, &train.s).unwrap();
        println!(
            "epochs {epochs} lr {lr}: acc {acc:.4} pr {pr:.4} |w| {:?} logit p5 {:.2} p25 {:.2} p50 {:.2} p75 {:.2} p95 {:.2}",
            base.w.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
            pct(0.05), pct(0.25), pct(0.5), pct(0.75), pct(0.95)
        );
    }
}

#[test]
#[ignore]
fn flogit_input_variant() {
    let epochs: usize = read_env("TUNE_EPOCHS", 300);
    let lr_gen: f64 = read_env("TUNE_LR_GEN", 0.005);
    let adv_steps: usize = read_env("TUNE_ADV_STEPS", 2);
    let include: bool = read_env("TUNE_FLOGIT", true);
    for seed in [0u64, 1, 2] {
        let full = generate(&SyntheticConfig {
            n: 4000,
            seed,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let (train, test) = split(&full, &SplitSpec::new(0.7, seed)).unwrap();
        let base = train_logreg(&train, 400, 0.5, seed).unwrap();
        let test_probs = base.predict_proba(&test.x).unwrap();
        let test_logits: Vec<f64> = test_probs.iter().map(|&p| clamped_logit(p, 1e-6)).collect();
        let yhat_f: Vec<u8> = test_logits.iter().map(|&l| u8::from(l > 0.0)).collect();
        let acc_f = metrics::accuracy(&yhat_f, &test.y).unwrap();
        let pr_f = metrics::p_rule(&yhat_f, &test.s).unwrap();
        println!("seed {seed}: base acc {acc_f:.4} p-rule {pr_f:.4}");
        for lf in [1.0, 2.0, 4.0, 6.0, 8.0] {
            let cfg = CommodConfig {
                k: 2,
                lambda_fair: lf,
                lambda_ratio: 0.05,
                fairness_mode: FairnessMode::Dp,
                epochs,
                lr_gen,
                adv_steps_per_gen_step: adv_steps,
                include_flogit_input: include,
                seed,
                ..CommodConfig::default()
            };
            let trained = train_commod(&train, &base, &cfg).unwrap();
            let yhat_g = trained.predictions(&test.x, &test_logits).unwrap();
            let acc = metrics::accuracy(&yhat_g, &test.y).unwrap();
            let pr = metrics::p_rule(&yhat_g, &test.s).unwrap();
            let ch = metrics::change_proportion(&yhat_f, &yhat_g).unwrap();
            println!("  commod lf={lf}: acc {acc:.4} p-rule {pr:.4} changes {ch:.4}");
        }
    }
}

#[test]
#[ignore]
fn base_stats() {
    for seed in [0u64, 1, 2] {
        let full = generate(&SyntheticConfig {
            n: 4000,
            seed,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let (train, _) = split(&full, &SplitSpec::new(0.7, seed)).unwrap();
        let base = train_logreg(&train, 400, 0.5, seed).unwrap();
        let preds = base.predict(&train.x).unwrap();
        let mut pos = [0usize; 2];
        let mut tot = [0usize; 2];
        let mut ypos = [0usize; 2];
        for i in 0..train.n() {
            let g = train.s[i] as usize;
            tot[g] += 1;
            pos[g] += preds[i] as usize;
            ypos[g] += train.y[i] as usize;
        }
        println!(
            "seed {seed}: rate0 {:.3} rate1 {:.3} (y-rates {:.3}/{:.3}) acc {:.4} pr {:.4} w {:?}",
            pos[0] as f64 / tot[0] as f64,
            pos[1] as f64 / tot[1] as f64,
            ypos[0] as f64 / tot[0] as f64,
            ypos[1] as f64 / tot[1] as f64,
            metrics::accuracy(&preds, &train.y).unwrap(),
            metrics::p_rule(&preds, &train.s).unwrap(),
            base.w.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
    }
}

#[test]
#[ignore]
fn ladder2() {
    let f_epochs: usize = read_env("TUNE_F_EPOCHS", 3000);
    let f_lr: f64 = read_env("TUNE_F_LR", 1.0);
    let epochs: usize = read_env("TUNE_EPOCHS", 300);
    let lr_gen: f64 = read_env("TUNE_LR_GEN", 0.003);
    let lr_adv: f64 = read_env("TUNE_LR_ADV", 0.02);
    let adv_steps: usize = read_env("TUNE_ADV_STEPS", 2);
    let lambda_ratio: f64 = read_env("TUNE_LR_RATIO", 0.05);
    for seed in [0u64, 1, 2] {
        let full = generate(&SyntheticConfig { n: 4000, seed, ..SyntheticConfig::default() }).unwrap();
        let (train, test) = split(&full, &SplitSpec::new(0.7, seed)).unwrap();
        let base = train_logreg(&train, f_epochs, f_lr, seed).unwrap();
        let test_probs = base.predict_proba(&test.x).unwrap();
        let test_logits: Vec<f64> = test_probs.iter().map(|&p| clamped_logit(p, 1e-6)).collect();
        let yhat_f: Vec<u8> = test_logits.iter().map(|&l| u8::from(l > 0.0)).collect();
        println!(
            "seed {seed}: base acc {:.4} p-rule {:.4}",
            metrics::accuracy(&yhat_f, &test.y).unwrap(),
            metrics::p_rule(&yhat_f, &test.s).unwrap()
        );
        for lf in [1.0, 2.0, 4.0, 6.0, 8.0] {
            let cfg = CommodConfig {
                k: 2,
                lambda_fair: lf,
                lambda_ratio,
                fairness_mode: FairnessMode::Dp,
                epochs,
                lr_gen,
                lr_adv,
                adv_steps_per_gen_step: adv_steps,
                seed,
                ..CommodConfig::default()
            };
            let trained = train_commod(&train, &base, &cfg).unwrap();
            let yhat_g = trained.predictions(&test.x, &test_logits).unwrap();
            let last = trained.history.last().unwrap();
            println!(
                "  commod lf={lf}: acc {:.4} p-rule {:.4} changes {:.4} (l_ratio {:.3} l_s {:.3})",
                metrics::accuracy(&yhat_g, &test.y).unwrap(),
                metrics::p_rule(&yhat_g, &test.s).unwrap(),
                metrics::change_proportion(&yhat_f, &yhat_g).unwrap(),
                last.l_ratio,
                last.l_s
            );
        }
    }
}

#[test]
#[ignore]
fn knee_scan() {
    let lambda_ratio: f64 = read_env("TUNE_LR_RATIO", 0.1);
    let warmup: usize = read_env("TUNE_WARMUP", 5);
    let lr_gen: f64 = read_env("TUNE_LR_GEN", 0.003);
    let lr_adv: f64 = read_env("TUNE_LR_ADV", 0.01);
    let adv_steps: usize = read_env("TUNE_ADV_STEPS", 1);
    let epochs: usize = read_env("TUNE_EPOCHS", 300);
    for seed in [0u64, 1, 2] {
        let full = generate(&SyntheticConfig { n: 4000, seed, ..SyntheticConfig::default() }).unwrap();
        let (train, test) = split(&full, &SplitSpec::new(0.7, seed)).unwrap();
        let base = train_logreg(&train, 3000, 1.0, seed).unwrap();
        let test_probs = base.predict_proba(&test.x).unwrap();
        let test_logits: Vec<f64> = test_probs.iter().map(|&p| clamped_logit(p, 1e-6)).collect();
        let yhat_f: Vec<u8> = test_logits.iter().map(|&l| u8::from(l > 0.0)).collect();
        println!(
            "seed {seed}: base acc {:.4} p-rule {:.4}",
            metrics::accuracy(&yhat_f, &test.y).unwrap(),
            metrics::p_rule(&yhat_f, &test.s).unwrap()
        );
        for lf in [4.0, 4.5, 5.0, 5.5, 6.0] {
            let cfg = CommodConfig {
                k: 2,
                lambda_fair: lf,
                lambda_ratio,
                fairness_mode: FairnessMode::Dp,
                epochs,
                lr_gen,
                lr_adv,
                adv_steps_per_gen_step: adv_steps,
                adv_warmup_epochs: warmup,
                seed,
                ..CommodConfig::default()
            };
            let trained = train_commod(&train, &base, &cfg).unwrap();
            let yhat_g = trained.predictions(&test.x, &test_logits).unwrap();
            let last = trained.history.last().unwrap();
            println!(
                "  lf={lf}: acc {:.4} pr {:.4} ch {:.4} (l_ratio {:.3})",
                metrics::accuracy(&yhat_g, &test.y).unwrap(),
                metrics::p_rule(&yhat_g, &test.s).unwrap(),
                metrics::change_proportion(&yhat_f, &yhat_g).unwrap(),
                last.l_ratio
            );
        }
    }
}
