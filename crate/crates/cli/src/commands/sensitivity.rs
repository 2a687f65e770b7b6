//! Sensitivity analysis: replicate the pipeline across seeds and lambda
//! values, then regress the debiased model's distance, accuracy, and
//! fairness on the base model's scores and the lambdas.

use super::{timestamp, write_file};
use crate::config::SensitivityConfig;
use anyhow::{Context, Result};
use commod::basemodel::clamped_logit;
use commod::commod::{train_commod, FairnessMode};
use commod::metrics::{self, ols_fit, OlsFit};
use commod::netcore::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::process::ExitCode;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub seed: u64,
    pub lambda_fair: f64,
    pub lambda_ratio: f64,
    pub fair_f: f64,
    pub acc_f: f64,
    pub dist: f64,
    pub acc_g: f64,
    pub fair_g: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub generated_at: String,
    pub rows: Vec<SensitivityRow>,
    /// Regressors are (intercept, fair_f, acc_f, lambda_ratio, lambda_fair).
    pub dist_fit: OlsFit,
    pub accuracy_fit: OlsFit,
    pub fairness_fit: OlsFit,
}

fn distinct(values: &[f64]) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    sorted.len()
}

fn seed_rows(cfg: &SensitivityConfig, seed: u64) -> Result<Vec<SensitivityRow>> {
    let mut run = cfg.run.clone();
    run.split.seed = seed;
    run.base.seed = seed;
    if let Some(s) = &mut run.synthetic {
        s.seed = seed;
    }
    let full = run.load_full_dataset()?;
    let (train, test) = run.split_dataset(&full)?;
    let base = run.base_scorer(&full, &train)?;
    let probs = base.as_scorer().predict_proba_ds(&test)?;
    let eps = base.as_scorer().clamp_eps();
    let test_logits: Vec<f64> = probs.iter().map(|&p| clamped_logit(p, eps)).collect();
    let yhat_f: Vec<u8> = test_logits.iter().map(|&l| u8::from(l > 0.0)).collect();
    let acc_f = metrics::accuracy(&yhat_f, &test.y)?;
    let fair_f = match run.commod.fairness_mode {
        FairnessMode::Dp => metrics::p_rule(&yhat_f, &test.s)?,
        FairnessMode::Eo => metrics::disparate_mistreatment(&yhat_f, &test.y, &test.s)?.dm,
    };
    let mut rows = Vec::new();
    for &lf in &cfg.lambda_fair {
        for &lr in &cfg.lambda_ratio {
            let mut commod_cfg = run.commod.clone();
            commod_cfg.lambda_fair = lf;
            commod_cfg.lambda_ratio = lr;
            commod_cfg.seed = seed;
            let trained = train_commod(&train, base.as_scorer(), &commod_cfg)
                .with_context(|| format!("seed {seed} lf {lf} lr {lr}"))?;
            let yhat_g = trained.predictions(&test.x, &test_logits)?;
            let fair_g = match commod_cfg.fairness_mode {
                FairnessMode::Dp => metrics::p_rule(&yhat_g, &test.s)?,
                FairnessMode::Eo => {
                    metrics::disparate_mistreatment(&yhat_g, &test.y, &test.s)?.dm
                }
            };
            rows.push(SensitivityRow {
                seed,
                lambda_fair: lf,
                lambda_ratio: lr,
                fair_f,
                acc_f,
                dist: metrics::change_proportion(&yhat_f, &yhat_g)?,
                acc_g: metrics::accuracy(&yhat_g, &test.y)?,
                fair_g,
            });
        }
    }
    Ok(rows)
}

pub fn fit_regressions(rows: &[SensitivityRow]) -> Result<(OlsFit, OlsFit, OlsFit)> {
    let x = Mat::from_rows(
        rows.iter()
            .map(|r| vec![r.fair_f, r.acc_f, r.lambda_ratio, r.lambda_fair])
            .collect(),
    )?;
    let dist: Vec<f64> = rows.iter().map(|r| r.dist).collect();
    let acc: Vec<f64> = rows.iter().map(|r| r.acc_g).collect();
    let fair: Vec<f64> = rows.iter().map(|r| r.fair_g).collect();
    Ok((ols_fit(&x, &dist)?, ols_fit(&x, &acc)?, ols_fit(&x, &fair)?))
}

pub fn run(config_path: &Path, out: Option<&Path>, parallel: Option<usize>) -> Result<ExitCode> {
    let cfg = match SensitivityConfig::load(config_path) {
        Ok(cfg) => cfg,
        Err(err) => return super::usage_error(&format!("{err:#}")),
    };
    if cfg.seeds < 5 {
        return super::usage_error("sensitivity needs at least 5 seeds");
    }
    if distinct(&cfg.lambda_fair) < 2 || distinct(&cfg.lambda_ratio) < 2 {
        return super::usage_error("lambda columns constant, regression rank-deficient");
    }
    let Some(out_dir) = out.map(Path::to_path_buf).or(cfg.run.out_dir.clone()) else {
        return super::usage_error("no output directory (config out_dir or --out)");
    };
    if let Some(threads) = parallel {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }

    let seeds: Vec<u64> = (0..cfg.seeds as u64).collect();
    let per_seed: Vec<Result<Vec<SensitivityRow>>> =
        seeds.par_iter().map(|&seed| seed_rows(&cfg, seed)).collect();
    let mut rows = Vec::new();
    for r in per_seed {
        rows.extend(r?);
    }

    let (dist_fit, accuracy_fit, fairness_fit) = fit_regressions(&rows)?;
    println!(
        "R^2: dist {:.4}, accuracy {:.4}, fairness {:.4} over {} runs",
        dist_fit.r_squared,
        accuracy_fit.r_squared,
        fairness_fit.r_squared,
        rows.len()
    );
    let report = SensitivityReport {
        generated_at: timestamp(),
        rows,
        dist_fit,
        accuracy_fit,
        fairness_fit,
    };
    write_file(
        &out_dir.join("sensitivity.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    let mut csv =
        String::from("seed,lambda_fair,lambda_ratio,fair_f,acc_f,dist,acc_g,fair_g\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.seed, r.lambda_fair, r.lambda_ratio, r.fair_f, r.acc_f, r.dist, r.acc_g, r.fair_g
        ));
    }
    write_file(&out_dir.join("sensitivity.csv"), &csv)?;
    println!("outputs in {}", out_dir.display());
    Ok(ExitCode::SUCCESS)
}
