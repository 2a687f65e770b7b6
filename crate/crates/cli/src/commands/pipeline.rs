//! End-to-end pipeline: load, split, base model, debiaser, reports.

use super::{report_for, timestamp, write_file};
use crate::config::RunConfig;
use anyhow::{Context, Result};
use commod::basemodel::clamped_logit;
use commod::commod::{explain, train_commod, ConceptReport, EXPLAIN_EPS};
use commod::metrics::{calibration_table, FairnessReport};
use commod::tabular::Dataset;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::process::ExitCode;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub generated_at: String,
    pub fairness_mode: commod::commod::FairnessMode,
    pub seed: u64,
    pub base_train: FairnessReport,
    pub base_test: FairnessReport,
    pub commod_train: FairnessReport,
    pub commod_test: FairnessReport,
    pub concepts: ConceptReport,
}

struct Evaluated {
    probs: Vec<f64>,
    logits: Vec<f64>,
    yhat_f: Vec<u8>,
}

fn evaluate_base(ds: &Dataset, scorer: &dyn commod::basemodel::Scorer) -> Result<Evaluated> {
    let probs = scorer.predict_proba_ds(ds).context("stage base (scoring)")?;
    let eps = scorer.clamp_eps();
    let logits: Vec<f64> = probs.iter().map(|&p| clamped_logit(p, eps)).collect();
    let yhat_f: Vec<u8> = logits.iter().map(|&l| u8::from(l > 0.0)).collect();
    Ok(Evaluated {
        probs,
        logits,
        yhat_f,
    })
}

pub fn run(
    config_path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    synthetic: bool,
    fairness: Option<&str>,
) -> Result<ExitCode> {
    let cfg = match RunConfig::load(config_path) {
        Ok(cfg) => cfg,
        Err(err) => return super::usage_error(&format!("{err:#}")),
    };
    let cfg = match cfg.with_overrides(seed, synthetic, fairness) {
        Ok(cfg) => cfg,
        Err(err) => return super::usage_error(&format!("{err:#}")),
    };
    let Some(out_dir) = out.map(Path::to_path_buf).or(cfg.out_dir.clone()) else {
        return super::usage_error("no output directory (config out_dir or --out)");
    };

    let full = cfg.load_full_dataset()?;
    let (train, test) = cfg.split_dataset(&full)?;
    let base = cfg.base_scorer(&full, &train)?;
    let train_eval = evaluate_base(&train, base.as_scorer())?;
    let test_eval = evaluate_base(&test, base.as_scorer())?;

    let trained =
        train_commod(&train, base.as_scorer(), &cfg.commod).context("stage commod (train)")?;
    let g_train = trained
        .scores(&train.x, &train_eval.logits)
        .context("stage commod (scoring)")?;
    let g_test = trained
        .scores(&test.x, &test_eval.logits)
        .context("stage commod (scoring)")?;
    let yhat_g_train: Vec<u8> = g_train.iter().map(|&g| u8::from(g > 0.5)).collect();
    let yhat_g_test: Vec<u8> = g_test.iter().map(|&g| u8::from(g > 0.5)).collect();

    let report = RunReport {
        generated_at: timestamp(),
        fairness_mode: cfg.commod.fairness_mode,
        seed: cfg.commod.seed,
        base_train: report_for(&train.y, &train.s, &train_eval.yhat_f, &train_eval.yhat_f)
            .context("stage report")?,
        base_test: report_for(&test.y, &test.s, &test_eval.yhat_f, &test_eval.yhat_f)
            .context("stage report")?,
        commod_train: report_for(&train.y, &train.s, &train_eval.yhat_f, &yhat_g_train)
            .context("stage report")?,
        commod_test: report_for(&test.y, &test.s, &test_eval.yhat_f, &yhat_g_test)
            .context("stage report")?,
        concepts: explain(&trained.ratio_net, &train.feature_names, EXPLAIN_EPS)
            .context("stage report (explain)")?,
    };

    write_file(
        &out_dir.join("report.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    write_file(&out_dir.join("base_model.json"), &base.to_json())?;
    write_file(&out_dir.join("commod_model.json"), &trained.to_json())?;

    let calib = calibration_table(&test_eval.probs, &g_test, 10).context("stage report")?;
    let mut calib_csv = String::from("lo,hi,count,mean_f,mean_g\n");
    for bin in &calib {
        calib_csv.push_str(&format!(
            "{},{},{},{},{}\n",
            bin.lo,
            bin.hi,
            bin.count,
            bin.mean_f.map(|v| v.to_string()).unwrap_or_default(),
            bin.mean_g.map(|v| v.to_string()).unwrap_or_default(),
        ));
    }
    write_file(&out_dir.join("calibration.csv"), &calib_csv)?;

    let mut history_csv = String::from(
        "epoch,l_y,l_s,l_ratio,l_sparsity,l_diversity,total,accuracy,p_rule,dm,change_proportion\n",
    );
    for r in &trained.history {
        history_csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.epoch,
            r.l_y,
            r.l_s,
            r.l_ratio,
            r.l_sparsity,
            r.l_diversity,
            r.total,
            r.accuracy,
            r.p_rule,
            r.dm,
            r.change_proportion
        ));
    }
    write_file(&out_dir.join("history.csv"), &history_csv)?;

    println!(
        "base     test: accuracy {:.4}  p-rule {:.4}  dm {:.4}",
        report.base_test.accuracy, report.base_test.p_rule, report.base_test.dm
    );
    println!(
        "debiased test: accuracy {:.4}  p-rule {:.4}  dm {:.4}  changes {:.4}",
        report.commod_test.accuracy,
        report.commod_test.p_rule,
        report.commod_test.dm,
        report.commod_test.change_proportion
    );
    println!("reports written to {}", out_dir.display());
    Ok(ExitCode::SUCCESS)
}
