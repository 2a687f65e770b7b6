//! Hyperparameter grid sweep with quartile aggregation of change counts.

use super::{timestamp, write_file};
use crate::config::{BaseScorer, SweepConfig};
use anyhow::{Context, Result};
use commod::basemodel::clamped_logit;
use commod::commod::{train_commod, CommodConfig, FairnessMode};
use commod::interp_eval::{FairnessOrientation, SegmentGrid};
use commod::metrics;
use commod::tabular::Dataset;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub config_id: String,
    pub lambda_fair: f64,
    pub lambda_ratio: f64,
    pub lambda_sparsity: f64,
    pub lambda_diversity: f64,
    pub seed: u64,
    pub accuracy: Option<f64>,
    /// P-Rule for DP sweeps, DM for EO sweeps.
    pub fairness: Option<f64>,
    pub change_proportion: Option<f64>,
    pub active_weights: Option<usize>,
    pub sparsity_fraction: Option<f64>,
    pub max_abs_cos: Option<f64>,
    pub runtime_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub generated_at: String,
    pub fairness_mode: FairnessMode,
    pub grid: SegmentGrid,
    pub rows: Vec<SweepRow>,
    /// Mean change proportion per (fairness quartile, accuracy quartile);
    /// None marks cells no run landed in.
    pub quartile_table: [[Option<f64>; 4]; 4],
}

struct SeedData {
    train: Dataset,
    test: Dataset,
    base: BaseScorer,
    test_logits: Vec<f64>,
    yhat_f_test: Vec<u8>,
}

fn prepare_seed(cfg: &SweepConfig, seed: u64) -> Result<SeedData> {
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
    let yhat_f_test: Vec<u8> = test_logits.iter().map(|&l| u8::from(l > 0.0)).collect();
    Ok(SeedData {
        train,
        test,
        base,
        test_logits,
        yhat_f_test,
    })
}

fn run_combo(data: &SeedData, commod_cfg: &CommodConfig) -> Result<SweepRow> {
    let start = Instant::now();
    let trained = train_commod(&data.train, data.base.as_scorer(), commod_cfg)?;
    let yhat_g = trained.predictions(&data.test.x, &data.test_logits)?;
    let accuracy = metrics::accuracy(&yhat_g, &data.test.y)?;
    let fairness = match commod_cfg.fairness_mode {
        FairnessMode::Dp => metrics::p_rule(&yhat_g, &data.test.s)?,
        FairnessMode::Eo => {
            metrics::disparate_mistreatment(&yhat_g, &data.test.y, &data.test.s)?.dm
        }
    };
    let change = metrics::change_proportion(&data.yhat_f_test, &yhat_g)?;
    let (active, sparsity_fraction) = metrics::concept_sparsity(&trained.ratio_net.w, 0.01)?;
    let max_cos = metrics::max_abs_cosine(&trained.ratio_net.w);
    Ok(SweepRow {
        config_id: String::new(),
        lambda_fair: commod_cfg.lambda_fair,
        lambda_ratio: commod_cfg.lambda_ratio,
        lambda_sparsity: commod_cfg.lambda_sparsity,
        lambda_diversity: commod_cfg.lambda_diversity,
        seed: commod_cfg.seed,
        accuracy: Some(accuracy),
        fairness: Some(fairness),
        change_proportion: Some(change),
        active_weights: Some(active),
        sparsity_fraction: Some(sparsity_fraction),
        max_abs_cos: Some(max_cos),
        runtime_s: start.elapsed().as_secs_f64(),
        error: None,
    })
}

pub fn aggregate(
    rows: &[SweepRow],
    grid: &SegmentGrid,
) -> [[Option<f64>; 4]; 4] {
    let mut sums = [[0.0f64; 4]; 4];
    let mut counts = [[0usize; 4]; 4];
    for row in rows {
        let (Some(fairness), Some(accuracy), Some(change)) =
            (row.fairness, row.accuracy, row.change_proportion)
        else {
            continue;
        };
        let (fq, aq) = grid.assign(fairness, accuracy);
        sums[fq as usize - 1][aq as usize - 1] += change;
        counts[fq as usize - 1][aq as usize - 1] += 1;
    }
    let mut table = [[None; 4]; 4];
    for f in 0..4 {
        for a in 0..4 {
            if counts[f][a] > 0 {
                table[f][a] = Some(sums[f][a] / counts[f][a] as f64);
            }
        }
    }
    table
}

fn resolve_grid(
    spec: Option<&str>,
    rows: &[SweepRow],
    mode: FairnessMode,
) -> Result<SegmentGrid> {
    if let Some(name) = spec {
        if SegmentGrid::builtin_names().contains(&name) {
            return Ok(SegmentGrid::builtin(name)?);
        }
        let text = std::fs::read_to_string(name)
            .with_context(|| format!("reading segment grid {name}"))?;
        return Ok(SegmentGrid::from_json(&text)?);
    }
    let fairness: Vec<f64> = rows.iter().filter_map(|r| r.fairness).collect();
    let accuracy: Vec<f64> = rows.iter().filter_map(|r| r.accuracy).collect();
    let orientation = match mode {
        FairnessMode::Dp => FairnessOrientation::HigherBetter,
        FairnessMode::Eo => FairnessOrientation::LowerBetter,
    };
    Ok(SegmentGrid::from_scores(&fairness, &accuracy, orientation)?)
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut csv = String::from(
        "config_id,lambda_fair,lambda_ratio,lambda_sparsity,lambda_diversity,seed,accuracy,fairness,change_proportion,active_weights,sparsity_fraction,max_abs_cos,runtime_s,error\n",
    );
    for r in rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.config_id,
            r.lambda_fair,
            r.lambda_ratio,
            r.lambda_sparsity,
            r.lambda_diversity,
            r.seed,
            r.accuracy.map(|v| v.to_string()).unwrap_or_default(),
            r.fairness.map(|v| v.to_string()).unwrap_or_default(),
            r.change_proportion.map(|v| v.to_string()).unwrap_or_default(),
            r.active_weights.map(|v| v.to_string()).unwrap_or_default(),
            r.sparsity_fraction.map(|v| v.to_string()).unwrap_or_default(),
            r.max_abs_cos.map(|v| v.to_string()).unwrap_or_default(),
            r.runtime_s,
            r.error.clone().unwrap_or_default().replace(',', ";"),
        ));
    }
    csv
}

fn table_to_csv(table: &[[Option<f64>; 4]; 4]) -> String {
    let mut csv = String::from("fairness_quartile,acc_q1,acc_q2,acc_q3,acc_q4\n");
    for (f, row) in table.iter().enumerate() {
        csv.push_str(&format!(
            "Q{},{},{},{},{}\n",
            f + 1,
            row[0].map(|v| v.to_string()).unwrap_or_default(),
            row[1].map(|v| v.to_string()).unwrap_or_default(),
            row[2].map(|v| v.to_string()).unwrap_or_default(),
            row[3].map(|v| v.to_string()).unwrap_or_default(),
        ));
    }
    csv
}

pub fn run(
    config_path: &Path,
    out: Option<&Path>,
    parallel: Option<usize>,
    synthetic: bool,
) -> Result<ExitCode> {
    let mut cfg = match SweepConfig::load(config_path) {
        Ok(cfg) => cfg,
        Err(err) => return super::usage_error(&format!("{err:#}")),
    };
    if synthetic && cfg.run.synthetic.is_none() {
        cfg.run.synthetic = Some(commod::synth::SyntheticConfig::default());
    }
    if cfg.grid.lambda_fair.is_empty() || cfg.grid.lambda_ratio.is_empty() || cfg.grid.seeds.is_empty()
    {
        return super::usage_error("sweep grid must name lambda_fair, lambda_ratio and seeds");
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

    // Per-seed data is shared across the lambda grid.
    let mut seed_data: BTreeMap<u64, Arc<SeedData>> = BTreeMap::new();
    for &seed in &cfg.grid.seeds {
        seed_data.insert(
            seed,
            Arc::new(prepare_seed(&cfg, seed).with_context(|| format!("preparing seed {seed}"))?),
        );
    }

    let sparsity_values = cfg
        .grid
        .lambda_sparsity
        .clone()
        .unwrap_or_else(|| vec![cfg.run.commod.lambda_sparsity]);
    let diversity_values = cfg
        .grid
        .lambda_diversity
        .clone()
        .unwrap_or_else(|| vec![cfg.run.commod.lambda_diversity]);

    let mut combos = Vec::new();
    for &seed in &cfg.grid.seeds {
        for &lf in &cfg.grid.lambda_fair {
            for &lr in &cfg.grid.lambda_ratio {
                for &ls in &sparsity_values {
                    for &ld in &diversity_values {
                        let mut commod_cfg = cfg.run.commod.clone();
                        commod_cfg.lambda_fair = lf;
                        commod_cfg.lambda_ratio = lr;
                        commod_cfg.lambda_sparsity = ls;
                        commod_cfg.lambda_diversity = ld;
                        commod_cfg.seed = seed;
                        combos.push(commod_cfg);
                    }
                }
            }
        }
    }

    let mut rows: Vec<SweepRow> = combos
        .par_iter()
        .map(|commod_cfg| {
            let data = &seed_data[&commod_cfg.seed];
            match run_combo(data, commod_cfg) {
                Ok(row) => row,
                Err(err) => SweepRow {
                    config_id: String::new(),
                    lambda_fair: commod_cfg.lambda_fair,
                    lambda_ratio: commod_cfg.lambda_ratio,
                    lambda_sparsity: commod_cfg.lambda_sparsity,
                    lambda_diversity: commod_cfg.lambda_diversity,
                    seed: commod_cfg.seed,
                    accuracy: None,
                    fairness: None,
                    change_proportion: None,
                    active_weights: None,
                    sparsity_fraction: None,
                    max_abs_cos: None,
                    runtime_s: 0.0,
                    error: Some(format!("{err:#}")),
                },
            }
        })
        .collect();
    for (i, row) in rows.iter_mut().enumerate() {
        row.config_id = format!(
            "run{:03}_lf{}_lr{}_ls{}_ld{}_s{}",
            i, row.lambda_fair, row.lambda_ratio, row.lambda_sparsity, row.lambda_diversity, row.seed
        );
    }

    let grid = resolve_grid(
        cfg.grid.segment_grid.as_deref(),
        &rows,
        cfg.run.commod.fairness_mode,
    )?;
    let table = aggregate(&rows, &grid);
    let report = SweepReport {
        generated_at: timestamp(),
        fairness_mode: cfg.run.commod.fairness_mode,
        grid,
        rows,
        quartile_table: table,
    };

    write_file(&out_dir.join("sweep.csv"), &rows_to_csv(&report.rows))?;
    write_file(&out_dir.join("quartile_table.csv"), &table_to_csv(&report.quartile_table))?;
    write_file(
        &out_dir.join("sweep.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;

    let failures = report.rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "sweep complete: {} runs, {} failures; outputs in {}",
        report.rows.len(),
        failures,
        out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}
