//! Run configuration files and shared data-loading helpers.

use anyhow::{bail, Context, Result};
use commod::basemodel::{train_logreg, ExternalScores, LogisticModel, Scorer};
use commod::commod::CommodConfig;
use commod::synth::{generate, SyntheticConfig};
use commod::tabular::{load_csv, preprocess, split, Dataset, Schema, SplitSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

fn default_base_epochs() -> usize {
    400
}
fn default_base_lr() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaseConfig {
    #[serde(default = "default_base_epochs")]
    pub epochs: usize,
    #[serde(default = "default_base_lr")]
    pub lr: f64,
    #[serde(default)]
    pub seed: u64,
    /// External probabilities CSV (row_index, probability) over the full
    /// dataset; when present the logistic model is not trained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores_path: Option<PathBuf>,
}

impl Default for BaseConfig {
    fn default() -> Self {
        BaseConfig {
            epochs: default_base_epochs(),
            lr: default_base_lr(),
            seed: 0,
            scores_path: None,
        }
    }
}

fn default_split() -> SplitSpec {
    SplitSpec::new(0.7, 0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticConfig>,
    #[serde(default = "default_split")]
    pub split: SplitSpec,
    #[serde(default)]
    pub base: BaseConfig,
    pub commod: CommodConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    /// Apply command-line overrides.
    pub fn with_overrides(
        mut self,
        seed: Option<u64>,
        synthetic: bool,
        fairness: Option<&str>,
    ) -> Result<Self> {
        if let Some(seed) = seed {
            self.split.seed = seed;
            self.base.seed = seed;
            self.commod.seed = seed;
            if let Some(s) = &mut self.synthetic {
                s.seed = seed;
            }
        }
        if synthetic && self.synthetic.is_none() {
            self.synthetic = Some(SyntheticConfig::default());
        }
        if let Some(mode) = fairness {
            self.commod.fairness_mode = match mode {
                "dp" => commod::commod::FairnessMode::Dp,
                "eo" => commod::commod::FairnessMode::Eo,
                other => bail!("unknown fairness mode '{other}' (expected dp or eo)"),
            };
        }
        Ok(self)
    }

    /// Load (or generate) the full dataset.
    pub fn load_full_dataset(&self) -> Result<Dataset> {
        if let Some(synth) = &self.synthetic {
            return generate(synth).context("stage load (synthetic)");
        }
        let Some(dataset) = &self.dataset else {
            bail!("config names neither a dataset nor a synthetic block");
        };
        let Some(schema_path) = &self.schema else {
            bail!("dataset configs need a schema path");
        };
        let schema_text = std::fs::read_to_string(schema_path)
            .with_context(|| format!("reading schema {}", schema_path.display()))?;
        let schema = Schema::from_json(&schema_text).context("stage load (schema)")?;
        let raw = load_csv(dataset, &schema).context("stage load (csv)")?;
        preprocess(&raw, &schema).context("stage load (preprocess)")
    }

    pub fn split_dataset(&self, full: &Dataset) -> Result<(Dataset, Dataset)> {
        split(full, &self.split).context("stage split")
    }

    /// Train the logistic base model or wrap external scores.
    pub fn base_scorer(&self, full: &Dataset, train: &Dataset) -> Result<BaseScorer> {
        if let Some(path) = &self.base.scores_path {
            let scores = ExternalScores::load_csv(path, full.n()).context("stage base (scores)")?;
            return Ok(BaseScorer::External(scores));
        }
        let model = train_logreg(train, self.base.epochs, self.base.lr, self.base.seed)
            .context("stage base (train)")?;
        Ok(BaseScorer::Logistic(model))
    }
}

/// Either a trained logistic model or externally supplied probabilities.
pub enum BaseScorer {
    Logistic(LogisticModel),
    External(ExternalScores),
}

impl BaseScorer {
    pub fn as_scorer(&self) -> &dyn Scorer {
        match self {
            BaseScorer::Logistic(m) => m,
            BaseScorer::External(s) => s,
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            BaseScorer::Logistic(m) => serde_json::to_string_pretty(m).expect("model serializes"),
            BaseScorer::External(s) => serde_json::to_string_pretty(s).expect("scores serialize"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambda_fair: Vec<f64>,
    pub lambda_ratio: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_sparsity: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_diversity: Option<Vec<f64>>,
    pub seeds: Vec<u64>,
    /// Builtin grid name or path; when absent the segmentation is computed
    /// from this sweep's own scores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_grid: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    pub grid: GridSpec,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Ok(serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    pub seeds: usize,
    pub lambda_fair: Vec<f64>,
    pub lambda_ratio: Vec<f64>,
}

impl SensitivityConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Ok(serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?)
    }
}
