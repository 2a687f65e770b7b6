//! Print the concept report of a serialized trained model.

use anyhow::{Context, Result};
use commod::commod::{explain, TrainedCommod};
use std::path::Path;
use std::process::ExitCode;

pub fn run(model_path: &Path, features: Option<&Path>, eps: f64) -> Result<ExitCode> {
    let text = std::fs::read_to_string(model_path)
        .with_context(|| format!("reading model {}", model_path.display()))?;
    let trained = match TrainedCommod::from_json(&text) {
        Ok(t) => t,
        Err(err) => return super::usage_error(&format!("parsing model: {err}")),
    };
    let names: Vec<String> = match features {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading features {}", path.display()))?;
            serde_json::from_str(&text).context("parsing feature names")?
        }
        None => trained.feature_names.clone(),
    };
    let report = explain(&trained.ratio_net, &names, eps)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    for concept in &report.concepts {
        let summary: Vec<String> = concept
            .features
            .iter()
            .take(5)
            .map(|(n, w)| format!("{n} ({w:+.3})"))
            .collect();
        eprintln!(
            "concept {} ({}, head {:+.3}): {}",
            concept.index,
            concept.direction,
            concept.head_weight,
            if concept.empty {
                "no weights above threshold".to_string()
            } else {
                summary.join(", ")
            }
        );
    }
    Ok(ExitCode::SUCCESS)
}
