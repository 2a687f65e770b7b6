//! Assign a (fairness, accuracy) point to its quartile cell.

use anyhow::{Context, Result};
use commod::interp_eval::SegmentGrid;
use std::path::Path;
use std::process::ExitCode;

pub fn run(grid_spec: &str, fairness: f64, accuracy: f64) -> Result<ExitCode> {
    let grid = if SegmentGrid::builtin_names().contains(&grid_spec) {
        SegmentGrid::builtin(grid_spec)?
    } else if Path::new(grid_spec).exists() {
        let text = std::fs::read_to_string(grid_spec)
            .with_context(|| format!("reading grid {grid_spec}"))?;
        SegmentGrid::from_json(&text)?
    } else {
        return super::usage_error(&format!(
            "grid '{grid_spec}' is neither a builtin name ({}) nor a file",
            SegmentGrid::builtin_names().join(", ")
        ));
    };
    let (fq, aq) = grid.assign(fairness, accuracy);
    println!(
        "{}",
        serde_json::json!({
            "fairness_quartile": format!("Q{fq}"),
            "accuracy_quartile": format!("Q{aq}"),
        })
    );
    Ok(ExitCode::SUCCESS)
}
