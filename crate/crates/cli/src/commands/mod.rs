//! Subcommand implementations.

pub mod explain;
pub mod pipeline;
pub mod segment;
pub mod sensitivity;
pub mod sweep;
pub mod verify;

use anyhow::{Context, Result};
use commod::metrics::{fairness_report, FairnessReport, PredictionTable};
use std::path::Path;
use std::process::ExitCode;

pub const USAGE: u8 = 1;
pub const VERIFY_FAIL: u8 = 3;

pub fn usage_error(msg: &str) -> Result<ExitCode> {
    eprintln!("error: {msg}");
    Ok(ExitCode::from(USAGE))
}

/// Seconds since the epoch; reports keep this in its own field so the rest
/// of the document stays byte-reproducible.
pub fn timestamp() -> String {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_else(|_| "0".to_string())
}

pub fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

/// Fairness report of predictions `yhat` measured against the base
/// predictions `yhat_f`.
pub fn report_for(
    y: &[u8],
    s: &[u8],
    yhat_f: &[u8],
    yhat: &[u8],
) -> Result<FairnessReport> {
    let table = PredictionTable::new(
        y.to_vec(),
        s.to_vec(),
        yhat_f.to_vec(),
        yhat.to_vec(),
        None,
        None,
    )?;
    Ok(fairness_report(&table)?)
}
