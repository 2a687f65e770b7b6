//! Quartile segmentation of (fairness, accuracy) space, so change counts are
//! only compared between models of comparable quality. Four builtin grids
//! ship as data files; custom grids come from any method's sweep scores.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Whether larger fairness scores are better (P-Rule) or worse (DM).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessOrientation {
    HigherBetter,
    LowerBetter,
}

/// Three edges per axis, splitting scores into quartiles Q1..Q4 where Q1 is
/// always the worst and Q4 the best. Bracket conventions follow the
/// published tables: higher-better axes use [lo, hi) intervals, lower-better
/// fairness uses (lo, hi] with Q4 = [0, e1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentGrid {
    pub fairness_edges: [f64; 3],
    pub accuracy_edges: [f64; 3],
    pub orientation: FairnessOrientation,
}

const LAW_DP: &str = include_str!("../../data/segment_grids/law_dp.json");
const LAW_EO: &str = include_str!("../../data/segment_grids/law_eo.json");
const COMPAS_DP: &str = include_str!("../../data/segment_grids/compas_dp.json");
const COMPAS_EO: &str = include_str!("../../data/segment_grids/compas_eo.json");

impl SegmentGrid {
    pub fn new(
        fairness_edges: [f64; 3],
        accuracy_edges: [f64; 3],
        orientation: FairnessOrientation,
    ) -> Result<Self> {
        let grid = SegmentGrid {
            fairness_edges,
            accuracy_edges,
            orientation,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, edges) in [
            ("fairness", &self.fairness_edges),
            ("accuracy", &self.accuracy_edges),
        ] {
            if !(edges[0] < edges[1] && edges[1] < edges[2]) {
                return Err(Error::Config(format!(
                    "{name} edges must be strictly increasing: {edges:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let grid: SegmentGrid = serde_json::from_str(text)?;
        grid.validate()?;
        Ok(grid)
    }

    /// "law_dp", "law_eo", "compas_dp", "compas_eo".
    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name {
            "law_dp" => LAW_DP,
            "law_eo" => LAW_EO,
            "compas_dp" => COMPAS_DP,
            "compas_eo" => COMPAS_EO,
            other => {
                return Err(Error::Config(format!(
                    "unknown builtin grid '{other}' (expected law_dp, law_eo, compas_dp, compas_eo)"
                )))
            }
        };
        SegmentGrid::from_json(text)
    }

    pub fn builtin_names() -> [&'static str; 4] {
        ["law_dp", "law_eo", "compas_dp", "compas_eo"]
    }

    /// Quartile assignment, 1..=4 per axis. Q4 is always the best quality.
    pub fn assign(&self, fairness: f64, accuracy: f64) -> (u8, u8) {
        let e = &self.fairness_edges;
        let fair_q = match self.orientation {
            FairnessOrientation::HigherBetter => {
                // Q1 [0,e1) Q2 [e1,e2) Q3 [e2,e3) Q4 [e3,1]
                if fairness < e[0] {
                    1
                } else if fairness < e[1] {
                    2
                } else if fairness < e[2] {
                    3
                } else {
                    4
                }
            }
            FairnessOrientation::LowerBetter => {
                // Q4 [0,e1] Q3 (e1,e2] Q2 (e2,e3] Q1 (e3,..]
                if fairness <= e[0] {
                    4
                } else if fairness <= e[1] {
                    3
                } else if fairness <= e[2] {
                    2
                } else {
                    1
                }
            }
        };
        let a = &self.accuracy_edges;
        let acc_q = if accuracy < a[0] {
            1
        } else if accuracy < a[1] {
            2
        } else if accuracy < a[2] {
            3
        } else {
            4
        };
        (fair_q, acc_q)
    }

    /// Quartile edges from observed sweep scores (both axes), so any method
    /// can define the segmentation. Linear-interpolated percentiles.
    pub fn from_scores(
        fairness: &[f64],
        accuracy: &[f64],
        orientation: FairnessOrientation,
    ) -> Result<Self> {
        let fe = quartile_edges(fairness)?;
        let ae = quartile_edges(accuracy)?;
        SegmentGrid::new(fe, ae, orientation)
    }
}

fn quartile_edges(scores: &[f64]) -> Result<[f64; 3]> {
    if scores.len() < 4 {
        return Err(Error::Degenerate(format!(
            "need at least 4 scores for quartiles, got {}",
            scores.len()
        )));
    }
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pct = |p: f64| -> f64 {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    Ok([pct(0.25), pct(0.5), pct(0.75)])
}
