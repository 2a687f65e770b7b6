//! Scalar evaluation metrics: fairness (P-Rule, Disparate Mistreatment),
//! accuracy, change proportion, calibration tables, concept sparsity and
//! diversity summaries, and an ordinary-least-squares fit for the
//! sensitivity analysis.

use crate::error::{Error, Result};
use crate::netcore::Mat;
use serde::{Deserialize, Serialize};

/// Aligned predictions of the base model f and the updated model g, plus
/// ground truth and sensitive attribute. The substrate of every metric and
/// of the change-identity verifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionTable {
    pub y: Vec<u8>,
    pub s: Vec<u8>,
    pub yhat_f: Vec<u8>,
    pub yhat_g: Vec<u8>,
    pub score_f: Option<Vec<f64>>,
    pub score_g: Option<Vec<f64>>,
}

impl PredictionTable {
    pub fn new(
        y: Vec<u8>,
        s: Vec<u8>,
        yhat_f: Vec<u8>,
        yhat_g: Vec<u8>,
        score_f: Option<Vec<f64>>,
        score_g: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = y.len();
        if [s.len(), yhat_f.len(), yhat_g.len()].iter().any(|&l| l != n) {
            return Err(Error::Shape("prediction table columns disagree on n".into()));
        }
        for (name, col) in [("y", &y), ("s", &s), ("yhat_f", &yhat_f), ("yhat_g", &yhat_g)] {
            if col.iter().any(|&v| v > 1) {
                return Err(Error::Degenerate(format!("{name} is not binary")));
            }
        }
        for (name, scores, yhat) in [("score_f", &score_f, &yhat_f), ("score_g", &score_g, &yhat_g)]
        {
            if let Some(scores) = scores {
                if scores.len() != n {
                    return Err(Error::Shape(format!("{name} length mismatch")));
                }
                for (sc, &lab) in scores.iter().zip(yhat.iter()) {
                    if !(*sc > 0.0 && *sc < 1.0) {
                        return Err(Error::Degenerate(format!(
                            "{name} value {sc} outside (0,1)"
                        )));
                    }
                    if u8::from(*sc > 0.5) != lab {
                        return Err(Error::Degenerate(format!(
                            "{name} inconsistent with its thresholded labels"
                        )));
                    }
                }
            }
        }
        Ok(PredictionTable {
            y,
            s,
            yhat_f,
            yhat_g,
            score_f,
            score_g,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Fairness and change summary for one model pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub p_rule: f64,
    pub delta_tpr: f64,
    pub delta_fpr: f64,
    pub dm: f64,
    pub accuracy: f64,
    pub change_proportion: f64,
}

/// Minimum of the two positive-rate ratios across sensitive groups.
/// Conventions: both rates zero -> 1.0 (perfectly aligned); exactly one rate
/// zero -> 0.0 (maximally unfair).
pub fn p_rule(yhat: &[u8], s: &[u8]) -> Result<f64> {
    if yhat.len() != s.len() {
        return Err(Error::Shape("p_rule inputs disagree on n".into()));
    }
    let mut pos = [0usize; 2];
    let mut tot = [0usize; 2];
    for (&p, &g) in yhat.iter().zip(s) {
        tot[g as usize] += 1;
        pos[g as usize] += p as usize;
    }
    if tot[0] == 0 || tot[1] == 0 {
        return Err(Error::Degenerate("a sensitive group is absent".into()));
    }
    let rate0 = pos[0] as f64 / tot[0] as f64;
    let rate1 = pos[1] as f64 / tot[1] as f64;
    Ok(rate_ratio(rate1, rate0))
}

/// P-Rule from positive rates, applying the zero conventions.
pub fn rate_ratio(rate_a: f64, rate_b: f64) -> f64 {
    if rate_a == 0.0 && rate_b == 0.0 {
        1.0
    } else if rate_a == 0.0 || rate_b == 0.0 {
        0.0
    } else {
        (rate_a / rate_b).min(rate_b / rate_a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisparateMistreatment {
    pub delta_tpr: f64,
    pub delta_fpr: f64,
    pub dm: f64,
}

/// DM = |TPR_1 - TPR_0| + |FPR_1 - FPR_0|. Empty (s, y) cells contribute
/// rate 0 with a warning rather than failing (small test splits hit this).
pub fn disparate_mistreatment(yhat: &[u8], y: &[u8], s: &[u8]) -> Result<DisparateMistreatment> {
    if yhat.len() != y.len() || yhat.len() != s.len() {
        return Err(Error::Shape("disparate_mistreatment inputs disagree on n".into()));
    }
    // counts[s][y] = (positive predictions, total)
    let mut pos = [[0usize; 2]; 2];
    let mut tot = [[0usize; 2]; 2];
    for i in 0..yhat.len() {
        let (si, yi) = (s[i] as usize, y[i] as usize);
        tot[si][yi] += 1;
        pos[si][yi] += yhat[i] as usize;
    }
    let rate = |s_: usize, y_: usize| -> f64 {
        if tot[s_][y_] == 0 {
            log::warn!("empty (s={s_}, y={y_}) cell in disparate mistreatment; rate treated as 0");
            0.0
        } else {
            pos[s_][y_] as f64 / tot[s_][y_] as f64
        }
    };
    let delta_tpr = (rate(1, 1) - rate(0, 1)).abs();
    let delta_fpr = (rate(1, 0) - rate(0, 0)).abs();
    Ok(DisparateMistreatment {
        delta_tpr,
        delta_fpr,
        dm: delta_tpr + delta_fpr,
    })
}

/// Fraction of rows whose two predictions disagree.
pub fn change_proportion(yhat_f: &[u8], yhat_g: &[u8]) -> Result<f64> {
    if yhat_f.len() != yhat_g.len() {
        return Err(Error::Shape("change_proportion inputs disagree on n".into()));
    }
    if yhat_f.is_empty() {
        return Err(Error::Degenerate("empty prediction arrays".into()));
    }
    let changed = yhat_f.iter().zip(yhat_g).filter(|(a, b)| a != b).count();
    Ok(changed as f64 / yhat_f.len() as f64)
}

pub fn accuracy(yhat: &[u8], y: &[u8]) -> Result<f64> {
    if yhat.len() != y.len() {
        return Err(Error::Shape("accuracy inputs disagree on n".into()));
    }
    if yhat.is_empty() {
        return Err(Error::Degenerate("empty prediction arrays".into()));
    }
    Ok(yhat.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / yhat.len() as f64)
}

/// Full report for a prediction table, using the g-side predictions for
/// fairness and accuracy.
pub fn fairness_report(table: &PredictionTable) -> Result<FairnessReport> {
    let dmr = disparate_mistreatment(&table.yhat_g, &table.y, &table.s)?;
    Ok(FairnessReport {
        p_rule: p_rule(&table.yhat_g, &table.s)?,
        delta_tpr: dmr.delta_tpr,
        delta_fpr: dmr.delta_fpr,
        dm: dmr.dm,
        accuracy: accuracy(&table.yhat_g, &table.y)?,
        change_proportion: change_proportion(&table.yhat_f, &table.yhat_g)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_f: Option<f64>,
    pub mean_g: Option<f64>,
}

/// Equal-width bins of score_f over [0,1]; per bin, the mean of both score
/// arrays. Plot-ready data for the updated-vs-base probability comparison.
pub fn calibration_table(
    score_f: &[f64],
    score_g: &[f64],
    bins: usize,
) -> Result<Vec<CalibrationBin>> {
    if bins < 2 {
        return Err(Error::Config("calibration needs at least 2 bins".into()));
    }
    if score_f.len() != score_g.len() {
        return Err(Error::Shape("calibration inputs disagree on n".into()));
    }
    let mut sums = vec![(0usize, 0.0f64, 0.0f64); bins];
    for (&f, &g) in score_f.iter().zip(score_g) {
        let mut b = (f * bins as f64).floor() as usize;
        if b >= bins {
            b = bins - 1; // score exactly 1.0 joins the top bin
        }
        sums[b].0 += 1;
        sums[b].1 += f;
        sums[b].2 += g;
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(b, (count, sf, sg))| CalibrationBin {
            lo: b as f64 / bins as f64,
            hi: (b + 1) as f64 / bins as f64,
            count,
            mean_f: (count > 0).then(|| sf / count as f64),
            mean_g: (count > 0).then(|| sg / count as f64),
        })
        .collect())
}

/// Count of concept-layer weights above `eps` in magnitude, plus the
/// complementary sparsity fraction (higher = sparser).
pub fn concept_sparsity(w: &Mat, eps: f64) -> Result<(usize, f64)> {
    if !(eps > 0.0) {
        return Err(Error::Config("sparsity threshold must be positive".into()));
    }
    let active = w.data().iter().filter(|v| v.abs() > eps).count();
    let total = w.rows() * w.cols();
    Ok((active, 1.0 - active as f64 / total as f64))
}

/// Jaccard index of the signed supports of two concept rows: entries with
/// |w| > eps keyed by (index, sign). Two empty supports give 0 with a warning.
pub fn concept_jaccard(wi: &[f64], wj: &[f64], eps: f64) -> Result<f64> {
    if wi.len() != wj.len() {
        return Err(Error::Shape("concept rows disagree on d".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Config("jaccard threshold must be positive".into()));
    }
    let signed = |row: &[f64]| -> Vec<(usize, i8)> {
        row.iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > eps)
            .map(|(j, v)| (j, if *v > 0.0 { 1i8 } else { -1i8 }))
            .collect()
    };
    let a = signed(wi);
    let b = signed(wj);
    if a.is_empty() && b.is_empty() {
        log::warn!("both concept rows are empty at eps={eps}; jaccard reported as 0");
        return Ok(0.0);
    }
    let inter = a.iter().filter(|e| b.contains(e)).count();
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Largest |cosine similarity| over unordered pairs of rows of W; zero-norm
/// rows are skipped. Convenience for sweep reporting.
pub fn max_abs_cosine(w: &Mat) -> f64 {
    let k = w.rows();
    let mut best = 0.0f64;
    for i in 0..k {
        let ni = norm(w.row(i));
        if ni < 1e-12 {
            continue;
        }
        for j in i + 1..k {
            let nj = norm(w.row(j));
            if nj < 1e-12 {
                continue;
            }
            let dot: f64 = w.row(i).iter().zip(w.row(j)).map(|(a, b)| a * b).sum();
            best = best.max((dot / (ni * nj)).abs());
        }
    }
    best
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    /// Intercept first, then one coefficient per design column.
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
}

/// Least squares through the normal equations with an intercept column.
/// Near-zero pivots are reported as rank deficiency, naming the offending
/// design column (0 = intercept).
pub fn ols_fit(x: &Mat, y: &[f64]) -> Result<OlsFit> {
    let n = x.rows();
    let p = x.cols() + 1;
    if y.len() != n {
        return Err(Error::Shape("ols inputs disagree on n".into()));
    }
    if n <= x.cols() {
        return Err(Error::Degenerate(format!(
            "ols needs n > p (n={n}, p={})",
            x.cols()
        )));
    }
    // Build X'X and X'y with the implicit leading 1s column.
    let design = |i: usize, j: usize| -> f64 {
        if j == 0 {
            1.0
        } else {
            x.get(i, j - 1)
        }
    };
    let mut xtx = vec![vec![0.0f64; p]; p];
    let mut xty = vec![0.0f64; p];
    for i in 0..n {
        for a in 0..p {
            let da = design(i, a);
            xty[a] += da * y[i];
            for b in 0..p {
                xtx[a][b] += da * design(i, b);
            }
        }
    }
    let beta = solve_gaussian(&mut xtx, &mut xty)?;
    let mut ss_res = 0.0;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let mut ss_tot = 0.0;
    for i in 0..n {
        let pred: f64 = (0..p).map(|a| beta[a] * design(i, a)).sum();
        ss_res += (y[i] - pred) * (y[i] - pred);
        ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
    }
    let r_squared = if ss_tot == 0.0 {
        // Constant response: perfect residuals count as a perfect fit.
        if ss_res < 1e-24 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(OlsFit {
        coefficients: beta,
        r_squared,
    })
}

/// Gaussian elimination with partial pivoting; zero pivots flag the column.
fn solve_gaussian(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>> {
    let p = b.len();
    for col in 0..p {
        let (pivot_row, pivot_val) = (col..p)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty system");
        if pivot_val < 1e-10 {
            return Err(Error::RankDeficient(col));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for r in col + 1..p {
            let factor = a[r][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..p {
                let v = a[col][c];
                a[r][c] -= factor * v;
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; p];
    for col in (0..p).rev() {
        let mut acc = b[col];
        for c in col + 1..p {
            acc -= a[col][c] * x[c];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}
