//! Exact finite-distribution implementations of the cost-sensitive risk
//! machinery: the fairness-aware Bayes-optimal classifier, the
//! change-probability identity, and the flip-budget optima for P-Rule and
//! Disparate Mistreatment. Every result here has a brute-force verifier in
//! [`verify`].

pub mod verify;

use crate::error::{Error, Result};
use crate::metrics::PredictionTable;
use serde::{Deserialize, Serialize};

/// One support point of a finite joint distribution: its probability mass
/// and the three conditionals P(Y=1|x), P(S=1|x), P(Yf=1|x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistPoint {
    pub weight: f64,
    pub eta: f64,
    pub eta_bar: f64,
    pub eta_star: f64,
}

/// Finite-support joint distribution over (X, Y, S, Yf). Priors are the
/// weight-averaged per-point conditionals by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDistribution {
    points: Vec<DistPoint>,
}

impl FiniteDistribution {
    pub fn new(points: Vec<DistPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Degenerate("empty distribution".into()));
        }
        let total: f64 = points.iter().map(|p| p.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Degenerate(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.weight >= 0.0) {
                return Err(Error::Degenerate(format!("negative weight at point {i}")));
            }
            for (name, v) in [("eta", p.eta), ("eta_bar", p.eta_bar), ("eta_star", p.eta_star)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Degenerate(format!(
                        "{name}={v} at point {i} outside [0,1]"
                    )));
                }
            }
        }
        Ok(FiniteDistribution { points })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let points: Vec<DistPoint> = serde_json::from_str(text)?;
        FiniteDistribution::new(points)
    }

    pub fn points(&self) -> &[DistPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// P(Y=1).
    pub fn pi(&self) -> f64 {
        self.points.iter().map(|p| p.weight * p.eta).sum()
    }

    /// P(S=1).
    pub fn pi_bar(&self) -> f64 {
        self.points.iter().map(|p| p.weight * p.eta_bar).sum()
    }

    /// P(Yf=1).
    pub fn pi_star(&self) -> f64 {
        self.points.iter().map(|p| p.weight * p.eta_star).sum()
    }
}

/// Which conditional defines the false-negative/false-positive rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    /// Condition on the true label Y.
    Y,
    /// Condition on the sensitive attribute S.
    S,
    /// Condition on the base model's prediction Yf.
    F,
}

fn conditionals(dist: &FiniteDistribution, target: Target) -> (Vec<f64>, f64) {
    let etas: Vec<f64> = dist
        .points
        .iter()
        .map(|p| match target {
            Target::Y => p.eta,
            Target::S => p.eta_bar,
            Target::F => p.eta_star,
        })
        .collect();
    let prior = dist
        .points
        .iter()
        .zip(&etas)
        .map(|(p, e)| p.weight * e)
        .sum();
    (etas, prior)
}

/// Cost-sensitive risk of a randomized classifier on the finite support.
///
/// Unbalanced: `pi*(1-c)*FNR + (1-pi)*c*FPR`. With `balanced`, the priors
/// are dropped: `(1-c)*FNR + c*FPR`. FNR/FPR are conditional expectations
/// against the selected target.
pub fn cs_risk(
    g: &[f64],
    dist: &FiniteDistribution,
    target: Target,
    c: f64,
    balanced: bool,
) -> Result<f64> {
    if g.len() != dist.len() {
        return Err(Error::Shape(format!(
            "classifier has {} values for {} support points",
            g.len(),
            dist.len()
        )));
    }
    if g.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Degenerate("classifier values outside [0,1]".into()));
    }
    let (etas, prior) = conditionals(dist, target);
    if prior <= 0.0 || prior >= 1.0 {
        return Err(Error::Degenerate(format!(
            "degenerate conditioning: prior {prior} for target {target:?}"
        )));
    }
    // E[eta (1-g)] = pi * FNR, E[(1-eta) g] = (1-pi) * FPR.
    let mut fn_mass = 0.0;
    let mut fp_mass = 0.0;
    for ((p, e), gi) in dist.points.iter().zip(&etas).zip(g) {
        fn_mass += p.weight * e * (1.0 - gi);
        fp_mass += p.weight * (1.0 - e) * gi;
    }
    if balanced {
        Ok((1.0 - c) * fn_mass / prior + c * fp_mass / (1.0 - prior))
    } else {
        Ok((1.0 - c) * fn_mass + c * fp_mass)
    }
}

/// Costs and multipliers of the three-term Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub c: f64,
    pub c_bar: f64,
    pub c_star: f64,
    pub lambda_fair: f64,
    pub lambda_ratio: f64,
}

impl CostSpec {
    pub fn new(c: f64, c_bar: f64, c_star: f64, lambda_fair: f64, lambda_ratio: f64) -> Result<Self> {
        for (name, v) in [("c", c), ("c_bar", c_bar), ("c_star", c_star)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("cost {name}={v} outside (0,1)")));
            }
        }
        Ok(CostSpec {
            c,
            c_bar,
            c_star,
            lambda_fair,
            lambda_ratio,
        })
    }
}

/// Which multiplier attaches to which penalty term. The published pointwise
/// score pairs lambda_ratio with the S-conditional and lambda_fair with the
/// Yf-conditional, which is semantically swapped; `Semantic` restores the
/// natural pairing and is the default. Both pairings minimize the matching
/// Lagrangian, which the exhaustive verifier checks either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MultiplierPairing {
    Semantic,
    StrictPaper,
}

impl MultiplierPairing {
    /// (multiplier on the S term, multiplier on the Yf term)
    fn split(self, costs: &CostSpec) -> (f64, f64) {
        match self {
            MultiplierPairing::Semantic => (costs.lambda_fair, costs.lambda_ratio),
            MultiplierPairing::StrictPaper => (costs.lambda_ratio, costs.lambda_fair),
        }
    }
}

/// Three-term Lagrangian `CS(g; Y, c) - a * CS(g; S, c_bar) - b * CS(g; Yf, c_star)`
/// with (a, b) per the pairing. The penalty terms use the prior-weighted
/// cost-sensitive form, for which the pointwise score of [`boc`] is the
/// exact minimizer; the prior-free balanced form stays available through
/// [`cs_risk`]'s `balanced` flag.
pub fn lagrangian_risk(
    g: &[f64],
    dist: &FiniteDistribution,
    costs: &CostSpec,
    pairing: MultiplierPairing,
) -> Result<f64> {
    let (lam_s, lam_f) = pairing.split(costs);
    let acc = cs_risk(g, dist, Target::Y, costs.c, false)?;
    let fair = cs_risk(g, dist, Target::S, costs.c_bar, false)?;
    let ratio = cs_risk(g, dist, Target::F, costs.c_star, false)?;
    Ok(acc - lam_s * fair - lam_f * ratio)
}

/// Pointwise scores s*(x) whose sign drives the Bayes-optimal classifier.
pub fn boc_scores(dist: &FiniteDistribution, costs: &CostSpec, pairing: MultiplierPairing) -> Vec<f64> {
    let (lam_s, lam_f) = pairing.split(costs);
    dist.points
        .iter()
        .map(|p| {
            p.eta - costs.c - lam_s * (p.eta_bar - costs.c_bar) - lam_f * (p.eta_star - costs.c_star)
        })
        .collect()
}

/// Bayes-optimal classifier: 1 where s*(x) > 0, `alpha` where s*(x) = 0,
/// 0 otherwise.
pub fn boc(
    dist: &FiniteDistribution,
    costs: &CostSpec,
    alpha: f64,
    pairing: MultiplierPairing,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha={alpha} outside [0,1]")));
    }
    Ok(boc_scores(dist, costs, pairing)
        .into_iter()
        .map(|s| {
            if s > 0.0 {
                1.0
            } else if s == 0.0 {
                alpha
            } else {
                0.0
            }
        })
        .collect())
}

/// Which side the change-identity conditions on. The proof's direction
/// (conditioning on the updated prediction) is the exact total-probability
/// identity; the statement's direction is kept for auditing and does not
/// hold in general.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChangeConditioning {
    Proof,
    Statement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub equal: bool,
}

/// Decompose the empirical change probability P(Yf != Yg) by total
/// probability. Empty conditioning cells contribute 0.
pub fn verify_change_identity(table: &PredictionTable) -> ChangeIdentity {
    verify_change_identity_with(table, ChangeConditioning::Proof)
}

pub fn verify_change_identity_with(
    table: &PredictionTable,
    conditioning: ChangeConditioning,
) -> ChangeIdentity {
    let n = table.len() as f64;
    let changed = table
        .yhat_f
        .iter()
        .zip(&table.yhat_g)
        .filter(|(a, b)| a != b)
        .count() as f64;
    let lhs = if n > 0.0 { changed / n } else { 0.0 };

    let count = |pred: &[u8], v: u8| pred.iter().filter(|&&p| p == v).count() as f64;
    let joint = |f_val: u8, g_val: u8| {
        table
            .yhat_f
            .iter()
            .zip(&table.yhat_g)
            .filter(|(&a, &b)| a == f_val && b == g_val)
            .count() as f64
    };
    let rhs = match conditioning {
        ChangeConditioning::Proof => {
            // P(Yg=1) P(Yf=0 | Yg=1) + P(Yg=0) P(Yf=1 | Yg=0)
            let n_g1 = count(&table.yhat_g, 1);
            let n_g0 = count(&table.yhat_g, 0);
            let term1 = if n_g1 > 0.0 { (n_g1 / n) * (joint(0, 1) / n_g1) } else { 0.0 };
            let term0 = if n_g0 > 0.0 { (n_g0 / n) * (joint(1, 0) / n_g0) } else { 0.0 };
            term1 + term0
        }
        ChangeConditioning::Statement => {
            // (1 - c*) P(Yg=0 | Yf=1) + c* P(Yg=1 | Yf=0), c* = P(Yg=1)
            let c_star = count(&table.yhat_g, 1) / n;
            let n_f1 = count(&table.yhat_f, 1);
            let n_f0 = count(&table.yhat_f, 0);
            let fnr = if n_f1 > 0.0 { joint(1, 0) / n_f1 } else { 0.0 };
            let fpr = if n_f0 > 0.0 { joint(0, 1) / n_f0 } else { 0.0 };
            (1.0 - c_star) * fnr + c_star * fpr
        }
    };
    ChangeIdentity {
        lhs,
        rhs,
        equal: (lhs - rhs).abs() < 1e-12,
    }
}

/// Counts of base-model predictions by (prediction, sensitive group):
/// `gamma_ps` is the number of instances with prediction p in group s.
/// Optional `n_sy` carries the label counts used by the DM result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipTable {
    pub gamma_11: usize,
    pub gamma_01: usize,
    pub gamma_10: usize,
    pub gamma_00: usize,
    #[serde(default)]
    pub n_sy: Option<LabelCounts>,
}

/// N_{s,y}: instances in sensitive group s with true label y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub n_s0_y1: usize,
    pub n_s1_y1: usize,
    pub n_s0_y0: usize,
    pub n_s1_y0: usize,
}

impl FlipTable {
    pub fn new(gamma_11: usize, gamma_01: usize, gamma_10: usize, gamma_00: usize) -> Result<Self> {
        let t = FlipTable {
            gamma_11,
            gamma_01,
            gamma_10,
            gamma_00,
            n_sy: None,
        };
        if t.s1() == 0 || t.s0() == 0 {
            return Err(Error::Degenerate("a sensitive group is empty".into()));
        }
        Ok(t)
    }

    pub fn from_predictions(yhat: &[u8], s: &[u8]) -> Result<Self> {
        if yhat.len() != s.len() {
            return Err(Error::Shape("flip table inputs disagree on n".into()));
        }
        let mut counts = [[0usize; 2]; 2]; // [pred][s]
        for (&p, &g) in yhat.iter().zip(s) {
            counts[p as usize][g as usize] += 1;
        }
        FlipTable::new(counts[1][1], counts[0][1], counts[1][0], counts[0][0])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: FlipTable = serde_json::from_str(text)?;
        FlipTable::new(t.gamma_11, t.gamma_01, t.gamma_10, t.gamma_00).map(|mut ok| {
            ok.n_sy = t.n_sy;
            ok
        })
    }

    /// Group sizes.
    pub fn s1(&self) -> usize {
        self.gamma_11 + self.gamma_01
    }

    pub fn s0(&self) -> usize {
        self.gamma_10 + self.gamma_00
    }

    pub fn n(&self) -> usize {
        self.s1() + self.s0()
    }

    /// C = S0 / S1, the fixed population ratio.
    pub fn c(&self) -> f64 {
        self.s0() as f64 / self.s1() as f64
    }

    /// Empirical P-Rule after moving `d11` predictions in group 1 and `d10`
    /// in group 0 (signed deltas on the positive-prediction counts).
    pub fn p_rule_after(&self, d11: i64, d10: i64) -> f64 {
        let (num, den) = self.p_rule_frac_after(d11, d10);
        num as f64 / den as f64
    }

    /// The same P-Rule as an exact fraction (num, den), so comparisons stay
    /// free of rounding-route artifacts. Zero conventions: both rates zero
    /// gives 1/1, exactly one zero gives 0/1.
    pub fn p_rule_frac_after(&self, d11: i64, d10: i64) -> (u64, u64) {
        let g11 = self.gamma_11 as i64 + d11;
        let g10 = self.gamma_10 as i64 + d10;
        debug_assert!(g11 >= 0 && g10 >= 0);
        // rate1/rate0 = (g11 * S0) / (g10 * S1)
        let a = g11 as u64 * self.s0() as u64;
        let b = g10 as u64 * self.s1() as u64;
        match (a == 0, b == 0) {
            (true, true) => (1, 1),
            (true, false) | (false, true) => (0, 1),
            _ if a <= b => (a, b),
            _ => (b, a),
        }
    }

    pub fn p_rule(&self) -> f64 {
        self.p_rule_after(0, 0)
    }
}

/// Order two fractions by cross multiplication.
pub fn frac_cmp(a: (u64, u64), b: (u64, u64)) -> std::cmp::Ordering {
    (a.0 as u128 * b.1 as u128).cmp(&(b.0 as u128 * a.1 as u128))
}

/// How an extreme allocation spends its budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipPlan {
    /// Sensitive group whose predictions are flipped.
    pub group: u8,
    /// Prediction value before the flip.
    pub from_pred: u8,
    /// Number of flips spent.
    pub flips: usize,
}

/// Count deltas realized by an extreme plan.
pub fn plan_deltas(plan: &FlipPlan) -> (i64, i64) {
    let signed = if plan.from_pred == 0 {
        plan.flips as i64
    } else {
        -(plan.flips as i64)
    };
    if plan.group == 1 {
        (signed, 0)
    } else {
        (0, signed)
    }
}

/// Best P-Rule attainable with exactly K flips spent entirely on one side of
/// the positive-rate imbalance: either raising positives in the lagging
/// group or cutting positives in the leading group. Requires the budget to
/// fit in at least one of the two source cells. Extremes are compared as
/// exact fractions; ties keep the rate-raising side.
pub fn max_prule_k_flips(table: &FlipTable, k: usize) -> Result<(f64, FlipPlan)> {
    // Lagging group = lower positive rate; ties treated as group 1 lagging,
    // matching the published WLOG orientation.
    let group1_lags = table.gamma_11 as u64 * table.s0() as u64
        <= table.gamma_10 as u64 * table.s1() as u64;
    // (a) raise positives in the lagging group; (b) cut them in the leader.
    let (cap_a, cap_b) = if group1_lags {
        (table.gamma_01, table.gamma_10)
    } else {
        (table.gamma_00, table.gamma_11)
    };
    let plan_a = FlipPlan {
        group: if group1_lags { 1 } else { 0 },
        from_pred: 0,
        flips: k,
    };
    let plan_b = FlipPlan {
        group: if group1_lags { 0 } else { 1 },
        from_pred: 1,
        flips: k,
    };
    let mut best: Option<((u64, u64), FlipPlan)> = None;
    for (cap, plan) in [(cap_a, plan_a), (cap_b, plan_b)] {
        if k > cap {
            continue;
        }
        let (d11, d10) = plan_deltas(&plan);
        let frac = table.p_rule_frac_after(d11, d10);
        best = match best {
            Some((bf, bp)) if frac_cmp(bf, frac) != std::cmp::Ordering::Less => Some((bf, bp)),
            _ => Some((frac, plan)),
        };
    }
    best.map(|((num, den), plan)| (num as f64 / den as f64, plan))
        .ok_or(Error::InsufficientFlips { k, cap_a, cap_b })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingPoint {
    pub k: usize,
    /// False when no allocation reaches the tolerance within the available
    /// instances; `k` is then the scan cap.
    pub reached: bool,
    pub tolerance: f64,
}

/// Enumerate every count delta reachable with exactly `k` flips: `|d11| +
/// |d10| = k` within the cell caps, covering all four sign quadrants.
fn for_each_allocation<F: FnMut(i64, i64) -> bool>(table: &FlipTable, k: usize, mut f: F) -> bool {
    for x in 0..=k {
        let rem = k - x;
        let d11_options: &[i64] = match x {
            0 => &[0],
            _ => &[x as i64, -(x as i64)],
        };
        let d10_options: &[i64] = match rem {
            0 => &[0],
            _ => &[rem as i64, -(rem as i64)],
        };
        for &d11 in d11_options {
            if d11 > table.gamma_01 as i64 || -d11 > table.gamma_11 as i64 {
                continue;
            }
            for &d10 in d10_options {
                if d10 > table.gamma_00 as i64 || -d10 > table.gamma_10 as i64 {
                    continue;
                }
                if f(d11, d10) {
                    return true;
                }
            }
        }
    }
    false
}

fn max_useful_budget(table: &FlipTable) -> usize {
    table.gamma_11.max(table.gamma_01) + table.gamma_10.max(table.gamma_00)
}

/// Minimum number of flips for which some allocation reaches
/// P-Rule >= 1 - tol, with the default tolerance 1/(S0+S1) reflecting
/// integer granularity. Scans budgets upward over every reachable
/// allocation, extremes included.
pub fn switching_point(table: &FlipTable) -> SwitchingPoint {
    let tol = 1.0 / table.n() as f64;
    switching_point_with_tol(table, tol)
}

pub fn switching_point_with_tol(table: &FlipTable, tol: f64) -> SwitchingPoint {
    let target = 1.0 - tol;
    let cap = max_useful_budget(table);
    for k in 0..=cap {
        if for_each_allocation(table, k, |d11, d10| {
            table.p_rule_after(d11, d10) >= target
        }) {
            return SwitchingPoint {
                k,
                reached: true,
                tolerance: tol,
            };
        }
    }
    SwitchingPoint {
        k: cap,
        reached: false,
        tolerance: tol,
    }
}

/// Smallest budget at which some allocation makes the positive-rate gap
/// reach or cross zero, i.e. the P-Rule minimum switches branch. Below this
/// budget the extreme-allocation optimality argument holds verbatim.
pub fn branch_switch_budget(table: &FlipTable) -> Option<usize> {
    // Integer-exact rate gap: gamma_11 * S0 - gamma_10 * S1.
    let gap_of = |d11: i64, d10: i64| -> i64 {
        (table.gamma_11 as i64 + d11) * table.s0() as i64
            - (table.gamma_10 as i64 + d10) * table.s1() as i64
    };
    let start_sign = gap_of(0, 0).signum();
    if start_sign == 0 {
        return Some(0);
    }
    let cap = max_useful_budget(table);
    for k in 0..=cap {
        if for_each_allocation(table, k, |d11, d10| gap_of(d11, d10).signum() != start_sign) {
            return Some(k);
        }
    }
    None
}

/// Endpoint selected by the affine DM model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DmEndpoint {
    Zero,
    AnyInterval,
    K,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmFlipResult {
    pub x_opt: DmEndpoint,
    pub gamma: f64,
    pub delta: f64,
    pub predicted_dm: f64,
}

/// Per-flip rate changes of the DM model: gamma for TPR-gap flips, delta for
/// FPR-gap flips.
pub fn dm_rates(counts: &LabelCounts) -> Result<(f64, f64)> {
    for (name, v) in [
        ("N_{s=0,y=1}", counts.n_s0_y1),
        ("N_{s=1,y=1}", counts.n_s1_y1),
        ("N_{s=0,y=0}", counts.n_s0_y0),
        ("N_{s=1,y=0}", counts.n_s1_y0),
    ] {
        if v == 0 {
            return Err(Error::Degenerate(format!("empty cell {name}")));
        }
    }
    let gamma = (1.0 / counts.n_s0_y1 as f64).max(1.0 / counts.n_s1_y1 as f64);
    let delta = (1.0 / counts.n_s0_y0 as f64).max(1.0 / counts.n_s1_y0 as f64);
    Ok((gamma, delta))
}

/// DM after devoting x of K flips to the TPR gap under the affine model,
/// floored at 0.
pub fn dm_affine_model(delta_tpr: f64, delta_fpr: f64, gamma: f64, delta: f64, k: usize, x: usize) -> f64 {
    let v = (delta_tpr + delta_fpr - delta * k as f64) + (delta - gamma) * x as f64;
    v.max(0.0)
}

/// Optimal allocation of K flips between TPR-gap and FPR-gap reduction:
/// the affine model's minimum sits at an endpoint determined by comparing
/// the per-flip rates.
pub fn min_dm_k_flips(
    counts: &LabelCounts,
    delta_tpr: f64,
    delta_fpr: f64,
    k: usize,
) -> Result<DmFlipResult> {
    if k == 0 {
        return Err(Error::Config("flip budget K must be at least 1".into()));
    }
    let (gamma, delta) = dm_rates(counts)?;
    let x_opt = if delta > gamma {
        DmEndpoint::Zero
    } else if delta < gamma {
        DmEndpoint::K
    } else {
        DmEndpoint::AnyInterval
    };
    let x_eval = match x_opt {
        DmEndpoint::Zero => 0,
        DmEndpoint::K => k,
        DmEndpoint::AnyInterval => 0,
    };
    Ok(DmFlipResult {
        x_opt,
        gamma,
        delta,
        predicted_dm: dm_affine_model(delta_tpr, delta_fpr, gamma, delta, k, x_eval),
    })
}
