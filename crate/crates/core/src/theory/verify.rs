//! Brute-force verifiers for the theory results: exhaustive classifier
//! enumeration against the Bayes-optimal construction, randomized checks of
//! the change-probability identity, subset enumeration against the
//! extreme-flip optimum, and endpoint checks of the affine DM model.

use super::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub max_discrepancy: f64,
    pub pass: bool,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryReport {
    pub suites: Vec<SuiteReport>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    pub boc_cases: usize,
    pub max_support: usize,
    pub identity_cases: usize,
    pub max_table_len: usize,
    pub dominance_cases: usize,
    pub max_n: usize,
    pub max_k: usize,
    pub dm_cases: usize,
    pub dm_max_k: usize,
    /// Negate the pointwise score; the optimality suite must then fail.
    /// Exists to prove the harness can detect a broken implementation.
    pub inject_boc_bug: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            boc_cases: 50,
            max_support: 12,
            identity_cases: 1000,
            max_table_len: 64,
            dominance_cases: 100,
            max_n: 16,
            max_k: 4,
            dm_cases: 100,
            dm_max_k: 10,
            inject_boc_bug: false,
        }
    }
}

pub fn run_all(cfg: &VerifyConfig) -> TheoryReport {
    let suites = vec![
        verify_boc_optimality(cfg),
        verify_change_identity_suite(cfg),
        verify_dp_extreme_dominance(cfg),
        verify_dm_endpoint(cfg),
    ];
    let all_pass = suites.iter().all(|s| s.pass);
    TheoryReport { suites, all_pass }
}

fn random_distribution<R: Rng>(rng: &mut R, max_support: usize) -> FiniteDistribution {
    let m = rng.gen_range(2..=max_support);
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let points = raw
        .into_iter()
        .map(|w| DistPoint {
            weight: w / total,
            eta: rng.gen_range(0.0..1.0),
            eta_bar: rng.gen_range(0.0..1.0),
            eta_star: rng.gen_range(0.0..1.0),
        })
        .collect();
    FiniteDistribution::new(points).expect("sampled distribution is valid")
}

/// The Bayes-optimal output must attain the minimum Lagrangian risk over all
/// 2^m deterministic classifiers, under both multiplier pairings.
pub fn verify_boc_optimality(cfg: &VerifyConfig) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut failures = 0usize;
    let mut max_gap = 0.0f64;
    let mut detail = None;
    let mut cases = 0usize;
    for case in 0..cfg.boc_cases {
        let dist = random_distribution(&mut rng, cfg.max_support);
        let costs = CostSpec::new(
            rng.gen_range(0.05..0.95),
            rng.gen_range(0.05..0.95),
            rng.gen_range(0.05..0.95),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-1.5..1.5),
        )
        .expect("sampled costs are valid");
        for pairing in [MultiplierPairing::Semantic, MultiplierPairing::StrictPaper] {
            cases += 1;
            let mut g = boc(&dist, &costs, 0.5, pairing).expect("boc on valid inputs");
            if cfg.inject_boc_bug {
                for v in &mut g {
                    *v = 1.0 - *v;
                }
            }
            let boc_risk = lagrangian_risk(&g, &dist, &costs, pairing).expect("risk");
            let m = dist.len();
            let mut best = f64::INFINITY;
            for mask in 0u64..(1u64 << m) {
                let cand: Vec<f64> = (0..m).map(|i| f64::from((mask >> i) & 1 == 1)).collect();
                let risk = lagrangian_risk(&cand, &dist, &costs, pairing).expect("risk");
                if risk < best {
                    best = risk;
                }
            }
            let gap = boc_risk - best;
            if gap > max_gap {
                max_gap = gap;
            }
            if gap > 1e-12 {
                failures += 1;
                detail.get_or_insert_with(|| {
                    format!("case {case} ({pairing:?}): boc risk {boc_risk} vs exhaustive {best}")
                });
            }
        }
    }
    SuiteReport {
        name: "boc_optimality".into(),
        cases,
        failures,
        max_discrepancy: max_gap,
        pass: failures == 0,
        detail,
    }
}

/// The total-probability identity must hold exactly on random tables.
pub fn verify_change_identity_suite(cfg: &VerifyConfig) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let mut failures = 0usize;
    let mut max_gap = 0.0f64;
    let mut detail = None;
    for case in 0..cfg.identity_cases {
        let n = rng.gen_range(1..=cfg.max_table_len);
        let yhat_f: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
        let yhat_g: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
        let y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
        let s: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
        let table = PredictionTable::new(y, s, yhat_f, yhat_g, None, None).expect("valid table");
        let r = verify_change_identity(&table);
        let gap = (r.lhs - r.rhs).abs();
        if gap > max_gap {
            max_gap = gap;
        }
        if !r.equal {
            failures += 1;
            detail.get_or_insert_with(|| format!("case {case}: lhs {} vs rhs {}", r.lhs, r.rhs));
        }
    }
    SuiteReport {
        name: "change_identity".into(),
        cases: cfg.identity_cases,
        failures,
        max_discrepancy: max_gap,
        pass: failures == 0,
        detail,
    }
}

/// Sample a flip table plus budget within the regime the extreme-flip result
/// covers: both extremes feasible and the budget strictly below both the
/// switching point and the branch-switch budget.
fn sample_dominance_case<R: Rng>(rng: &mut R, max_n: usize, max_k: usize) -> (FlipTable, usize) {
    loop {
        let g11 = rng.gen_range(0..=max_n / 2);
        let g01 = rng.gen_range(0..=max_n / 2);
        let g10 = rng.gen_range(0..=max_n / 2);
        let g00 = rng.gen_range(0..=max_n / 2);
        if g11 + g01 == 0 || g10 + g00 == 0 || g11 + g01 + g10 + g00 > max_n {
            continue;
        }
        let table = FlipTable::new(g11, g01, g10, g00).expect("groups nonempty");
        // Feasibility caps for both extremes of the lagging orientation.
        let group1_lags =
            g11 as u64 * table.s0() as u64 <= g10 as u64 * table.s1() as u64;
        let (cap_a, cap_b) = if group1_lags { (g01, g10) } else { (g00, g11) };
        let cap = cap_a.min(cap_b).min(max_k);
        if cap == 0 {
            continue;
        }
        let k = rng.gen_range(1..=cap);
        let ks = switching_point(&table).k;
        let kb = branch_switch_budget(&table).unwrap_or(usize::MAX);
        if k < ks && k < kb {
            return (table, k);
        }
    }
}

/// Enumerating every way to spend exactly K flips across the four cells must
/// never beat the extreme answer, and the best must equal it exactly.
/// Comparisons run on exact fractions.
pub fn verify_dp_extreme_dominance(cfg: &VerifyConfig) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(3));
    let mut failures = 0usize;
    let mut max_gap = 0.0f64;
    let mut detail = None;
    for case in 0..cfg.dominance_cases {
        let (table, k) = sample_dominance_case(&mut rng, cfg.max_n, cfg.max_k);
        let (extreme_value, plan) = max_prule_k_flips(&table, k).expect("feasible by construction");
        let (d11, d10) = plan_deltas(&plan);
        let extreme = table.p_rule_frac_after(d11, d10);
        let mut brute = (0u64, 1u64);
        for_each_allocation(&table, k, |a11, a10| {
            let p = table.p_rule_frac_after(a11, a10);
            if frac_cmp(p, brute) == std::cmp::Ordering::Greater {
                brute = p;
            }
            false
        });
        let exceeded = frac_cmp(brute, extreme) == std::cmp::Ordering::Greater;
        let equal = frac_cmp(brute, extreme) == std::cmp::Ordering::Equal;
        let value_consistent =
            (extreme_value - extreme.0 as f64 / extreme.1 as f64).abs() < 1e-12;
        if exceeded || !equal || !value_consistent {
            failures += 1;
            let gap =
                (brute.0 as f64 / brute.1 as f64 - extreme.0 as f64 / extreme.1 as f64).abs();
            if gap > max_gap {
                max_gap = gap;
            }
            detail.get_or_insert_with(|| {
                format!(
                    "case {case}: table {table:?} K={k}: brute {brute:?} vs extreme {extreme:?}"
                )
            });
        }
    }
    SuiteReport {
        name: "dp_extreme_dominance".into(),
        cases: cfg.dominance_cases,
        failures,
        max_discrepancy: max_gap,
        pass: failures == 0,
        detail,
    }
}

/// No allocation below the switching point may reach the parity tolerance.
/// Exhaustive over all budgets and quadrants at small n.
pub fn verify_switching_minimality(table: &FlipTable) -> bool {
    let sp = switching_point(table);
    if !sp.reached {
        return true;
    }
    let target = 1.0 - sp.tolerance;
    for k in 0..sp.k {
        if for_each_allocation(table, k, |d11, d10| {
            table.p_rule_after(d11, d10) >= target
        }) {
            return false;
        }
    }
    true
}

/// Evaluating the affine DM model at every x in {0..K} must confirm the
/// endpoint predicted by the rate comparison, ties included.
pub fn verify_dm_endpoint(cfg: &VerifyConfig) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(4));
    let mut failures = 0usize;
    let mut detail = None;
    for case in 0..cfg.dm_cases {
        let counts = LabelCounts {
            n_s0_y1: rng.gen_range(1..=30),
            n_s1_y1: rng.gen_range(1..=30),
            n_s0_y0: rng.gen_range(1..=30),
            n_s1_y0: rng.gen_range(1..=30),
        };
        let k = rng.gen_range(1..=cfg.dm_max_k);
        let delta_tpr = rng.gen_range(0.0..1.0);
        let delta_fpr = rng.gen_range(0.0..1.0);
        let r = min_dm_k_flips(&counts, delta_tpr, delta_fpr, k).expect("nonempty cells");
        let values: Vec<f64> = (0..=k)
            .map(|x| dm_affine_model(delta_tpr, delta_fpr, r.gamma, r.delta, k, x))
            .collect();
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let ok = match r.x_opt {
            DmEndpoint::Zero => values[0] == min,
            DmEndpoint::K => values[k] == min,
            DmEndpoint::AnyInterval => values.iter().all(|&v| v == min),
        };
        let predicted_matches = r.predicted_dm == min;
        if !ok || !predicted_matches {
            failures += 1;
            detail.get_or_insert_with(|| {
                format!("case {case}: counts {counts:?} K={k} x_opt {:?}", r.x_opt)
            });
        }
    }
    SuiteReport {
        name: "dm_endpoint".into(),
        cases: cfg.dm_cases,
        failures,
        max_discrepancy: 0.0,
        pass: failures == 0,
        detail,
    }
}
