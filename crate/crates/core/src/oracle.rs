//! Independent references: exact evaluation of a stationary strategy, brute-force
//! enumeration of all stationary strategies, and the renewal-reward optimum for
//! deterministic unit drift.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::ImpulseCost;
use crate::error::{Error, Result};
use crate::impulse::Strategy;
use crate::linalg::BandedMatrix;
use crate::model::{closed_classes, invariant_measure, MarkovModel};

pub const DEFAULT_ENUMERATION_BUDGET: u128 = 5_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAverage {
    pub states: Vec<usize>,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyEvaluation {
    /// Closed classes of the controlled chain with their long-run averages.
    pub classes: Vec<ClassAverage>,
    /// Long-run average cost started from each state.
    pub from_state: Vec<f64>,
    /// Best class average reachable from the landing states in `U`.
    pub best_from_targets: f64,
}

/// Long-run average cost of a stationary strategy, by linear algebra.
///
/// Region states are never occupied: a jump into the region is redirected to
/// its target, and the impulse cost is booked as a cost rate `q_xy · c(y, ξ)`.
pub fn evaluate_strategy_exact(
    model: &MarkovModel,
    cost: &ImpulseCost,
    f: &[f64],
    strategy: &Strategy,
) -> Result<StrategyEvaluation> {
    strategy.validate(cost)?;
    let n = model.len();
    let region = &strategy.impulse_region;
    let keep: Vec<usize> = (0..n).filter(|&x| !region[x]).collect();
    let mut index = vec![usize::MAX; n];
    for (i, &x) in keep.iter().enumerate() {
        index[x] = i;
    }
    let land = |y: usize| if region[y] { strategy.target[y].unwrap() } else { y };
    let mut rows = Vec::with_capacity(keep.len());
    let mut rate_cost = vec![0.0; keep.len()];
    for (i, &x) in keep.iter().enumerate() {
        let mut row = Vec::new();
        rate_cost[i] = f[x];
        for &(y, q) in model.row(x) {
            if region[y] {
                rate_cost[i] += q * cost.cost_to(y, land(y));
            }
            let z = index[land(y)];
            if z != i {
                row.push((z, q));
            }
        }
        rows.push(row);
    }
    let labels = keep.iter().map(|&x| model.label(x).to_string()).collect();
    let controlled = MarkovModel::from_rates(labels, None, rows, model.delta())?;
    let m = controlled.len();
    let classes = closed_classes(m, |i| controlled.successors(i));
    let mut class_avg = Vec::with_capacity(classes.len());
    let mut class_of = vec![usize::MAX; m];
    for (k, class) in classes.iter().enumerate() {
        let sub_rows: Vec<Vec<(usize, f64)>> = class
            .iter()
            .map(|&i| {
                controlled
                    .row(i)
                    .iter()
                    .map(|&(j, q)| (class.binary_search(&j).expect("closed class"), q))
                    .collect()
            })
            .collect();
        let sub = MarkovModel::from_rates(class.iter().map(|i| i.to_string()).collect(), None, sub_rows, 1.0)?;
        let mu = invariant_measure(&sub)?;
        let avg: f64 = class.iter().zip(&mu.weights).map(|(&i, p)| p * rate_cost[i]).sum();
        for &i in class {
            class_of[i] = k;
        }
        class_avg.push(avg);
    }
    // absorption-weighted averages: g = avg on classes, Q g = 0 elsewhere
    let (lo, up) = controlled.bandwidth();
    let mut a = BandedMatrix::zeros(m, lo, up);
    let mut b = vec![0.0; m];
    for i in 0..m {
        if class_of[i] != usize::MAX {
            a.set(i, i, 1.0);
            b[i] = class_avg[class_of[i]];
        } else {
            a.add(i, i, controlled.out_rate(i));
            for &(j, q) in controlled.row(i) {
                a.add(i, j, -q);
            }
        }
    }
    let g = a.factor("absorption averages")?.solve(&b);
    let from_state: Vec<f64> = (0..n).map(|x| g[index[land(x)]]).collect();
    let mut start = vec![false; m];
    for &u in cost.targets() {
        start[index[land(u)]] = true;
    }
    // classes reachable from the landing states
    let mut reach = vec![false; m];
    let mut stack: Vec<usize> = (0..m).filter(|&i| start[i]).collect();
    for &i in &stack {
        reach[i] = true;
    }
    while let Some(i) = stack.pop() {
        for &(j, _) in controlled.row(i) {
            if !reach[j] {
                reach[j] = true;
                stack.push(j);
            }
        }
    }
    let best_from_targets = classes
        .iter()
        .enumerate()
        .filter(|(_, c)| reach[c[0]])
        .map(|(k, _)| class_avg[k])
        .fold(f64::INFINITY, f64::min);
    Ok(StrategyEvaluation {
        classes: classes
            .iter()
            .zip(&class_avg)
            .map(|(c, &average)| ClassAverage {
                states: c.iter().map(|&i| keep[i]).collect(),
                average,
            })
            .collect(),
        from_state,
        best_from_targets,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationResult {
    pub lambda: f64,
    pub strategy: Strategy,
    pub policies: u128,
}

/// Number of stationary strategies: regions `R` times target maps into `U \ R`.
pub fn count_policies(n: usize, targets: &[usize]) -> u128 {
    (0u64..(1u64 << n))
        .map(|mask| {
            let free = targets.iter().filter(|&&t| mask & (1 << t) == 0).count() as u128;
            free.checked_pow(mask.count_ones()).unwrap_or(u128::MAX)
        })
        .fold(0u128, |a, b| a.saturating_add(b))
}

/// Minimum long-run average over every stationary strategy.
pub fn policy_enumeration_oracle(
    model: &MarkovModel,
    cost: &ImpulseCost,
    f: &[f64],
    budget: u128,
) -> Result<EnumerationResult> {
    let n = model.len();
    if n >= 63 {
        return Err(Error::BudgetExceeded { count: u128::MAX, limit: budget });
    }
    let count = count_policies(n, cost.targets());
    if count > budget {
        return Err(Error::BudgetExceeded { count, limit: budget });
    }
    let per_mask: Vec<Result<Option<(f64, Strategy)>>> = (0u64..(1u64 << n))
        .into_par_iter()
        .map(|mask| {
            let region: Vec<usize> = (0..n).filter(|&x| mask & (1 << x) != 0).collect();
            let free: Vec<usize> = cost.targets().iter().copied().filter(|&t| mask & (1 << t) == 0).collect();
            if !region.is_empty() && free.is_empty() {
                return Ok(None);
            }
            let mut best: Option<(f64, Strategy)> = None;
            let mut choice = vec![0usize; region.len()];
            loop {
                let pairs: Vec<(usize, usize)> = region.iter().zip(&choice).map(|(&x, &c)| (x, free[c])).collect();
                let s = Strategy::from_pairs(n, &pairs);
                let v = evaluate_strategy_exact(model, cost, f, &s)?.best_from_targets;
                if best.as_ref().is_none_or(|b| v < b.0) {
                    best = Some((v, s));
                }
                // odometer over target choices
                let mut k = 0;
                while k < choice.len() {
                    choice[k] += 1;
                    if choice[k] < free.len() {
                        break;
                    }
                    choice[k] = 0;
                    k += 1;
                }
                if k == choice.len() {
                    break;
                }
            }
            Ok(best)
        })
        .collect();
    let mut best: Option<(f64, Strategy)> = None;
    for r in per_mask {
        if let Some((v, s)) = r? {
            if best.as_ref().is_none_or(|b| v < b.0) {
                best = Some((v, s));
            }
        }
    }
    let (lambda, strategy) = best.expect("the empty strategy is always enumerated");
    Ok(EnumerationResult {
        lambda,
        strategy,
        policies: count,
    })
}

/// Running cost `(f̄ + x²) ∧ cap` of the drift example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalCost {
    pub fbar: f64,
    pub cap: f64,
}

impl RenewalCost {
    pub fn at(&self, x: f64) -> f64 {
        (self.fbar + x * x).min(self.cap)
    }

    /// `∫_0^b f(s) ds` for `b ≥ 0`.
    pub fn integral(&self, b: f64) -> f64 {
        if self.cap <= self.fbar {
            return self.cap * b;
        }
        let knee = (self.cap - self.fbar).sqrt();
        if b <= knee {
            self.fbar * b + b * b * b / 3.0
        } else {
            self.fbar * knee + knee * knee * knee / 3.0 + self.cap * (b - knee)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalOptimum {
    pub lambda: f64,
    pub xi: f64,
    pub b: f64,
}

/// Cycle average `(∫_ξ^b f + c) / (b − ξ)` for unit-speed drift.
pub fn renewal_average(f: &RenewalCost, c: f64, xi: f64, b: f64) -> f64 {
    (f.integral(b) - f.integral(xi) + c) / (b - xi)
}

/// Minimizes the cycle average over `ξ ∈ targets`, `b ∈ (ξ, length]` by a
/// grid of `grid` points per target followed by golden-section refinement.
pub fn renewal_oracle(f: &RenewalCost, c: f64, targets: &[f64], length: f64, grid: usize) -> Result<RenewalOptimum> {
    let mut best: Option<RenewalOptimum> = None;
    for &xi in targets {
        if !(xi >= 0.0 && xi < length) {
            continue;
        }
        let step = (length - xi) / grid.max(2) as f64;
        let (mut kb, mut vb) = (1usize, f64::INFINITY);
        for k in 1..=grid.max(2) {
            let v = renewal_average(f, c, xi, xi + k as f64 * step);
            if v < vb {
                kb = k;
                vb = v;
            }
        }
        let (mut a, mut z) = (xi + (kb as f64 - 1.0).max(1e-9) * step, (xi + (kb + 1) as f64 * step).min(length));
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let m1 = z - phi * (z - a);
            let m2 = a + phi * (z - a);
            if renewal_average(f, c, xi, m1) <= renewal_average(f, c, xi, m2) {
                z = m2;
            } else {
                a = m1;
            }
        }
        let bref = 0.5 * (a + z);
        let (b, v) = [(bref, renewal_average(f, c, xi, bref)), (xi + kb as f64 * step, vb)]
            .into_iter()
            .fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        if best.is_none_or(|o| v < o.lambda) {
            best = Some(RenewalOptimum { lambda: v, xi, b });
        }
    }
    best.ok_or_else(|| Error::InvalidInput("no feasible (ξ, b) pair: targets must lie in [0, length)".into()))
}

/// The closed-form value printed for the drift example in the literature, kept for comparison.
pub fn published_drift_value(fbar: f64, c: f64) -> f64 {
    fbar + c / 3.0 + c.sqrt() + fbar / c.sqrt()
}
