//! Long-run average cost: vanishing discount on each stopped domain, then
//! increasing domains up to the whole space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{apply_m, ImpulseCost};
use crate::error::{Error, Result};
use crate::impulse::{self, QviSolution, Strategy};
use crate::linalg;
use crate::model::{self, Domain, MarkovModel, PoissonSolution};
use crate::stopping::{self, StoppingProblem};

pub const DEFAULT_ALPHAS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
pub const DEFAULT_LEVELS: usize = 6;
pub const DEFAULT_TOL_LAMBDA: f64 = 1e-6;
/// Horizons of the exit-probability table.
pub const EXIT_HORIZONS: [f64; 3] = [1.0, 5.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub alphas: Vec<f64>,
    pub domains: Vec<Domain>,
    pub tol_lambda: f64,
    /// Compare the extrapolated discounted values with the direct solve on every domain.
    pub cross_check: bool,
}

impl Schedule {
    pub fn new(alphas: Vec<f64>, domains: Vec<Domain>, tol_lambda: f64) -> Result<Self> {
        let s = Self {
            alphas,
            domains,
            tol_lambda,
            cross_check: true,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn default_for(model: &MarkovModel, cost: &ImpulseCost) -> Result<Self> {
        Self::new(DEFAULT_ALPHAS.to_vec(), default_domains(model, cost.targets(), DEFAULT_LEVELS), DEFAULT_TOL_LAMBDA)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidInput("discount schedule must be positive".into()));
        }
        if self.alphas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidInput("discount schedule must be strictly decreasing".into()));
        }
        if self.domains.is_empty() {
            return Err(Error::InvalidInput("domain schedule is empty".into()));
        }
        for (i, w) in self.domains.windows(2).enumerate() {
            if !w[0].is_subset_of(&w[1]) || w[0] == w[1] {
                return Err(Error::InvalidInput(format!("domains {i} and {} are not strictly nested", i + 1)));
            }
        }
        if !(self.tol_lambda > 0.0) {
            return Err(Error::InvalidInput("tol_lambda must be positive".into()));
        }
        Ok(())
    }
}

/// Distance of every state to `U`: coordinate distance when available, hop
/// distance on the undirected rate graph otherwise.
pub fn distance_to_targets(model: &MarkovModel, targets: &[usize]) -> Vec<f64> {
    let n = model.len();
    if let Some(c) = model.coords() {
        return (0..n)
            .map(|x| targets.iter().map(|&t| (c[x] - c[t]).abs()).fold(f64::INFINITY, f64::min))
            .collect();
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for x in 0..n {
        for &(y, _) in model.row(x) {
            adj[x].push(y);
            adj[y].push(x);
        }
    }
    let mut d = vec![f64::INFINITY; n];
    let mut queue = std::collections::VecDeque::new();
    for &t in targets {
        d[t] = 0.0;
        queue.push_back(t);
    }
    while let Some(x) = queue.pop_front() {
        for &y in &adj[x] {
            if d[y].is_infinite() {
                d[y] = d[x] + 1.0;
                queue.push_back(y);
            }
        }
    }
    d
}

/// Balls around `U` with radii `k·D/levels`, ending with the whole space.
/// Balls that trap the process (no reachable exit) or repeat are skipped.
pub fn default_domains(model: &MarkovModel, targets: &[usize], levels: usize) -> Vec<Domain> {
    let n = model.len();
    let d = distance_to_targets(model, targets);
    let reach = d.iter().cloned().filter(|x| x.is_finite()).fold(0.0, f64::max);
    let mut out: Vec<Domain> = Vec::new();
    for k in 1..levels.max(1) {
        let r = reach * k as f64 / levels as f64;
        let mask: Vec<bool> = d.iter().map(|&x| x <= r + 1e-12 * (1.0 + r)).collect();
        if mask.iter().all(|&b| b) {
            break;
        }
        let Ok(dom) = Domain::new(mask) else { continue };
        if out.last() == Some(&dom) || !model::trapped_states(model, &dom).is_empty() {
            continue;
        }
        out.push(dom);
    }
    out.push(Domain::full(n));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub m: usize,
    /// 0 marks the undiscounted value on that domain.
    pub alpha: f64,
    pub lambda: f64,
    pub residual: f64,
    /// `μ(f) − λ`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppedErgodic {
    pub direct: QviSolution,
    pub discounted: Vec<QviSolution>,
    pub extrapolated: Option<f64>,
}

/// Undiscounted `(λ_(m), w^m)` on one domain, with the discounted values along
/// `alphas` and their Richardson extrapolation as a cross-check.
pub fn solve_stopped_ergodic(
    model: &MarkovModel,
    domain: &Domain,
    cost: &ImpulseCost,
    f: &[f64],
    alphas: &[f64],
    tol_lambda: f64,
) -> Result<StoppedErgodic> {
    let direct = if domain.is_full() {
        let ps = model::poisson_solve(model, f)?;
        impulse::lambda_full_space(model, cost, f, ps.mu_f, &ps.q)?
    } else {
        let trapped = model::trapped_states(model, domain);
        if !trapped.is_empty() {
            return Err(Error::ExitUnreachable {
                states: trapped.iter().take(20).map(|&i| model.label(i).to_string()).collect(),
            });
        }
        impulse::lambda_on_domain(model, domain, cost, f, 0.0)?
    };
    let discounted: Vec<QviSolution> = alphas
        .par_iter()
        .map(|&a| impulse::lambda_alpha(model, domain, cost, f, a))
        .collect::<Result<_>>()?;
    let extrapolated = match discounted.as_slice() {
        [.., prev, last] => Some(last.lambda + last.alpha * (last.lambda - prev.lambda) / (prev.alpha - last.alpha)),
        [only] => Some(only.lambda),
        [] => None,
    };
    if let Some(e) = extrapolated {
        let limit = 10.0 * tol_lambda;
        if (e - direct.lambda).abs() > limit {
            return Err(Error::ConvergenceFailure {
                extrapolated: e,
                direct: direct.lambda,
                limit,
            });
        }
    }
    Ok(StoppedErgodic {
        direct,
        discounted,
        extrapolated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicSolution {
    pub lambda: f64,
    pub value: Vec<f64>,
    pub m_value: Vec<f64>,
    pub strategy: Strategy,
    pub lambda_trace: Vec<TraceRow>,
    /// `λ_(m)` per domain.
    pub domain_lambdas: Vec<f64>,
    pub mu_f: f64,
    pub gap: f64,
    pub degenerate: bool,
    /// Why the domain sequence stopped: "tail increment" or "full space".
    pub converged_by: String,
    /// `z_m` per stopped domain followed by `z` on the whole space.
    pub z_by_domain: Vec<Vec<f64>>,
    /// Full-space QVI residual `max |z − w|`, absent in the degenerate regime.
    pub qvi_residual: Option<f64>,
    pub bracket_gap: Option<f64>,
    /// `{x : f(x) ≤ λ}`.
    pub low_cost_set: Vec<usize>,
}

pub fn solve_full(model: &MarkovModel, cost: &ImpulseCost, f: &[f64], schedule: &Schedule) -> Result<ErgodicSolution> {
    schedule.validate()?;
    let n = model.len();
    if f.len() != n || cost.n_states() != n || schedule.domains.iter().any(|d| d.len() != n) {
        return Err(Error::InvalidInput("f, cost and domains must match the model size".into()));
    }
    let ps: PoissonSolution = model::poisson_solve(model, f)?;
    let alphas: &[f64] = if schedule.cross_check { &schedule.alphas } else { &[] };
    let per_domain: Vec<StoppedErgodic> = schedule
        .domains
        .par_iter()
        .map(|d| solve_stopped_ergodic(model, d, cost, f, alphas, schedule.tol_lambda))
        .collect::<Result<_>>()?;
    let mut lambda_trace = Vec::new();
    for (m, s) in per_domain.iter().enumerate() {
        for d in &s.discounted {
            lambda_trace.push(TraceRow {
                m: m + 1,
                alpha: d.alpha,
                lambda: d.lambda,
                residual: d.residual,
                gap: ps.mu_f - d.lambda,
            });
        }
        lambda_trace.push(TraceRow {
            m: m + 1,
            alpha: 0.0,
            lambda: s.direct.lambda,
            residual: s.direct.residual,
            gap: ps.mu_f - s.direct.lambda,
        });
    }
    let domain_lambdas: Vec<f64> = per_domain.iter().map(|s| s.direct.lambda).collect();
    let last = per_domain.last().expect("non-empty schedule");
    let converged_by = if schedule.domains.last().unwrap().is_full() {
        "full space"
    } else {
        match domain_lambdas.as_slice() {
            [.., a, b] if (a - b).abs() < schedule.tol_lambda => "tail increment",
            _ => {
                return Err(Error::NotConverged {
                    solver: "domain sequence",
                    iterations: domain_lambdas.len(),
                    gap: match domain_lambdas.as_slice() {
                        [.., a, b] => (a - b).abs(),
                        _ => f64::INFINITY,
                    },
                })
            }
        }
    };
    let sol = &last.direct;
    let lambda = sol.lambda;
    let degenerate = sol.degenerate || lambda >= ps.mu_f - 1e-9;
    let (m_value, _) = apply_m(&sol.value, cost);
    let running: Vec<f64> = f.iter().map(|v| v - lambda).collect();
    let mut z_by_domain: Vec<Vec<f64>> = schedule
        .domains
        .par_iter()
        .filter(|d| !d.is_full())
        .map(|d| {
            let prob = StoppingProblem {
                running: running.clone(),
                obstacle: m_value.clone(),
                exit_payoff: m_value.clone(),
                discount: 0.0,
                domain: d.clone(),
            };
            stopping::solve_undiscounted_stopping(model, &prob).map(|s| s.value)
        })
        .collect::<Result<_>>()?;
    let (qvi_residual, bracket_gap) = if degenerate {
        (None, None)
    } else {
        let z = stopping::solve_ergodic_stopping(model, f, &m_value, lambda)?;
        let r = linalg::sup_diff(&z.solution.value, &sol.value);
        let gap = z.solution.bracket_gap;
        z_by_domain.push(z.solution.value);
        (Some(r), Some(gap))
    };
    let low_cost_set = (0..n).filter(|&x| f[x] <= lambda).collect();
    Ok(ErgodicSolution {
        lambda,
        value: sol.value.clone(),
        m_value,
        strategy: if degenerate { Strategy::none(n) } else { sol.strategy.clone() },
        lambda_trace,
        domain_lambdas,
        mu_f: ps.mu_f,
        gap: ps.mu_f - lambda,
        degenerate,
        converged_by: converged_by.to_string(),
        z_by_domain,
        qvi_residual,
        bracket_gap,
        low_cost_set,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitMomentRow {
    pub m: usize,
    pub interior_states: usize,
    pub max_first: f64,
    pub max_second: f64,
    /// `max E_x[τ_{O_m}]` over the core (the first domain).
    pub core_max_first: f64,
    pub core_min_first: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitProbabilityRow {
    pub m: usize,
    pub horizons: Vec<f64>,
    /// `max_{x ∈ core} P_x(τ_{O_m} ≤ T)` per horizon.
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Unique invariant probability (a single closed class).
    pub invariant_measure: Check,
    /// Bounded Poisson solution; uniform integrability is automatic on a finite chain.
    pub poisson_solution: Check,
    /// Regularity of the semigroup; automatic on a finite chain.
    pub regularity: Check,
    /// Finite exit-time moments on every stopped domain.
    pub exit_moments: Check,
    /// Exit probabilities from the core decrease along the domains.
    pub exit_decay: Check,
    /// Mean exit times from the core grow along the domains.
    pub exit_time_growth: Check,
    pub mu: Option<Vec<f64>>,
    pub q: Option<Vec<f64>>,
    pub k: Option<f64>,
    pub mu_f: Option<f64>,
    pub closed_classes: Vec<Vec<String>>,
    pub moments: Vec<ExitMomentRow>,
    pub exit_probabilities: Vec<ExitProbabilityRow>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        [
            &self.invariant_measure,
            &self.poisson_solution,
            &self.regularity,
            &self.exit_moments,
            &self.exit_decay,
            &self.exit_time_growth,
        ]
        .iter()
        .all(|c| c.passed)
    }
}

/// Report-only check of the standing assumptions along the domain schedule.
pub fn check_assumptions(model: &MarkovModel, f: &[f64], domains: &[Domain]) -> AssumptionReport {
    let classes = model.closed_classes();
    let closed_classes: Vec<Vec<String>> = classes
        .iter()
        .map(|c| c.iter().map(|&i| model.label(i).to_string()).collect())
        .collect();
    let (invariant_measure, mu, q, k, mu_f, poisson_solution) = match model::poisson_solve(model, f) {
        Ok(ps) => {
            let k = ps.bound();
            (
                Check::new(true, format!("single closed class of {} states", classes[0].len())),
                Some(ps.mu.weights.clone()),
                Some(ps.q.clone()),
                Some(k),
                Some(ps.mu_f),
                Check::new(true, format!("K = max q = {k:.6e}; uniform integrability holds on a finite chain")),
            )
        }
        Err(e) => (
            Check::new(false, e.to_string()),
            None,
            None,
            None,
            None,
            Check::new(false, "no Poisson solution without a unique invariant measure"),
        ),
    };
    let regularity = Check::new(true, "finite state space: the semigroup is continuous");
    let stopped: Vec<(usize, &Domain)> = domains.iter().enumerate().filter(|(_, d)| !d.is_full()).collect();
    let core = stopped.first().map(|(_, d)| (*d).clone());
    let mut moments = Vec::new();
    let mut moment_errors = Vec::new();
    let mut exit_probabilities = Vec::new();
    for &(i, d) in &stopped {
        match model::exit_time_moments(model, d) {
            Ok(e) => {
                let core_vals: Vec<f64> = (0..model.len())
                    .filter(|&x| core.as_ref().is_some_and(|c| c.contains(x)))
                    .map(|x| e.first[x])
                    .collect();
                moments.push(ExitMomentRow {
                    m: i + 1,
                    interior_states: d.interior_count(),
                    max_first: e.max_first(),
                    max_second: e.max_second(),
                    core_max_first: core_vals.iter().cloned().fold(0.0, f64::max),
                    core_min_first: core_vals.iter().cloned().fold(f64::INFINITY, f64::min),
                });
            }
            Err(e) => moment_errors.push(format!("domain {}: {e}", i + 1)),
        }
        if let Ok(surv) = model::survival_probabilities(model, d, &EXIT_HORIZONS) {
            let probabilities = surv
                .iter()
                .map(|s| {
                    (0..model.len())
                        .filter(|&x| core.as_ref().is_some_and(|c| c.contains(x)))
                        .map(|x| (1.0 - s[x]).clamp(0.0, 1.0))
                        .fold(0.0, f64::max)
                })
                .collect();
            exit_probabilities.push(ExitProbabilityRow {
                m: i + 1,
                horizons: EXIT_HORIZONS.to_vec(),
                probabilities,
            });
        }
    }
    let exit_moments = if moment_errors.is_empty() {
        Check::new(
            true,
            format!(
                "finite on {} stopped domains; largest E[τ²] = {:.6e}",
                moments.len(),
                moments.iter().map(|r| r.max_second).fold(0.0, f64::max)
            ),
        )
    } else {
        Check::new(false, moment_errors.join("; "))
    };
    let decreasing = exit_probabilities.windows(2).all(|w| {
        w[0].probabilities
            .iter()
            .zip(&w[1].probabilities)
            .all(|(a, b)| *b <= *a + 1e-12)
    });
    let exit_decay = Check::new(
        decreasing && !exit_probabilities.is_empty(),
        if exit_probabilities.is_empty() {
            "no stopped domains in the schedule".to_string()
        } else {
            format!(
                "max exit probability by T = {:?} falls from {:?} to {:?}",
                EXIT_HORIZONS,
                exit_probabilities.first().unwrap().probabilities,
                exit_probabilities.last().unwrap().probabilities
            )
        },
    );
    let growing = moments.windows(2).all(|w| w[1].core_min_first >= w[0].core_min_first - 1e-12);
    let last_min = moments.last().map_or(0.0, |r| r.core_min_first);
    let horizon = EXIT_HORIZONS[EXIT_HORIZONS.len() - 1];
    // On the whole space the exit time is infinite, which witnesses unbounded growth.
    let ends_full = domains.last().is_some_and(|d| d.is_full());
    let exit_time_growth = Check::new(
        growing && (ends_full || last_min > horizon),
        if ends_full {
            format!("min over the core of E[τ] grows to {last_min:.6e} on the last stopped domain and is infinite on the whole space")
        } else {
            format!("min over the core of E[τ] grows to {last_min:.6e} (horizon {horizon})")
        },
    );
    AssumptionReport {
        invariant_measure,
        poisson_solution,
        regularity,
        exit_moments,
        exit_decay,
        exit_time_growth,
        mu,
        q,
        k,
        mu_f,
        closed_classes,
        moments,
        exit_probabilities,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QviVerification {
    /// `max |z − w|` with `z` the ergodic stopping value for obstacle `Mw`.
    pub residual: f64,
    pub z: Vec<f64>,
    pub bracket_gap: f64,
    /// Bounded `w` makes `E[w(Y_T)]/T → 0` automatic.
    pub bounded_value: bool,
    pub low_cost_set: Vec<usize>,
}

/// Recomputes the right side of the full-space QVI and rejects `w` when it
/// misses by more than `tol`.
pub fn verify_qvi(
    model: &MarkovModel,
    cost: &ImpulseCost,
    f: &[f64],
    lambda: f64,
    w: &[f64],
    tol: f64,
) -> Result<QviVerification> {
    let (mw, _) = apply_m(w, cost);
    let z = stopping::solve_ergodic_stopping(model, f, &mw, lambda)?;
    let residual = linalg::sup_diff(&z.solution.value, w);
    if !(residual <= tol) {
        return Err(Error::QviRejected { residual, tol });
    }
    Ok(QviVerification {
        residual,
        bracket_gap: z.solution.bracket_gap,
        z: z.solution.value,
        bounded_value: w.iter().all(|v| v.is_finite()),
        low_cost_set: (0..model.len()).filter(|&x| f[x] <= lambda).collect(),
    })
}
