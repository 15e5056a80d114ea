//! Optimal stopping with an exit boundary, its undiscounted limit, the penalty
//! approximation, and the ergodic stopping problem.
//!
//! Values are minima: `w(x) = inf_τ E_x[∫_0^{τ∧τ_O} e^{−αs} f ds + 1{τ<τ_O} e^{−ατ} G(X_τ)
//! + 1{τ≥τ_O} e^{−ατ_O} H(X_{τ_O})]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, BandedMatrix};
use crate::model::{self, Domain, MarkovModel};
use crate::policy::{Action, ControlProblem, Outcome};

/// States with `value ≥ obstacle − STOP_TOL` are in the stopping region.
pub const STOP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingProblem {
    pub running: Vec<f64>,
    pub obstacle: Vec<f64>,
    pub exit_payoff: Vec<f64>,
    pub discount: f64,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingSolution {
    pub value: Vec<f64>,
    pub stop_region: Vec<bool>,
    /// Width of an interval certified to contain the exact value at every state.
    pub bracket_gap: f64,
    pub iterations: usize,
}

impl StoppingProblem {
    fn validate(&self, model: &MarkovModel) -> Result<()> {
        let n = model.len();
        for (name, v) in [("running", &self.running), ("obstacle", &self.obstacle), ("exit_payoff", &self.exit_payoff)] {
            if v.len() != n {
                return Err(Error::InvalidInput(format!("{name} has {} entries, model has {n}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} has non-finite entries")));
            }
        }
        if self.domain.len() != n {
            return Err(Error::InvalidInput("domain size does not match the model".into()));
        }
        if !(self.discount >= 0.0 && self.discount.is_finite()) {
            return Err(Error::InvalidInput(format!("discount must be non-negative, got {}", self.discount)));
        }
        if let Some(x) = (0..n).find(|&x| self.obstacle[x] < self.exit_payoff[x] - 1e-12 * (1.0 + self.exit_payoff[x].abs())) {
            return Err(Error::InvalidInput(format!(
                "obstacle G must dominate exit payoff H (state {}: G={}, H={})",
                model.label(x),
                self.obstacle[x],
                self.exit_payoff[x]
            )));
        }
        Ok(())
    }

    fn control<'a>(&'a self, model: &'a MarkovModel) -> ControlProblem<'a> {
        ControlProblem {
            model,
            domain: &self.domain,
            running: &self.running,
            alpha: self.discount,
            exit: Some(&self.exit_payoff),
            obstacle: Some(&self.obstacle),
            impulse: None,
            pinned: None,
        }
    }
}

/// Expected number of jumps (discounted) before exit: `N = 1 + P N` on the interior.
/// Bounds how far a residual of the Bellman operator propagates.
pub(crate) fn jump_count_bound(model: &MarkovModel, domain: &Domain, alpha: f64) -> Result<f64> {
    let rhs: Vec<f64> = (0..model.len()).map(|x| alpha + model.out_rate(x)).collect();
    let p = ControlProblem {
        model,
        domain,
        running: &rhs,
        alpha,
        exit: None,
        obstacle: None,
        impulse: None,
        pinned: None,
    };
    let n = p
        .evaluate(&vec![Action::Continue; model.len()])?
        .ok_or_else(|| Error::ExitUnreachable {
            states: model::trapped_states(model, domain).iter().map(|&i| model.label(i).to_string()).collect(),
        })?;
    Ok(linalg::sup_norm(&n))
}

/// `max_x |min(G, continuation) − w|` over the interior.
pub(crate) fn bellman_residual(p: &ControlProblem, w: &[f64]) -> f64 {
    (0..w.len())
        .filter(|&x| p.domain.contains(x))
        .map(|x| {
            let mut t = p.continuation(x, w);
            if let Some(g) = p.obstacle {
                t = t.min(g[x]);
            }
            (t - w[x]).abs()
        })
        .fold(0.0, f64::max)
}

fn finish(model: &MarkovModel, prob: &StoppingProblem, value: Vec<f64>, iterations: usize) -> Result<StoppingSolution> {
    let p = prob.control(model);
    let rho = bellman_residual(&p, &value);
    let bracket_gap = if rho == 0.0 {
        0.0
    } else {
        2.0 * rho * jump_count_bound(model, &prob.domain, prob.discount)?
    };
    let stop_region = (0..model.len())
        .map(|x| prob.domain.contains(x) && value[x] >= prob.obstacle[x] - STOP_TOL)
        .collect();
    Ok(StoppingSolution {
        value,
        stop_region,
        bracket_gap,
        iterations,
    })
}

fn solve_with_engine(model: &MarkovModel, prob: &StoppingProblem) -> Result<StoppingSolution> {
    match prob.control(model).solve(None)? {
        Outcome::Solved { value, iterations, .. } => finish(model, prob, value, iterations),
        Outcome::Unbounded => Err(Error::NotConverged {
            solver: "optimal stopping",
            iterations: 0,
            gap: f64::INFINITY,
        }),
    }
}

/// Discounted stopping with exit, `α > 0`.
pub fn solve_discounted_stopping(model: &MarkovModel, prob: &StoppingProblem) -> Result<StoppingSolution> {
    prob.validate(model)?;
    if !(prob.discount > 0.0) {
        return Err(Error::InvalidInput("discounted stopping needs discount > 0".into()));
    }
    solve_with_engine(model, prob)
}

/// The `α = 0` problem; the exterior must be reachable from every interior state.
pub fn solve_undiscounted_stopping(model: &MarkovModel, prob: &StoppingProblem) -> Result<StoppingSolution> {
    prob.validate(model)?;
    if prob.discount != 0.0 {
        return Err(Error::InvalidInput("undiscounted stopping needs discount = 0".into()));
    }
    let trapped = model::trapped_states(model, &prob.domain);
    if !trapped.is_empty() {
        return Err(Error::ExitUnreachable {
            states: trapped.iter().take(20).map(|&i| model.label(i).to_string()).collect(),
        });
    }
    solve_with_engine(model, prob)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyScheme {
    /// Explicit when stable and `β·δ ≤ 0.5`, implicit otherwise.
    Auto,
    Explicit,
    Implicit,
}

const PENALTY_MAX_ITER: usize = 2_000_000;

/// Solves `(α − Q) w + β (w − G)^+ = f` on the interior, `w = H` outside.
/// The solution decreases in `β` towards the stopping value.
pub fn solve_penalty(model: &MarkovModel, prob: &StoppingProblem, beta: f64, scheme: PenaltyScheme) -> Result<Vec<f64>> {
    prob.validate(model)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!("penalty rate must be non-negative, got {beta}")));
    }
    let delta = model.delta();
    let stable = delta * (prob.discount + model.max_rate() + beta) <= 1.0;
    match scheme {
        PenaltyScheme::Explicit => {
            if beta * delta > 0.5 || !stable {
                return Err(Error::PenaltyDiverges { beta_delta: beta * delta });
            }
            penalty_explicit(model, prob, beta)
        }
        PenaltyScheme::Auto if beta * delta <= 0.5 && stable && prob.discount > 0.0 => penalty_explicit(model, prob, beta),
        _ => penalty_implicit(model, prob, beta),
    }
}

fn penalty_explicit(model: &MarkovModel, prob: &StoppingProblem, beta: f64) -> Result<Vec<f64>> {
    let n = model.len();
    let delta = model.delta();
    let mut w: Vec<f64> = (0..n)
        .map(|x| if prob.domain.contains(x) { prob.obstacle[x].max(prob.exit_payoff[x]) } else { prob.exit_payoff[x] })
        .collect();
    for _ in 0..PENALTY_MAX_ITER {
        let mut change = 0.0f64;
        let next: Vec<f64> = (0..n)
            .map(|x| {
                if !prob.domain.contains(x) {
                    return w[x];
                }
                let qw: f64 = model.row(x).iter().map(|&(y, q)| q * w[y]).sum::<f64>() - model.out_rate(x) * w[x];
                let rhs = prob.running[x] + qw - prob.discount * w[x] - beta * (w[x] - prob.obstacle[x]).max(0.0);
                w[x] + delta * rhs
            })
            .collect();
        for (a, b) in next.iter().zip(&w) {
            change = change.max((a - b).abs());
        }
        if !change.is_finite() {
            return Err(Error::PenaltyDiverges { beta_delta: beta * delta });
        }
        w = next;
        if change < 1e-13 * (1.0 + linalg::sup_norm(&w)) {
            return Ok(w);
        }
    }
    Err(Error::NotConverged {
        solver: "explicit penalty scheme",
        iterations: PENALTY_MAX_ITER,
        gap: f64::NAN,
    })
}

/// Active-set Newton iteration; each step is one banded solve.
fn penalty_implicit(model: &MarkovModel, prob: &StoppingProblem, beta: f64) -> Result<Vec<f64>> {
    let n = model.len();
    let (lo, up) = model.bandwidth();
    let mut active = vec![false; n];
    for it in 0..=n + 1 {
        let mut m = BandedMatrix::zeros(n, lo, up);
        let mut b = vec![0.0; n];
        for x in 0..n {
            if !prob.domain.contains(x) {
                m.set(x, x, 1.0);
                b[x] = prob.exit_payoff[x];
                continue;
            }
            let pen = if active[x] { beta } else { 0.0 };
            m.add(x, x, prob.discount + model.out_rate(x) + pen);
            for &(y, q) in model.row(x) {
                m.add(x, y, -q);
            }
            b[x] = prob.running[x] + pen * prob.obstacle[x];
        }
        let w = m.factor("penalty equation")?.solve(&b);
        let next: Vec<bool> = (0..n).map(|x| prob.domain.contains(x) && w[x] > prob.obstacle[x]).collect();
        if next == active || it > n {
            return Ok(w);
        }
        active = next;
    }
    unreachable!()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicStopping {
    /// `z`, with the stopping region `{z ≥ w − tol}`.
    pub solution: StoppingSolution,
    /// Value `v` of the reduced problem with running cost `μ(f) − λ` and obstacle `g`.
    pub v: Vec<f64>,
    pub g: Vec<f64>,
    pub q: Vec<f64>,
    pub k: f64,
    pub w_norm: f64,
    pub gap_rate: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `max(upper − lower)` after each sweep.
    pub gap_trace: Vec<f64>,
    /// `(‖w‖ − q(x) + K) / (μ(f) − λ)`, a bound on the mean duration of good stopping rules.
    pub expected_time_bound: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketOptions {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl BracketOptions {
    pub fn for_model(model: &MarkovModel) -> Self {
        let work: usize = (0..model.len()).map(|x| model.row(x).len() + 1).sum();
        Self {
            tol: 1e-10,
            max_sweeps: (50_000_000 / work.max(1)).clamp(1_000, 500_000),
        }
    }
}

/// `z(x) = inf_τ E_x[∫_0^τ (f − λ) ds + w(X_τ)]` over the whole space, for `λ < μ(f)`.
pub fn solve_ergodic_stopping(model: &MarkovModel, f: &[f64], w: &[f64], lambda: f64) -> Result<ErgodicStopping> {
    solve_ergodic_stopping_with(model, f, w, lambda, BracketOptions::for_model(model))
}

pub fn solve_ergodic_stopping_with(
    model: &MarkovModel,
    f: &[f64],
    w: &[f64],
    lambda: f64,
    opts: BracketOptions,
) -> Result<ErgodicStopping> {
    let n = model.len();
    if w.len() != n {
        return Err(Error::InvalidInput(format!("payoff has {} entries, model has {n}", w.len())));
    }
    let ps = model::poisson_solve(model, f)?;
    let a = ps.mu_f - lambda;
    if !(a > 0.0) {
        return Err(Error::LambdaTooLarge { lambda, mu_f: ps.mu_f });
    }
    let k = ps.bound();
    let w_norm = linalg::sup_norm(w);
    let g: Vec<f64> = (0..n).map(|x| (-ps.q[x] + k + w[x] + w_norm).max(0.0)).collect();
    let running = vec![a; n];
    let full = Domain::full(n);
    let p = ControlProblem {
        model,
        domain: &full,
        running: &running,
        alpha: 0.0,
        exit: None,
        obstacle: Some(&g),
        impulse: None,
        pinned: None,
    };
    let (v, iterations) = match p.solve(None)? {
        Outcome::Solved { value, iterations, .. } => (value, iterations),
        Outcome::Unbounded => return Err(Error::LambdaTooLarge { lambda, mu_f: ps.mu_f }),
    };
    let sweep = |r: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|x| {
                let qx = model.out_rate(x);
                if qx == 0.0 {
                    g[x]
                } else {
                    ((a + model.row(x).iter().map(|&(y, q)| q * r[y]).sum::<f64>()) / qx).min(g[x])
                }
            })
            .collect()
    };
    let mut lower = vec![0.0; n];
    let mut upper = g.clone();
    let mut gap_trace = Vec::new();
    for _ in 0..opts.max_sweeps {
        lower = sweep(&lower);
        upper = sweep(&upper);
        let gap = upper.iter().zip(&lower).map(|(u, l)| u - l).fold(0.0, f64::max);
        gap_trace.push(gap);
        if gap < opts.tol {
            break;
        }
    }
    let z: Vec<f64> = (0..n).map(|x| ps.q[x] + v[x] - k - w_norm).collect();
    let stop_region = (0..n).map(|x| z[x] >= w[x] - STOP_TOL).collect();
    let expected_time_bound = (0..n).map(|x| (w_norm - ps.q[x] + k) / a).collect();
    Ok(ErgodicStopping {
        solution: StoppingSolution {
            value: z,
            stop_region,
            bracket_gap: gap_trace.last().copied().unwrap_or(0.0),
            iterations,
        },
        v,
        g,
        q: ps.q,
        k,
        w_norm,
        gap_rate: a,
        lower,
        upper,
        gap_trace,
        expected_time_bound,
    })
}

/// Checks `z(x) = inf_τ E_x[∫_0^{τ∧σ}(f − λ) ds + 1{τ<σ} w(X_τ) + 1{σ≤τ} z(X_σ)]`
/// for `σ` the first hitting time of `hitting`. Returns `max_x |rhs − z|`.
pub fn conditional_bellman_residual(
    model: &MarkovModel,
    f: &[f64],
    w: &[f64],
    z: &[f64],
    lambda: f64,
    hitting: &[bool],
) -> Result<f64> {
    let n = model.len();
    if hitting.len() != n || z.len() != n || f.len() != n || w.len() != n {
        return Err(Error::InvalidInput("vector lengths do not match the model".into()));
    }
    let interior: Vec<bool> = hitting.iter().map(|h| !h).collect();
    if !interior.iter().any(|&b| b) {
        return Ok(0.0);
    }
    let domain = Domain::new(interior)?;
    let running: Vec<f64> = f.iter().map(|v| v - lambda).collect();
    let obstacle: Vec<f64> = (0..n).map(|x| w[x].max(z[x])).collect();
    let p = ControlProblem {
        model,
        domain: &domain,
        running: &running,
        alpha: 0.0,
        exit: Some(z),
        obstacle: Some(&obstacle),
        impulse: None,
        pinned: None,
    };
    match p.solve(None)? {
        Outcome::Solved { value, .. } => Ok(linalg::sup_diff(&value, z)),
        Outcome::Unbounded => Ok(f64::INFINITY),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> MarkovModel {
        MarkovModel::from_dense(vec!["a".into(), "b".into()], None, &[vec![-1.0, 1.0], vec![2.0, -2.0]], 0.1).unwrap()
    }

    fn problem(running: Vec<f64>, g: Vec<f64>, alpha: f64) -> StoppingProblem {
        let n = running.len();
        StoppingProblem {
            running,
            obstacle: g,
            exit_payoff: vec![0.0; n],
            discount: alpha,
            domain: Domain::full(n),
        }
    }

    #[test]
    fn zero_cost_nonnegative_obstacle() {
        let m = two_state();
        let mut p = problem(vec![0.0; 2], vec![1.0, 0.5], 0.3);
        p.domain = Domain::from_states(2, &[0]).unwrap();
        let s = solve_discounted_stopping(&m, &p).unwrap();
        assert_eq!(s.value, vec![0.0, 0.0]);
        assert_eq!(s.stop_region, vec![false, false]);
    }

    #[test]
    fn negative_obstacle_stops_at_once() {
        let m = two_state();
        let mut p = problem(vec![0.0; 2], vec![-1.0, -1.0], 0.3);
        p.domain = Domain::from_states(2, &[0]).unwrap();
        p.exit_payoff = vec![-1.0; 2];
        let s = solve_discounted_stopping(&m, &p).unwrap();
        assert_eq!(s.value[0], -1.0);
        assert!(s.stop_region[0]);
    }

    /// Every stopping rule on two states, each evaluated by a 2×2 solve.
    #[test]
    fn two_state_matches_rule_enumeration() {
        let m = two_state();
        let (r, g, alpha) = ([1.0, -0.5], [2.0, 0.3], 0.1);
        let s = solve_discounted_stopping(&m, &problem(r.to_vec(), g.to_vec(), alpha)).unwrap();
        let mut best = [f64::INFINITY; 2];
        for mask in 0..4u8 {
            let stop = [mask & 1 != 0, mask & 2 != 0];
            let mut a = vec![vec![alpha + 1.0, -1.0], vec![-2.0, alpha + 2.0]];
            let mut b = r.to_vec();
            for x in 0..2 {
                if stop[x] {
                    a[x] = vec![0.0, 0.0];
                    a[x][x] = 1.0;
                    b[x] = g[x];
                }
            }
            let v = linalg::solve_dense(a, b).unwrap();
            for x in 0..2 {
                best[x] = best[x].min(v[x]);
            }
        }
        assert!(linalg::sup_diff(&s.value, &best) < 1e-12, "{:?} vs {best:?}", s.value);
        assert!(s.bracket_gap < 1e-10);
    }

    #[test]
    fn undiscounted_examples() {
        let m = MarkovModel::from_dense(
            (0..3).map(|i| i.to_string()).collect(),
            None,
            &[vec![-1.0, 1.0, 0.0], vec![1.0, -2.0, 1.0], vec![0.0, 1.0, -1.0]],
            0.1,
        )
        .unwrap();
        let d = Domain::from_states(3, &[0, 1]).unwrap();
        let mut p = problem(vec![1.0; 3], vec![0.0; 3], 0.0);
        p.domain = d.clone();
        let s = solve_undiscounted_stopping(&m, &p).unwrap();
        assert!(s.value.iter().all(|&v| v == 0.0));
        p.running = vec![-1.0; 3];
        let s = solve_undiscounted_stopping(&m, &p).unwrap();
        let e = model::exit_time_moments(&m, &d).unwrap();
        for x in 0..2 {
            assert!((s.value[x] + e.first[x]).abs() < 1e-12);
        }
    }

    #[test]
    fn penalty_limits() {
        let m = two_state();
        let mut p = problem(vec![0.0; 2], vec![-1.0; 2], 0.5);
        p.domain = Domain::from_states(2, &[0]).unwrap();
        p.exit_payoff = vec![-1.0; 2];
        let free = solve_penalty(&m, &p, 0.0, PenaltyScheme::Auto).unwrap();
        // no obstacle effect: w(0) = −1 · 1/(α+1)
        assert!((free[0] + 1.0 / 1.5).abs() < 1e-10, "{free:?}");
        let strong = solve_penalty(&m, &p, 1e9, PenaltyScheme::Auto).unwrap();
        assert!((strong[0] + 1.0).abs() < 1e-8);
        let e = solve_penalty(&m, &p, 1e3, PenaltyScheme::Explicit);
        assert!(matches!(e, Err(Error::PenaltyDiverges { .. })));
    }

    #[test]
    fn ergodic_stopping_positive_cost() {
        let m = two_state();
        let z = solve_ergodic_stopping(&m, &[2.0, 3.0], &[0.0, 0.0], 1.0).unwrap();
        assert!(linalg::sup_norm(&z.solution.value) < 1e-12);
        assert!(z.solution.stop_region.iter().all(|&b| b));
        assert!(z.solution.bracket_gap < 1e-10);
        assert!(matches!(
            solve_ergodic_stopping(&m, &[2.0, 3.0], &[0.0, 0.0], 9.0),
            Err(Error::LambdaTooLarge { .. })
        ));
    }
}
