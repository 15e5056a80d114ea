//! Quasi-variational inequalities for impulse control on a stopped domain.
//!
//! For a fixed `λ` the value `w(·; λ)` solves
//! `w = min(Mw, continuation with integrand f − λ)` on `O`, `w = 0` outside.
//! `λ_α` is the root of the decreasing map `λ ↦ inf_U w(·; λ)`. Each
//! evaluation is an exact policy iteration; the root search combines
//! bisection with ratio (Dinkelbach) steps, which terminate exactly once the
//! optimal policy at the candidate reproduces the candidate.

use serde::{Deserialize, Serialize};

pub use crate::cost::{apply_m, CostKind, ImpulseCost};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{self, Domain, MarkovModel};
use crate::policy::{Action, ControlProblem, Outcome};

/// Bisection tolerance on `λ`.
pub const LAMBDA_TOL: f64 = 1e-10;
/// States with `w ≥ Mw − STRATEGY_TOL` are in the impulse region.
pub const STRATEGY_TOL: f64 = 1e-9;

/// Stationary impulse policy: jump to `target[x]` whenever `x` is in the region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub impulse_region: Vec<bool>,
    pub target: Vec<Option<usize>>,
}

impl Strategy {
    /// Never intervene.
    pub fn none(n: usize) -> Self {
        Self {
            impulse_region: vec![false; n],
            target: vec![None; n],
        }
    }

    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut s = Self::none(n);
        for &(x, t) in pairs {
            s.impulse_region[x] = true;
            s.target[x] = Some(t);
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        !self.impulse_region.iter().any(|&b| b)
    }

    pub fn region_states(&self) -> Vec<usize> {
        (0..self.impulse_region.len()).filter(|&x| self.impulse_region[x]).collect()
    }

    /// Region states map into `U`, and no target lies inside the region.
    pub fn validate(&self, cost: &ImpulseCost) -> Result<()> {
        let n = cost.n_states();
        if self.impulse_region.len() != n || self.target.len() != n {
            return Err(Error::InvalidInput("strategy size does not match the model".into()));
        }
        for x in 0..n {
            match (self.impulse_region[x], self.target[x]) {
                (true, Some(t)) => {
                    if cost.target_index(t).is_none() {
                        return Err(Error::InvalidInput(format!("target {t} of state {x} is not in U")));
                    }
                    if self.impulse_region[t] {
                        return Err(Error::TargetInImpulseRegion { state: x, target: t });
                    }
                }
                (true, None) => return Err(Error::InvalidInput(format!("state {x} in the impulse region has no target"))),
                (false, Some(_)) => return Err(Error::InvalidInput(format!("state {x} has a target but no impulse"))),
                (false, None) => {}
            }
        }
        Ok(())
    }

    pub(crate) fn from_actions(actions: &[Action]) -> Self {
        let mut s = Self::none(actions.len());
        for (x, a) in actions.iter().enumerate() {
            if let Action::Impulse(t) = a {
                s.impulse_region[x] = true;
                s.target[x] = Some(*t);
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QviSolution {
    pub lambda: f64,
    pub value: Vec<f64>,
    pub m_value: Vec<f64>,
    pub strategy: Strategy,
    pub residual: f64,
    pub alpha: f64,
    /// Root-finding steps (policy-iteration solves) used.
    pub iterations: usize,
    /// The root search ended on an exact policy fixed point rather than the bisection tolerance.
    pub exact: bool,
    /// No intervention is profitable and `λ = μ(f)`.
    pub degenerate: bool,
}

/// Impulse region `{w ≥ Mw − tol}` on the interior and the argmin targets.
pub fn extract_strategy(
    value: &[f64],
    cost: &ImpulseCost,
    domain: &Domain,
    tol: f64,
) -> Result<Strategy> {
    let n = value.len();
    let (mv, arg) = apply_m(value, cost);
    let region: Vec<bool> = (0..n).map(|x| domain.contains(x) && value[x] >= mv[x] - tol).collect();
    let mut s = Strategy::none(n);
    for x in 0..n {
        if !region[x] {
            continue;
        }
        let mut t = arg[x];
        if region[t] {
            t = arg[t];
        }
        if region[t] {
            return Err(Error::TargetInImpulseRegion { state: x, target: t });
        }
        s.impulse_region[x] = true;
        s.target[x] = Some(t);
    }
    Ok(s)
}

/// `max_x |min(continuation − w, Mw − w)|` over the interior, exit value 0.
pub fn qvi_residual(
    model: &MarkovModel,
    domain: &Domain,
    cost: &ImpulseCost,
    running: &[f64],
    alpha: f64,
    w: &[f64],
) -> f64 {
    let p = ControlProblem {
        model,
        domain,
        running,
        alpha,
        exit: None,
        obstacle: None,
        impulse: Some(cost),
        pinned: None,
    };
    let (mv, _) = apply_m(w, cost);
    (0..w.len())
        .filter(|&x| domain.contains(x))
        .map(|x| (p.continuation(x, w) - w[x]).min(mv[x] - w[x]).abs())
        .fold(0.0, f64::max)
}

fn shifted(f: &[f64], lambda: f64) -> Vec<f64> {
    f.iter().map(|v| v - lambda).collect()
}

/// One step `F v`: optimal stopping with obstacle `Mv`, integrand `running`,
/// exit value 0.
pub fn qvi_sweep(
    model: &MarkovModel,
    domain: &Domain,
    cost: &ImpulseCost,
    running: &[f64],
    alpha: f64,
    v: &[f64],
) -> Result<Vec<f64>> {
    let (mv, _) = apply_m(v, cost);
    let p = ControlProblem {
        model,
        domain,
        running,
        alpha,
        exit: None,
        obstacle: Some(&mv),
        impulse: None,
        pinned: None,
    };
    match p.solve(None)? {
        Outcome::Solved { value, .. } => Ok(value),
        Outcome::Unbounded => Err(Error::NotConverged {
            solver: "QVI sweep",
            iterations: 0,
            gap: f64::INFINITY,
        }),
    }
}

/// Value without impulses: `E[∫_0^{τ_O} e^{−αs} running ds]`.
pub fn no_impulse_value(model: &MarkovModel, domain: &Domain, running: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let p = ControlProblem {
        model,
        domain,
        running,
        alpha,
        exit: None,
        obstacle: None,
        impulse: None,
        pinned: None,
    };
    p.evaluate(&vec![Action::Continue; model.len()])?.ok_or_else(|| Error::ExitUnreachable {
        states: model::trapped_states(model, domain).iter().map(|&i| model.label(i).to_string()).collect(),
    })
}

/// The sequence `w⁰ = no-impulse value, wⁿ⁺¹ = F wⁿ`, stopped when the sup-norm
/// change drops below `tol` or after `max_iter` steps.
pub fn qvi_iterates(
    model: &MarkovModel,
    domain: &Domain,
    cost: &ImpulseCost,
    f: &[f64],
    lambda: f64,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<Vec<f64>>> {
    let running = shifted(f, lambda);
    let mut seq = vec![no_impulse_value(model, domain, &running, alpha)?];
    for _ in 0..max_iter {
        let next = qvi_sweep(model, domain, cost, &running, alpha, seq.last().unwrap())?;
        let change = linalg::sup_diff(&next, seq.last().unwrap());
        seq.push(next);
        if change < tol {
            break;
        }
    }
    Ok(seq)
}

/// Exact solution of the stopped QVI at fixed `λ`, by policy iteration started
/// from the no-impulse policy. Returns the value and the iteration count.
pub fn solve_discounted_qvi(
    model: &MarkovModel,
    domain: &Domain,
    cost: &ImpulseCost,
    f: &[f64],
    lambda: f64,
    alpha: f64,
) -> Result<(Vec<f64>, usize)> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput("discounted QVI needs alpha > 0".into()));
    }
    let running = shifted(f, lambda);
    let p = qvi_problem(model, domain, cost, &running, alpha, None);
    match p.solve(None)? {
        Outcome::Solved { value, iterations, .. } => Ok((value, iterations)),
        Outcome::Unbounded => unreachable!("discounted problems are always proper"),
    }
}

fn qvi_problem<'a>(
    model: &'a MarkovModel,
    domain: &'a Domain,
    cost: &'a ImpulseCost,
    running: &'a [f64],
    alpha: f64,
    pinned: Option<usize>,
) -> ControlProblem<'a> {
    ControlProblem {
        model,
        domain,
        running,
        alpha,
        exit: None,
        obstacle: None,
        impulse: Some(cost),
        pinned,
    }
}

/// Root search for `λ ↦ h(λ)`, where `h` is `inf_U w` (or `w(u*)` when a
/// landing target `u*` is pinned).
pub(crate) struct LambdaSearch<'a> {
    pub model: &'a MarkovModel,
    pub domain: &'a Domain,
    pub cost: &'a ImpulseCost,
    pub f: &'a [f64],
    pub alpha: f64,
    pub pinned: Option<usize>,
}

pub(crate) enum HEval {
    Finite { h: f64, w: Vec<f64>, actions: Vec<Action> },
    Unbounded,
}

pub(crate) struct Root {
    pub lambda: f64,
    pub w: Vec<f64>,
    pub actions: Vec<Action>,
    pub steps: usize,
    pub exact: bool,
}

impl<'a> LambdaSearch<'a> {
    fn h_of(&self, w: &[f64]) -> f64 {
        match self.pinned {
            Some(p) => w[p],
            None => self.cost.targets().iter().map(|&t| w[t]).fold(f64::INFINITY, f64::min),
        }
    }

    fn probe_states(&self) -> Vec<usize> {
        match self.pinned {
            Some(p) => vec![p],
            None => self.cost.targets().to_vec(),
        }
    }

    pub fn eval(&self, lambda: f64, init: Option<Vec<Action>>) -> Result<HEval> {
        let running = shifted(self.f, lambda);
        let p = qvi_problem(self.model, self.domain, self.cost, &running, self.alpha, self.pinned);
        Ok(match p.solve(init)? {
            Outcome::Solved { value, actions, .. } => HEval::Finite {
                h: self.h_of(&value),
                w: value,
                actions,
            },
            Outcome::Unbounded => HEval::Unbounded,
        })
    }

    /// Smallest `λ` at which the policy's `h` vanishes; the policy value is affine in `λ`.
    fn ratio(&self, lambda: f64, actions: &[Action]) -> Result<Option<f64>> {
        let eval_at = |l: f64| -> Result<Option<Vec<f64>>> {
            let running = shifted(self.f, l);
            qvi_problem(self.model, self.domain, self.cost, &running, self.alpha, self.pinned).evaluate(actions)
        };
        let (Some(w0), Some(w1)) = (eval_at(lambda)?, eval_at(lambda + 1.0)?) else {
            return Ok(None);
        };
        let mut best: Option<f64> = None;
        for u in self.probe_states() {
            let b = w0[u] - w1[u];
            if b > 1e-13 * (1.0 + w0[u].abs()) {
                let r = lambda + w0[u] / b;
                best = Some(best.map_or(r, |x: f64| x.min(r)));
            }
        }
        Ok(best)
    }

    /// Finds the root in `[lo, hi]`, assuming `h(lo) ≥ 0`. Returns `Ok(None)`
    /// when `h(hi) > 0` (no sign change).
    pub fn root(&self, mut lo: f64, mut hi: f64, tol: f64) -> Result<Option<Root>> {
        let mut steps = 0usize;
        let (mut policy, h_lo, w_lo) = match self.eval(lo, None)? {
            HEval::Finite { h, w, actions } => (actions, h, w),
            HEval::Unbounded => return Err(Error::BracketFailure { lo, hi }),
        };
        steps += 1;
        if h_lo < 0.0 {
            return Err(Error::BracketFailure { lo, hi });
        }
        if h_lo == 0.0 {
            return Ok(Some(Root { lambda: lo, w: w_lo, actions: policy, steps, exact: true }));
        }
        match self.eval(hi, Some(policy.clone()))? {
            HEval::Finite { h, w, actions } => {
                steps += 1;
                if h > 0.0 {
                    return Ok(None);
                }
                if h == 0.0 {
                    return Ok(Some(Root { lambda: hi, w, actions, steps, exact: true }));
                }
            }
            HEval::Unbounded => steps += 1,
        }
        let mut last = lo;
        // Closest point to the root seen so far, for the tolerance exit.
        let mut best: Option<(f64, Root)> = None;
        while hi - lo > tol && steps < 500 {
            let from_ratio = self.ratio(last, &policy)?.filter(|&r| r > lo && r < hi);
            let cand = from_ratio.unwrap_or(0.5 * (lo + hi));
            steps += 1;
            match self.eval(cand, Some(policy.clone()))? {
                HEval::Unbounded => hi = cand,
                HEval::Finite { h, w, actions } => {
                    // A tie at a kink of h can swap the policy at the root itself.
                    let at_root = h.abs() <= 1e-13 * (1.0 + linalg::sup_norm(&w));
                    if (from_ratio.is_some() && actions == policy) || h == 0.0 || at_root {
                        return Ok(Some(Root { lambda: cand, w, actions, steps, exact: true }));
                    }
                    if h > 0.0 {
                        lo = cand;
                    } else {
                        hi = cand;
                    }
                    if best.as_ref().is_none_or(|(b, _)| h.abs() < *b) {
                        best = Some((h.abs(), Root { lambda: cand, w, actions: actions.clone(), steps, exact: false }));
                    }
                    policy = actions;
                    last = cand;
                }
            }
        }
        let mid = 0.5 * (lo + hi);
        if let HEval::Finite { h, w, actions } = self.eval(mid, Some(policy.clone()))? {
            if best.as_ref().is_none_or(|(b, _)| h.abs() < *b) {
                best = Some((h.abs(), Root { lambda: mid, w, actions, steps, exact: false }));
            }
        }
        match best {
            Some((_, mut root)) => {
                root.steps = steps + 1;
                Ok(Some(root))
            }
            None => Err(Error::BracketFailure { lo, hi }),
        }
    }
}

fn finish_solution(
    model: &MarkovModel,
    domain: &Domain,
    cost: &ImpulseCost,
    f: &[f64],
    alpha: f64,
    mut root: Root,
) -> Result<QviSolution> {
    if domain.is_full() && alpha > 0.0 {
        // w − m solves the same QVI at λ + αm; this makes inf_U w vanish exactly.
        let m = cost.targets().iter().map(|&t| root.w[t]).fold(f64::INFINITY, f64::min);
        root.w.iter_mut().for_each(|v| *v -= m);
        root.lambda += alpha * m;
    }
    let running = shifted(f, root.lambda);
    let (m_value, _) = apply_m(&root.w, cost);
    let residual = qvi_residual(model, domain, cost, &running, alpha, &root.w);
    let strategy = match extract_strategy(&root.w, cost, domain, STRATEGY_TOL) {
        Ok(s) => s,
        Err(_) => Strategy::from_actions(&root.actions),
    };
    Ok(QviSolution {
        lambda: root.lambda,
        value: root.w,
        m_value,
        strategy,
        residual,
        alpha,
        iterations: root.steps,
        exact: root.exact,
        degenerate: false,
    })
}

fn check_inputs(model: &MarkovModel, domain: &Domain, cost: &ImpulseCost, f: &[f64]) -> Result<()> {
    let n = model.len();
    if f.len() != n || domain.len() != n || cost.n_states() != n {
        return Err(Error::InvalidInput("f, domain and cost must match the model size".into()));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("f has non-finite entries".into()));
    }
    Ok(())
}

/// `(λ_α, w_α)` on a stopped domain, normalized by `inf_U w_α = 0`.
pub fn lambda_alpha(model: &MarkovModel, domain: &Domain, cost: &ImpulseCost, f: &[f64], alpha: f64) -> Result<QviSolution> {
    check_inputs(model, domain, cost, f)?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput("lambda_alpha needs alpha > 0".into()));
    }
    lambda_on_domain(model, domain, cost, f, alpha)
}

/// Shared by the discounted (`α > 0`) and undiscounted stopped problems.
pub(crate) fn lambda_on_domain(
    model: &MarkovModel,
    domain: &Domain,
    cost: &ImpulseCost,
    f: &[f64],
    alpha: f64,
) -> Result<QviSolution> {
    let fmax = linalg::sup_norm(f);
    let search = LambdaSearch {
        model,
        domain,
        cost,
        f,
        alpha,
        pinned: None,
    };
    let root = search
        .root(-fmax, fmax, LAMBDA_TOL)?
        .ok_or(Error::BracketFailure { lo: -fmax, hi: fmax })?;
    finish_solution(model, domain, cost, f, alpha, root)
}

/// Undiscounted problem on the whole space. Landing on a pinned target ends a
/// cycle, which turns the average-cost problem into a sequence of
/// shortest-path problems; the pin moves until it sits on an optimal cycle.
pub(crate) fn lambda_full_space(model: &MarkovModel, cost: &ImpulseCost, f: &[f64], mu_f: f64, poisson_q: &[f64]) -> Result<QviSolution> {
    let n = model.len();
    let domain = Domain::full(n);
    let fmax = linalg::sup_norm(f);
    let degenerate = || -> Result<QviSolution> {
        let shift = cost.targets().iter().map(|&t| poisson_q[t]).fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = poisson_q.iter().map(|q| q - shift).collect();
        let running = shifted(f, mu_f);
        let (m_value, _) = apply_m(&w, cost);
        let residual = qvi_residual(model, &domain, cost, &running, 0.0, &w);
        Ok(QviSolution {
            lambda: mu_f,
            value: w,
            m_value,
            strategy: Strategy::none(n),
            residual,
            alpha: 0.0,
            iterations: 0,
            exact: true,
            degenerate: true,
        })
    };
    let mut pin = cost.targets()[0];
    let mut tried = vec![false; n];
    let mut fallback: Option<Root> = None;
    let mut steps = 0;
    for _ in 0..cost.targets().len() {
        tried[pin] = true;
        let search = LambdaSearch {
            model,
            domain: &domain,
            cost,
            f,
            alpha: 0.0,
            pinned: Some(pin),
        };
        let Some(mut root) = search.root(-fmax - 1.0, mu_f, LAMBDA_TOL)? else {
            // h(μ(f)) > 0 for this pin; another pin may still cycle profitably
            match cost.targets().iter().find(|&&t| !tried[t]) {
                Some(&t) => {
                    pin = t;
                    continue;
                }
                None => break,
            }
        };
        steps += root.steps;
        root.steps = steps;
        let (arg, min_u) = cost
            .targets()
            .iter()
            .map(|&t| (t, if t == pin { 0.0 } else { root.w[t] }))
            .fold((pin, 0.0), |acc, x| if x.1 < acc.1 { x } else { acc });
        if root.exact && min_u >= -STRATEGY_TOL {
            if root.lambda >= mu_f - 1e-9 {
                return degenerate();
            }
            return finish_solution(model, &domain, cost, f, 0.0, root);
        }
        let next = if arg != pin && !tried[arg] {
            Some(arg)
        } else {
            cost.targets().iter().copied().find(|&t| !tried[t])
        };
        if fallback.as_ref().is_none_or(|fb| root.lambda < fb.lambda) {
            fallback = Some(root);
        }
        match next {
            Some(t) => pin = t,
            None => break,
        }
    }
    match fallback {
        Some(root) if root.lambda < mu_f - 1e-9 => {
            let shift = cost.targets().iter().map(|&t| root.w[t]).fold(0.0, f64::min);
            let root = Root {
                w: root.w.iter().map(|v| v - shift).collect(),
                ..root
            };
            finish_solution(model, &domain, cost, f, 0.0, root)
        }
        _ => degenerate(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelSpec, RateSpec};

    fn chain(n: usize) -> MarkovModel {
        build_model(&ModelSpec::BirthDeath {
            size: n,
            birth: RateSpec::Constant(1.0),
            death: RateSpec::Constant(0.5),
            delta: None,
        })
        .unwrap()
    }

    #[test]
    fn constant_f_gives_kappa() {
        let m = chain(4);
        let d = Domain::from_states(4, &[0, 1, 2]).unwrap();
        let c = ImpulseCost::new(&m, vec![0], CostKind::Constant { value: 0.5 }, None).unwrap();
        let s = lambda_alpha(&m, &d, &c, &[2.0; 4], 0.1).unwrap();
        assert!((s.lambda - 2.0).abs() < 1e-10);
        assert!(s.strategy.is_empty());
    }

    #[test]
    fn unaffordable_impulses() {
        let m = chain(4);
        let d = Domain::from_states(4, &[0, 1, 2]).unwrap();
        let c = ImpulseCost::new(&m, vec![0], CostKind::Constant { value: 1e6 }, None).unwrap();
        let f = [0.0, 1.0, 3.0, 5.0];
        let (w, _) = solve_discounted_qvi(&m, &d, &c, &f, 1.0, 0.2).unwrap();
        let free = no_impulse_value(&m, &d, &shifted(&f, 1.0), 0.2).unwrap();
        assert!(linalg::sup_diff(&w, &free) < 1e-12);
    }

    /// Three states, `U = {0}`: compare with every one of the 8 impulse regions.
    #[test]
    fn three_state_matches_region_enumeration() {
        let m = MarkovModel::from_dense(
            (0..3).map(|i| i.to_string()).collect(),
            None,
            &[vec![-1.0, 1.0, 0.0], vec![0.5, -1.5, 1.0], vec![0.0, 2.0, -2.0]],
            0.1,
        )
        .unwrap();
        let d = Domain::full(3);
        let c = ImpulseCost::new(&m, vec![0], CostKind::Constant { value: 0.3 }, None).unwrap();
        let f = [0.0, 1.0, 4.0];
        let (alpha, lambda) = (0.5, 0.7);
        let (w, _) = solve_discounted_qvi(&m, &d, &c, &f, lambda, alpha).unwrap();
        let q = m.generator_dense();
        let mut best = [f64::INFINITY; 3];
        for mask in 0..8u8 {
            if mask & 1 != 0 {
                continue; // impulse at the target itself loops forever
            }
            let mut a = vec![vec![0.0; 3]; 3];
            let mut b = vec![0.0; 3];
            for x in 0..3 {
                if mask & (1 << x) != 0 {
                    a[x][x] = 1.0;
                    a[x][0] = -1.0;
                    b[x] = 0.3;
                } else {
                    for y in 0..3 {
                        a[x][y] = -q[x][y];
                    }
                    a[x][x] += alpha;
                    b[x] = f[x] - lambda;
                }
            }
            let v = linalg::solve_dense(a, b).unwrap();
            for x in 0..3 {
                best[x] = best[x].min(v[x]);
            }
        }
        assert!(linalg::sup_diff(&w, &best) < 1e-12, "{w:?} vs {best:?}");
    }

    #[test]
    fn lambda_bound_and_normalization() {
        let m = chain(6);
        let d = Domain::from_states(6, &[0, 1, 2, 3, 4]).unwrap();
        let c = ImpulseCost::new(&m, vec![0, 1], CostKind::Distance { fixed: 0.2, per_unit: 0.1 }, None).unwrap();
        let f = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0];
        let s = lambda_alpha(&m, &d, &c, &f, 0.05).unwrap();
        assert!(s.lambda.abs() <= 8.0);
        let inf_u = s.value[0].min(s.value[1]);
        assert!(inf_u.abs() < 1e-8, "{inf_u}");
        assert!(s.residual < 1e-9, "{}", s.residual);
        s.strategy.validate(&c).unwrap();
    }

    #[test]
    fn extract_on_slack_values_is_empty() {
        let m = chain(3);
        let c = ImpulseCost::new(&m, vec![0], CostKind::Constant { value: 1.0 }, None).unwrap();
        let s = extract_strategy(&[0.0, 0.5, 0.9], &c, &Domain::full(3), STRATEGY_TOL).unwrap();
        assert!(s.is_empty());
        let s = extract_strategy(&[0.0, 0.5, 1.0], &c, &Domain::full(3), STRATEGY_TOL).unwrap();
        assert_eq!(s.region_states(), vec![2]);
        assert_eq!(s.target[2], Some(0));
    }
}
