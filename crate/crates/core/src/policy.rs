//! Policy iteration for the finite control problems behind every solver.
//!
//! At an interior state the controller may continue, stop (paying the obstacle
//! `G`) or jump to a target in `U` (paying `c(x, ξ)`). Exterior states pay the
//! exit value `H`. Continuation is evaluated on the jump chain, which is exact
//! for a continuous-time chain:
//!
//! `w(x) = (r(x) + Σ_{y≠x} q_xy w(y)) / (α + q_x)`.
//!
//! Impulse rows couple a state to a far-away target, which would destroy the
//! band structure; they are eliminated with a small Schur complement over the
//! distinct targets in use.
//!
//! With `α = 0` a policy may never terminate. Such policies are detected by
//! reachability before evaluation; if policy improvement produces one, the
//! problem has a cycle of non-positive cost and is reported as unbounded.

use serde::{Deserialize, Serialize};

use crate::cost::ImpulseCost;
use crate::error::{Error, Result};
use crate::linalg::{self, BandedMatrix};
use crate::model::{reaches, Domain, MarkovModel};

pub const MAX_POLICY_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Continue,
    Stop,
    /// Jump to the given target state.
    Impulse(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct ControlProblem<'a> {
    pub model: &'a MarkovModel,
    pub domain: &'a Domain,
    pub running: &'a [f64],
    pub alpha: f64,
    /// Payoff on exterior states; zero when absent.
    pub exit: Option<&'a [f64]>,
    pub obstacle: Option<&'a [f64]>,
    pub impulse: Option<&'a ImpulseCost>,
    /// Landing on this target ends the problem with value 0.
    pub pinned: Option<usize>,
}

#[derive(Debug, Clone)]
pub(crate) enum Outcome {
    Solved {
        value: Vec<f64>,
        actions: Vec<Action>,
        iterations: usize,
    },
    Unbounded,
}

impl<'a> ControlProblem<'a> {
    fn n(&self) -> usize {
        self.model.len()
    }

    fn exit_value(&self, x: usize) -> f64 {
        self.exit.map_or(0.0, |h| h[x])
    }

    pub fn default_policy(&self) -> Vec<Action> {
        (0..self.n())
            .map(|x| {
                if !self.domain.contains(x) {
                    Action::Continue
                } else if self.obstacle.is_some() {
                    Action::Stop
                } else if let Some(p) = self.pinned {
                    Action::Impulse(p)
                } else {
                    Action::Continue
                }
            })
            .collect()
    }

    /// True when every state reaches a terminal (exit, stop or pinned landing).
    pub fn is_proper(&self, actions: &[Action]) -> bool {
        let n = self.n();
        let terminal: Vec<bool> = (0..n)
            .map(|x| {
                !self.domain.contains(x)
                    || actions[x] == Action::Stop
                    || matches!(actions[x], Action::Impulse(t) if Some(t) == self.pinned)
            })
            .collect();
        let edges = |x: usize| -> Vec<usize> {
            match actions[x] {
                Action::Continue => self.model.successors(x),
                Action::Impulse(t) => vec![t],
                Action::Stop => Vec::new(),
            }
        };
        reaches(n, edges, &terminal).into_iter().all(|b| b)
    }

    /// Exact value of a stationary policy; `None` if it is improper with `α = 0`.
    pub fn evaluate(&self, actions: &[Action]) -> Result<Option<Vec<f64>>> {
        let n = self.n();
        if self.alpha == 0.0 && !self.is_proper(actions) {
            return Ok(None);
        }
        let (lo, up) = self.model.bandwidth();
        let mut m = BandedMatrix::zeros(n, lo, up);
        let mut b0 = vec![0.0; n];
        let mut targets: Vec<usize> = Vec::new();
        for x in 0..n {
            if !self.domain.contains(x) {
                m.set(x, x, 1.0);
                b0[x] = self.exit_value(x);
                continue;
            }
            match actions[x] {
                Action::Stop => {
                    let g = self.obstacle.ok_or_else(|| Error::InvalidInput("stop action without obstacle".into()))?;
                    m.set(x, x, 1.0);
                    b0[x] = g[x];
                }
                Action::Impulse(t) => {
                    let c = self.impulse.ok_or_else(|| Error::InvalidInput("impulse action without cost".into()))?;
                    m.set(x, x, 1.0);
                    b0[x] = c.cost_to(x, t);
                    if Some(t) != self.pinned && !targets.contains(&t) {
                        targets.push(t);
                    }
                }
                Action::Continue => {
                    let d = self.alpha + self.model.out_rate(x);
                    if d <= 0.0 {
                        return Err(Error::Singular(format!("continuation at absorbing state {}", self.model.label(x))));
                    }
                    m.add(x, x, d);
                    for &(y, q) in self.model.row(x) {
                        m.add(x, y, -q);
                    }
                    b0[x] = self.running[x];
                }
            }
        }
        targets.sort_unstable();
        let lu = m.factor("policy evaluation")?;
        let mut w = lu.solve(&b0);
        if targets.is_empty() {
            return Ok(Some(w));
        }
        let k = targets.len();
        let cols: Vec<Vec<f64>> = targets
            .iter()
            .map(|&t| {
                let mut e = vec![0.0; n];
                for x in 0..n {
                    if self.domain.contains(x) && actions[x] == Action::Impulse(t) {
                        e[x] = 1.0;
                    }
                }
                lu.solve(&e)
            })
            .collect();
        let a: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| if i == j { 1.0 } else { 0.0 } - cols[j][targets[i]])
                    .collect()
            })
            .collect();
        let rhs: Vec<f64> = targets.iter().map(|&t| w[t]).collect();
        let s = linalg::solve_dense(a, rhs).ok_or_else(|| Error::Singular("impulse target coupling".into()))?;
        for (j, col) in cols.iter().enumerate() {
            for x in 0..n {
                w[x] += s[j] * col[x];
            }
        }
        Ok(Some(w))
    }

    /// Value of continuing one jump from `x`.
    pub fn continuation(&self, x: usize, w: &[f64]) -> f64 {
        let d = self.alpha + self.model.out_rate(x);
        if d <= 0.0 {
            return if self.running[x] > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        (self.running[x] + self.model.row(x).iter().map(|&(y, q)| q * w[y]).sum::<f64>()) / d
    }

    /// Landing values on `U`, indexed by target position.
    pub fn landing(&self, w: &[f64]) -> Vec<f64> {
        let c = self.impulse.expect("landing values need an impulse cost");
        c.targets()
            .iter()
            .map(|&t| if Some(t) == self.pinned { 0.0 } else { w[t] })
            .collect()
    }

    /// One greedy step. Returns the new policy and whether it changed.
    pub fn improve(&self, actions: &[Action], w: &[f64]) -> (Vec<Action>, bool) {
        let n = self.n();
        let best = self.impulse.map(|c| (c, self.landing(w), c.best_all(&self.landing(w))));
        let mut next = actions.to_vec();
        let mut changed = false;
        for x in 0..n {
            if !self.domain.contains(x) {
                continue;
            }
            let cont = self.continuation(x, w);
            let mut cand = (cont, Action::Continue);
            if let Some(g) = self.obstacle {
                if g[x] < cand.0 {
                    cand = (g[x], Action::Stop);
                }
            }
            if let Some((c, _, b)) = &best {
                let (v, j) = b[x];
                if v < cand.0 {
                    cand = (v, Action::Impulse(c.targets()[j]));
                }
            }
            let current = match actions[x] {
                Action::Continue => cont,
                Action::Stop => self.obstacle.map_or(f64::INFINITY, |g| g[x]),
                Action::Impulse(t) => match &best {
                    Some((c, land, _)) => {
                        let j = c.target_index(t).expect("target not in U");
                        c.cost(x, j) + land[j]
                    }
                    None => f64::INFINITY,
                },
            };
            if cand.0 < current - 1e-11 * (1.0 + cand.0.abs()) {
                next[x] = cand.1;
                changed = true;
            }
        }
        if self.resolve_chains(&mut next) {
            changed = true;
        }
        (next, changed)
    }

    /// Redirects impulses whose target itself jumps. Cycles fall back to continuation.
    pub fn resolve_chains(&self, actions: &mut [Action]) -> bool {
        let snapshot = actions.to_vec();
        let n = self.n();
        let mut changed = false;
        for x in 0..n {
            let Action::Impulse(mut t) = snapshot[x] else {
                continue;
            };
            let mut steps = 0;
            let mut cyclic = false;
            while Some(t) != self.pinned && self.domain.contains(t) {
                let Action::Impulse(t2) = snapshot[t] else {
                    break;
                };
                t = t2;
                steps += 1;
                if steps > n {
                    cyclic = true;
                    break;
                }
            }
            let new = if cyclic { Action::Continue } else { Action::Impulse(t) };
            if new != actions[x] {
                actions[x] = new;
                changed = true;
            }
        }
        changed
    }

    pub fn solve(&self, init: Option<Vec<Action>>) -> Result<Outcome> {
        let mut actions = init.unwrap_or_else(|| self.default_policy());
        self.resolve_chains(&mut actions);
        for it in 0..MAX_POLICY_ITERATIONS {
            let Some(w) = self.evaluate(&actions)? else {
                if it == 0 {
                    return Err(Error::InvalidInput("initial policy never terminates".into()));
                }
                return Ok(Outcome::Unbounded);
            };
            let (next, changed) = self.improve(&actions, &w);
            if !changed {
                return Ok(Outcome::Solved {
                    value: w,
                    actions,
                    iterations: it + 1,
                });
            }
            actions = next;
        }
        Err(Error::NotConverged {
            solver: "policy iteration",
            iterations: MAX_POLICY_ITERATIONS,
            gap: f64::NAN,
        })
    }
}
