//! Event simulation of the controlled chain and Monte Carlo estimates of the
//! average-cost functionals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::ImpulseCost;
use crate::error::{Error, Result};
use crate::impulse::Strategy;
use crate::model::{Domain, MarkovModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventKind {
    Start,
    Jump,
    Impulse { from: usize, to: usize, cost: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    /// State occupied after the event.
    pub state: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub events: Vec<Event>,
    pub running_cost_integral: f64,
    pub impulse_cost_total: f64,
    pub impulse_count: usize,
    /// Time of each impulse; `N(0, t)` is the number of entries `≤ t`.
    pub impulse_times: Vec<f64>,
    /// Total cost (running plus impulses) accumulated up to and including each impulse.
    pub cost_at_impulse: Vec<f64>,
    /// End of the path: the horizon, or the exit time when killed.
    pub end_time: f64,
    pub exited: bool,
    pub seed: u64,
}

impl Trajectory {
    pub fn total_cost(&self) -> f64 {
        self.running_cost_integral + self.impulse_cost_total
    }

    pub fn impulses_by(&self, t: f64) -> usize {
        self.impulse_times.partition_point(|&s| s <= t)
    }

    /// CSV with columns `time,state,kind,cost`.
    pub fn to_csv(&self, model: &MarkovModel) -> String {
        let mut out = String::from("time,state,kind,cost\n");
        for e in &self.events {
            let (kind, cost) = match e.kind {
                EventKind::Start => ("start", 0.0),
                EventKind::Jump => ("jump", 0.0),
                EventKind::Impulse { cost, .. } => ("impulse", cost),
            };
            out.push_str(&format!("{:.16e},{},{},{:.16e}\n", e.time, model.label(e.state), kind, cost));
        }
        out
    }
}

struct Sim<'a> {
    model: &'a MarkovModel,
    strategy: &'a Strategy,
    cost: &'a ImpulseCost,
    f: &'a [f64],
    kill: Option<&'a Domain>,
}

impl Sim<'_> {
    fn run(&self, start: usize, horizon: f64, seed: u64, record: bool) -> Trajectory {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tr = Trajectory {
            events: Vec::new(),
            running_cost_integral: 0.0,
            impulse_cost_total: 0.0,
            impulse_count: 0,
            impulse_times: Vec::new(),
            cost_at_impulse: Vec::new(),
            end_time: horizon,
            exited: false,
            seed,
        };
        let mut t = 0.0;
        let mut x = start;
        if record {
            tr.events.push(Event { time: 0.0, state: x, kind: EventKind::Start });
        }
        if self.kill.is_some_and(|d| !d.contains(x)) {
            tr.exited = true;
            tr.end_time = 0.0;
            return tr;
        }
        x = self.enter(x, t, &mut tr, record);
        loop {
            let q = self.model.out_rate(x);
            let hold = if q > 0.0 { -(1.0 - rng.gen::<f64>()).ln() / q } else { f64::INFINITY };
            if t + hold >= horizon {
                tr.running_cost_integral += self.f[x] * (horizon - t);
                return tr;
            }
            tr.running_cost_integral += self.f[x] * hold;
            t += hold;
            let mut u = rng.gen::<f64>() * q;
            let row = self.model.row(x);
            let mut y = row[row.len() - 1].0;
            for &(j, r) in row {
                if u < r {
                    y = j;
                    break;
                }
                u -= r;
            }
            if record {
                tr.events.push(Event { time: t, state: y, kind: EventKind::Jump });
            }
            if self.kill.is_some_and(|d| !d.contains(y)) {
                tr.exited = true;
                tr.end_time = t;
                return tr;
            }
            x = self.enter(y, t, &mut tr, record);
        }
    }

    /// Applies the impulse on entering the region; targets lie outside it.
    fn enter(&self, y: usize, t: f64, tr: &mut Trajectory, record: bool) -> usize {
        if !self.strategy.impulse_region[y] {
            return y;
        }
        let to = self.strategy.target[y].expect("validated strategy");
        let c = self.cost.cost_to(y, to);
        tr.impulse_cost_total += c;
        tr.impulse_count += 1;
        tr.impulse_times.push(t);
        tr.cost_at_impulse.push(tr.running_cost_integral + tr.impulse_cost_total);
        if record {
            tr.events.push(Event {
                time: t,
                state: to,
                kind: EventKind::Impulse { from: y, to, cost: c },
            });
        }
        to
    }
}

fn check(model: &MarkovModel, strategy: &Strategy, cost: &ImpulseCost, f: &[f64], start: usize, horizon: f64) -> Result<()> {
    strategy.validate(cost)?;
    if f.len() != model.len() || start >= model.len() {
        return Err(Error::InvalidInput("f or start state does not match the model".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

/// One path of the controlled process on `[0, horizon]`, with every event recorded.
pub fn simulate_controlled(
    model: &MarkovModel,
    strategy: &Strategy,
    cost: &ImpulseCost,
    f: &[f64],
    start: usize,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    check(model, strategy, cost, f, start, horizon)?;
    Ok(Sim { model, strategy, cost, f, kill: None }.run(start, horizon, seed, true))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalKind {
    /// Ratio at the n-th impulse time.
    J,
    /// Cost over `[0, T]` divided by `T`.
    Jhat,
    /// Ratio form killed at the exit from a domain.
    JStopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalEstimate {
    pub kind: FunctionalKind,
    /// `None` when the functional is undefined on the sample.
    pub estimate: Option<f64>,
    pub std_error: f64,
    pub horizon: f64,
    /// Impulse index used by the ratio form.
    pub impulses: usize,
    pub replications: usize,
    /// Same estimator at half the horizon or half the impulse count.
    pub half_estimate: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub start: usize,
    pub horizon: f64,
    pub replications: usize,
    pub seed: u64,
}

/// Mean and standard error of the mean.
fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ratio estimator `Σ a / Σ b` with its delta-method standard error.
fn ratio_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let r = a.iter().sum::<f64>() / b.iter().sum::<f64>();
    if a.len() < 2 {
        return (r, f64::INFINITY);
    }
    let mb = b.iter().sum::<f64>() / n;
    let var = a.iter().zip(b).map(|(x, y)| (x - r * y).powi(2)).sum::<f64>() / (n - 1.0);
    (r, (var / n).sqrt() / mb)
}

/// Estimates `Ĵ`, `J` and, when `domain` is given, the killed functional `J^O`.
/// Replication `i` uses seed `seed + i`.
pub fn estimate_functionals(
    model: &MarkovModel,
    strategy: &Strategy,
    cost: &ImpulseCost,
    f: &[f64],
    domain: Option<&Domain>,
    opts: EstimateOptions,
) -> Result<Vec<FunctionalEstimate>> {
    check(model, strategy, cost, f, opts.start, opts.horizon)?;
    if opts.replications < 2 {
        return Err(Error::InvalidInput("need at least two replications".into()));
    }
    let sim = Sim { model, strategy, cost, f, kill: None };
    let paths: Vec<Trajectory> = (0..opts.replications)
        .into_par_iter()
        .map(|i| sim.run(opts.start, opts.horizon, opts.seed.wrapping_add(i as u64), false))
        .collect();
    let per_rep: Vec<f64> = paths.iter().map(|p| p.total_cost() / opts.horizon).collect();
    let (jhat, jhat_se) = mean_se(&per_rep);
    let half = 0.5 * opts.horizon;
    let jhat_half = {
        let sim_half: Vec<f64> = (0..opts.replications)
            .into_par_iter()
            .map(|i| sim.run(opts.start, half, opts.seed.wrapping_add(i as u64), false).total_cost() / half)
            .collect();
        mean_se(&sim_half).0
    };
    let mut out = vec![FunctionalEstimate {
        kind: FunctionalKind::Jhat,
        estimate: Some(jhat),
        std_error: jhat_se,
        horizon: opts.horizon,
        impulses: paths.iter().map(|p| p.impulse_count).sum::<usize>() / opts.replications,
        replications: opts.replications,
        half_estimate: Some(jhat_half),
        note: None,
    }];
    let n_min = paths.iter().map(|p| p.impulse_count).min().unwrap_or(0);
    let ratio_at = |k: usize| -> (f64, f64) {
        let a: Vec<f64> = paths.iter().map(|p| p.cost_at_impulse[k - 1]).collect();
        let b: Vec<f64> = paths.iter().map(|p| p.impulse_times[k - 1]).collect();
        ratio_se(&a, &b)
    };
    out.push(if n_min >= 2 {
        let (j, se) = ratio_at(n_min);
        FunctionalEstimate {
            kind: FunctionalKind::J,
            estimate: Some(j),
            std_error: se,
            horizon: opts.horizon,
            impulses: n_min,
            replications: opts.replications,
            half_estimate: Some(ratio_at(n_min / 2).0),
            note: None,
        }
    } else {
        FunctionalEstimate {
            kind: FunctionalKind::J,
            estimate: None,
            std_error: f64::NAN,
            horizon: opts.horizon,
            impulses: n_min,
            replications: opts.replications,
            half_estimate: None,
            note: Some(format!(
                "undefined: some replication has {n_min} impulses by T = {}; the ratio form needs τ_n < ∞",
                opts.horizon
            )),
        }
    });
    if let Some(d) = domain {
        let killed = Sim { model, strategy, cost, f, kill: Some(d) };
        let kpaths: Vec<Trajectory> = (0..opts.replications)
            .into_par_iter()
            .map(|i| killed.run(opts.start, opts.horizon, opts.seed.wrapping_add(i as u64), false))
            .collect();
        let a: Vec<f64> = kpaths.iter().map(|p| p.total_cost()).collect();
        let b: Vec<f64> = kpaths.iter().map(|p| p.end_time).collect();
        let exited = kpaths.iter().filter(|p| p.exited).count();
        let (est, se) = if b.iter().sum::<f64>() > 0.0 { ratio_se(&a, &b) } else { (f64::NAN, f64::NAN) };
        out.push(FunctionalEstimate {
            kind: FunctionalKind::JStopped,
            estimate: est.is_finite().then_some(est),
            std_error: se,
            horizon: opts.horizon,
            impulses: kpaths.iter().map(|p| p.impulse_count).sum::<usize>() / opts.replications,
            replications: opts.replications,
            half_estimate: None,
            note: Some(format!("{exited} of {} replications exited the domain", opts.replications)),
        });
    }
    Ok(out)
}
