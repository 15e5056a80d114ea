//! Acceptance suite: one PASS/FAIL line per criterion.

use std::time::Instant;

use impulse_cli::commands;
use impulse_cli::config::RunConfig;
use impulse_core::cost::apply_m;
use impulse_core::ergodic::{self, Schedule};
use impulse_core::impulse::{self, Strategy};
use impulse_core::model::{self, Domain};
use impulse_core::oracle;
use impulse_core::problems::{self, Builtin, Problem};
use impulse_core::sim::{self, EstimateOptions, FunctionalKind};
use impulse_core::stopping::{self, PenaltyScheme, StoppingProblem};

type Outcome = Result<String, String>;

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn random(seed: u64) -> Problem {
    problems::random_ctmc(seed, 8, 2).unwrap()
}

fn solve(p: &Problem) -> Result<ergodic::ErgodicSolution, String> {
    let sched = Schedule::default_for(&p.model, &p.cost).map_err(|e| e.to_string())?;
    ergodic::solve_full(&p.model, &p.cost, &p.f, &sched).map_err(|e| format!("{}: {e}", p.name))
}

fn largest_stopped(p: &Problem) -> Option<Domain> {
    ergodic::default_domains(&p.model, p.cost.targets(), ergodic::DEFAULT_LEVELS)
        .into_iter()
        .filter(|d| !d.is_full())
        .next_back()
}

fn criterion_1() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig::from_toml("schema_version = 1\n[problem]\nbuiltin = { name = \"drift-example\", h = 0.001, length = 10.0, fbar = 0.0, cost = 1.0 }\n")
        .map_err(|e| e.to_string())?;
    let t = Instant::now();
    let solved = commands::cmd_solve(&cfg, dir.path()).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let d = solved.report.drift.ok_or("report has no drift comparison")?;
    let msg = format!(
        "solver {:.6} oracle {:.6} |diff| {:.2e} (tol 5e-3), published expression {:.6}, {secs:.1}s (limit 60s)",
        d.solver_lambda,
        d.oracle_lambda,
        d.solver_minus_oracle.abs(),
        d.published_expression
    );
    if d.solver_minus_oracle.abs() < 5e-3 && secs < 60.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_eval: f64 = 0.0;
    for seed in 0..20 {
        let p = random(seed);
        let s = solve(&p)?;
        let o = oracle::policy_enumeration_oracle(&p.model, &p.cost, &p.f, oracle::DEFAULT_ENUMERATION_BUDGET)
            .map_err(|e| e.to_string())?;
        let ev = oracle::evaluate_strategy_exact(&p.model, &p.cost, &p.f, &s.strategy).map_err(|e| e.to_string())?;
        worst = worst.max((s.lambda - o.lambda).abs());
        worst_eval = worst_eval.max((ev.best_from_targets - o.lambda).abs());
    }
    let secs = t.elapsed().as_secs_f64();
    let msg = format!(
        "20 instances: max |λ − λ*| {worst:.2e}, max |strategy average − λ*| {worst_eval:.2e} (tol 1e-6), {secs:.1}s (limit 300s)"
    );
    if worst < 1e-6 && worst_eval < 1e-6 && secs < 300.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_3() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0usize;
    for seed in 100..200 {
        let n = 4 + (seed as usize % 5);
        let p = problems::random_ctmc(seed, n, 2).unwrap();
        let fnorm = sup(&p.f);
        let cmin = p.cost.floor();
        let cmax = p.cost.max_cost();
        let mut domains = vec![Domain::full(n)];
        domains.extend(largest_stopped(&p));
        for d in &domains {
            let tau = if d.is_full() {
                f64::INFINITY
            } else {
                model::exit_time_moments(&p.model, d).map_err(|e| e.to_string())?.max_first()
            };
            for &alpha in &ergodic::DEFAULT_ALPHAS {
                let s = impulse::lambda_alpha(&p.model, d, &p.cost, &p.f, alpha).map_err(|e| e.to_string())?;
                checked += 1;
                let tag = format!("seed {seed} α {alpha:e} {}", if d.is_full() { "full" } else { "stopped" });
                if s.lambda.abs() > fnorm + 1e-12 {
                    failures.push(format!("{tag}: |λ_α| {} > ‖f‖ {fnorm}", s.lambda.abs()));
                }
                let shifted: Vec<f64> = p.f.iter().map(|v| v - s.lambda).collect();
                let bound = sup(&shifted) * tau;
                if sup(&s.value) > bound * (1.0 + 1e-9) + 1e-9 {
                    failures.push(format!("{tag}: ‖w‖ {} > {bound}", sup(&s.value)));
                }
                let inf_u = p.cost.targets().iter().map(|&t| s.value[t]).fold(f64::INFINITY, f64::min);
                if inf_u.abs() > 1e-8 {
                    failures.push(format!("{tag}: inf_U w = {inf_u:e}"));
                }
                let (mw, _) = apply_m(&s.value, &p.cost);
                for x in (0..n).filter(|&x| d.contains(x)) {
                    if mw[x] < cmin - 1e-9 || mw[x] > cmax + 1e-9 {
                        failures.push(format!("{tag}: Mw({x}) = {} outside [{cmin}, {cmax}]", mw[x]));
                    }
                    if s.value[x] > mw[x] + 1e-9 {
                        failures.push(format!("{tag}: w({x}) > Mw({x})"));
                    }
                }
            }
        }
        let full = solve(&p)?;
        if full.lambda > full.mu_f + 1e-8 {
            failures.push(format!("seed {seed}: λ {} > μ(f) {}", full.lambda, full.mu_f));
        }
    }
    match failures.first() {
        None => Ok(format!("100 instances, {checked} discounted solutions within all bounds")),
        Some(f) => Err(format!("{} violations, first: {f}", failures.len())),
    }
}

fn criterion_4() -> Outcome {
    let mut failures = Vec::new();
    let mut worst_bracket: f64 = 0.0;
    let mut brackets = 0;
    for seed in 0..20 {
        let p = random(seed);
        let n = p.model.len();
        // QVI iterates from the no-impulse value decrease
        let mut domains = vec![Domain::full(n)];
        domains.extend(largest_stopped(&p));
        for d in &domains {
            for alpha in [0.1, 0.01] {
                let l = impulse::lambda_alpha(&p.model, d, &p.cost, &p.f, alpha).map_err(|e| e.to_string())?;
                let seq = impulse::qvi_iterates(&p.model, d, &p.cost, &p.f, l.lambda, alpha, 1e-12, 5000)
                    .map_err(|e| e.to_string())?;
                for (k, w) in seq.windows(2).enumerate() {
                    if w[1].iter().zip(&w[0]).any(|(a, b)| *a > b + 1e-9 * (1.0 + b.abs())) {
                        failures.push(format!("seed {seed}: QVI iterate {} increases", k + 1));
                        break;
                    }
                }
            }
        }
        let s = solve(&p)?;
        // z_m along the nested domains, then the whole space
        for (m, w) in s.z_by_domain.windows(2).enumerate() {
            if let Some(x) = (0..n).find(|&x| w[1][x] > w[0][x] + 1e-8) {
                failures.push(format!("seed {seed}: z_{} > z_{} at state {x}", m + 2, m + 1));
            }
        }
        if !s.degenerate {
            let es = stopping::solve_ergodic_stopping(&p.model, &p.f, &s.m_value, s.lambda).map_err(|e| e.to_string())?;
            brackets += 1;
            if es.lower.iter().zip(&es.upper).any(|(l, u)| l > u) {
                failures.push(format!("seed {seed}: lower bracket above upper"));
            }
            if es.gap_trace.windows(2).any(|g| g[1] > g[0] + 1e-15) {
                failures.push(format!("seed {seed}: bracket gap increases"));
            }
            let gap = *es.gap_trace.last().unwrap_or(&f64::INFINITY);
            worst_bracket = worst_bracket.max(gap);
        }
        // penalty values decrease in β toward the obstacle solution
        let small = problems::random_ctmc(seed, 5, 2).unwrap();
        let d = Domain::from_states(5, &[0, 1, 2, 3]).unwrap();
        let obstacle: Vec<f64> = (0..5).map(|i| 1.0 + (seed as f64 + i as f64 * 1.7).cos()).collect();
        let prob = StoppingProblem {
            running: small.f.clone(),
            obstacle: obstacle.clone(),
            exit_payoff: obstacle,
            discount: 0.5,
            domain: d,
        };
        let exact = stopping::solve_discounted_stopping(&small.model, &prob).map_err(|e| e.to_string())?;
        let mut prev: Option<Vec<f64>> = None;
        for beta in [0.0, 1.0, 10.0, 100.0, 1e4, 1e6, 1e9] {
            let v = stopping::solve_penalty(&small.model, &prob, beta, PenaltyScheme::Auto).map_err(|e| e.to_string())?;
            if let Some(pv) = &prev {
                if v.iter().zip(pv).any(|(a, b)| *a > b + 1e-9) {
                    failures.push(format!("seed {seed}: penalty value increases at β = {beta:e}"));
                }
            }
            prev = Some(v);
        }
        let limit = prev.unwrap().iter().zip(&exact.value).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if limit > 1e-6 {
            failures.push(format!("seed {seed}: penalty limit off by {limit:e}"));
        }
    }
    if worst_bracket >= 1e-8 {
        failures.push(format!("final bracket gap {worst_bracket:e} ≥ 1e-8"));
    }
    match failures.first() {
        None => Ok(format!(
            "20 instances: QVI iterates, z_m and penalty values monotone; {brackets} bracket runs, max final gap {worst_bracket:.1e}"
        )),
        Some(f) => Err(format!("{} violations, first: {f}", failures.len())),
    }
}

fn criterion_5() -> Outcome {
    let mut worst_ratio: f64 = 0.0;
    let mut failures = Vec::new();
    for seed in 0..10 {
        let p = random(seed);
        let d = largest_stopped(&p).ok_or("no stopped domain")?;
        let direct = ergodic::solve_stopped_ergodic(&p.model, &d, &p.cost, &p.f, &[], 1e-6)
            .map_err(|e| e.to_string())?
            .direct;
        let tau = model::exit_time_moments(&p.model, &d).map_err(|e| e.to_string())?.max_first();
        let c = sup(&p.f.iter().map(|v| v - direct.lambda).collect::<Vec<_>>()) * tau;
        for alpha in [1e-2, 1e-3, 1e-4] {
            let l = impulse::lambda_alpha(&p.model, &d, &p.cost, &p.f, alpha).map_err(|e| e.to_string())?;
            let diff = (l.lambda - direct.lambda).abs();
            worst_ratio = worst_ratio.max(diff / (c * alpha));
            if diff > c * alpha {
                failures.push(format!("seed {seed} α {alpha:e}: |Δλ| {diff:e} > Cα {:e}", c * alpha));
            }
        }
    }
    match failures.first() {
        None => Ok(format!("10 instances × 3 discounts: max |λ_α − λ_(m)| / (Cα) = {worst_ratio:.3}")),
        Some(f) => Err(format!("{} violations, first: {f}", failures.len())),
    }
}

fn criterion_6() -> Outcome {
    let mut failures = Vec::new();
    let mut comparisons = 0;
    let mut worst_z: f64 = 0.0;
    for seed in 0..20 {
        let p = random(seed);
        let n = p.model.len();
        let s = solve(&p)?;
        let ev = oracle::evaluate_strategy_exact(&p.model, &p.cost, &p.f, &s.strategy).map_err(|e| e.to_string())?;
        let start = *p
            .cost
            .targets()
            .iter()
            .min_by(|a, b| ev.from_state[**a].total_cmp(&ev.from_state[**b]))
            .unwrap();
        let opts = |k: u64| EstimateOptions {
            start,
            horizon: 1e4,
            replications: 100,
            seed: seed * 1000 + k * 100,
        };
        let jhat = |st: &Strategy, k: u64| -> Result<(f64, f64), String> {
            let e = sim::estimate_functionals(&p.model, st, &p.cost, &p.f, None, opts(k)).map_err(|e| e.to_string())?;
            let j = e.iter().find(|e| e.kind == FunctionalKind::Jhat).unwrap();
            Ok((j.estimate.unwrap(), j.std_error))
        };
        let (j, se) = jhat(&s.strategy, 0)?;
        comparisons += 1;
        worst_z = worst_z.max((j - s.lambda).abs() / se);
        if (j - s.lambda).abs() > 3.0 * se {
            failures.push(format!("seed {seed}: optimal Ĵ {j} vs λ {} ({se:e})", s.lambda));
        }
        let (j, se) = jhat(&Strategy::none(n), 1)?;
        comparisons += 1;
        worst_z = worst_z.max((j - s.mu_f).abs() / se);
        if (j - s.mu_f).abs() > 3.0 * se {
            failures.push(format!("seed {seed}: no-impulse Ĵ {j} vs μ(f) {} ({se:e})", s.mu_f));
        }
        // a few fixed suboptimal strategies
        let targets = p.cost.targets();
        for k in 0..3u64 {
            let pairs: Vec<(usize, usize)> = (0..n)
                .filter(|x| !targets.contains(x) && (*x as u64 + k + seed).is_multiple_of(3))
                .map(|x| (x, targets[(x + k as usize) % targets.len()]))
                .collect();
            let st = Strategy::from_pairs(n, &pairs);
            let (j, se) = jhat(&st, 2 + k)?;
            comparisons += 1;
            if j < s.lambda - 3.0 * se {
                failures.push(format!("seed {seed}: strategy {k} Ĵ {j} below λ {} − 3 SE", s.lambda));
            }
        }
    }
    match failures.first() {
        None => Ok(format!(
            "{comparisons} estimates (T = 1e4, 100 replications) consistent; max |z| for λ and μ(f) = {worst_z:.2}"
        )),
        Some(f) => Err(format!("{} of {comparisons} outside 3 SE, first: {f}", failures.len())),
    }
}

fn criterion_7() -> Outcome {
    let builtins = [
        Builtin::drift_default(),
        Builtin::BirthDeathInventory,
        Builtin::ConstantF { kappa: 3.0 },
        Builtin::RandomCtmc {
            seed: 0,
            states: 8,
            targets: 2,
        },
    ];
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for b in &builtins {
        let p = b.build().map_err(|e| e.to_string())?;
        let sched = Schedule::default_for(&p.model, &p.cost).map_err(|e| e.to_string())?;
        let r = ergodic::check_assumptions(&p.model, &p.f, &sched.domains);
        let decreasing = r.exit_probabilities.windows(2).all(|w| {
            w[0].probabilities.iter().zip(&w[1].probabilities).all(|(a, b)| b <= a)
        });
        let growing = r.moments.windows(2).all(|w| w[1].core_min_first >= w[0].core_min_first);
        let witnesses = r.mu.is_some() && r.q.is_some() && !r.moments.is_empty() && !r.exit_probabilities.is_empty();
        if !(r.passed() && decreasing && growing && witnesses) {
            failures.push(format!("{}: {}", p.name, r.exit_time_growth.detail));
        }
        let last = r.moments.last().map_or(0.0, |m| m.core_min_first);
        lines.push(format!("{} E[τ] to {last:.3}", p.name));
    }
    match failures.first() {
        None => Ok(format!("{} builtins pass; {}", builtins.len(), lines.join(", "))),
        Some(f) => Err(format!("{} builtins fail, first: {f}", failures.len())),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("drift example vs renewal oracle", criterion_1),
        ("oracle equivalence", criterion_2),
        ("bounds on random instances", criterion_3),
        ("monotonicity", criterion_4),
        ("vanishing discount rate", criterion_5),
        ("simulation closure", criterion_6),
        ("assumption checker", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {}: {tag} {name}: {detail} [{:.1}s]", i + 1, t.elapsed().as_secs_f64());
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
