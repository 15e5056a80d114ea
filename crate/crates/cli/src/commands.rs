//! Subcommands. Each one writes its files into the output directory and
//! returns the report it wrote.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use impulse_core::ergodic::{self, AssumptionReport, ErgodicSolution, Schedule};
use impulse_core::impulse::Strategy;
use impulse_core::model::{self, MarkovModel};
use impulse_core::oracle::{self, RenewalOptimum};
use impulse_core::problems::Problem;
use impulse_core::sim::{self, EstimateOptions, FunctionalEstimate};
use impulse_core::Error;

use crate::config::{ConfigError, RunConfig, StrategyChoice};
use crate::output::{self, num, OutDir};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(Error),
    #[error("assumption check failed:\n{0}")]
    Assumptions(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidModel { .. } | Error::InvalidCost { .. } | Error::InvalidInput(_) => {
                CliError::Config(ConfigError::Model(e))
            }
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    /// 2 for configuration errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyEntry {
    pub state: String,
    pub target: String,
    pub cost: f64,
}

pub fn strategy_entries(problem: &Problem, strategy: &Strategy) -> Vec<StrategyEntry> {
    strategy
        .region_states()
        .into_iter()
        .map(|x| {
            let t = strategy.target[x].expect("region state has a target");
            StrategyEntry {
                state: problem.model.label(x).to_string(),
                target: problem.model.label(t).to_string(),
                cost: problem.cost.cost_to(x, t),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftComparison {
    pub oracle_lambda: f64,
    pub oracle_target: f64,
    pub oracle_threshold: f64,
    pub solver_lambda: f64,
    /// `f̄ + c/3 + √c + f̄/√c`, kept for comparison only.
    pub published_expression: f64,
    pub solver_minus_oracle: f64,
    pub published_minus_oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub problem: String,
    pub states: usize,
    pub lambda: f64,
    pub mu_f: f64,
    pub gap: f64,
    pub qvi_residual: Option<f64>,
    pub bracket_gap: Option<f64>,
    pub degenerate: bool,
    pub converged_by: String,
    pub domain_lambdas: Vec<f64>,
    pub impulse_states: usize,
    pub drift: Option<DriftComparison>,
}

fn renewal(problem: &Problem, grid: usize) -> Result<Option<RenewalOptimum>, CliError> {
    match &problem.renewal {
        Some(r) => Ok(Some(oracle::renewal_oracle(&r.f, r.c, &r.targets, r.length, grid)?)),
        None => Ok(None),
    }
}

fn fmt_report(r: &AssumptionReport) -> String {
    let mut s = String::new();
    for (name, c) in [
        ("invariant_measure", &r.invariant_measure),
        ("poisson_solution", &r.poisson_solution),
        ("regularity", &r.regularity),
        ("exit_moments", &r.exit_moments),
        ("exit_decay", &r.exit_decay),
        ("exit_time_growth", &r.exit_time_growth),
    ] {
        let _ = writeln!(s, "  {name:<18} {}  {}", if c.passed { "ok  " } else { "FAIL" }, c.detail);
    }
    s
}

/// Checks the solver cannot run without.
fn hard_checks_pass(r: &AssumptionReport) -> bool {
    r.invariant_measure.passed && r.poisson_solution.passed && r.regularity.passed && r.exit_moments.passed
}

pub struct Solved {
    pub problem: Problem,
    pub schedule: Schedule,
    pub solution: ErgodicSolution,
    pub report: SolveReport,
}

fn solve_problem(cfg: &RunConfig) -> Result<Solved, CliError> {
    let problem = cfg.build_problem()?;
    let schedule = cfg.schedule(&problem)?;
    let check = ergodic::check_assumptions(&problem.model, &problem.f, &schedule.domains);
    if !hard_checks_pass(&check) {
        return Err(CliError::Assumptions(fmt_report(&check)));
    }
    let solution = ergodic::solve_full(&problem.model, &problem.cost, &problem.f, &schedule)?;
    if let Some(r) = solution.qvi_residual {
        if r > cfg.schedule.qvi_tol {
            return Err(Error::QviRejected {
                residual: r,
                tol: cfg.schedule.qvi_tol,
            }
            .into());
        }
    }
    let drift = renewal(&problem, cfg.oracle.renewal_grid)?.map(|o| {
        let r = problem.renewal.as_ref().unwrap();
        let published = oracle::published_drift_value(r.f.fbar, r.c);
        DriftComparison {
            oracle_lambda: o.lambda,
            oracle_target: o.xi,
            oracle_threshold: o.b,
            solver_lambda: solution.lambda,
            published_expression: published,
            solver_minus_oracle: solution.lambda - o.lambda,
            published_minus_oracle: published - o.lambda,
        }
    });
    let report = SolveReport {
        problem: problem.name.clone(),
        states: problem.model.len(),
        lambda: solution.lambda,
        mu_f: solution.mu_f,
        gap: solution.gap,
        qvi_residual: solution.qvi_residual,
        bracket_gap: solution.bracket_gap,
        degenerate: solution.degenerate,
        converged_by: solution.converged_by.clone(),
        domain_lambdas: solution.domain_lambdas.clone(),
        impulse_states: solution.strategy.region_states().len(),
        drift,
    };
    Ok(Solved {
        problem,
        schedule,
        solution,
        report,
    })
}

fn value_csv(model: &MarkovModel, s: &ErgodicSolution) -> String {
    let mut out = String::from("state,w,mw,impulse,target\n");
    for x in 0..model.len() {
        let target = s.strategy.target[x].map_or(String::new(), |t| model.label(t).to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            model.label(x),
            num(s.value[x]),
            num(s.m_value[x]),
            s.strategy.impulse_region[x] as u8,
            target
        );
    }
    out
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<Solved, CliError> {
    let solved = solve_problem(cfg)?;
    let mut dir = OutDir::create(out)?;
    dir.text("lambda_trace.csv", &output::trace_csv(&solved.solution.lambda_trace))?;
    dir.text("value.csv", &value_csv(&solved.problem.model, &solved.solution))?;
    dir.json("strategy.json", &strategy_entries(&solved.problem, &solved.solution.strategy))?;
    dir.json("report.json", &solved.report)?;
    Ok(solved)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateReport {
    pub problem: String,
    pub strategy: Vec<StrategyEntry>,
    pub lambda: Option<f64>,
    pub mu_f: f64,
    pub start: String,
    pub seed: u64,
    pub estimates: Vec<FunctionalEstimate>,
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<SimulateReport, CliError> {
    let sc = &cfg.simulate;
    let (problem, strategy, lambda, schedule) = match sc.strategy {
        StrategyChoice::Optimal => {
            let s = solve_problem(cfg)?;
            (s.problem, s.solution.strategy, Some(s.solution.lambda), s.schedule)
        }
        StrategyChoice::None => {
            let p = cfg.build_problem()?;
            let sched = cfg.schedule(&p)?;
            let n = p.model.len();
            (p, Strategy::none(n), None, sched)
        }
    };
    let start = sc.start.unwrap_or(problem.cost.targets()[0]);
    if start >= problem.model.len() {
        return Err(ConfigError::Invalid(format!("simulate.start {start} is out of range")).into());
    }
    let domain = match sc.domain {
        Some(m) => Some(
            schedule
                .domains
                .get(m.wrapping_sub(1))
                .ok_or_else(|| ConfigError::Invalid(format!("simulate.domain {m} is not in the schedule")))?,
        ),
        None => None,
    };
    let opts = EstimateOptions {
        start,
        horizon: sc.horizon,
        replications: sc.replications,
        seed: cfg.seed,
    };
    let estimates = sim::estimate_functionals(&problem.model, &strategy, &problem.cost, &problem.f, domain, opts)?;
    let mu_f = model::invariant_measure(&problem.model)?.integrate(&problem.f);
    let mut dir = OutDir::create(out)?;
    if sc.trajectory {
        let path = sim::simulate_controlled(&problem.model, &strategy, &problem.cost, &problem.f, start, sc.horizon, cfg.seed)?;
        dir.text("trajectory.csv", &path.to_csv(&problem.model))?;
    }
    let report = SimulateReport {
        problem: problem.name.clone(),
        strategy: strategy_entries(&problem, &strategy),
        lambda,
        mu_f,
        start: problem.model.label(start).to_string(),
        seed: cfg.seed,
        estimates,
    };
    dir.json("estimates.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub problem: String,
    /// Exact enumeration over stationary strategies; absent above the budget.
    pub enumeration_lambda: Option<f64>,
    pub enumeration_strategy: Option<Vec<StrategyEntry>>,
    pub policies: Option<String>,
    pub enumeration_skipped: Option<String>,
    pub renewal: Option<RenewalOptimum>,
}

pub fn cmd_oracle(cfg: &RunConfig, out: &Path) -> Result<OracleReport, CliError> {
    let problem = cfg.build_problem()?;
    let budget = cfg.oracle.budget as u128;
    let (lambda, strategy, policies, skipped) =
        match oracle::policy_enumeration_oracle(&problem.model, &problem.cost, &problem.f, budget) {
            Ok(r) => (
                Some(r.lambda),
                Some(strategy_entries(&problem, &r.strategy)),
                Some(r.policies.to_string()),
                None,
            ),
            Err(e @ Error::BudgetExceeded { .. }) if problem.renewal.is_some() => (None, None, None, Some(e.to_string())),
            Err(e) => return Err(e.into()),
        };
    let report = OracleReport {
        problem: problem.name.clone(),
        enumeration_lambda: lambda,
        enumeration_strategy: strategy,
        policies,
        enumeration_skipped: skipped,
        renewal: renewal(&problem, cfg.oracle.renewal_grid)?,
    };
    let mut dir = OutDir::create(out)?;
    dir.json("oracle.json", &report)?;
    Ok(report)
}

/// Returns the report and whether every check passed.
pub fn cmd_check(cfg: &RunConfig, out: &Path) -> Result<(AssumptionReport, bool), CliError> {
    let problem = cfg.build_problem()?;
    let schedule = cfg.schedule(&problem)?;
    let report = ergodic::check_assumptions(&problem.model, &problem.f, &schedule.domains);
    let mut dir = OutDir::create(out)?;
    dir.json("assumptions.json", &report)?;
    let mut csv = String::from("m,horizon,max_exit_probability\n");
    for row in &report.exit_probabilities {
        for (t, p) in row.horizons.iter().zip(&row.probabilities) {
            let _ = writeln!(csv, "{},{},{}", row.m, num(*t), num(*p));
        }
    }
    dir.text("exit_probabilities.csv", &csv)?;
    if problem.model.len() <= 200 {
        dir.text("generator.csv", &output::matrix_csv(&problem.model, &problem.model.generator_dense()))?;
    }
    let passed = report.passed();
    Ok((report, passed))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub alpha: f64,
    pub interior_states: usize,
    pub lambda: f64,
    pub residual: f64,
    pub gap: f64,
    /// `max_x E_x[τ_{O_m}]`, infinite on the whole space.
    pub max_exit_time: f64,
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<Vec<SweepRow>, CliError> {
    let problem = cfg.build_problem()?;
    let mut schedule = cfg.schedule(&problem)?;
    schedule.cross_check = true;
    let solution = ergodic::solve_full(&problem.model, &problem.cost, &problem.f, &schedule)?;
    let exit: Vec<f64> = schedule
        .domains
        .iter()
        .map(|d| {
            if d.is_full() {
                Ok(f64::INFINITY)
            } else {
                model::exit_time_moments(&problem.model, d).map(|e| e.max_first())
            }
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<SweepRow> = solution
        .lambda_trace
        .iter()
        .map(|r| SweepRow {
            m: r.m,
            alpha: r.alpha,
            interior_states: schedule.domains[r.m - 1].interior_count(),
            lambda: r.lambda,
            residual: r.residual,
            gap: r.gap,
            max_exit_time: exit[r.m - 1],
        })
        .collect();
    let mut csv = String::from("m,alpha,interior_states,lambda,residual,gap,max_exit_time\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.m,
            num(r.alpha),
            r.interior_states,
            num(r.lambda),
            num(r.residual),
            num(r.gap),
            num(r.max_exit_time)
        );
    }
    let mut dir = OutDir::create(out)?;
    dir.text("sweep.csv", &csv)?;
    Ok(rows)
}

pub fn default_out(cfg: &RunConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"))
}
