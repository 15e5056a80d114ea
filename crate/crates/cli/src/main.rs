use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use impulse_cli::commands::{self, CliError};
use impulse_cli::config::RunConfig;

/// Long-run average-cost impulse control of finite Markov chains.
///
/// Every flag can also be set through an environment variable with the
/// `AVGIMPULSE_` prefix, e.g. `AVGIMPULSE_SEED=3`.
#[derive(Parser)]
#[command(name = "impulse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, env = "AVGIMPULSE_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory (default: `out`, or `out` from the config).
    #[arg(long, global = true, env = "AVGIMPULSE_OUT")]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true, env = "AVGIMPULSE_SEED")]
    seed: Option<u64>,
    /// Overrides `schedule.tol_lambda`.
    #[arg(long, global = true, env = "AVGIMPULSE_TOL")]
    tol: Option<f64>,
    #[arg(long, global = true, env = "AVGIMPULSE_QUIET")]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve for the optimal average cost and strategy.
    Solve,
    /// Monte Carlo estimates under the optimal (or no-impulse) strategy.
    Simulate,
    /// Exact enumeration and, for drift problems, the renewal optimum.
    Oracle,
    /// Check the standing assumptions along the domain schedule.
    Check,
    /// Table of λ over domains and discounts.
    Sweep,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| impulse_cli::config::ConfigError::Invalid("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.tol {
        cfg.schedule.tol_lambda = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(String, bool), CliError> {
    let cfg = load(cli)?;
    let out = commands::default_out(&cfg, cli.out.clone());
    Ok(match cli.command {
        Command::Solve => {
            let s = commands::cmd_solve(&cfg, &out)?;
            let mut msg = format!(
                "{}: lambda = {:.10}  mu(f) = {:.10}  impulse states = {}",
                s.report.problem, s.report.lambda, s.report.mu_f, s.report.impulse_states
            );
            if let Some(d) = &s.report.drift {
                msg.push_str(&format!(
                    "\nrenewal optimum {:.10} (xi = {:.4}, b = {:.4}); published expression {:.10}",
                    d.oracle_lambda, d.oracle_target, d.oracle_threshold, d.published_expression
                ));
            }
            (msg, true)
        }
        Command::Simulate => {
            let r = commands::cmd_simulate(&cfg, &out)?;
            let lines: Vec<String> = r
                .estimates
                .iter()
                .map(|e| match e.estimate {
                    Some(v) => format!("{:?}: {v:.8} ± {:.2e}", e.kind, e.std_error),
                    None => format!("{:?}: {}", e.kind, e.note.as_deref().unwrap_or("undefined")),
                })
                .collect();
            (lines.join("\n"), true)
        }
        Command::Oracle => {
            let r = commands::cmd_oracle(&cfg, &out)?;
            let mut msg = match r.enumeration_lambda {
                Some(l) => format!("enumeration lambda = {l:.10} over {} policies", r.policies.unwrap_or_default()),
                None => r.enumeration_skipped.unwrap_or_default(),
            };
            if let Some(o) = r.renewal {
                msg.push_str(&format!("\nrenewal lambda = {:.10} (xi = {:.4}, b = {:.4})", o.lambda, o.xi, o.b));
            }
            (msg, true)
        }
        Command::Check => {
            let (report, passed) = commands::cmd_check(&cfg, &out)?;
            let msg = serde_json::to_string_pretty(&[
                ("invariant_measure", &report.invariant_measure),
                ("poisson_solution", &report.poisson_solution),
                ("regularity", &report.regularity),
                ("exit_moments", &report.exit_moments),
                ("exit_decay", &report.exit_decay),
                ("exit_time_growth", &report.exit_time_growth),
            ])
            .unwrap_or_default();
            (msg, passed)
        }
        Command::Sweep => {
            let rows = commands::cmd_sweep(&cfg, &out)?;
            (format!("{} rows written to {}", rows.len(), out.join("sweep.csv").display()), true)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((msg, ok)) => {
            if !cli.quiet || !ok {
                println!("{msg}");
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
