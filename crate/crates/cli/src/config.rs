//! Run configuration, read from TOML.
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//!
//! [problem]
//! builtin = { name = "random-ctmc", seed = 3, states = 8, targets = 2 }
//!
//! [schedule]
//! alphas = [0.1, 0.01, 0.001, 0.0001]
//! levels = 6
//! ```
//!
//! A problem is either a `builtin` or an explicit `model` (see
//! [`ModelSpec`]) together with `targets`, `cost` and `f`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use impulse_core::cost::{CostKind, ImpulseCost};
use impulse_core::ergodic::{self, Schedule, DEFAULT_ALPHAS, DEFAULT_LEVELS, DEFAULT_TOL_LAMBDA};
use impulse_core::model::{build_model, ModelSpec};
use impulse_core::oracle::DEFAULT_ENUMERATION_BUDGET;
use impulse_core::problems::{Builtin, Problem};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub builtin: Option<Builtin>,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub targets: Option<Vec<usize>>,
    #[serde(default)]
    pub cost: Option<CostKind>,
    /// Lower bound `c` the impulse cost must respect; defaults to its minimum.
    #[serde(default)]
    pub cost_floor: Option<f64>,
    #[serde(default)]
    pub f: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub alphas: Vec<f64>,
    /// Number of stopped domains before the whole space.
    pub levels: usize,
    pub tol_lambda: f64,
    pub cross_check: bool,
    /// Acceptance threshold of the full-space QVI residual.
    pub qvi_tol: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            alphas: DEFAULT_ALPHAS.to_vec(),
            levels: DEFAULT_LEVELS,
            tol_lambda: DEFAULT_TOL_LAMBDA,
            cross_check: true,
            qvi_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyChoice {
    Optimal,
    None,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub horizon: f64,
    pub replications: usize,
    /// Start state; defaults to the first target.
    pub start: Option<usize>,
    pub strategy: StrategyChoice,
    /// Also estimate the functional killed on leaving domain `m` (1-based).
    pub domain: Option<usize>,
    /// Write the path of the first replication.
    pub trajectory: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            horizon: 1e4,
            replications: 100,
            start: None,
            strategy: StrategyChoice::Optimal,
            domain: None,
            trajectory: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub budget: u64,
    /// Grid size of the renewal search per target.
    pub renewal_grid: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            budget: DEFAULT_ENUMERATION_BUDGET as u64,
            renewal_grid: 2000,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] impulse_core::Error),
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let p = &self.problem;
        let explicit = p.model.is_some() || p.targets.is_some() || p.cost.is_some() || p.f.is_some();
        match (&p.builtin, explicit) {
            (Some(_), true) => {
                return Err(ConfigError::Invalid(
                    "problem: give either `builtin` or `model`/`targets`/`cost`/`f`, not both".into(),
                ))
            }
            (None, false) => return Err(ConfigError::Invalid("problem: missing `builtin` or `model`".into())),
            (None, true) => {
                for (key, present) in [
                    ("model", p.model.is_some()),
                    ("targets", p.targets.is_some()),
                    ("cost", p.cost.is_some()),
                    ("f", p.f.is_some()),
                ] {
                    if !present {
                        return Err(ConfigError::Invalid(format!("problem: missing `{key}`")));
                    }
                }
            }
            (Some(_), false) => {}
        }
        let s = &self.schedule;
        if s.levels == 0 {
            return Err(ConfigError::Invalid("schedule.levels must be at least 1".into()));
        }
        if !(s.qvi_tol > 0.0) {
            return Err(ConfigError::Invalid("schedule.qvi_tol must be positive".into()));
        }
        let sim = &self.simulate;
        if !(sim.horizon > 0.0 && sim.horizon.is_finite()) || sim.replications < 2 {
            return Err(ConfigError::Invalid(
                "simulate: horizon must be positive and replications at least 2".into(),
            ));
        }
        Ok(())
    }

    pub fn build_problem(&self) -> Result<Problem, ConfigError> {
        let p = &self.problem;
        if let Some(b) = &p.builtin {
            let mut prob = b.build()?;
            if let Some(name) = &p.name {
                prob.name = name.clone();
            }
            return Ok(prob);
        }
        let model = build_model(p.model.as_ref().expect("validated"))?;
        let f = p.f.clone().expect("validated");
        if f.len() != model.len() {
            return Err(ConfigError::Invalid(format!(
                "problem.f has {} entries, the model has {} states",
                f.len(),
                model.len()
            )));
        }
        let cost = ImpulseCost::new(
            &model,
            p.targets.clone().expect("validated"),
            p.cost.clone().expect("validated"),
            p.cost_floor,
        )?;
        Ok(Problem {
            name: p.name.clone().unwrap_or_else(|| "custom".into()),
            model,
            cost,
            f,
            renewal: None,
        })
    }

    pub fn schedule(&self, problem: &Problem) -> Result<Schedule, ConfigError> {
        let s = &self.schedule;
        let domains = ergodic::default_domains(&problem.model, problem.cost.targets(), s.levels);
        let mut sched = Schedule::new(s.alphas.clone(), domains, s.tol_lambda)?;
        sched.cross_check = s.cross_check;
        Ok(sched)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_toml("schema_version = 1\nfoo = 1\n[problem]\nbuiltin = { name = \"constant-f\" }\n");
        assert!(matches!(e, Err(ConfigError::Parse(_))));
        let e = RunConfig::from_toml(
            "schema_version = 1\n[problem]\nbuiltin = { name = \"constant-f\" }\n[schedule]\nlevel = 3\n",
        );
        assert!(matches!(e, Err(ConfigError::Parse(_))));
    }

    #[test]
    fn schema_version_is_checked() {
        let e = RunConfig::from_toml("schema_version = 2\n[problem]\nbuiltin = { name = \"constant-f\" }\n");
        assert!(matches!(e, Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn explicit_problem_builds() {
        let cfg = RunConfig::from_toml(
            r#"
schema_version = 1
[problem]
model = { kind = "birth-death", size = 4, birth = 1.0, death = 2.0 }
targets = [0]
cost = { kind = "constant", value = 0.5 }
f = [0.0, 1.0, 2.0, 3.0]
"#,
        )
        .unwrap();
        let p = cfg.build_problem().unwrap();
        assert_eq!(p.model.len(), 4);
        assert_eq!(p.cost.targets(), &[0]);
    }
}
