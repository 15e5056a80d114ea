use thiserror::Error;

/// Errors raised by model construction, the solvers and the oracles.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid model: field `{field}`: {reason}")]
    InvalidModel { field: String, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid impulse cost: violated invariant \"{invariant}\" ({detail})")]
    InvalidCost { invariant: String, detail: String },

    #[error("numerical failure in {what} (uniformization rate {rate})")]
    Numerical { what: String, rate: f64 },

    #[error("singular linear system in {0}")]
    Singular(String),

    #[error("the chain has {} closed classes, no unique invariant measure: {classes:?}", classes.len())]
    Reducible { classes: Vec<Vec<String>> },

    #[error("exterior unreachable from interior states {states:?}")]
    ExitUnreachable { states: Vec<String> },

    #[error("{solver} did not converge within {iterations} iterations (gap {gap:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        gap: f64,
    },

    #[error("explicit penalty scheme diverges (beta*delta = {beta_delta}); use the implicit scheme")]
    PenaltyDiverges { beta_delta: f64 },

    #[error("lambda = {lambda} is not below mu(f) = {mu_f}; the ergodic stopping value may be -infinity")]
    LambdaTooLarge { lambda: f64, mu_f: f64 },

    #[error("lambda bracket [{lo}, {hi}] does not contain a sign change of inf_U w")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("strategy target {target} of state {state} lies inside the impulse region")]
    TargetInImpulseRegion { state: usize, target: usize },

    #[error("vanishing-discount extrapolation {extrapolated} disagrees with direct solve {direct} by more than {limit:e}")]
    ConvergenceFailure {
        extrapolated: f64,
        direct: f64,
        limit: f64,
    },

    #[error("QVI residual {residual:e} exceeds tolerance {tol:e}; solution rejected")]
    QviRejected { residual: f64, tol: f64 },

    #[error("enumeration budget exceeded: {count} policies (limit {limit})")]
    BudgetExceeded { count: u128, limit: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;
