//! Impulse costs `c(x, ξ)` over a target set `U`, and the intervention operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MarkovModel;

/// The invariant every impulse cost must satisfy; quoted in validation errors.
pub const FLOOR_INVARIANT: &str = "c(x,ξ) ≥ c > 0";
pub const TRIANGLE_INVARIANT: &str = "c(x,ξ) ≤ c(x,ξ') + c(ξ',ξ)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CostKind {
    Constant { value: f64 },
    /// `values[x][j]` is the cost of moving from state `x` to the `j`-th target.
    Table { values: Vec<Vec<f64>> },
    /// `fixed + per_unit · |coord(x) − coord(ξ)|`.
    Distance { fixed: f64, per_unit: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseCost {
    targets: Vec<usize>,
    kind: CostKind,
    coords: Vec<f64>,
    floor: f64,
    max: f64,
    n: usize,
}

impl ImpulseCost {
    /// Validates the cost against the model. `floor` defaults to the smallest cost.
    pub fn new(model: &MarkovModel, targets: Vec<usize>, kind: CostKind, floor: Option<f64>) -> Result<Self> {
        let n = model.len();
        if targets.is_empty() {
            return Err(Error::InvalidInput("target set U is empty".into()));
        }
        let mut sorted = targets.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != targets.len() {
            return Err(Error::InvalidInput("target set U has duplicates".into()));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= n) {
            return Err(Error::InvalidInput(format!("target {t} out of range")));
        }
        let coords = match (&kind, model.coords()) {
            (CostKind::Distance { .. }, None) => {
                return Err(Error::InvalidInput("distance cost needs state coordinates".into()))
            }
            (_, Some(c)) => c.to_vec(),
            (_, None) => (0..n).map(|i| i as f64).collect(),
        };
        if let CostKind::Distance { per_unit, .. } = &kind {
            if !(*per_unit >= 0.0) {
                return Err(Error::InvalidCost {
                    invariant: FLOOR_INVARIANT.into(),
                    detail: format!("per-unit cost {per_unit} must be non-negative"),
                });
            }
        }
        if let CostKind::Table { values } = &kind {
            if values.len() != n || values.iter().any(|r| r.len() != targets.len()) {
                return Err(Error::InvalidInput(format!(
                    "cost table must be {n} x {} (states x targets)",
                    targets.len()
                )));
            }
        }
        let mut c = Self {
            targets,
            kind,
            coords,
            floor: 0.0,
            max: 0.0,
            n,
        };
        let (lo, hi) = c.extremes();
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidCost {
                invariant: FLOOR_INVARIANT.into(),
                detail: "non-finite cost".into(),
            });
        }
        let floor = floor.unwrap_or(lo);
        if !(floor > 0.0) || lo < floor {
            return Err(Error::InvalidCost {
                invariant: FLOOR_INVARIANT.into(),
                detail: format!("smallest cost {lo}, floor {floor}"),
            });
        }
        c.floor = floor;
        c.max = hi;
        c.check_triangle()?;
        Ok(c)
    }

    fn extremes(&self) -> (f64, f64) {
        match &self.kind {
            CostKind::Constant { value } => (*value, *value),
            CostKind::Distance { fixed, per_unit } => {
                let (mn, mx) = self
                    .coords
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |a, &x| (a.0.min(x), a.1.max(x)));
                let far = self
                    .targets
                    .iter()
                    .map(|&t| (self.coords[t] - mn).abs().max((mx - self.coords[t]).abs()))
                    .fold(0.0, f64::max);
                let near = (0..self.n)
                    .map(|x| self.targets.iter().map(|&t| (self.coords[x] - self.coords[t]).abs()).fold(f64::INFINITY, f64::min))
                    .fold(f64::INFINITY, f64::min);
                (fixed + per_unit * near, fixed + per_unit * far)
            }
            CostKind::Table { values } => values
                .iter()
                .flatten()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v))),
        }
    }

    fn check_triangle(&self) -> Result<()> {
        // constant and metric costs satisfy it by construction
        let CostKind::Table { .. } = self.kind else {
            return Ok(());
        };
        let k = self.targets.len();
        for x in 0..self.n {
            for j in 0..k {
                for (m, &mid) in self.targets.iter().enumerate() {
                    let via = self.cost(x, m) + self.cost(mid, j);
                    if self.cost(x, j) > via + 1e-12 * via.abs().max(1.0) {
                        return Err(Error::InvalidCost {
                            invariant: TRIANGLE_INVARIANT.into(),
                            detail: format!(
                                "x={x}, ξ={}, ξ'={mid}: {} > {via}",
                                self.targets[j],
                                self.cost(x, j)
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn kind(&self) -> &CostKind {
        &self.kind
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Largest cost `‖c‖`.
    pub fn max_cost(&self) -> f64 {
        self.max
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    /// Position of state `s` in `U`.
    pub fn target_index(&self, s: usize) -> Option<usize> {
        self.targets.iter().position(|&t| t == s)
    }

    /// Cost of moving from state `x` to the `j`-th target.
    #[inline]
    pub fn cost(&self, x: usize, j: usize) -> f64 {
        match &self.kind {
            CostKind::Constant { value } => *value,
            CostKind::Table { values } => values[x][j],
            CostKind::Distance { fixed, per_unit } => {
                fixed + per_unit * (self.coords[x] - self.coords[self.targets[j]]).abs()
            }
        }
    }

    /// Cost of moving from `x` to target state `xi` (must lie in `U`).
    pub fn cost_to(&self, x: usize, xi: usize) -> f64 {
        self.cost(x, self.target_index(xi).expect("target not in U"))
    }

    /// `min_j c(x, ξ_j) + landing[j]` for every state, with the minimizing
    /// position (lowest index on ties). `landing` is indexed by target position.
    pub fn best_all(&self, landing: &[f64]) -> Vec<(f64, usize)> {
        assert_eq!(landing.len(), self.targets.len());
        if let CostKind::Constant { value } = self.kind {
            let (j, l) = argmin(landing.iter().copied());
            return vec![(value + l, j); self.n];
        }
        (0..self.n)
            .map(|x| {
                let (j, v) = argmin((0..self.targets.len()).map(|j| self.cost(x, j) + landing[j]));
                (v, j)
            })
            .collect()
    }
}

fn argmin(it: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, v) in it.enumerate() {
        if v < best.1 {
            best = (j, v);
        }
    }
    best
}

/// `Mv(x) = min_{ξ∈U} c(x,ξ) + v(ξ)` with the minimizing target state.
pub fn apply_m(v: &[f64], cost: &ImpulseCost) -> (Vec<f64>, Vec<usize>) {
    let landing: Vec<f64> = cost.targets().iter().map(|&t| v[t]).collect();
    cost.best_all(&landing)
        .into_iter()
        .map(|(val, j)| (val, cost.targets()[j]))
        .unzip()
}
