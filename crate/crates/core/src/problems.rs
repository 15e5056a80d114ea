//! Builtin problem families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{CostKind, ImpulseCost};
use crate::error::Result;
use crate::model::{build_model, Boundary, DriftSpec, MarkovModel, ModelSpec, RateSpec};
use crate::oracle::RenewalCost;

/// A complete impulse-control instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub model: MarkovModel,
    pub cost: ImpulseCost,
    pub f: Vec<f64>,
    pub renewal: Option<RenewalReference>,
}

/// Continuous-space counterpart of a drift problem, for the renewal oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalReference {
    pub f: RenewalCost,
    pub c: f64,
    pub targets: Vec<f64>,
    pub length: f64,
}

fn d_h() -> f64 {
    1e-3
}
fn d_length() -> f64 {
    10.0
}
fn d_cap() -> f64 {
    10.0
}
fn d_one() -> f64 {
    1.0
}
fn d_kappa() -> f64 {
    3.0
}
fn d_states() -> usize {
    8
}
fn d_targets() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Builtin {
    /// Unit drift on `[0, length]` with running cost `(fbar + x²) ∧ cap` and a
    /// constant impulse cost; targets are the grid points in `[0, target_max]`.
    DriftExample {
        #[serde(default = "d_h")]
        h: f64,
        #[serde(default = "d_length")]
        length: f64,
        #[serde(default)]
        fbar: f64,
        #[serde(default = "d_cap")]
        cap: f64,
        #[serde(default = "d_one")]
        cost: f64,
        #[serde(default = "d_one")]
        target_max: f64,
    },
    /// Stock on `{0..20}`, replenished by one unit at rate 1, depleted at rate 2;
    /// holding cost per unit and a shortage penalty at 0.
    BirthDeathInventory,
    RandomCtmc {
        #[serde(default)]
        seed: u64,
        #[serde(default = "d_states")]
        states: usize,
        #[serde(default = "d_targets")]
        targets: usize,
    },
    ConstantF {
        #[serde(default = "d_kappa")]
        kappa: f64,
    },
}

impl Builtin {
    pub fn drift_default() -> Self {
        Builtin::DriftExample {
            h: d_h(),
            length: d_length(),
            fbar: 0.0,
            cap: d_cap(),
            cost: 1.0,
            target_max: 1.0,
        }
    }

    pub fn build(&self) -> Result<Problem> {
        match self {
            Builtin::DriftExample {
                h,
                length,
                fbar,
                cap,
                cost,
                target_max,
            } => drift_example(*h, *length, *fbar, *cap, *cost, *target_max),
            Builtin::BirthDeathInventory => birth_death_inventory(),
            Builtin::RandomCtmc { seed, states, targets } => random_ctmc(*seed, *states, *targets),
            Builtin::ConstantF { kappa } => constant_f(*kappa),
        }
    }
}

pub fn drift_example(h: f64, length: f64, fbar: f64, cap: f64, c: f64, target_max: f64) -> Result<Problem> {
    let model = build_model(&ModelSpec::Drift {
        h,
        length,
        left: 0.0,
        drift: DriftSpec::Constant(1.0),
        diffusion: 0.0,
        left_boundary: Boundary::Reflecting,
        right_boundary: Boundary::Absorbing,
        delta: None,
    })?;
    let rc = RenewalCost { fbar, cap };
    let x = model.coords().unwrap().to_vec();
    let f: Vec<f64> = x.iter().map(|&v| rc.at(v)).collect();
    let targets: Vec<usize> = (0..x.len()).filter(|&i| x[i] <= target_max + 1e-12).collect();
    let target_coords = targets.iter().map(|&i| x[i]).collect();
    let cost = ImpulseCost::new(&model, targets, CostKind::Constant { value: c }, None)?;
    Ok(Problem {
        name: "drift-example".into(),
        model,
        cost,
        f,
        renewal: Some(RenewalReference {
            f: rc,
            c,
            targets: target_coords,
            length,
        }),
    })
}

pub fn birth_death_inventory() -> Result<Problem> {
    let size = 21;
    let model = build_model(&ModelSpec::BirthDeath {
        size,
        birth: RateSpec::Constant(1.0),
        death: RateSpec::Constant(2.0),
        delta: None,
    })?;
    let f: Vec<f64> = (0..size).map(|x| 0.5 * x as f64 + if x == 0 { 8.0 } else { 0.0 }).collect();
    let cost = ImpulseCost::new(&model, vec![4, 8, 12], CostKind::Distance { fixed: 2.0, per_unit: 0.25 }, None)?;
    Ok(Problem {
        name: "birth-death-inventory".into(),
        model,
        cost,
        f,
        renewal: None,
    })
}

/// Irreducible chain with random rates; states sit at random positions in
/// `[0, 1]` and moving costs `c0 + |pos_x − pos_ξ|`.
pub fn random_ctmc(seed: u64, n: usize, u: usize) -> Result<Problem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n.max(2);
    let u = u.clamp(1, n);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (x, row) in rows.iter_mut().enumerate() {
        for y in 0..n {
            if y == x {
                continue;
            }
            let ring = y == (x + 1) % n;
            if ring || rng.gen_bool(0.35) {
                row.push((y, rng.gen_range(0.2..2.0)));
            }
        }
    }
    let mut pos: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    pos.sort_by(f64::total_cmp);
    let f: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
    let mut targets: Vec<usize> = Vec::new();
    while targets.len() < u {
        let t = rng.gen_range(0..n);
        if !targets.contains(&t) {
            targets.push(t);
        }
    }
    targets.sort_unstable();
    let c0 = rng.gen_range(0.1..1.0);
    let labels = (0..n).map(|i| format!("s{i}")).collect();
    let model = MarkovModel::from_rates(labels, Some(pos), rows, 0.05)?;
    let cost = ImpulseCost::new(&model, targets, CostKind::Distance { fixed: c0, per_unit: 1.0 }, None)?;
    Ok(Problem {
        name: format!("random-ctmc-{seed}"),
        model,
        cost,
        f,
        renewal: None,
    })
}

pub fn constant_f(kappa: f64) -> Result<Problem> {
    let model = build_model(&ModelSpec::BirthDeath {
        size: 10,
        birth: RateSpec::Constant(1.0),
        death: RateSpec::Constant(1.0),
        delta: None,
    })?;
    let cost = ImpulseCost::new(&model, vec![0, 5], CostKind::Constant { value: 1.0 }, None)?;
    Ok(Problem {
        name: "constant-f".into(),
        model,
        cost,
        f: vec![kappa; 10],
        renewal: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_are_deterministic() {
        let a = random_ctmc(7, 8, 2).unwrap();
        let b = random_ctmc(7, 8, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cost.targets().len(), 2);
        assert_eq!(a.model.closed_classes().len(), 1);
    }

    #[test]
    fn drift_grid() {
        let p = drift_example(0.01, 10.0, 0.0, 10.0, 1.0, 1.0).unwrap();
        assert_eq!(p.model.len(), 1001);
        assert_eq!(p.cost.targets().len(), 101);
        assert_eq!(p.f[1000], 10.0);
    }
}
