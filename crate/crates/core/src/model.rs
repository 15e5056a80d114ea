//! Finite-state continuous-time Markov chains.
//!
//! A [`MarkovModel`] stands in for the uncontrolled process. It is stored as a
//! sparse generator (off-diagonal rates per row plus the total exit rate) so
//! that grid discretizations with ten thousand nodes stay cheap, and it carries
//! the half-bandwidth of its rate graph for the banded solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, BandedMatrix};

/// Generator rows must sum to zero within this tolerance (relative to the row scale).
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Relative truncation error of the Poisson tails in uniformization.
pub const UNIFORMIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovModel {
    labels: Vec<String>,
    coords: Option<Vec<f64>>,
    rates: Vec<Vec<(usize, f64)>>,
    out_rate: Vec<f64>,
    delta: f64,
    lower_bw: usize,
    upper_bw: usize,
}

impl MarkovModel {
    /// Builds a model from a dense generator, checking every invariant.
    pub fn from_dense(
        labels: Vec<String>,
        coords: Option<Vec<f64>>,
        generator: &[Vec<f64>],
        delta: f64,
    ) -> Result<Self> {
        let n = generator.len();
        if n == 0 {
            return Err(invalid("generator", "empty state space"));
        }
        let mut rates = Vec::with_capacity(n);
        for (i, row) in generator.iter().enumerate() {
            if row.len() != n {
                return Err(invalid("generator", format!("row {i} has {} entries, expected {n}", row.len())));
            }
            let mut r = Vec::new();
            let mut scale = row[i].abs();
            for (j, &q) in row.iter().enumerate() {
                if !q.is_finite() {
                    return Err(invalid("generator", format!("non-finite entry ({i},{j})")));
                }
                if j != i {
                    if q < 0.0 {
                        return Err(invalid("generator", format!("negative rate {q} at ({i},{j})")));
                    }
                    scale = scale.max(q);
                    if q > 0.0 {
                        r.push((j, q));
                    }
                }
            }
            let sum: f64 = row.iter().sum();
            if sum.abs() > ROW_SUM_TOL * scale.max(1.0) {
                return Err(invalid("generator", format!("row {i} sums to {sum:e}, not 0")));
            }
            rates.push(r);
        }
        Self::from_rates(labels, coords, rates, delta)
    }

    /// Builds a model from off-diagonal rates; the diagonal is implied.
    pub fn from_rates(
        labels: Vec<String>,
        coords: Option<Vec<f64>>,
        rates: Vec<Vec<(usize, f64)>>,
        delta: f64,
    ) -> Result<Self> {
        let n = rates.len();
        if n == 0 {
            return Err(invalid("states", "empty state space"));
        }
        if labels.len() != n {
            return Err(invalid("states", format!("{} labels for {n} states", labels.len())));
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(invalid("coords", format!("{} coordinates for {n} states", c.len())));
            }
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid("delta", format!("time step must be positive, got {delta}")));
        }
        let mut out_rate = vec![0.0; n];
        let (mut lower_bw, mut upper_bw) = (0usize, 0usize);
        let mut clean = Vec::with_capacity(n);
        for (i, row) in rates.into_iter().enumerate() {
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (j, q) in row {
                if j >= n {
                    return Err(invalid("generator", format!("target {j} out of range in row {i}")));
                }
                if !(q >= 0.0 && q.is_finite()) {
                    return Err(invalid("generator", format!("negative or non-finite rate {q} at ({i},{j})")));
                }
                if j == i || q == 0.0 {
                    continue;
                }
                match merged.iter_mut().find(|(k, _)| *k == j) {
                    Some(e) => e.1 += q,
                    None => merged.push((j, q)),
                }
            }
            merged.sort_by_key(|e| e.0);
            for &(j, q) in &merged {
                out_rate[i] += q;
                if j < i {
                    lower_bw = lower_bw.max(i - j);
                } else {
                    upper_bw = upper_bw.max(j - i);
                }
            }
            clean.push(merged);
        }
        Ok(Self {
            labels,
            coords,
            rates: clean,
            out_rate,
            delta,
            lower_bw,
            upper_bw,
        })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn coords(&self) -> Option<&[f64]> {
        self.coords.as_deref()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Off-diagonal rates out of `i`, sorted by target.
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rates[i]
    }

    /// Total jump rate `-Q(i,i)`.
    pub fn out_rate(&self, i: usize) -> f64 {
        self.out_rate[i]
    }

    pub fn max_rate(&self) -> f64 {
        self.out_rate.iter().cloned().fold(0.0, f64::max)
    }

    /// Half-bandwidths (below, above the diagonal) of the rate graph.
    pub fn bandwidth(&self) -> (usize, usize) {
        (self.lower_bw, self.upper_bw)
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        if i == j {
            -self.out_rate[i]
        } else {
            self.rates[i].iter().find(|e| e.0 == j).map_or(0.0, |e| e.1)
        }
    }

    pub fn generator_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut q = vec![vec![0.0; n]; n];
        for i in 0..n {
            q[i][i] = -self.out_rate[i];
            for &(j, r) in &self.rates[i] {
                q[i][j] = r;
            }
        }
        q
    }

    /// `(Q v)(i)`.
    pub fn apply_generator(&self, v: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.rates[i].iter().map(|&(j, q)| q * v[j]).sum::<f64>() - self.out_rate[i] * v[i])
            .collect()
    }

    /// `(μᵀ Q)(j)`.
    pub fn apply_generator_left(&self, mu: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out: Vec<f64> = (0..n).map(|i| -self.out_rate[i] * mu[i]).collect();
        for i in 0..n {
            for &(j, q) in &self.rates[i] {
                out[j] += mu[i] * q;
            }
        }
        out
    }

    /// Index of the state with coordinate or label closest to `x`.
    pub fn nearest_state(&self, x: f64) -> usize {
        match &self.coords {
            Some(c) => c
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &ci)| {
                    let d = (ci - x).abs();
                    if d < acc.1 {
                        (i, d)
                    } else {
                        acc
                    }
                })
                .0,
            None => (x.round().max(0.0) as usize).min(self.len() - 1),
        }
    }

    /// A copy of `self` with the rate graph of the killed process on `domain`.
    fn killed_rows(&self, domain: &Domain) -> Vec<Vec<(usize, f64)>> {
        (0..self.len())
            .map(|i| {
                if domain.contains(i) {
                    self.rates[i].iter().copied().filter(|e| domain.contains(e.0)).collect()
                } else {
                    Vec::new()
                }
            })
            .collect()
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::InvalidModel {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// Boundary closure for grid models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Outward rates are zeroed; inward rates stay.
    Reflecting,
    /// The end node has no outgoing rates.
    Absorbing,
}

/// A rate given either once for all states or per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateSpec {
    Constant(f64),
    PerState(Vec<f64>),
}

impl RateSpec {
    fn at(&self, i: usize) -> f64 {
        match self {
            RateSpec::Constant(v) => *v,
            RateSpec::PerState(v) => v[i],
        }
    }

    fn check(&self, field: &str, n: usize) -> Result<()> {
        match self {
            RateSpec::Constant(v) if !(v.is_finite() && *v >= 0.0) => {
                Err(invalid(field, format!("rate must be finite and non-negative, got {v}")))
            }
            RateSpec::PerState(v) if v.len() != n => {
                Err(invalid(field, format!("{} values for {n} states", v.len())))
            }
            RateSpec::PerState(v) => match v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                Some(i) => Err(invalid(field, format!("negative or non-finite rate {} at state {i}", v[i]))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

/// Declarative description of a process, turned into a [`MarkovModel`] by [`build_model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Explicit {
        #[serde(default)]
        labels: Option<Vec<String>>,
        #[serde(default)]
        coords: Option<Vec<f64>>,
        generator: Vec<Vec<f64>>,
        #[serde(default)]
        delta: Option<f64>,
    },
    /// Upwind finite differences for `dX = b(X)dt + σ dW` on `{left, left+h, …, left+length}`.
    Drift {
        h: f64,
        length: f64,
        #[serde(default)]
        left: f64,
        drift: DriftSpec,
        #[serde(default)]
        diffusion: f64,
        left_boundary: Boundary,
        right_boundary: Boundary,
        #[serde(default)]
        delta: Option<f64>,
    },
    BirthDeath {
        size: usize,
        birth: RateSpec,
        death: RateSpec,
        #[serde(default)]
        delta: Option<f64>,
    },
}

/// Drift coefficient: constant, or one value per grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DriftSpec {
    Constant(f64),
    PerNode(Vec<f64>),
}

fn default_delta(rows: &[Vec<(usize, f64)>]) -> f64 {
    let max = rows
        .iter()
        .map(|r| r.iter().map(|e| e.1).sum::<f64>())
        .fold(0.0, f64::max);
    if max > 0.0 {
        0.1 / max
    } else {
        0.1
    }
}

pub fn build_model(spec: &ModelSpec) -> Result<MarkovModel> {
    match spec {
        ModelSpec::Explicit {
            labels,
            coords,
            generator,
            delta,
        } => {
            let n = generator.len();
            let labels = labels.clone().unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
            let max_rate = (0..n).map(|i| -generator[i].get(i).copied().unwrap_or(0.0)).fold(0.0, f64::max);
            let delta = delta.unwrap_or(if max_rate > 0.0 { 0.1 / max_rate } else { 0.1 });
            MarkovModel::from_dense(labels, coords.clone(), generator, delta)
        }
        ModelSpec::Drift {
            h,
            length,
            left,
            drift,
            diffusion,
            left_boundary,
            right_boundary,
            delta,
        } => {
            if !(h.is_finite() && *h > 0.0) {
                return Err(invalid("h", format!("grid step must be positive, got {h}")));
            }
            if !(length.is_finite() && *length > 0.0) {
                return Err(invalid("length", format!("empty grid (length {length})")));
            }
            if !(diffusion.is_finite() && *diffusion >= 0.0) {
                return Err(invalid("diffusion", format!("must be non-negative, got {diffusion}")));
            }
            let intervals = (length / h).round() as usize;
            if intervals == 0 {
                return Err(invalid("length", "grid has a single node"));
            }
            let n = intervals + 1;
            let b = |i: usize| -> Result<f64> {
                match drift {
                    DriftSpec::Constant(v) => Ok(*v),
                    DriftSpec::PerNode(v) if v.len() == n => Ok(v[i]),
                    DriftSpec::PerNode(v) => Err(invalid("drift", format!("{} values for {n} nodes", v.len()))),
                }
            };
            let diff_rate = diffusion * diffusion / (2.0 * h * h);
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                let bi = b(i)?;
                if !bi.is_finite() {
                    return Err(invalid("drift", format!("non-finite drift at node {i}")));
                }
                let mut right = diff_rate + bi.max(0.0) / h;
                let mut leftr = diff_rate + (-bi).max(0.0) / h;
                if i == 0 {
                    leftr = 0.0;
                    if *left_boundary == Boundary::Absorbing {
                        right = 0.0;
                    }
                }
                if i == n - 1 {
                    right = 0.0;
                    if *right_boundary == Boundary::Absorbing {
                        leftr = 0.0;
                    }
                }
                let mut row = Vec::new();
                if leftr > 0.0 {
                    row.push((i - 1, leftr));
                }
                if right > 0.0 {
                    row.push((i + 1, right));
                }
                rows.push(row);
            }
            let coords: Vec<f64> = (0..n).map(|i| left + i as f64 * h).collect();
            let labels = coords.iter().map(|x| format!("{x}")).collect();
            let delta = delta.unwrap_or_else(|| default_delta(&rows));
            MarkovModel::from_rates(labels, Some(coords), rows, delta)
        }
        ModelSpec::BirthDeath {
            size,
            birth,
            death,
            delta,
        } => {
            if *size == 0 {
                return Err(invalid("size", "empty state space"));
            }
            birth.check("birth", *size)?;
            death.check("death", *size)?;
            let rows: Vec<Vec<(usize, f64)>> = (0..*size)
                .map(|i| {
                    let mut row = Vec::new();
                    if i > 0 && death.at(i) > 0.0 {
                        row.push((i - 1, death.at(i)));
                    }
                    if i + 1 < *size && birth.at(i) > 0.0 {
                        row.push((i + 1, birth.at(i)));
                    }
                    row
                })
                .collect();
            let labels = (0..*size).map(|i| i.to_string()).collect();
            let coords = Some((0..*size).map(|i| i as f64).collect());
            let delta = delta.unwrap_or_else(|| default_delta(&rows));
            MarkovModel::from_rates(labels, coords, rows, delta)
        }
    }
}

/// An open set `O` as a mask over states.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    interior: Vec<bool>,
}

impl Domain {
    pub fn new(interior: Vec<bool>) -> Result<Self> {
        if !interior.iter().any(|&b| b) {
            return Err(Error::InvalidInput("domain has no interior state".into()));
        }
        Ok(Self { interior })
    }

    pub fn full(n: usize) -> Self {
        Self {
            interior: vec![true; n],
        }
    }

    pub fn from_states(n: usize, states: &[usize]) -> Result<Self> {
        let mut m = vec![false; n];
        for &s in states {
            if s >= n {
                return Err(Error::InvalidInput(format!("domain state {s} out of range")));
            }
            m[s] = true;
        }
        Self::new(m)
    }

    pub fn contains(&self, i: usize) -> bool {
        self.interior[i]
    }

    pub fn mask(&self) -> &[bool] {
        &self.interior
    }

    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn interior_count(&self) -> usize {
        self.interior.iter().filter(|&&b| b).count()
    }

    /// True when the domain is the whole state space (no exit is possible).
    pub fn is_full(&self) -> bool {
        self.interior.iter().all(|&b| b)
    }

    pub fn is_subset_of(&self, other: &Domain) -> bool {
        self.interior.iter().zip(&other.interior).all(|(&a, &b)| !a || b)
    }
}

/// States from which some state in `targets` is reachable along positive rates
/// (edges restricted by `edge_ok`).
pub(crate) fn reaches(
    n: usize,
    edges: impl Fn(usize) -> Vec<usize>,
    targets: &[bool],
) -> Vec<bool> {
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in edges(i) {
            rev[j].push(i);
        }
    }
    let mut seen = targets.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|&i| targets[i]).collect();
    while let Some(j) = stack.pop() {
        for &i in &rev[j] {
            if !seen[i] {
                seen[i] = true;
                stack.push(i);
            }
        }
    }
    seen
}

/// Strongly connected components (Kosaraju, iterative) and the closed ones.
pub(crate) fn closed_classes(n: usize, edges: impl Fn(usize) -> Vec<usize>) -> Vec<Vec<usize>> {
    let adj: Vec<Vec<usize>> = (0..n).map(&edges).collect();
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    for s in 0..n {
        if visited[s] {
            continue;
        }
        visited[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some((v, k)) = stack.pop() {
            if k < adj[v].len() {
                stack.push((v, k + 1));
                let w = adj[v][k];
                if !visited[w] {
                    visited[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
            }
        }
    }
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, a) in adj.iter().enumerate() {
        for &w in a {
            rev[w].push(v);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![s];
        comp[s] = id;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &w in &rev[v] {
                if comp[w] == usize::MAX {
                    comp[w] = id;
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    let mut closed: Vec<Vec<usize>> = comps
        .into_iter()
        .enumerate()
        .filter(|(id, members)| members.iter().all(|&v| adj[v].iter().all(|&w| comp[w] == *id)))
        .map(|(_, m)| m)
        .collect();
    closed.sort();
    closed
}

impl MarkovModel {
    pub(crate) fn successors(&self, i: usize) -> Vec<usize> {
        self.rates[i].iter().map(|e| e.0).collect()
    }

    /// Closed communicating classes of the rate graph.
    pub fn closed_classes(&self) -> Vec<Vec<usize>> {
        closed_classes(self.len(), |i| self.successors(i))
    }
}

/// Poisson(m) probabilities truncated at both tails; returns (first index, weights).
pub(crate) fn poisson_weights(mean: f64) -> (usize, Vec<f64>) {
    if mean <= 0.0 {
        return (0, vec![1.0]);
    }
    let mode = mean.floor() as usize;
    let ln_mean = mean.ln();
    // log-weights relative to the mode avoid underflow for large means
    let mut right = vec![1.0];
    let mut lw = 0.0f64;
    let mut k = mode;
    loop {
        k += 1;
        lw += ln_mean - (k as f64).ln();
        let w = lw.exp();
        right.push(w);
        if w < UNIFORMIZATION_TOL * 1e-3 && k as f64 > mean {
            break;
        }
    }
    let mut left = Vec::new();
    let mut lw = 0.0f64;
    let mut k = mode;
    while k > 0 {
        lw -= ln_mean - (k as f64).ln();
        k -= 1;
        let w = lw.exp();
        left.push(w);
        if w < UNIFORMIZATION_TOL * 1e-3 {
            break;
        }
    }
    let first = mode - left.len();
    let mut weights: Vec<f64> = left.into_iter().rev().collect();
    weights.extend(right);
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    (first, weights)
}

/// `exp(Q t)` for the process killed outside `domain`, by scaled uniformization:
/// the horizon is halved until `Λ t ≤ 1`, the short-time kernel is a truncated
/// Poisson mixture of powers of `I + Q/Λ`, and the result is squared back up.
fn kernel_with_rows(
    n: usize,
    rows: &[Vec<(usize, f64)>],
    out_rate: &[f64],
    horizon: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!("horizon must be non-negative, got {horizon}")));
    }
    let lambda = out_rate.iter().cloned().fold(0.0, f64::max);
    let mut id = vec![vec![0.0; n]; n];
    for (i, r) in id.iter_mut().enumerate() {
        r[i] = 1.0;
    }
    if lambda == 0.0 || horizon == 0.0 {
        return Ok(id);
    }
    let mut squarings = 0u32;
    let mut step = horizon;
    while lambda * step > 1.0 {
        step /= 2.0;
        squarings += 1;
    }
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        p[i][i] = 1.0 - out_rate[i] / lambda;
        for &(j, q) in &rows[i] {
            p[i][j] += q / lambda;
        }
    }
    let (first, weights) = poisson_weights(lambda * step);
    let mut power = id;
    let mut acc = vec![vec![0.0; n]; n];
    for k in 0..first + weights.len() {
        if k >= first {
            let w = weights[k - first];
            for i in 0..n {
                for j in 0..n {
                    acc[i][j] += w * power[i][j];
                }
            }
        }
        power = linalg::matmul(&power, &p);
    }
    for _ in 0..squarings {
        acc = linalg::matmul(&acc, &acc);
    }
    if acc.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Numerical {
            what: "transition kernel".into(),
            rate: lambda,
        });
    }
    Ok(acc)
}

/// Row-stochastic `exp(Q · horizon)`.
pub fn transition_kernel(model: &MarkovModel, horizon: f64) -> Result<Vec<Vec<f64>>> {
    kernel_with_rows(model.len(), &model.rates, &model.out_rate, horizon)
}

/// Substochastic kernel of the process killed at the first exit from `domain`.
/// Exterior rows are zero.
pub fn stopped_kernel(model: &MarkovModel, domain: &Domain, horizon: f64) -> Result<Vec<Vec<f64>>> {
    check_domain_len(model, domain)?;
    let rows = model.killed_rows(domain);
    let out: Vec<f64> = (0..model.len())
        .map(|i| if domain.contains(i) { model.out_rate(i) } else { 0.0 })
        .collect();
    let mut k = kernel_with_rows(model.len(), &rows, &out, horizon)?;
    for (i, row) in k.iter_mut().enumerate() {
        if !domain.contains(i) {
            row.fill(0.0);
        }
    }
    Ok(k)
}

/// Survival probabilities `P_x(τ_O > t)` for each horizon, computed with sparse
/// uniformization (no dense kernel). Exterior states have survival 0.
pub fn survival_probabilities(model: &MarkovModel, domain: &Domain, horizons: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_domain_len(model, domain)?;
    let n = model.len();
    let rows = model.killed_rows(domain);
    let lambda = (0..n)
        .filter(|&i| domain.contains(i))
        .map(|i| model.out_rate(i))
        .fold(0.0, f64::max);
    let start: Vec<f64> = (0..n).map(|i| if domain.contains(i) { 1.0 } else { 0.0 }).collect();
    if lambda == 0.0 {
        return Ok(horizons.iter().map(|_| start.clone()).collect());
    }
    let plans: Vec<(usize, Vec<f64>)> = horizons.iter().map(|&t| poisson_weights(lambda * t.max(0.0))).collect();
    let kmax = plans.iter().map(|(f, w)| f + w.len()).max().unwrap_or(1);
    let mut acc = vec![vec![0.0; n]; horizons.len()];
    let mut v = start;
    for k in 0..kmax {
        for (h, (first, w)) in plans.iter().enumerate() {
            if k >= *first && k < first + w.len() {
                let wk = w[k - first];
                for i in 0..n {
                    acc[h][i] += wk * v[i];
                }
            }
        }
        let next: Vec<f64> = (0..n)
            .map(|i| {
                if !domain.contains(i) {
                    return 0.0;
                }
                let stay = 1.0 - model.out_rate(i) / lambda;
                stay * v[i] + rows[i].iter().map(|&(j, q)| q / lambda * v[j]).sum::<f64>()
            })
            .collect();
        v = next;
    }
    if acc.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Numerical {
            what: "survival probabilities".into(),
            rate: lambda,
        });
    }
    Ok(acc)
}

fn check_domain_len(model: &MarkovModel, domain: &Domain) -> Result<()> {
    if domain.len() != model.len() {
        return Err(Error::InvalidInput(format!(
            "domain has {} states, model has {}",
            domain.len(),
            model.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantMeasure {
    pub weights: Vec<f64>,
}

impl InvariantMeasure {
    pub fn integrate(&self, f: &[f64]) -> f64 {
        linalg::dot(&self.weights, f)
    }
}

/// The unique invariant probability. Transient states are allowed; more than
/// one closed class is rejected.
pub fn invariant_measure(model: &MarkovModel) -> Result<InvariantMeasure> {
    let classes = model.closed_classes();
    if classes.len() != 1 {
        return Err(Error::Reducible {
            classes: classes
                .iter()
                .map(|c| c.iter().map(|&i| model.label(i).to_string()).collect())
                .collect(),
        });
    }
    let n = model.len();
    let pin = classes[0][0];
    let (lo, up) = model.bandwidth();
    // transpose of Q: row j holds column j
    let mut m = BandedMatrix::zeros(n, up, lo);
    for i in 0..n {
        m.add(i, i, -model.out_rate(i));
        for &(j, q) in model.row(i) {
            m.add(j, i, q);
        }
    }
    let d = model.out_rate(pin).max(1.0);
    m.set_identity_row(pin, d);
    let mut b = vec![0.0; n];
    b[pin] = d;
    let lu = m.factor("invariant measure")?;
    lu.solve_in_place(&mut b);
    for x in &mut b {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = b.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Singular("invariant measure normalization".into()));
    }
    b.iter_mut().for_each(|x| *x /= total);
    Ok(InvariantMeasure { weights: b })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonSolution {
    pub q: Vec<f64>,
    pub mu_f: f64,
    pub mu: InvariantMeasure,
}

impl PoissonSolution {
    /// Upper bound `K = max q`.
    pub fn bound(&self) -> f64 {
        self.q.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Solves `Q q = −(f − μ(f))` normalized by `μ(q) = 0`.
pub fn poisson_solve(model: &MarkovModel, f: &[f64]) -> Result<PoissonSolution> {
    let n = model.len();
    if f.len() != n {
        return Err(Error::InvalidInput(format!("f has {} entries, model has {n}", f.len())));
    }
    let mu = invariant_measure(model)?;
    let mu_f = mu.integrate(f);
    let pin = (0..n)
        .max_by(|&a, &b| mu.weights[a].total_cmp(&mu.weights[b]))
        .unwrap_or(0);
    let (lo, up) = model.bandwidth();
    let mut m = BandedMatrix::zeros(n, lo, up);
    let mut b = vec![0.0; n];
    for i in 0..n {
        m.add(i, i, model.out_rate(i));
        for &(j, q) in model.row(i) {
            m.add(i, j, -q);
        }
        b[i] = f[i] - mu_f;
    }
    m.set_identity_row(pin, 1.0);
    b[pin] = 0.0;
    let lu = m.factor("Poisson equation")?;
    lu.solve_in_place(&mut b);
    let shift = mu.integrate(&b);
    b.iter_mut().for_each(|x| *x -= shift);
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular("Poisson equation".into()));
    }
    Ok(PoissonSolution { q: b, mu_f, mu })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitMoments {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl ExitMoments {
    pub fn max_first(&self) -> f64 {
        self.first.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_second(&self) -> f64 {
        self.second.iter().cloned().fold(0.0, f64::max)
    }
}

/// Interior states from which the exterior cannot be reached.
pub fn trapped_states(model: &MarkovModel, domain: &Domain) -> Vec<usize> {
    let exterior: Vec<bool> = domain.mask().iter().map(|b| !b).collect();
    let ok = reaches(model.len(), |i| model.successors(i), &exterior);
    (0..model.len()).filter(|&i| !ok[i]).collect()
}

/// First and second moments of the exit time from `domain`.
pub fn exit_time_moments(model: &MarkovModel, domain: &Domain) -> Result<ExitMoments> {
    check_domain_len(model, domain)?;
    let trapped = trapped_states(model, domain);
    if !trapped.is_empty() {
        return Err(Error::ExitUnreachable {
            states: trapped.iter().take(20).map(|&i| model.label(i).to_string()).collect(),
        });
    }
    let n = model.len();
    let (lo, up) = model.bandwidth();
    let mut m = BandedMatrix::zeros(n, lo, up);
    for i in 0..n {
        if domain.contains(i) {
            m.add(i, i, model.out_rate(i));
            for &(j, q) in model.row(i) {
                if domain.contains(j) {
                    m.add(i, j, -q);
                }
            }
        } else {
            m.add(i, i, 1.0);
        }
    }
    let lu = m.factor("exit-time moments")?;
    let ones: Vec<f64> = (0..n).map(|i| if domain.contains(i) { 1.0 } else { 0.0 }).collect();
    let first = lu.solve(&ones);
    let rhs2: Vec<f64> = first.iter().zip(&ones).map(|(u, o)| 2.0 * u * o).collect();
    let second = lu.solve(&rhs2);
    Ok(ExitMoments { first, second })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(a: f64, b: f64) -> MarkovModel {
        MarkovModel::from_dense(
            vec!["0".into(), "1".into()],
            None,
            &[vec![-a, a], vec![b, -b]],
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn explicit_generator_passes_through() {
        let m = build_model(&ModelSpec::Explicit {
            labels: None,
            coords: None,
            generator: vec![vec![-1.0, 1.0], vec![1.0, -1.0]],
            delta: Some(0.5),
        })
        .unwrap();
        assert_eq!(m.generator_dense(), vec![vec![-1.0, 1.0], vec![1.0, -1.0]]);
        assert_eq!(m.delta(), 0.5);
    }

    #[test]
    fn rejects_bad_generators() {
        let neg = MarkovModel::from_dense(vec!["a".into(), "b".into()], None, &[vec![1.0, -1.0], vec![0.0, 0.0]], 0.1);
        assert!(matches!(neg, Err(Error::InvalidModel { ref field, .. }) if field == "generator"));
        let sum = MarkovModel::from_dense(vec!["a".into(), "b".into()], None, &[vec![-1.0, 2.0], vec![0.0, 0.0]], 0.1);
        assert!(sum.is_err());
        let empty = build_model(&ModelSpec::BirthDeath {
            size: 0,
            birth: RateSpec::Constant(1.0),
            death: RateSpec::Constant(1.0),
            delta: None,
        });
        assert!(matches!(empty, Err(Error::InvalidModel { ref field, .. }) if field == "size"));
        let badrate = build_model(&ModelSpec::BirthDeath {
            size: 3,
            birth: RateSpec::Constant(-1.0),
            death: RateSpec::Constant(1.0),
            delta: None,
        });
        assert!(matches!(badrate, Err(Error::InvalidModel { ref field, .. }) if field == "birth"));
    }

    #[test]
    fn birth_death_is_tridiagonal() {
        let m = build_model(&ModelSpec::BirthDeath {
            size: 5,
            birth: RateSpec::Constant(2.0),
            death: RateSpec::Constant(3.0),
            delta: None,
        })
        .unwrap();
        let q = m.generator_dense();
        assert_eq!(q[0], vec![-2.0, 2.0, 0.0, 0.0, 0.0]);
        assert_eq!(q[2], vec![0.0, 3.0, -5.0, 2.0, 0.0]);
        assert_eq!(q[4], vec![0.0, 0.0, 0.0, 3.0, -3.0]);
        assert_eq!(m.bandwidth(), (1, 1));
    }

    #[test]
    fn upwind_drift_mean_displacement() {
        let h = 0.1;
        let m = build_model(&ModelSpec::Drift {
            h,
            length: 2.0,
            left: 0.0,
            drift: DriftSpec::Constant(1.0),
            diffusion: 0.0,
            left_boundary: Boundary::Reflecting,
            right_boundary: Boundary::Absorbing,
            delta: Some(0.05),
        })
        .unwrap();
        assert_eq!(m.len(), 21);
        assert!((m.rate(3, 4) - 1.0 / h).abs() < 1e-12);
        assert_eq!(m.out_rate(20), 0.0);
        // far from the absorbing end the displacement over δ is b·δ
        let k = transition_kernel(&m, 0.05).unwrap();
        let x = m.coords().unwrap();
        let mean: f64 = (0..m.len()).map(|j| k[2][j] * (x[j] - x[2])).sum();
        assert!((mean - 0.05).abs() < 1e-9, "{mean}");
    }

    #[test]
    fn two_state_kernel_closed_form() {
        let m = two_state(1.0, 1.0);
        let t = 2f64.ln() / 2.0;
        let k = transition_kernel(&m, t).unwrap();
        assert!((k[0][0] - 0.75).abs() < 1e-12);
        assert!((k[0][1] - 0.25).abs() < 1e-12);
        let id = transition_kernel(&m, 0.0).unwrap();
        assert_eq!(id, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn stopped_kernel_kills_mass() {
        let m = two_state(1.0, 1.0);
        let d = Domain::from_states(2, &[0]).unwrap();
        let k = stopped_kernel(&m, &d, 0.7).unwrap();
        assert!((k[0][0] - (-0.7f64).exp()).abs() < 1e-12);
        assert_eq!(k[1], vec![0.0, 0.0]);
        let full = stopped_kernel(&m, &Domain::full(2), 0.7).unwrap();
        let plain = transition_kernel(&m, 0.7).unwrap();
        assert!(full.iter().flatten().zip(plain.iter().flatten()).all(|(a, b)| (a - b).abs() < 1e-15));
        let s = survival_probabilities(&m, &d, &[0.7]).unwrap();
        assert!((s[0][0] - (-0.7f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn invariant_measures() {
        let m = two_state(1.0, 1.0);
        let mu = invariant_measure(&m).unwrap();
        assert!((mu.weights[0] - 0.5).abs() < 1e-14);
        // birth 1, death 2 on {0,1}
        let bd = two_state(1.0, 2.0);
        let mu = invariant_measure(&bd).unwrap();
        assert!((mu.weights[0] - 2.0 / 3.0).abs() < 1e-14);
        let res = bd.apply_generator_left(&mu.weights);
        assert!(linalg::sup_norm(&res) < 1e-10);
    }

    #[test]
    fn reducible_chain_names_classes() {
        let m = MarkovModel::from_dense(
            vec!["a".into(), "b".into(), "c".into()],
            None,
            &[vec![0.0, 0.0, 0.0], vec![1.0, -2.0, 1.0], vec![0.0, 0.0, 0.0]],
            0.1,
        )
        .unwrap();
        match invariant_measure(&m) {
            Err(Error::Reducible { classes }) => assert_eq!(classes, vec![vec!["a".to_string()], vec!["c".to_string()]]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn poisson_two_state() {
        let m = two_state(1.0, 1.0);
        let p = poisson_solve(&m, &[1.0, 0.0]).unwrap();
        assert!((p.mu_f - 0.5).abs() < 1e-14);
        assert!((p.q[0] - 0.25).abs() < 1e-14);
        assert!((p.q[1] + 0.25).abs() < 1e-14);
        let c = poisson_solve(&m, &[3.0, 3.0]).unwrap();
        assert_eq!(c.mu_f, 3.0);
        assert!(linalg::sup_norm(&c.q) < 1e-15);
    }

    #[test]
    fn exit_moments_single_state() {
        let m = two_state(1.0, 1.0);
        let d = Domain::from_states(2, &[0]).unwrap();
        let e = exit_time_moments(&m, &d).unwrap();
        assert!((e.first[0] - 1.0).abs() < 1e-14);
        assert!((e.second[0] - 2.0).abs() < 1e-14);
        assert_eq!((e.first[1], e.second[1]), (0.0, 0.0));
        let trapped = MarkovModel::from_dense(
            vec!["a".into(), "b".into()],
            None,
            &[vec![0.0, 0.0], vec![1.0, -1.0]],
            0.1,
        )
        .unwrap();
        let d = Domain::from_states(2, &[0]).unwrap();
        assert!(matches!(exit_time_moments(&trapped, &d), Err(Error::ExitUnreachable { .. })));
    }
}
