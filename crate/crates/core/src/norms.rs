//! Penalty norms and the robust objective
//! `φ(x) = ‖Px − x‖₍₁₎ + ε‖x‖₍₂₎`.
//!
//! With per-column budgets `ε_j` and weights `c_j = ε_j / ε`:
//!
//! * `g1(x) = min_{x=u+v} ‖u‖_∞ + Σ c_j |v_j|`, the support function of
//!   `{z : ‖z‖₁ ≤ 1, |z_j| ≤ c_j}`;
//! * `g2(x) = min_{x=u+v} ‖u‖₂ + Σ c_j |v_j|`, the support function of
//!   `{z : ‖z‖₂ ≤ 1, |z_j| ≤ c_j}`.
//!
//! Both are evaluated in `O(n log n)` and also return a maximizing dual
//! vector, which is a subgradient of the norm at `x`.

use std::cmp::Ordering;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::matrix::{l1, l2, ScoreVector, SparseStochasticMatrix};

/// Which pair of norms defines φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormPair {
    /// `‖Px − x‖₁ + ε g1(x)`, bounding ℓ1-budget column perturbations.
    L1G1,
    /// `‖Px − x‖₂ + ε g2(x)`, bounding Frobenius-budget column perturbations.
    L2G2,
    /// `‖Px − x‖₂ + ε ‖x‖₂`, bounding Frobenius perturbations that keep
    /// `P + ξ` stochastic.
    L2L2,
}

impl FromStr for NormPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1g1" => Ok(NormPair::L1G1),
            "l2g2" => Ok(NormPair::L2G2),
            "l2l2" => Ok(NormPair::L2L2),
            other => Err(Error::InvalidParameter(format!("unknown norm pair {other:?}"))),
        }
    }
}

impl std::fmt::Display for NormPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormPair::L1G1 => "l1g1",
            NormPair::L2G2 => "l2g2",
            NormPair::L2L2 => "l2l2",
        })
    }
}

/// Total budget `ε`, per-column weights `c_j = ε_j / ε`, and the norm pair.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySpec {
    epsilon: f64,
    weights: Vec<f64>,
    pair: NormPair,
}

impl UncertaintySpec {
    /// `column_budgets` holds the absolute budgets `ε_j`.
    pub fn new(epsilon: f64, column_budgets: &[f64], pair: NormPair) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        if column_budgets.is_empty() {
            return Err(Error::InvalidParameter("column budgets are empty".into()));
        }
        if let Some((j, b)) = column_budgets
            .iter()
            .enumerate()
            .find(|(_, b)| !(**b > 0.0 && b.is_finite()))
        {
            return Err(Error::InvalidParameter(format!("column budget {j} = {b} must be positive")));
        }
        Ok(Self {
            epsilon,
            weights: column_budgets.iter().map(|b| b / epsilon).collect(),
            pair,
        })
    }

    /// Every column gets the same budget `ε_j = budget`.
    pub fn with_uniform_budget(epsilon: f64, budget: f64, n: usize, pair: NormPair) -> Result<Self> {
        Self::new(epsilon, &vec![budget; n], pair)
    }

    /// Default budgets `ε_j = ε / n`.
    pub fn uniform(epsilon: f64, n: usize, pair: NormPair) -> Result<Self> {
        Self::with_uniform_budget(epsilon, epsilon / n as f64, n, pair)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn pair(&self) -> NormPair {
        self.pair
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    /// Absolute budget `ε_j`.
    pub fn column_budget(&self, j: usize) -> f64 {
        self.weights[j] * self.epsilon
    }

    pub fn with_pair(&self, pair: NormPair) -> Self {
        Self { pair, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveValue {
    pub residual_term: f64,
    /// `ε` times the penalty norm.
    pub penalty_term: f64,
    pub total: f64,
}

fn check_weights(x: &[f64], c: &[f64]) -> Result<()> {
    check_dim(x.len(), c.len())?;
    if let Some((j, w)) = c.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
        return Err(Error::InvalidParameter(format!("weight c_{j} = {w} must be positive")));
    }
    Ok(())
}

fn desc_by(keys: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[b].partial_cmp(&keys[a]).unwrap_or(Ordering::Equal));
    idx
}

pub fn g1(x: &[f64], c: &[f64]) -> Result<f64> {
    check_weights(x, c)?;
    Ok(g1_with_dual(x, c).0)
}

pub fn g2(x: &[f64], c: &[f64]) -> Result<f64> {
    check_weights(x, c)?;
    Ok(g2_with_dual(x, c).0)
}

/// Threshold scan `g1(x) = min_{t ≥ 0} t + Σ c_j (|x_j| − t)₊`. The
/// objective is convex and piecewise linear in `t`, so the minimum sits on
/// a breakpoint `t ∈ {0} ∪ {|x_j|}`.
pub(crate) fn g1_with_dual(x: &[f64], c: &[f64]) -> (f64, Vec<f64>) {
    let n = x.len();
    let abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let order = desc_by(&abs);

    // candidate t = 0: every coordinate sits in v
    let total: f64 = abs.iter().zip(c).map(|(a, w)| a * w).sum();
    let mut best = total;
    let mut best_t = 0.0;
    let mut weight_above = 0.0;
    let mut mass_above = 0.0;
    for &j in &order {
        let t = abs[j];
        let f = t + mass_above - t * weight_above;
        if f < best {
            best = f;
            best_t = t;
        }
        weight_above += c[j];
        mass_above += c[j] * abs[j];
    }

    // dual: full weight above the threshold, leftover budget spread over
    // coordinates sitting exactly on it
    let mut z = vec![0.0; n];
    let mut left = 1.0;
    for j in 0..n {
        if abs[j] > best_t {
            z[j] = c[j] * x[j].signum();
            left -= c[j];
        }
    }
    if best_t > 0.0 {
        let mut left = left.max(0.0);
        for &j in &order {
            if abs[j] == best_t && left > 0.0 {
                let take = c[j].min(left);
                z[j] = take * x[j].signum();
                left -= take;
            }
        }
    }
    (best, z)
}

/// Dual `max { zᵀx : ‖z‖₂ ≤ 1, |z_j| ≤ c_j }` with `z_j = clamp(x_j/ρ, ±c_j)`.
/// Coordinates are clamped in decreasing order of `|x_j| / c_j`; for each
/// clamped set the unit-norm condition fixes `ρ` in closed form, and the
/// first set whose `ρ` is consistent with the ordering is optimal.
pub(crate) fn g2_with_dual(x: &[f64], c: &[f64]) -> (f64, Vec<f64>) {
    let n = x.len();
    let nonzero: Vec<usize> = (0..n).filter(|&j| x[j] != 0.0).collect();
    let mut z = vec![0.0; n];
    if nonzero.is_empty() {
        return (0.0, z);
    }
    let ratio: Vec<f64> = nonzero.iter().map(|&j| x[j].abs() / c[j]).collect();
    let order: Vec<usize> = desc_by(&ratio).into_iter().map(|k| nonzero[k]).collect();

    let mut free_sq: f64 = nonzero.iter().map(|&j| x[j] * x[j]).sum();
    let mut clamped_sq = 0.0;
    let mut clamped_val = 0.0;
    for m in 0..=order.len() {
        if m == order.len() {
            // every nonzero coordinate clamped and still inside the ball
            for &j in &order {
                z[j] = c[j] * x[j].signum();
            }
            return (clamped_val, z);
        }
        if clamped_sq < 1.0 {
            let rho = (free_sq.max(0.0) / (1.0 - clamped_sq)).sqrt();
            let next = order[m];
            if rho > 0.0 && x[next].abs() / c[next] <= rho {
                for (k, &j) in order.iter().enumerate() {
                    z[j] = if k < m { c[j] * x[j].signum() } else { x[j] / rho };
                }
                let value = clamped_val + (free_sq.max(0.0) * (1.0 - clamped_sq)).sqrt();
                return (value, z);
            }
        }
        let j = order[m];
        clamped_sq += c[j] * c[j];
        clamped_val += c[j] * x[j].abs();
        free_sq -= x[j] * x[j];
    }
    unreachable!("loop returns at m == order.len()")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GKind {
    G1,
    G2,
}

/// Reference evaluation of `g1`/`g2` by routes independent of the
/// threshold scans: a greedy fractional knapsack for `g1` and golden-section
/// minimization of the Lagrangian dual in `ρ` for `g2`. Intended for small
/// inputs in tests.
pub fn g_oracle(x: &[f64], c: &[f64], kind: GKind) -> Result<f64> {
    check_weights(x, c)?;
    match kind {
        GKind::G1 => {
            let mut idx: Vec<usize> = (0..x.len()).collect();
            idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()));
            let mut budget = 1.0f64;
            let mut value = 0.0;
            for j in idx {
                if budget <= 0.0 {
                    break;
                }
                let take = c[j].min(budget);
                value += take * x[j].abs();
                budget -= take;
            }
            Ok(value)
        }
        GKind::G2 => {
            // D(ρ) = ρ/2 + Σ_j max_{|z|≤c_j} (z|x_j| − ρ z²/2), convex in ρ ≥ 0
            let dual = |rho: f64| -> f64 {
                let mut s = rho / 2.0;
                for (xj, cj) in x.iter().map(|v| v.abs()).zip(c) {
                    if xj == 0.0 {
                        continue;
                    }
                    if rho * cj >= xj {
                        s += xj * xj / (2.0 * rho);
                    } else {
                        s += cj * xj - rho * cj * cj / 2.0;
                    }
                }
                s
            };
            let (mut lo, mut hi) = (0.0f64, l2(x));
            if hi == 0.0 {
                return Ok(0.0);
            }
            let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
            let mut a = hi - inv_phi * (hi - lo);
            let mut b = lo + inv_phi * (hi - lo);
            let (mut fa, mut fb) = (dual(a), dual(b));
            for _ in 0..400 {
                if fa < fb {
                    hi = b;
                    b = a;
                    fb = fa;
                    a = hi - inv_phi * (hi - lo);
                    fa = dual(a);
                } else {
                    lo = a;
                    a = b;
                    fa = fb;
                    b = lo + inv_phi * (hi - lo);
                    fb = dual(b);
                }
                if hi - lo <= f64::EPSILON * hi {
                    break;
                }
            }
            let mid = 0.5 * (lo + hi);
            Ok([dual(lo), dual(hi), dual(mid)].into_iter().fold(f64::INFINITY, f64::min))
        }
    }
}

/// Evaluates φ and its subgradients with reusable scratch space.
#[derive(Debug, Clone)]
pub struct PhiEvaluator<'a> {
    p: &'a SparseStochasticMatrix,
    spec: &'a UncertaintySpec,
    r: Vec<f64>,
    tmp: Vec<f64>,
}

impl<'a> PhiEvaluator<'a> {
    pub fn new(p: &'a SparseStochasticMatrix, spec: &'a UncertaintySpec) -> Result<Self> {
        check_dim(p.n(), spec.n())?;
        let n = p.n();
        Ok(Self { p, spec, r: vec![0.0; n], tmp: vec![0.0; n] })
    }

    fn fill_residual(&mut self, x: &[f64]) {
        self.p.apply_into(x, &mut self.r);
        self.r.iter_mut().zip(x).for_each(|(a, b)| *a -= b);
    }

    /// φ at `x`; `x` is trusted to have the right length.
    pub fn value(&mut self, x: &[f64]) -> ObjectiveValue {
        self.fill_residual(x);
        let (residual_term, norm) = match self.spec.pair {
            NormPair::L1G1 => (l1(&self.r), g1_with_dual(x, &self.spec.weights).0),
            NormPair::L2G2 => (l2(&self.r), g2_with_dual(x, &self.spec.weights).0),
            NormPair::L2L2 => (l2(&self.r), l2(x)),
        };
        let penalty_term = self.spec.epsilon * norm;
        ObjectiveValue { residual_term, penalty_term, total: residual_term + penalty_term }
    }

    /// One subgradient of φ at `x`, written into `out`.
    pub fn subgradient(&mut self, x: &[f64], out: &mut [f64]) {
        self.fill_residual(x);
        let eps = self.spec.epsilon;
        let penalty_dual = match self.spec.pair {
            NormPair::L1G1 => {
                self.r.iter_mut().for_each(|v| *v = sign(*v));
                g1_with_dual(x, &self.spec.weights).1
            }
            NormPair::L2G2 | NormPair::L2L2 => {
                let norm = l2(&self.r);
                if norm > 0.0 {
                    self.r.iter_mut().for_each(|v| *v /= norm);
                } else {
                    self.r.fill(0.0);
                }
                if self.spec.pair == NormPair::L2G2 {
                    g2_with_dual(x, &self.spec.weights).1
                } else {
                    let nx = l2(x);
                    x.iter().map(|v| if nx > 0.0 { v / nx } else { 0.0 }).collect()
                }
            }
        };
        // (P − I)ᵀ s
        self.p.apply_transpose_into(&self.r, &mut self.tmp);
        for j in 0..out.len() {
            out[j] = self.tmp[j] - self.r[j] + eps * penalty_dual[j];
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn phi(p: &SparseStochasticMatrix, x: &ScoreVector, spec: &UncertaintySpec) -> Result<ObjectiveValue> {
    check_dim(p.n(), x.len())?;
    Ok(PhiEvaluator::new(p, spec)?.value(x.as_slice()))
}

pub fn subgradient_phi(
    p: &SparseStochasticMatrix,
    x: &ScoreVector,
    spec: &UncertaintySpec,
) -> Result<Vec<f64>> {
    check_dim(p.n(), x.len())?;
    let mut out = vec![0.0; p.n()];
    PhiEvaluator::new(p, spec)?.subgradient(x.as_slice(), &mut out);
    Ok(out)
}
