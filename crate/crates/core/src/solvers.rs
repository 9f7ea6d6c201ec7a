//! Score-vector solvers.
//!
//! * [`pagerank`]: fixed point of `x = αPx + (1 − α)e`.
//! * [`averaged_power`] / [`dominant_eigenvector`]: Cesàro averages of the
//!   power sequence started at `e`, which converge even for cyclic `P`.
//! * [`algorithm1`]: the regularized power method
//!   `x_{k+1} = (1 − 1/(k+2)) P x_k + e/(k+2)`, `x_0 = e`, stopped at the
//!   first increase of φ.
//! * [`mirror_descent_minimize`]: first-order minimizer of φ over the
//!   simplex.
//! * [`grid_oracle_minimize`]: exhaustive lattice search for tiny `n`.

use std::str::FromStr;

use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::matrix::{l1_distance, ScoreVector, SparseStochasticMatrix};
use crate::norms::{ObjectiveValue, PhiEvaluator, UncertaintySpec};

/// The regularized power method stops only when φ rises by more than this.
pub const ALGORITHM1_STALL_TOL: f64 = 1e-12;
pub const ALGORITHM1_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    PhiIncrease,
    MaxIter,
    Tolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentMethod {
    /// Accelerated projected (Euclidean mirror map) descent with
    /// backtracking and function-value restarts.
    #[default]
    Accelerated,
    /// Multiplicative-weights updates with steps `γ₀/√k` normalized by
    /// `‖g_k‖_∞`, returning the best iterate.
    Entropic,
}

impl FromStr for DescentMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accelerated" => Ok(Self::Accelerated),
            "entropic" => Ok(Self::Entropic),
            other => Err(Error::InvalidParameter(format!("unknown descent method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    /// PageRank damping factor.
    pub alpha: f64,
    /// PageRank: ℓ1 fixed-point tolerance. Descent: relative decrease of φ
    /// over a window of iterations below which the run stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial step scale of the entropic method.
    pub gamma0: f64,
    pub method: DescentMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.85,
            tol: 1e-12,
            max_iter: 20_000,
            gamma0: 1.0,
            method: DescentMethod::Accelerated,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma0 must be positive, got {}", self.gamma0)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub scores: ScoreVector,
    /// `(k, φ(x_k))` for the φ-driven solvers. PageRank records the ℓ1
    /// change between successive iterates instead.
    pub phi_history: Vec<(usize, f64)>,
    pub iterations_used: usize,
    pub stop_reason: StopReason,
    /// φ at the returned scores, for solvers that were given a spec.
    pub objective: Option<ObjectiveValue>,
}

pub fn pagerank(
    p: &SparseStochasticMatrix,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    SolverConfig { alpha, tol, max_iter, ..Default::default() }.validate()?;
    let n = p.n();
    let teleport = (1.0 - alpha) / n as f64;
    let mut x = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut history = Vec::new();
    let mut stop_reason = StopReason::MaxIter;
    let mut iterations = 0;
    for k in 1..=max_iter {
        p.apply_into(&x, &mut next);
        next.iter_mut().for_each(|v| *v = alpha * *v + teleport);
        let delta = l1_distance(&x, &next);
        std::mem::swap(&mut x, &mut next);
        history.push((k, delta));
        iterations = k;
        if delta <= tol {
            stop_reason = StopReason::Tolerance;
            break;
        }
    }
    Ok(SolveReport {
        scores: ScoreVector::from_simplex_unchecked(x),
        phi_history: history,
        iterations_used: iterations,
        stop_reason,
        objective: None,
    })
}

/// Running Cesàro average `x_K = (e + Pe + … + P^{K−1}e) / K`.
#[derive(Debug, Clone)]
pub struct CesaroAverager<'a> {
    p: &'a SparseStochasticMatrix,
    start: Vec<f64>,
    power: Vec<f64>,
    scratch: Vec<f64>,
    sum: Vec<f64>,
    terms: usize,
}

impl<'a> CesaroAverager<'a> {
    /// Starts at `K = 1` with the average equal to `start`.
    pub fn new(p: &'a SparseStochasticMatrix, start: &ScoreVector) -> Result<Self> {
        check_dim(p.n(), start.len())?;
        Ok(Self {
            p,
            start: start.as_slice().to_vec(),
            power: start.as_slice().to_vec(),
            scratch: vec![0.0; p.n()],
            sum: start.as_slice().to_vec(),
            terms: 1,
        })
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    /// Adds the next power `P^K x_1` to the running sum.
    pub fn advance(&mut self) {
        self.p.apply_into(&self.power, &mut self.scratch);
        std::mem::swap(&mut self.power, &mut self.scratch);
        // mass draining out of transient nodes would otherwise end up in
        // subnormals, which are two orders of magnitude slower
        for v in &mut self.power {
            if v.abs() < f64::MIN_POSITIVE {
                *v = 0.0;
            }
        }
        self.sum.iter_mut().zip(&self.power).for_each(|(s, v)| *s += v);
        self.terms += 1;
    }

    pub fn average(&self) -> Vec<f64> {
        let k = self.terms as f64;
        self.sum.iter().map(|s| s / k).collect()
    }

    /// `‖P x̄ − x̄‖₁` of the current average, which telescopes to
    /// `‖P^K x_1 − x_1‖₁ / K`. Costs one product.
    pub fn residual_l1(&mut self) -> f64 {
        self.p.apply_into(&self.power, &mut self.scratch);
        crate::matrix::l1_distance(&self.scratch, &self.start) / self.terms as f64
    }
}

pub fn averaged_power(p: &SparseStochasticMatrix, terms: usize) -> Result<ScoreVector> {
    if terms == 0 {
        return Err(Error::InvalidParameter("averaged power needs at least one term".into()));
    }
    let mut avg = CesaroAverager::new(p, &ScoreVector::uniform(p.n()))?;
    while avg.terms() < terms {
        avg.advance();
    }
    Ok(ScoreVector::from_simplex_unchecked(avg.average()))
}

/// A simplex vector with `‖Px − x‖₁ ≤ tol`: the Cesàro average, stopped
/// once its exact residual is at most `tol` and after at most `⌈2/tol⌉`
/// terms. Works for cyclic `P`, where plain power iteration oscillates.
pub fn dominant_eigenvector(p: &SparseStochasticMatrix, tol: f64) -> Result<ScoreVector> {
    Ok(averaged_power_to_tol(p, tol)?.scores)
}

/// [`dominant_eigenvector`] with the number of averaged terms reported in
/// `iterations_used`.
pub fn averaged_power_to_tol(p: &SparseStochasticMatrix, tol: f64) -> Result<SolveReport> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let cap = (2.0 / tol).ceil() as usize;
    let mut avg = CesaroAverager::new(p, &ScoreVector::uniform(p.n()))?;
    while avg.terms() < cap {
        if avg.terms() % RESIDUAL_CHECK_EVERY == 0 && avg.residual_l1() <= tol {
            break;
        }
        avg.advance();
    }
    Ok(SolveReport {
        scores: ScoreVector::from_simplex_unchecked(avg.average()),
        phi_history: Vec::new(),
        iterations_used: avg.terms(),
        stop_reason: StopReason::Tolerance,
        objective: None,
    })
}

/// Terms between exact residual checks in [`dominant_eigenvector`].
const RESIDUAL_CHECK_EVERY: usize = 16;

/// The regularized power method: PageRank with damping `1 − 1/(k+2)` at
/// step `k`, started from `x_0 = e`, stopped at the first step where φ
/// rises. Iterates are labelled from 0, so a run reporting `φ_4 > φ_3`
/// returns `x_3` after 4 iterations.
pub fn algorithm1(
    p: &SparseStochasticMatrix,
    spec: &UncertaintySpec,
    max_iter: usize,
) -> Result<SolveReport> {
    if max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
    }
    let n = p.n();
    let mut eval = PhiEvaluator::new(p, spec)?;
    let e = 1.0 / n as f64;
    let mut x = vec![e; n];
    let mut next = vec![0.0; n];
    let mut current = eval.value(&x);
    let mut history = vec![(0, current.total)];
    let mut stop_reason = StopReason::MaxIter;
    let mut iterations = 0;
    for k in 0..max_iter {
        let w = 1.0 / (k + 2) as f64;
        p.apply_into(&x, &mut next);
        next.iter_mut().for_each(|v| *v = (1.0 - w) * *v + w * e);
        let candidate = eval.value(&next);
        history.push((k + 1, candidate.total));
        iterations = k + 1;
        if candidate.total > current.total + ALGORITHM1_STALL_TOL {
            stop_reason = StopReason::PhiIncrease;
            break;
        }
        std::mem::swap(&mut x, &mut next);
        current = candidate;
    }
    Ok(SolveReport {
        scores: ScoreVector::from_simplex_unchecked(x),
        phi_history: history,
        iterations_used: iterations,
        stop_reason,
        objective: Some(current),
    })
}

/// Euclidean projection onto the probability simplex by sorting.
pub fn project_onto_simplex(v: &[f64], out: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - theta).max(0.0);
    }
    // absorb rounding so the result sums to 1 exactly enough for ScoreVector
    let s: f64 = out.iter().sum();
    if s > 0.0 && (s - 1.0).abs() > 1e-15 {
        out.iter_mut().for_each(|o| *o /= s);
    }
}

pub fn mirror_descent_minimize(
    p: &SparseStochasticMatrix,
    spec: &UncertaintySpec,
    config: &SolverConfig,
) -> Result<SolveReport> {
    mirror_descent_from(p, spec, config, &ScoreVector::uniform(p.n()))
}

/// Minimizes φ over the simplex starting from `start`.
pub fn mirror_descent_from(
    p: &SparseStochasticMatrix,
    spec: &UncertaintySpec,
    config: &SolverConfig,
    start: &ScoreVector,
) -> Result<SolveReport> {
    config.validate()?;
    check_dim(p.n(), start.len())?;
    let eval = PhiEvaluator::new(p, spec)?;
    match config.method {
        DescentMethod::Accelerated => accelerated(eval, config, start),
        DescentMethod::Entropic => entropic(eval, config, start),
    }
}

const STALL_WINDOW: usize = 100;

fn accelerated(
    mut eval: PhiEvaluator<'_>,
    config: &SolverConfig,
    start: &ScoreVector,
) -> Result<SolveReport> {
    let n = start.len();
    let mut x = start.as_slice().to_vec();
    let mut y = x.clone();
    let mut g = vec![0.0; n];
    let mut step = vec![0.0; n];
    let mut cand = vec![0.0; n];
    let mut fx = eval.value(&x);
    let mut history = vec![(0, fx.total)];
    let mut lipschitz = 1.0f64;
    let mut momentum = 1.0f64;
    let mut stop_reason = StopReason::MaxIter;
    let mut iterations = 0;

    'outer: for k in 1..=config.max_iter {
        iterations = k;
        eval.subgradient(&y, &mut g);
        let fy = eval.value(&y).total;
        // backtrack until the quadratic model majorizes φ at the candidate
        let f_cand = loop {
            for i in 0..n {
                step[i] = y[i] - g[i] / lipschitz;
            }
            project_onto_simplex(&step, &mut cand);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for i in 0..n {
                let d = cand[i] - y[i];
                lin += g[i] * d;
                sq += d * d;
            }
            let f = eval.value(&cand);
            if f.total <= fy + lin + 0.5 * lipschitz * sq {
                break f;
            }
            lipschitz *= 2.0;
            if lipschitz > 1e30 {
                // no descent left at machine precision
                stop_reason = StopReason::Tolerance;
                break 'outer;
            }
        };

        if f_cand.total > fx.total {
            // restart momentum from the last accepted point
            y.copy_from_slice(&x);
            momentum = 1.0;
            history.push((k, fx.total));
        } else {
            let next_momentum = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
            let beta = (momentum - 1.0) / next_momentum;
            for i in 0..n {
                y[i] = cand[i] + beta * (cand[i] - x[i]);
            }
            x.copy_from_slice(&cand);
            fx = f_cand;
            momentum = next_momentum;
            lipschitz *= 0.9;
            history.push((k, fx.total));
        }

        if k >= STALL_WINDOW {
            let old = history[k - STALL_WINDOW].1;
            if old - fx.total <= config.tol * (1.0 + fx.total.abs()) {
                stop_reason = StopReason::Tolerance;
                break;
            }
        }
    }

    Ok(SolveReport {
        scores: ScoreVector::from_simplex_unchecked(x),
        phi_history: history,
        iterations_used: iterations,
        stop_reason,
        objective: Some(fx),
    })
}

fn entropic(
    mut eval: PhiEvaluator<'_>,
    config: &SolverConfig,
    start: &ScoreVector,
) -> Result<SolveReport> {
    let n = start.len();
    // keep every coordinate strictly positive so the log-domain update works
    let mut x: Vec<f64> = start.as_slice().iter().map(|v| v.max(1e-300)).collect();
    let s: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= s);

    let mut g = vec![0.0; n];
    let mut best = x.clone();
    let mut best_val = eval.value(&x);
    let mut history = vec![(0, best_val.total)];
    let mut stop_reason = StopReason::MaxIter;
    let mut iterations = 0;
    for k in 1..=config.max_iter {
        iterations = k;
        eval.subgradient(&x, &mut g);
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            stop_reason = StopReason::Tolerance;
            break;
        }
        let gamma = config.gamma0 / (k as f64).sqrt() / scale;
        let logs: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi.ln() - gamma * gi).collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (xi, l) in x.iter_mut().zip(&logs) {
            *xi = (l - top).exp();
            sum += *xi;
        }
        x.iter_mut().for_each(|v| *v /= sum);
        let f = eval.value(&x);
        history.push((k, f.total));
        if f.total < best_val.total {
            best_val = f;
            best.copy_from_slice(&x);
        }
    }
    Ok(SolveReport {
        scores: ScoreVector::from_simplex_unchecked(best),
        phi_history: history,
        iterations_used: iterations,
        stop_reason,
        objective: Some(best_val),
    })
}

/// Largest dimension accepted by [`grid_oracle_minimize`].
pub const GRID_ORACLE_MAX_N: usize = 4;

/// Exhaustive search of φ over `{x ∈ Σ : x_i ∈ {0, 1/r, …, 1}}` with
/// `r = resolution`. Ties keep the first point in lexicographic order.
pub fn grid_oracle_minimize(
    p: &SparseStochasticMatrix,
    spec: &UncertaintySpec,
    resolution: usize,
) -> Result<ScoreVector> {
    let n = p.n();
    if n > GRID_ORACLE_MAX_N {
        return Err(Error::InvalidParameter(format!(
            "grid oracle supports n <= {GRID_ORACLE_MAX_N}, got {n}"
        )));
    }
    if resolution == 0 {
        return Err(Error::InvalidParameter("resolution must be at least 1".into()));
    }
    let mut eval = PhiEvaluator::new(p, spec)?;
    let mut counts = vec![0usize; n];
    let mut point = vec![0.0; n];
    let mut best = (f64::INFINITY, vec![0.0; n]);

    fn visit(
        pos: usize,
        left: usize,
        r: usize,
        counts: &mut [usize],
        point: &mut [f64],
        eval: &mut PhiEvaluator<'_>,
        best: &mut (f64, Vec<f64>),
    ) {
        let n = counts.len();
        if pos == n - 1 {
            counts[pos] = left;
            for (x, &c) in point.iter_mut().zip(counts.iter()) {
                *x = c as f64 / r as f64;
            }
            let f = eval.value(point).total;
            if f < best.0 {
                best.0 = f;
                best.1.copy_from_slice(point);
            }
            return;
        }
        for c in 0..=left {
            counts[pos] = c;
            visit(pos + 1, left - c, r, counts, point, eval, best);
        }
    }

    visit(0, resolution, resolution, &mut counts, &mut point, &mut eval, &mut best);
    Ok(ScoreVector::from_simplex_unchecked(best.1))
}

/// Heuristic budget `ε ≈ √(q n) / m` when out-degrees are known to ±1 for
/// a fraction `q` of `n` pages with average out-degree `m`.
pub fn suggest_epsilon(n: usize, q: f64, m: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!("q must lie in (0, 1], got {q}")));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(format!("m must be positive, got {m}")));
    }
    Ok((q * n as f64).sqrt() / m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edgelist::EdgeList;
    use crate::matrix::{residual, seven_node_example, DanglingPolicy, Norm};
    use crate::norms::{phi, NormPair};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn swap() -> SparseStochasticMatrix {
        SparseStochasticMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn l2l2(eps: f64, n: usize) -> UncertaintySpec {
        UncertaintySpec::uniform(eps, n, NormPair::L2L2).unwrap()
    }

    pub(crate) fn random_positive(rng: &mut ChaCha8Rng, n: usize) -> SparseStochasticMatrix {
        let mut rows = vec![vec![0.0; n]; n];
        for j in 0..n {
            let col: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0) + 1e-3).collect();
            let s: f64 = col.iter().sum();
            for i in 0..n {
                rows[i][j] = col[i] / s;
            }
        }
        SparseStochasticMatrix::from_dense(&rows).unwrap()
    }

    /// Solves `(I − αP) x = (1 − α) e` by Gaussian elimination.
    fn pagerank_linear_solve(p: &SparseStochasticMatrix, alpha: f64) -> Vec<f64> {
        let n = p.n();
        let d = p.to_dense();
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row: Vec<f64> = (0..n)
                    .map(|j| if i == j { 1.0 } else { 0.0 } - alpha * d.get(i, j))
                    .collect();
                row.push((1.0 - alpha) / n as f64);
                row
            })
            .collect();
        gauss(&mut a)
    }

    fn gauss(a: &mut [Vec<f64>]) -> Vec<f64> {
        let n = a.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            for r in 0..n {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        (0..n).map(|i| a[i][n] / a[i][i]).collect()
    }

    /// Stationary vector of a regular P: replace one balance equation by
    /// the normalization.
    fn stationary_by_solve(p: &SparseStochasticMatrix) -> Vec<f64> {
        let n = p.n();
        let d = p.to_dense();
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row: Vec<f64> = (0..n)
                    .map(|j| d.get(i, j) - if i == j { 1.0 } else { 0.0 })
                    .collect();
                row.push(0.0);
                row
            })
            .collect();
        a[n - 1] = vec![1.0; n + 1];
        gauss(&mut a)
    }

    #[test]
    fn pagerank_uniform_matrix_gives_e() {
        let u = SparseStochasticMatrix::from_dense(&vec![vec![1.0 / 3.0; 3]; 3]).unwrap();
        for alpha in [0.1, 0.5, 0.85] {
            let r = pagerank(&u, alpha, 1e-14, 100).unwrap();
            assert!(r.scores.max_abs_diff(&[1.0 / 3.0; 3]) < 1e-15);
            assert_eq!(r.stop_reason, StopReason::Tolerance);
        }
    }

    #[test]
    fn pagerank_matches_linear_solve_on_seven_nodes() {
        let p = seven_node_example();
        let r = pagerank(&p, 0.85, 1e-13, 1000).unwrap();
        let oracle = pagerank_linear_solve(&p, 0.85);
        assert!(r.scores.max_abs_diff(&oracle) < 1e-11);
        let mut fixed = p.apply(r.scores.as_slice()).unwrap();
        fixed.iter_mut().for_each(|v| *v = 0.85 * *v + 0.15 / 7.0);
        assert!(l1_distance(&fixed, r.scores.as_slice()) <= 1e-10);
    }

    #[test]
    fn pagerank_steps_contract_by_alpha() {
        let p = seven_node_example();
        let r = pagerank(&p, 0.7, 1e-14, 500).unwrap();
        for w in r.phi_history.windows(2) {
            assert!(w[1].1 <= 0.7 * w[0].1 + 1e-16);
        }
    }

    #[test]
    fn pagerank_swap_and_errors() {
        let r = pagerank(&swap(), 0.5, 1e-12, 100).unwrap();
        assert!(r.scores.max_abs_diff(&[0.5, 0.5]) < 1e-15);
        assert!(pagerank(&swap(), 1.0, 1e-12, 10).is_err());
        assert!(pagerank(&swap(), 0.5, 0.0, 10).is_err());
        let r = pagerank(&seven_node_example(), 0.99, 1e-15, 3).unwrap();
        assert_eq!(r.stop_reason, StopReason::MaxIter);
        assert_eq!(r.iterations_used, 3);
    }

    #[test]
    fn averaged_power_examples() {
        let p = seven_node_example();
        assert_eq!(averaged_power(&p, 1).unwrap(), ScoreVector::uniform(7));
        for k in [1, 2, 7, 50] {
            let x = averaged_power(&swap(), k).unwrap();
            assert_eq!(x.as_slice(), &[0.5, 0.5]);
            assert_eq!(residual(&swap(), x.as_slice(), Norm::L1).unwrap(), 0.0);
        }
        assert!(averaged_power(&p, 0).is_err());

        let x = averaged_power(&p, 10_000).unwrap();
        assert!(residual(&p, x.as_slice(), Norm::L1).unwrap() <= 2e-4);
        let transient: f64 = x.as_slice()[..5].iter().sum();
        assert!(transient < 1e-3, "{transient}");
    }

    #[test]
    fn cesaro_matches_the_recursive_form() {
        // x_{k+1} = (1 − 1/(k+1)) P x_k + e/(k+1) reproduces the average
        let p = seven_node_example();
        let mut avg = CesaroAverager::new(&p, &ScoreVector::uniform(7)).unwrap();
        let mut x = vec![1.0 / 7.0; 7];
        for k in 1..200usize {
            let w = 1.0 / (k + 1) as f64;
            let px = p.apply(&x).unwrap();
            x = px.iter().map(|v| (1.0 - w) * v + w / 7.0).collect();
            avg.advance();
            let a = avg.average();
            assert!(l1_distance(&a, &x) < 1e-13);
        }
    }

    #[test]
    fn dominant_eigenvector_examples() {
        let p = seven_node_example();
        let x = dominant_eigenvector(&p, 1e-6).unwrap();
        assert!(x.max_abs_diff(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5]) < 1e-5);
        assert!(residual(&p, x.as_slice(), Norm::L1).unwrap() <= 1e-6);

        let id = SparseStochasticMatrix::identity(4).unwrap();
        assert_eq!(dominant_eigenvector(&id, 1e-3).unwrap(), ScoreVector::uniform(4));
        assert!(dominant_eigenvector(&id, 0.0).is_err());
    }

    #[test]
    fn algorithm1_on_seven_nodes_stops_after_four_iterations() {
        let p = seven_node_example();
        let r = algorithm1(&p, &l2l2(1.0, 7), ALGORITHM1_MAX_ITER).unwrap();
        assert_eq!(r.stop_reason, StopReason::PhiIncrease);
        assert_eq!(r.iterations_used, 4);
        let h = &r.phi_history;
        assert_eq!(h.len(), 5);
        assert_eq!(h[4].0, 4);
        assert!(h[4].1 > h[3].1);
        assert!(h[0].1 > h[1].1 && h[1].1 > h[2].1 && h[2].1 > h[3].1);
        // returned iterate is x_3, the 4-term Cesàro average
        assert_eq!(r.objective.unwrap().total, h[3].1);
        let x3 = averaged_power(&p, 4).unwrap();
        assert!(r.scores.max_abs_diff(x3.as_slice()) < 1e-15);
        assert!((h[0].1 - 0.5713939588338929).abs() < 1e-14);
    }

    #[test]
    fn algorithm1_on_identity_runs_to_max_iter() {
        let id = SparseStochasticMatrix::identity(3).unwrap();
        let r = algorithm1(&id, &l2l2(1.0, 3), 50).unwrap();
        assert_eq!(r.stop_reason, StopReason::MaxIter);
        assert_eq!(r.iterations_used, 50);
        let first = r.phi_history[0].1;
        assert!(r.phi_history.iter().all(|&(_, v)| (v - first).abs() < 1e-15));
        assert!(r.scores.max_abs_diff(&[1.0 / 3.0; 3]) < 1e-15);
        assert!(algorithm1(&id, &l2l2(1.0, 3), 0).is_err());
    }

    #[test]
    fn algorithm1_returned_iterate_is_the_running_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let p = random_positive(&mut rng, 6);
            let eps = rng.gen_range(0.01..3.0);
            let r = algorithm1(&p, &l2l2(eps, 6), 10_000).unwrap();
            let returned = r.objective.unwrap().total;
            let upto = if r.stop_reason == StopReason::PhiIncrease {
                r.phi_history.len() - 1
            } else {
                r.phi_history.len()
            };
            for &(_, v) in &r.phi_history[..upto] {
                assert!(returned <= v + 1e-9);
            }
            assert!(r.scores.as_slice().iter().all(|v| *v >= 0.0));
            assert!((r.scores.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn simplex_projection() {
        let mut out = [0.0; 3];
        project_onto_simplex(&[0.2, 0.3, 0.5], &mut out);
        assert_eq!(out, [0.2, 0.3, 0.5]);
        project_onto_simplex(&[2.0, 0.0, 0.0], &mut out);
        assert_eq!(out, [1.0, 0.0, 0.0]);
        project_onto_simplex(&[0.5, 0.5, -3.0], &mut out);
        assert_eq!(out, [0.5, 0.5, 0.0]);
        project_onto_simplex(&[0.0, 0.0, 0.0], &mut out);
        assert!(out.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn descent_on_swap_matrix_finds_center() {
        // the entropic schedule only settles to within its current step size
        for (method, tol) in [(DescentMethod::Accelerated, 1e-9), (DescentMethod::Entropic, 1e-2)] {
            let cfg = SolverConfig { method, max_iter: 5000, ..Default::default() };
            let start = ScoreVector::new(vec![0.9, 0.1]).unwrap();
            let r = mirror_descent_from(&swap(), &l2l2(1.0, 2), &cfg, &start).unwrap();
            assert!(r.scores.max_abs_diff(&[0.5, 0.5]) < tol, "{method:?}: {:?}", r.scores);
            assert!((r.objective.unwrap().total - 0.5f64.sqrt()).abs() < tol);
        }
    }

    #[test]
    fn descent_never_worse_than_start_or_algorithm1() {
        let p = seven_node_example();
        let spec = l2l2(1.0, 7);
        let exact = mirror_descent_minimize(&p, &spec, &SolverConfig::default()).unwrap();
        let a1 = algorithm1(&p, &spec, ALGORITHM1_MAX_ITER).unwrap();
        let at_e = phi(&p, &ScoreVector::uniform(7), &spec).unwrap().total;
        let fx = exact.objective.unwrap().total;
        assert!(fx <= a1.objective.unwrap().total + 1e-9);
        assert!(a1.objective.unwrap().total <= at_e);
        // the recorded history never increases
        for w in exact.phi_history.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }

        let ent = mirror_descent_minimize(
            &p,
            &spec,
            &SolverConfig { method: DescentMethod::Entropic, max_iter: 3000, ..Default::default() },
        )
        .unwrap();
        assert!(ent.objective.unwrap().total <= at_e);
        assert!(ent.objective.unwrap().total >= fx - 1e-12);
    }

    #[test]
    fn descent_small_epsilon_recovers_dominant_eigenvector() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..3 {
            let p = random_positive(&mut rng, 3);
            let r = mirror_descent_minimize(&p, &l2l2(1e-6, 3), &SolverConfig::default()).unwrap();
            let oracle = stationary_by_solve(&p);
            assert!(r.scores.max_abs_diff(&oracle) < 1e-4, "{:?} vs {oracle:?}", r.scores);
        }
    }

    #[test]
    fn descent_is_start_independent_for_l2l2() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for eps in [0.05, 1.0, 10.0] {
            let p = random_positive(&mut rng, 5);
            let spec = l2l2(eps, 5);
            let cfg = SolverConfig::default();
            let a = mirror_descent_minimize(&p, &spec, &cfg).unwrap();
            let b = mirror_descent_from(&p, &spec, &cfg, &ScoreVector::vertex(5, 2)).unwrap();
            assert!(a.scores.max_abs_diff(b.scores.as_slice()) < 1e-6, "eps {eps}");
        }
    }

    #[test]
    fn grid_oracle_examples() {
        let x = grid_oracle_minimize(&swap(), &l2l2(1.0, 2), 1000).unwrap();
        assert!(x.max_abs_diff(&[0.5, 0.5]) <= 1e-3);

        let id = SparseStochasticMatrix::identity(3).unwrap();
        let x = grid_oracle_minimize(&id, &l2l2(1.0, 3), 300).unwrap();
        assert!(x.max_abs_diff(&[1.0 / 3.0; 3]) <= 1.0 / 300.0);

        let big = SparseStochasticMatrix::identity(5).unwrap();
        assert!(grid_oracle_minimize(&big, &l2l2(1.0, 5), 10).is_err());
    }

    #[test]
    fn large_epsilon_pulls_towards_e() {
        // the distance to e shrinks roughly like 1/ε
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = random_positive(&mut rng, 3);
        let e = [1.0 / 3.0; 3];
        let d = |eps: f64| {
            mirror_descent_minimize(&p, &l2l2(eps, 3), &SolverConfig::default())
                .unwrap()
                .scores
                .max_abs_diff(&e)
        };
        let (d10, d100, d1000) = (d(10.0), d(100.0), d(1000.0));
        assert!(d100 < d10 && d1000 < d100);
        assert!(d1000 < 1e-3, "{d10} {d100} {d1000}");
        let grid = grid_oracle_minimize(&p, &l2l2(100.0, 3), 1000).unwrap();
        assert!(grid.max_abs_diff(&e) <= d100 + 1e-3);
    }

    #[test]
    fn descent_on_dangling_graph() {
        let el = EdgeList::new(4, vec![(0, 1), (1, 2), (2, 0), (2, 1)]).unwrap();
        let p = SparseStochasticMatrix::from_edge_list(&el, DanglingPolicy::UniformAll).unwrap();
        let spec = l2l2(0.5, 4);
        let r = mirror_descent_minimize(&p, &spec, &SolverConfig::default()).unwrap();
        let grid = grid_oracle_minimize(&p, &spec, 100).unwrap();
        let fg = phi(&p, &grid, &spec).unwrap().total;
        assert!(r.objective.unwrap().total <= fg + 1e-12);
    }

    #[test]
    fn suggest_epsilon_examples() {
        assert!((suggest_epsilon(1_000_000, 0.5, 20.0).unwrap() - 35.355_339_059_327_38).abs() < 1e-12);
        assert_eq!(suggest_epsilon(1, 1.0, 1.0).unwrap(), 1.0);
        assert!((suggest_epsilon(40_000, 0.5, 20.0).unwrap() - 7.0710678118654755).abs() < 1e-12);
        assert!(suggest_epsilon(0, 0.5, 1.0).is_err());
        assert!(suggest_epsilon(10, 0.0, 1.0).is_err());
        assert!(suggest_epsilon(10, 1.5, 1.0).is_err());
        assert!(suggest_epsilon(10, 0.5, 0.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig { max_iter: 0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { alpha: 0.0, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { gamma0: -1.0, ..Default::default() }.validate().is_err());
    }
}
