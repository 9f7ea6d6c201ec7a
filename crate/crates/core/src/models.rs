//! Synthetic `n × n` grid graphs with closed-form scores.
//!
//! Node `(i, j)`, `1 ≤ i, j ≤ n`, has flat id `(i − 1) n + (j − 1)`.
//! Away from the last row and column a node links to `(i + 1, j)` and
//! `(i, j + 1)`; a last-row node `(n, j)` links only to `(n, j + 1)` and a
//! last-column node `(i, n)` only to `(i + 1, n)`. The corner `(n, n)`
//! jumps uniformly to every node, itself included (Model 1), or only back
//! to `(1, 1)` (Model 2, which makes `P` cyclic with period `2n − 1`).

use serde::Serialize;

use crate::edgelist::EdgeList;
use crate::error::{Error, Result};
use crate::matrix::{DanglingPolicy, ScoreVector, SparseStochasticMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridModel {
    Model1,
    Model2,
}

impl std::str::FromStr for GridModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "model1" => Ok(Self::Model1),
            "model2" => Ok(Self::Model2),
            other => Err(Error::InvalidParameter(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridModelSpec {
    n: usize,
    variant: GridModel,
}

impl GridModelSpec {
    pub fn new(n: usize, variant: GridModel) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("grid side must be at least 2, got {n}")));
        }
        Ok(Self { n, variant })
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn variant(&self) -> GridModel {
        self.variant
    }

    /// `N = n²`.
    pub fn nodes(&self) -> usize {
        self.n * self.n
    }

    /// Flat id of the 1-based node `(i, j)`.
    pub fn node_id(&self, i: usize, j: usize) -> usize {
        debug_assert!((1..=self.n).contains(&i) && (1..=self.n).contains(&j));
        (i - 1) * self.n + (j - 1)
    }

    pub fn coords(&self, id: usize) -> (usize, usize) {
        (id / self.n + 1, id % self.n + 1)
    }

    pub fn edge_list(&self) -> EdgeList {
        let n = self.n;
        let mut edges = Vec::with_capacity(2 * n * n);
        let mut dangling = Vec::new();
        for i in 1..=n {
            for j in 1..=n {
                let s = self.node_id(i, j);
                match (i < n, j < n) {
                    (true, true) => {
                        edges.push((s, self.node_id(i + 1, j)));
                        edges.push((s, self.node_id(i, j + 1)));
                    }
                    (false, true) => edges.push((s, self.node_id(n, j + 1))),
                    (true, false) => edges.push((s, self.node_id(i + 1, n))),
                    (false, false) => match self.variant {
                        GridModel::Model1 => dangling.push(s),
                        GridModel::Model2 => edges.push((s, self.node_id(1, 1))),
                    },
                }
            }
        }
        EdgeList::with_dangling(self.nodes(), edges, dangling).expect("grid ids are in range")
    }

    pub fn generate(&self) -> SparseStochasticMatrix {
        SparseStochasticMatrix::from_edge_list(&self.edge_list(), DanglingPolicy::UniformAll)
            .expect("grid edge list is valid")
    }

    /// Scores of the diagonal nodes `(i, i)`.
    pub fn diagonal(&self, scores: &[f64]) -> Vec<f64> {
        (1..=self.n).map(|i| scores[self.node_id(i, i)]).collect()
    }

    /// Scores of the last row `(n, j)`.
    pub fn last_row(&self, scores: &[f64]) -> Vec<f64> {
        (1..=self.n).map(|j| scores[self.node_id(self.n, j)]).collect()
    }
}

pub fn generate(spec: &GridModelSpec) -> SparseStochasticMatrix {
    spec.generate()
}

const RESCALE_ABOVE: f64 = 1e200;

/// Solves the grid balance equations in a single sweep over `(i, j)`.
///
/// Node `(i, j)` receives `½` from `(i−1, j)` unless that sender sits in
/// the last column (then `1`), and `½` from `(i, j−1)` unless that sender
/// sits in the last row (then `1`). `source` is the constant inflow that
/// every node gets from the corner jump (Model 1) or that only `(1, 1)`
/// gets (Model 2); `damping` multiplies the total inflow.
///
/// Values are rescaled on the fly if they grow too large; only ratios are
/// meaningful.
fn sweep(n: usize, damping: f64, source_everywhere: bool) -> Vec<f64> {
    let mut x = vec![0.0; n * n];
    let mut unit = 1.0f64;
    let id = |i: usize, j: usize| (i - 1) * n + (j - 1);
    for i in 1..=n {
        let mut row_max = 0.0f64;
        for j in 1..=n {
            let mut inflow = 0.0;
            if i > 1 {
                inflow += x[id(i - 1, j)] * if j == n { 1.0 } else { 0.5 };
            }
            if j > 1 {
                inflow += x[id(i, j - 1)] * if i == n { 1.0 } else { 0.5 };
            }
            if source_everywhere || (i == 1 && j == 1) {
                inflow += unit;
            }
            let v = damping * inflow;
            x[id(i, j)] = v;
            row_max = row_max.max(v);
        }
        if row_max > RESCALE_ABOVE {
            x[..i * n].iter_mut().for_each(|v| *v /= row_max);
            unit /= row_max;
        }
    }
    x
}

/// Unnormalized Model 1 scores from the recurrences with damping `alpha`
/// (`alpha = 1` for the nominal matrix): `x_11 = alpha`, and every node
/// receives `alpha · (inflow + 1)`.
pub fn model1_unnormalized(n: usize, alpha: f64) -> Result<Vec<f64>> {
    GridModelSpec::new(n, GridModel::Model1)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    Ok(sweep(n, alpha, true))
}

/// Dominant eigenvector of the Model 1 matrix.
pub fn model1_exact_scores(n: usize) -> Result<ScoreVector> {
    ScoreVector::normalized(model1_unnormalized(n, 1.0)?)
}

/// PageRank vector of the Model 1 matrix with damping `alpha`.
pub fn model1_pagerank_scores(n: usize, alpha: f64) -> Result<ScoreVector> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    ScoreVector::normalized(model1_unnormalized(n, alpha)?)
}

/// Dominant eigenvector of the Model 2 matrix. The corner feeds `(1, 1)`
/// only, so there is no constant inflow anywhere else and `x_nn = x_11`.
pub fn model2_exact_scores(n: usize) -> Result<ScoreVector> {
    GridModelSpec::new(n, GridModel::Model2)?;
    ScoreVector::normalized(sweep(n, 1.0, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{residual, Norm};
    use crate::solvers::{dominant_eigenvector, pagerank};

    #[test]
    fn spec_rejects_small_grids() {
        assert!(GridModelSpec::new(1, GridModel::Model1).is_err());
        assert!(model1_exact_scores(1).is_err());
        assert!(model2_exact_scores(0).is_err());
        assert!(model1_pagerank_scores(3, 1.0).is_err());
    }

    #[test]
    fn node_ids_roundtrip() {
        let s = GridModelSpec::new(4, GridModel::Model1).unwrap();
        for id in 0..16 {
            let (i, j) = s.coords(id);
            assert_eq!(s.node_id(i, j), id);
        }
        assert_eq!(s.node_id(4, 4), 15);
    }

    #[test]
    fn generated_matrices_validate() {
        for n in [2, 3, 7, 20] {
            for v in [GridModel::Model1, GridModel::Model2] {
                let p = GridModelSpec::new(n, v).unwrap().generate();
                assert!(p.validate(1e-12).passed);
                assert_eq!(p.dangling_columns().count(), usize::from(v == GridModel::Model1));
            }
        }
    }

    #[test]
    fn model1_small_case() {
        let raw = model1_unnormalized(2, 1.0).unwrap();
        assert_eq!(raw, vec![1.0, 1.5, 1.5, 4.0]);
        assert_eq!(raw[3] / raw[0], 4.0);
        let x = model1_exact_scores(2).unwrap();
        assert_eq!(x.as_slice(), &[0.125, 0.1875, 0.1875, 0.5]);
        let p = GridModelSpec::new(2, GridModel::Model1).unwrap().generate();
        assert!(residual(&p, x.as_slice(), Norm::L1).unwrap() < 1e-15);
    }

    #[test]
    fn model1_corner_equals_node_count() {
        for n in [2, 5, 30] {
            let raw = model1_unnormalized(n, 1.0).unwrap();
            assert!((raw[n * n - 1] - (n * n) as f64).abs() < 1e-9 * (n * n) as f64);
        }
    }

    #[test]
    fn model1_exact_is_a_fixed_point() {
        for n in [3, 10, 50] {
            let p = GridModelSpec::new(n, GridModel::Model1).unwrap().generate();
            let x = model1_exact_scores(n).unwrap();
            assert!(residual(&p, x.as_slice(), Norm::L1).unwrap() <= 1e-10, "n = {n}");
        }
    }

    #[test]
    fn model1_scores_grow_towards_the_corner() {
        let n = 30;
        let s = GridModelSpec::new(n, GridModel::Model1).unwrap();
        let x = model1_exact_scores(n).unwrap();
        let diag = s.diagonal(x.as_slice());
        assert!(diag.windows(2).all(|w| w[0] <= w[1]));
        let last = s.last_row(x.as_slice());
        assert!(last.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn model1_pagerank_matches_solver() {
        for n in [2, 6] {
            let p = GridModelSpec::new(n, GridModel::Model1).unwrap().generate();
            let y = model1_pagerank_scores(n, 0.85).unwrap();
            let r = pagerank(&p, 0.85, 1e-15, 10_000).unwrap();
            assert!(y.max_abs_diff(r.scores.as_slice()) < 1e-8);
        }
    }

    #[test]
    fn model1_pagerank_approaches_exact_as_alpha_goes_to_one() {
        let a = model1_pagerank_scores(10, 1.0 - 1e-12).unwrap();
        let b = model1_exact_scores(10).unwrap();
        assert!(a.max_abs_diff(b.as_slice()) < 1e-6);
    }

    #[test]
    fn model1_pagerank_corner_balance() {
        // the constant inflow per node is α, which ties the corner to the
        // total: α·y_nn + (1 − α)·Σy = N·α; at α = 1 this is y_nn = N
        for alpha in [0.5, 0.85, 1.0] {
            let n = 7;
            let y = model1_unnormalized(n, alpha).unwrap();
            assert_eq!(y[0], alpha);
            let total: f64 = y.iter().sum();
            let big_n = (n * n) as f64;
            assert!((alpha * y[n * n - 1] + (1.0 - alpha) * total - big_n * alpha).abs() < 1e-10);
        }
    }

    #[test]
    fn model2_small_case() {
        let x = model2_exact_scores(2).unwrap();
        let want = [1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0];
        assert!(x.max_abs_diff(&want) < 1e-15);
        let p = GridModelSpec::new(2, GridModel::Model2).unwrap().generate();
        assert!(residual(&p, x.as_slice(), Norm::L1).unwrap() < 1e-15);
        let d = dominant_eigenvector(&p, 1e-6).unwrap();
        assert!(d.max_abs_diff(&want) < 1e-6);
    }

    #[test]
    fn model2_exact_is_a_fixed_point_and_matches_cesaro() {
        for n in [3, 8, 20] {
            let p = GridModelSpec::new(n, GridModel::Model2).unwrap().generate();
            let x = model2_exact_scores(n).unwrap();
            assert!(residual(&p, x.as_slice(), Norm::L1).unwrap() <= 1e-10);
            if n <= 8 {
                let d = dominant_eigenvector(&p, 1e-5).unwrap();
                assert!(x.max_abs_diff(d.as_slice()) < 1e-4);
            }
        }
    }

    #[test]
    fn model2_plain_power_iteration_has_period_2n_minus_1() {
        for n in [2, 3, 6] {
            let s = GridModelSpec::new(n, GridModel::Model2).unwrap();
            let p = s.generate();
            let mut x = vec![0.0; s.nodes()];
            x[0] = 1.0;
            let start = x.clone();
            for step in 1..=(2 * n - 1) {
                x = p.apply(&x).unwrap();
                let back = crate::matrix::l1_distance(&x, &start) < 1e-12;
                assert_eq!(back, step == 2 * n - 1, "n = {n}, step {step}");
            }
        }
    }

    #[test]
    fn edge_list_uses_dangling_directive() {
        let s = GridModelSpec::new(3, GridModel::Model1).unwrap();
        let el = s.edge_list();
        assert_eq!(el.declared_dangling(), &[8]);
        let mut buf = Vec::new();
        el.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n=9\n"));
        assert!(text.ends_with("dangling:8\n"));
        let parsed = EdgeList::parse(text.as_bytes()).unwrap();
        let p = SparseStochasticMatrix::from_edge_list(&parsed, DanglingPolicy::UniformAll).unwrap();
        assert_eq!(p, s.generate());
    }
}
