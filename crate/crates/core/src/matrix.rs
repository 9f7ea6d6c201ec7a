//! Column-stochastic matrices in compressed sparse column form.
//!
//! Column `j` of a link matrix holds `1/n_j` at every row that node `j`
//! links to. Columns of dangling nodes (no outgoing links) are repaired to
//! the uniform distribution over all `n` rows, the dangling node included.
//! Those columns are stored as a flag rather than `n` explicit entries.

use serde::Serialize;

use crate::edgelist::EdgeList;
use crate::error::{check_dim, Error, Result};

/// Column sums must match 1 to this tolerance at construction.
pub const COLUMN_SUM_TOL: f64 = 1e-12;
/// Simplex membership tolerance for score vectors.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DanglingPolicy {
    /// Replace an empty column with `1/n` in every row.
    #[default]
    UniformAll,
}

/// One column handed to [`SparseStochasticMatrix::from_columns`].
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Sparse(Vec<(usize, f64)>),
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => l1(v),
            Norm::L2 => l2(v),
        }
    }
}

pub(crate) fn l1(v: &[f64]) -> f64 {
    v.iter().map(|a| a.abs()).sum()
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub(crate) fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseStochasticMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    dangling: Vec<bool>,
}

impl SparseStochasticMatrix {
    pub fn from_edge_list(edges: &EdgeList, policy: DanglingPolicy) -> Result<Self> {
        let n = edges.n();
        let mut targets: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(s, d) in edges.edges() {
            targets[s].push(d);
        }
        let columns = targets
            .into_iter()
            .map(|mut t| {
                t.sort_unstable();
                t.dedup();
                if t.is_empty() {
                    match policy {
                        DanglingPolicy::UniformAll => Column::Uniform,
                    }
                } else {
                    let w = 1.0 / t.len() as f64;
                    Column::Sparse(t.into_iter().map(|i| (i, w)).collect())
                }
            })
            .collect();
        Self::from_columns(n, columns)
    }

    /// Builds a matrix column by column. Entries must be in `(0, 1]` and each
    /// sparse column must sum to 1 within [`COLUMN_SUM_TOL`]; repeated rows
    /// within a column are merged.
    pub fn from_columns(n: usize, columns: Vec<Column>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        check_dim(n, columns.len())?;
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        let mut dangling = vec![false; n];
        col_ptr.push(0);
        for (j, col) in columns.into_iter().enumerate() {
            match col {
                Column::Uniform => dangling[j] = true,
                Column::Sparse(mut entries) => {
                    if entries.is_empty() {
                        return Err(Error::InvalidInput(format!("column {j} is empty")));
                    }
                    entries.sort_by_key(|&(i, _)| i);
                    let start = row_idx.len();
                    for (i, v) in entries {
                        if i >= n {
                            return Err(Error::InvalidInput(format!(
                                "row index {i} outside [0, {n}) in column {j}"
                            )));
                        }
                        if !(v > 0.0 && v <= 1.0) {
                            return Err(Error::InvalidInput(format!(
                                "entry ({i}, {j}) = {v} is not in (0, 1]"
                            )));
                        }
                        if row_idx.len() > start && *row_idx.last().unwrap() == i {
                            *values.last_mut().unwrap() += v;
                        } else {
                            row_idx.push(i);
                            values.push(v);
                        }
                    }
                    let col = &mut values[start..];
                    let sum: f64 = col.iter().sum();
                    if (sum - 1.0).abs() > COLUMN_SUM_TOL {
                        return Err(Error::InvalidInput(format!(
                            "column {j} sums to {sum}, not 1"
                        )));
                    }
                    if (sum - 1.0).abs() > 1e-15 {
                        col.iter_mut().for_each(|v| *v /= sum);
                    }
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(Self { n, col_ptr, row_idx, values, dangling })
    }

    /// Builds from a dense row-major matrix. A column of zeros is rejected.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut columns = vec![Vec::new(); n];
        for (i, row) in rows.iter().enumerate() {
            check_dim(n, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                if v < 0.0 || v.is_nan() {
                    return Err(Error::InvalidInput(format!("entry ({i}, {j}) = {v}")));
                }
                if v > 0.0 {
                    columns[j].push((i, v));
                }
            }
        }
        Self::from_columns(n, columns.into_iter().map(Column::Sparse).collect())
    }

    /// Raw CSC parts, without any stochasticity checks. Only meant for
    /// exercising [`Self::validate`] on broken input; every other
    /// operation assumes the invariants hold.
    pub fn from_csc_unchecked(
        n: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
        dangling: Vec<bool>,
    ) -> Self {
        assert_eq!(col_ptr.len(), n + 1);
        assert_eq!(dangling.len(), n);
        assert_eq!(row_idx.len(), values.len());
        Self { n, col_ptr, row_idx, values, dangling }
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_columns(n, (0..n).map(|j| Column::Sparse(vec![(j, 1.0)])).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries, not counting implicit dangling columns.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn dangling_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.dangling.iter().enumerate().filter(|(_, &d)| d).map(|(j, _)| j)
    }

    pub fn is_dangling(&self, j: usize) -> bool {
        self.dangling[j]
    }

    /// Out-degree of every node, with dangling nodes counted as linking to
    /// all `n` nodes.
    pub fn out_degrees(&self) -> Vec<usize> {
        (0..self.n)
            .map(|j| {
                if self.dangling[j] {
                    self.n
                } else {
                    self.col_ptr[j + 1] - self.col_ptr[j]
                }
            })
            .collect()
    }

    /// Stored `(row, value)` pairs of column `j`; empty for dangling columns.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.dangling[j] {
            return 1.0 / self.n as f64;
        }
        self.column(j).find(|&(r, _)| r == i).map_or(0.0, |(_, v)| v)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n);
        for j in 0..self.n {
            if self.dangling[j] {
                let u = 1.0 / self.n as f64;
                for i in 0..self.n {
                    m.set(i, j, u);
                }
            } else {
                for (i, v) in self.column(j) {
                    m.set(i, j, v);
                }
            }
        }
        m
    }

    /// `out = P x`, for any real vector `x`.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        out.fill(0.0);
        let mut dangling_mass = 0.0;
        for j in 0..self.n {
            let xj = x[j];
            if self.dangling[j] {
                dangling_mass += xj;
                continue;
            }
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                out[self.row_idx[k]] += self.values[k] * xj;
            }
        }
        if dangling_mass != 0.0 {
            let share = dangling_mass / self.n as f64;
            out.iter_mut().for_each(|o| *o += share);
        }
    }

    /// `out = Pᵀ y`.
    pub fn apply_transpose_into(&self, y: &[f64], out: &mut [f64]) {
        assert_eq!(y.len(), self.n);
        assert_eq!(out.len(), self.n);
        let mut mean_y: Option<f64> = None;
        for j in 0..self.n {
            out[j] = if self.dangling[j] {
                *mean_y.get_or_insert_with(|| y.iter().sum::<f64>() / self.n as f64)
            } else {
                (self.col_ptr[j]..self.col_ptr[j + 1])
                    .map(|k| self.values[k] * y[self.row_idx[k]])
                    .sum()
            };
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        let mut out = vec![0.0; self.n];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, y.len())?;
        let mut out = vec![0.0; self.n];
        self.apply_transpose_into(y, &mut out);
        Ok(out)
    }

    /// `P x` for a score vector; the result stays on the simplex.
    pub fn matvec(&self, x: &ScoreVector) -> Result<ScoreVector> {
        Ok(ScoreVector(self.apply(x.as_slice())?))
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        let mut report = ValidationReport::new(tol);
        for j in 0..self.n {
            if self.dangling[j] {
                report.record_column(j, 1.0, false);
                continue;
            }
            let mut sum = 0.0;
            let mut any = false;
            for (i, v) in self.column(j) {
                if v < 0.0 {
                    report.negative_entries.push((i, j));
                }
                if v != 0.0 {
                    any = true;
                }
                sum += v;
            }
            report.record_column(j, sum, !any);
        }
        report.finish()
    }
}

/// Square dense matrix in row-major order; used for perturbations and
/// small test instances.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.get(i, j))
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_dim(self.n, other.n)?;
        Ok(DenseMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        l2(&self.data)
    }

    /// Entrywise ℓ1 norm, `Σ_ij |a_ij|`.
    pub fn entrywise_l1_norm(&self) -> f64 {
        l1(&self.data)
    }

    pub fn column_l1_norms(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.column(j).map(f64::abs).sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.column(j).sum()).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, x.len())?;
        Ok(self
            .data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn validate(&self, tol: f64) -> ValidationReport {
        let mut report = ValidationReport::new(tol);
        for j in 0..self.n {
            let mut sum = 0.0;
            let mut any = false;
            for i in 0..self.n {
                let v = self.get(i, j);
                if v < 0.0 {
                    report.negative_entries.push((i, j));
                }
                if v != 0.0 {
                    any = true;
                }
                sum += v;
            }
            report.record_column(j, sum, !any);
        }
        report.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub tol: f64,
    pub max_column_deviation: f64,
    pub worst_column: Option<usize>,
    /// Columns whose sum is off by more than `tol`.
    pub failing_columns: Vec<usize>,
    pub negative_entries: Vec<(usize, usize)>,
    pub empty_columns: Vec<usize>,
    pub passed: bool,
}

impl ValidationReport {
    fn new(tol: f64) -> Self {
        Self {
            tol,
            max_column_deviation: 0.0,
            worst_column: None,
            failing_columns: Vec::new(),
            negative_entries: Vec::new(),
            empty_columns: Vec::new(),
            passed: false,
        }
    }

    fn record_column(&mut self, j: usize, sum: f64, empty: bool) {
        let dev = (sum - 1.0).abs();
        if dev > self.max_column_deviation || dev.is_nan() {
            self.max_column_deviation = dev;
            self.worst_column = Some(j);
        }
        if !(dev <= self.tol) {
            self.failing_columns.push(j);
        }
        if empty {
            self.empty_columns.push(j);
        }
    }

    fn finish(mut self) -> Self {
        self.passed = self.failing_columns.is_empty()
            && self.negative_entries.is_empty()
            && self.empty_columns.is_empty();
        self
    }
}

/// A probability vector: nonnegative entries summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidInput("score vector is empty".into()));
        }
        if let Some((i, x)) = v.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
            return Err(Error::InvalidInput(format!("score {i} = {x} is negative")));
        }
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidInput(format!("scores sum to {sum}, not 1")));
        }
        Ok(Self(v))
    }

    /// Rescales a nonnegative, nonzero vector onto the simplex.
    pub fn normalized(mut v: Vec<f64>) -> Result<Self> {
        if v.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidInput("cannot normalize a vector with negative or non-finite entries".into()));
        }
        let sum: f64 = v.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidInput("cannot normalize a zero vector".into()));
        }
        v.iter_mut().for_each(|x| *x /= sum);
        Ok(Self(v))
    }

    /// The barycenter `e` with `e_i = 1/n`.
    pub fn uniform(n: usize) -> Self {
        assert!(n > 0);
        Self(vec![1.0 / n as f64; n])
    }

    /// Vertex `i` of the simplex.
    pub fn vertex(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self(v)
    }

    /// Solver-internal constructor for vectors produced by convex
    /// combinations of simplex points.
    pub(crate) fn from_simplex_unchecked(v: Vec<f64>) -> Self {
        debug_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_distance(&self, other: &ScoreVector) -> f64 {
        l1_distance(&self.0, &other.0)
    }

    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Indices of the `k` largest scores, ties broken by index.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.0.len()).collect();
        idx.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }
}

impl std::ops::Index<usize> for ScoreVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// `‖P x − x‖` in the chosen norm.
pub fn residual(p: &SparseStochasticMatrix, x: &[f64], norm: Norm) -> Result<f64> {
    check_dim(p.n(), x.len())?;
    let mut px = vec![0.0; p.n()];
    p.apply_into(x, &mut px);
    px.iter_mut().zip(x).for_each(|(a, b)| *a -= b);
    Ok(norm.of(&px))
}

/// The 7-node test graph with absorbing pair {6, 7}, in 1-based labels.
pub const SEVEN_NODE_EDGES: [(usize, usize); 11] = [
    (1, 2),
    (1, 3),
    (2, 3),
    (3, 1),
    (3, 5),
    (3, 7),
    (4, 3),
    (4, 5),
    (5, 4),
    (6, 7),
    (7, 6),
];

pub fn seven_node_example() -> SparseStochasticMatrix {
    let el = EdgeList::from_one_based(7, &SEVEN_NODE_EDGES).expect("static edge list");
    SparseStochasticMatrix::from_edge_list(&el, DanglingPolicy::UniformAll).expect("valid graph")
}
