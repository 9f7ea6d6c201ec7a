//! Worst-case and sampled perturbations `ξ` of a stochastic matrix.
//!
//! Every perturbation here has zero column sums. The sets differ in their
//! norm budgets:
//!
//! | set         | constraints                                             | residual norm | bound   |
//! |-------------|---------------------------------------------------------|---------------|---------|
//! | `Xi1`       | `‖ξ_j‖₁ ≤ ε_j`, `Σ_j ‖ξ_j‖₁ ≤ ε`                          | ℓ1            | `L1G1`  |
//! | `Xi2`       | `‖ξ_j‖₁ ≤ ε_j`, `‖ξ‖_F ≤ ε`                               | ℓ2            | `L2G2`  |
//! | `XiF`       | `‖ξ‖_F ≤ ε`, `P + ξ` stochastic                           | ℓ2            | `L2L2`  |
//! | `Frobenius` | `‖ξ‖_F ≤ ε` only                                          | ℓ2            | `L2L2`  |
//!
//! Samplers for the first three keep `P + ξ` stochastic. Rows outside the
//! support of a column only receive nonnegative mass, and the whole `ξ` is
//! halved until every entry of `P + ξ` lies in `[0, 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::matrix::{l1, l2, DenseMatrix, Norm, ScoreVector, SparseStochasticMatrix};
use crate::norms::{phi, NormPair, UncertaintySpec};

/// Most halvings applied to a sample before it is declared infeasible.
pub const MAX_HALVINGS: u32 = 60;

/// Slack allowed when comparing a realized residual with its upper bound.
const BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UncertaintySet {
    Xi1,
    Xi2,
    XiF,
    Frobenius,
}

impl UncertaintySet {
    /// Norm pair whose `φ` bounds the worst case over this set.
    pub fn bounding_pair(self) -> NormPair {
        match self {
            Self::Xi1 => NormPair::L1G1,
            Self::Xi2 => NormPair::L2G2,
            Self::XiF | Self::Frobenius => NormPair::L2L2,
        }
    }

    pub fn residual_norm(self) -> Norm {
        match self {
            Self::Xi1 => Norm::L1,
            _ => Norm::L2,
        }
    }

    fn keeps_stochastic(self) -> bool {
        !matches!(self, Self::Frobenius)
    }
}

impl std::str::FromStr for UncertaintySet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xi1" => Ok(Self::Xi1),
            "xi2" => Ok(Self::Xi2),
            "xif" => Ok(Self::XiF),
            "frobenius" => Ok(Self::Frobenius),
            other => Err(Error::InvalidParameter(format!("unknown uncertainty set {other:?}"))),
        }
    }
}

impl std::fmt::Display for UncertaintySet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Xi1 => "xi1",
            Self::Xi2 => "xi2",
            Self::XiF => "xif",
            Self::Frobenius => "frobenius",
        })
    }
}

/// `ξ = scale · left · rightᵀ` with unit `left` and `right`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Perturbation {
    pub scale: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl Rank1Perturbation {
    /// Rank-1 `ξ` with `‖ξ‖_F = ε` maximizing `‖a + ξ b‖₂`, which then
    /// equals `‖a‖₂ + ε ‖b‖₂`. A zero `a` or `b` is replaced by the unit
    /// vector `(1, −1, 0, …)/√2` (or `(1)` in dimension one).
    pub fn aligned(a: &[f64], b: &[f64], epsilon: f64) -> Result<Self> {
        check_dim(a.len(), b.len())?;
        if a.is_empty() {
            return Err(Error::InvalidInput("vectors are empty".into()));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { scale: epsilon, left: unit_or_fallback(a), right: unit_or_fallback(b) })
    }

    pub fn n(&self) -> usize {
        self.left.len()
    }

    pub fn materialize(&self) -> DenseMatrix {
        let n = self.n();
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, self.scale * self.left[i] * self.right[j]);
            }
        }
        m
    }

    /// `ξ v` without materializing `ξ`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n(), v.len())?;
        let t = self.scale * self.right.iter().zip(v).map(|(r, x)| r * x).sum::<f64>();
        Ok(self.left.iter().map(|l| l * t).collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.scale.abs() * l2(&self.left) * l2(&self.right)
    }
}

fn unit_or_fallback(v: &[f64]) -> Vec<f64> {
    let norm = l2(v);
    if norm > 0.0 {
        return v.iter().map(|x| x / norm).collect();
    }
    let mut c = vec![0.0; v.len()];
    if v.len() == 1 {
        c[0] = 1.0;
    } else {
        c[0] = std::f64::consts::FRAC_1_SQRT_2;
        c[1] = -std::f64::consts::FRAC_1_SQRT_2;
    }
    c
}

/// Worst-case Frobenius perturbation `ε (Px − x) xᵀ / (‖Px − x‖₂ ‖x‖₂)`.
pub fn worst_case_rank1(
    p: &SparseStochasticMatrix,
    x: &ScoreVector,
    epsilon: f64,
) -> Result<Rank1Perturbation> {
    let px = p.apply(x.as_slice())?;
    let a: Vec<f64> = px.iter().zip(x.as_slice()).map(|(p, x)| p - x).collect();
    Rank1Perturbation::aligned(&a, x.as_slice(), epsilon)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Report {
    /// `‖a‖₂ + ε ‖b‖₂`.
    pub bound: f64,
    /// `‖a + ξ* b‖₂`.
    pub attained: f64,
    /// Largest value over uniformly random `ξ` in the Frobenius ball.
    pub max_random: f64,
    /// Largest value over random `ξ` drawn close to `ξ*`.
    pub max_near_optimal: f64,
    pub samples: usize,
}

/// Checks `‖a + ξ b‖₂ ≤ ‖a‖₂ + ε ‖b‖₂` on `n_samples` random `ξ` with
/// `‖ξ‖_F ≤ ε` and equality at the aligned rank-1 `ξ*`. Half the samples
/// are uniform directions, the other half perturbations of `ξ*`.
pub fn lemma1_check(a: &[f64], b: &[f64], epsilon: f64, n_samples: usize, seed: u64) -> Result<Lemma1Report> {
    let star = Rank1Perturbation::aligned(a, b, epsilon)?;
    let n = a.len();
    let value = |xi: &DenseMatrix| -> Result<f64> {
        let xb = xi.apply(b)?;
        Ok(l2(&a.iter().zip(&xb).map(|(u, v)| u + v).collect::<Vec<_>>()))
    };
    let bound = l2(a) + epsilon * l2(b);
    let star_m = star.materialize();
    let attained = value(&star_m)?;
    if (attained - bound).abs() > 1e-10 * (1.0 + bound) {
        return Err(Error::BoundViolation { realized: attained, bound });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_random = 0.0f64;
    let mut max_near = 0.0f64;
    for k in 0..n_samples {
        let near = k % 2 == 1;
        let spread = if near { rng.gen_range(0.0..0.5) } else { 0.0 };
        let mut xi = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let noise = rng.gen_range(-1.0..1.0);
                let v = if near { star_m.get(i, j) + spread * epsilon * noise } else { noise };
                xi.set(i, j, v);
            }
        }
        let f = xi.frobenius_norm();
        let radius = if near { f.min(epsilon) } else { epsilon * rng.gen_range(0.0..1.0f64).sqrt() };
        if f > 0.0 {
            xi.scale(radius / f);
        }
        let v = value(&xi)?;
        if v > bound * (1.0 + BOUND_SLACK) + f64::MIN_POSITIVE {
            return Err(Error::BoundViolation { realized: v, bound });
        }
        if near {
            max_near = max_near.max(v);
        } else {
            max_random = max_random.max(v);
        }
    }
    Ok(Lemma1Report { bound, attained, max_random, max_near_optimal: max_near, samples: n_samples })
}

/// A feasible `ξ` together with its measured norms.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSample {
    pub set: UncertaintySet,
    pub xi: DenseMatrix,
    pub frobenius: f64,
    pub l1_total: f64,
    pub column_l1: Vec<f64>,
    pub max_abs_column_sum: f64,
    /// Number of times `ξ` was halved to keep `P + ξ` stochastic.
    pub halvings: u32,
}

impl PerturbationSample {
    fn measure(set: UncertaintySet, xi: DenseMatrix, halvings: u32) -> Self {
        let column_l1 = xi.column_l1_norms();
        Self {
            set,
            frobenius: xi.frobenius_norm(),
            l1_total: column_l1.iter().sum(),
            max_abs_column_sum: xi.column_sums().iter().fold(0.0, |m, s| m.max(s.abs())),
            column_l1,
            xi,
            halvings,
        }
    }

    /// Whether the measured norms respect the budgets of `spec` for this
    /// sample's set, up to a relative `tol`.
    pub fn within_budget(&self, spec: &UncertaintySpec, tol: f64) -> bool {
        let eps = spec.epsilon() * (1.0 + tol);
        let columns_ok = || {
            self.column_l1
                .iter()
                .enumerate()
                .all(|(j, c)| *c <= spec.column_budget(j) * (1.0 + tol))
        };
        self.max_abs_column_sum <= 1e-10
            && match self.set {
                UncertaintySet::Xi1 => columns_ok() && self.l1_total <= eps,
                UncertaintySet::Xi2 => columns_ok() && self.frobenius <= eps,
                UncertaintySet::XiF | UncertaintySet::Frobenius => self.frobenius <= eps,
            }
    }
}

/// Seeded stream of perturbations from one uncertainty set.
pub struct PerturbationSampler<'a> {
    dense: DenseMatrix,
    spec: &'a UncertaintySpec,
    set: UncertaintySet,
    rng: ChaCha8Rng,
}

impl<'a> PerturbationSampler<'a> {
    pub fn new(
        p: &SparseStochasticMatrix,
        spec: &'a UncertaintySpec,
        set: UncertaintySet,
        seed: u64,
    ) -> Result<Self> {
        check_dim(p.n(), spec.n())?;
        Ok(Self { dense: p.to_dense(), spec, set, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn next_sample(&mut self) -> Result<PerturbationSample> {
        let n = self.dense.n();
        let mut xi = DenseMatrix::zeros(n);
        let stochastic = self.set.keeps_stochastic();
        let mut col = vec![0.0; n];
        for j in 0..n {
            let mut support = 0usize;
            let mut sum = 0.0;
            for (i, c) in col.iter_mut().enumerate() {
                let u: f64 = self.rng.gen_range(-1.0..1.0);
                let on_support = !stochastic || self.dense.get(i, j) > 0.0;
                *c = if on_support { u } else { u.max(0.0) };
                support += usize::from(on_support);
                sum += *c;
            }
            let shift = sum / support as f64;
            for (i, c) in col.iter_mut().enumerate() {
                if !stochastic || self.dense.get(i, j) > 0.0 {
                    *c -= shift;
                }
            }
            let target = match self.set {
                UncertaintySet::Xi1 | UncertaintySet::Xi2 => self.spec.column_budget(j),
                UncertaintySet::XiF | UncertaintySet::Frobenius => 1.0,
            };
            let norm = l1(&col);
            for (i, c) in col.iter().enumerate() {
                xi.set(i, j, if norm > 0.0 { c * target / norm } else { 0.0 });
            }
        }

        let eps = self.spec.epsilon();
        let total = match self.set {
            UncertaintySet::Xi1 => xi.entrywise_l1_norm(),
            _ => xi.frobenius_norm(),
        };
        let must_fill = matches!(self.set, UncertaintySet::XiF | UncertaintySet::Frobenius);
        if total > 0.0 && (must_fill || total > eps) {
            xi.scale(eps / total);
        }

        let halvings = if stochastic { repair(&self.dense, &mut xi)? } else { 0 };
        Ok(PerturbationSample::measure(self.set, xi, halvings))
    }
}

/// Halves `ξ` until `P + ξ` is entrywise in `[0, 1]`.
fn repair(p: &DenseMatrix, xi: &mut DenseMatrix) -> Result<u32> {
    let n = p.n();
    let fits = |xi: &DenseMatrix| {
        (0..n).all(|i| {
            (0..n).all(|j| {
                let v = p.get(i, j) + xi.get(i, j);
                (0.0..=1.0).contains(&v)
            })
        })
    };
    let mut halvings = 0;
    while !fits(xi) {
        if halvings == MAX_HALVINGS {
            return Err(Error::Infeasible(format!(
                "P + ξ left [0, 1] after {MAX_HALVINGS} halvings; the budget is too large for this matrix"
            )));
        }
        xi.scale(0.5);
        halvings += 1;
    }
    Ok(halvings)
}

pub fn sample_perturbation(
    p: &SparseStochasticMatrix,
    spec: &UncertaintySpec,
    set: UncertaintySet,
    seed: u64,
) -> Result<PerturbationSample> {
    PerturbationSampler::new(p, spec, set, seed)?.next_sample()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub set: UncertaintySet,
    /// Largest realized `‖(P + ξ)x − x‖` over the pool.
    pub value: f64,
    /// `φ(x)` for the set's bounding norm pair.
    pub bound: f64,
    /// `‖Px − x‖` in the set's norm.
    pub nominal_residual: f64,
    pub samples: usize,
    pub rank1_included: bool,
    pub max_halvings: u32,
}

/// Largest realized residual over `n_samples` sampled perturbations, plus
/// the rank-1 worst case when `include_rank1` holds and it belongs to the
/// set (it always does for `Frobenius`; for `XiF` only if `P + ξ*` can be
/// halved into the stochastic matrices). Fails with `BoundViolation` if a
/// sample beats the upper bound.
pub fn empirical_phi_lower_bound(
    p: &SparseStochasticMatrix,
    x: &ScoreVector,
    spec: &UncertaintySpec,
    set: UncertaintySet,
    n_samples: usize,
    seed: u64,
    include_rank1: bool,
) -> Result<LowerBoundReport> {
    check_dim(p.n(), x.len())?;
    let norm = set.residual_norm();
    let bound = phi(p, x, &spec.with_pair(set.bounding_pair()))?.total;
    let px = p.apply(x.as_slice())?;
    let a: Vec<f64> = px.iter().zip(x.as_slice()).map(|(p, x)| p - x).collect();
    let nominal_residual = norm.of(&a);

    let realized = |xi_x: &[f64]| norm.of(&a.iter().zip(xi_x).map(|(u, v)| u + v).collect::<Vec<_>>());
    let check = |v: f64| -> Result<f64> {
        if v > bound * (1.0 + BOUND_SLACK) + f64::MIN_POSITIVE {
            Err(Error::BoundViolation { realized: v, bound })
        } else {
            Ok(v)
        }
    };

    let mut value = 0.0f64;
    let mut max_halvings = 0;
    let mut sampler = PerturbationSampler::new(p, spec, set, seed)?;
    for _ in 0..n_samples {
        let s = sampler.next_sample()?;
        max_halvings = max_halvings.max(s.halvings);
        value = value.max(check(realized(&s.xi.apply(x.as_slice())?))?);
    }

    let mut rank1_included = false;
    if include_rank1 && matches!(set, UncertaintySet::XiF | UncertaintySet::Frobenius) {
        let star = worst_case_rank1(p, x, spec.epsilon())?;
        let mut m = star.materialize();
        let ok = set == UncertaintySet::Frobenius || repair(&sampler.dense, &mut m).is_ok();
        if ok {
            value = value.max(check(realized(&m.apply(x.as_slice())?))?);
            rank1_included = true;
        }
    }

    Ok(LowerBoundReport {
        set,
        value,
        bound,
        nominal_residual,
        samples: n_samples,
        rank1_included,
        max_halvings,
    })
}
