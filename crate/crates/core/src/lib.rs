//! Robust dominant eigenvectors of column-stochastic matrices.
//!
//! The nominal score vector of a link matrix `P` is its dominant eigenvector
//! `Px = x`. That vector is fragile: traps, cycles and small edits to `P`
//! move it arbitrarily. This crate instead ranks by
//!
//! ```text
//! x̂ ∈ argmin_{x ∈ Σ}  φ(x) = ‖Px − x‖₍₁₎ + ε ‖x‖₍₂₎
//! ```
//!
//! which upper-bounds the worst-case residual over a family of perturbed
//! matrices `P + ξ`. Alongside the exact minimizer it provides the
//! regularized power method (PageRank with a varying damping factor and a
//! φ-based stopping rule), classic PageRank, Cesàro-averaged power
//! iteration, perturbation samplers, and synthetic grid models with
//! closed-form scores.


pub mod cli;
pub mod edgelist;
pub mod error;
pub mod matrix;
pub mod models;
pub mod norms;
pub mod perturbation;
pub mod solvers;

pub use edgelist::EdgeList;
pub use error::{Error, Result};
pub use matrix::{residual, DanglingPolicy, DenseMatrix, Norm, ScoreVector, SparseStochasticMatrix};
pub use models::{GridModel, GridModelSpec};
pub use norms::{g1, g2, g_oracle, phi, subgradient_phi, GKind, NormPair, ObjectiveValue, UncertaintySpec};
pub use perturbation::{
    empirical_phi_lower_bound, lemma1_check, sample_perturbation, worst_case_rank1, Rank1Perturbation,
    UncertaintySet,
};
pub use solvers::{
    algorithm1, dominant_eigenvector, mirror_descent_minimize, pagerank, SolveReport, SolverConfig, StopReason,
};
