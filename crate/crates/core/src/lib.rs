//! Optimal transport with generic convex regularization.
//!
//! The crate solves discrete transport problems
//! `min_{P ∈ Π(p,q)} ⟨P, C⟩ + R(P)` and their barycenter counterparts for
//! entropic, quadratic, and Tsallis regularizers `R`, all through one
//! alternating dual-projection scheme. Classic Sinkhorn scaling and the
//! Benamou et al. barycenter iteration are provided as reference paths, and
//! a transportation simplex solves the unregularized problem exactly on small
//! instances.
//!
//! Row, column, and per-input loops run on rayon when the `parallel` feature
//! is enabled (the default); [`SolverConfig::parallel`] switches a single
//! solve to the sequential path. Both paths give bit-identical results.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barycenter;
pub mod error;
pub mod io;
pub mod lp;
pub mod measures;
mod parallel;
pub mod regularizer;
mod scalar;
pub mod transport;
pub mod types;

pub use barycenter::{
    entropic_barycenter, generalized_barycenter, BarycenterOutput, BarycenterRecord,
    EntropicBarycenterOutput,
};
pub use error::{Error, Result};
pub use lp::{exact_transport, ExactSolution};
pub use measures::{
    bregman_divergence, kl_divergence, marginals, shannon_entropy, subgradient_divergence, transport_cost,
    tsallis_entropy,
};
pub use parallel::parallel_available;
pub use regularizer::{
    conjugate, gradient, plan_from_potentials, potential, theta_residual, DualPotentials,
    Regularizer, RegularizerSpec,
};
pub use transport::{
    classic_sinkhorn, col_projection, row_projection, solve_transport, GibbsKernel, SolveResult,
    TraceRecord,
};
pub use types::{BarycenterProblem, CostMatrix, Histogram, SolverConfig, TransportPlan};
