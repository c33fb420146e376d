//! Rockafellian relaxation for stochastic and chance-constrained optimization.
//!
//! The actual problem is `minimize g0(x) + h(E_mu[G(xi, x)])`. When `mu` is
//! replaced by an approximation `mu_nu` the plug-in problem can lose its
//! minimizers entirely; the approximating Rockafellian
//! `g0(x) + h(u + E_{mu_nu}[G_nu(xi, x)]) + |u|^alpha / (alpha lambda_nu)`
//! restores epi-convergence when `lambda_nu` is tied to a probability metric
//! between `mu_nu` and `mu`.
//!
//! Module map:
//! - [`distributions`]: atomic and uniform distributions, perturbation sequences.
//! - [`metrics`]: TV, W1, bounded Lipschitz, Fortet-Mourier, minimal information, KL.
//! - [`model`]: extended reals, the composite problem and its Rockafellians.
//! - [`envelopes`]: epigraphical regularization (Pasch-Hausdorff, Moreau).
//! - [`chance`]: parametric sets and chance-constrained problems.
//! - [`solvers`]: multiresolution grid minimization.
//! - [`schedules`]: parameter sequences and their validation.
//! - [`diagnostics`]: epigraphical distance, Minkowski content, subregularity, rate fits.
//! - [`experiments`]: worked presets and report comparison.

pub mod chance;
pub mod diagnostics;
pub mod distributions;
pub mod envelopes;
mod error;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod schedules;
pub mod solvers;
pub mod xreal;

pub use error::{Error, Result};
pub use xreal::XReal;

/// A point in `R^d`.
pub type Point = Vec<f64>;

/// Coordinate-wise tolerance for atom merging and set membership.
pub const COORD_TOL: f64 = 1e-12;
