//! LassoBO: high-dimensional Bayesian optimization with lasso-regularized
//! inverse-lengthscale estimation.
//!
//! The optimizer fits a Gaussian process on all `D` dimensions each iteration,
//! estimates per-dimension inverse squared lengthscales `rho` by minimizing an
//! L1-penalized negative log marginal likelihood, classifies dimensions as
//! important (`rho` above the mean) or unimportant, and maximizes GP-UCB over a
//! search region made of the important-coordinate box crossed with a small set
//! of fixed imputations of the unimportant coordinates (the incumbent's values
//! plus `M_t = ceil(t^{1/n})` uniform draws).
//!
//! Module map:
//! - [`gp`] — kernels, exact GP posterior inference, prior path sampling
//! - [`lasso`] — penalized marginal likelihood, analytic gradients, multi-start
//!   ADAM fitting
//! - [`selection`] — important/unimportant partition from fitted `rho`
//! - [`search_space`] — subspace construction and the `M_t` schedule
//! - [`acquisition`] — GP-UCB and its maximization over the multi-subspace region
//! - [`benchmarks`] — padded synthetic objectives (Ackley, Levy, Hartmann-6,
//!   SumSquares)
//! - [`engine`] — the optimization loop plus random-search, full-dimensional
//!   UCB, and dropout baselines
//! - [`checks`] — seeded property suites (gradient oracles, posterior oracle,
//!   derivative-distribution law, selection degeneracy)

pub mod acquisition;
pub mod benchmarks;
pub mod checks;
pub mod engine;
mod error;
pub mod gp;
pub mod lasso;
pub mod search_space;
pub mod selection;

pub use error::{Error, Result};

/// The RNG used throughout for reproducible runs.
pub type RunRng = rand_chacha::ChaCha8Rng;
