//! Higher-order solvers for variational inequalities in ℓp geometry.
//!
//! The crate bundles:
//! - [`geometry`]: ℓp norms, the power potential h(z) = ‖z‖_p^p, its
//!   gradients, Bregman divergences, and mirror/duality maps;
//! - [`oracle`]: the operator abstraction (evaluation, higher-order
//!   directional derivatives, Taylor models, finite-difference checks,
//!   sampled smoothness estimation);
//! - [`problems`]: bundled polynomial min-max instances, a linear monotone
//!   baseline, and the preconditioned "competitive" transform F_α;
//! - [`subproblems`]: regularized Taylor-step root solves shared by the
//!   iterative methods;
//! - [`solvers`]: extragradient-family iterations (Euclidean and ℓp,
//!   arbitrary order) with per-iteration traces;
//! - [`continuous`]: a rescaled dual-space flow integrated with RK4 over an
//!   algebraic stage constraint;
//! - [`analysis`]: samplers that estimate monotonicity/comonotonicity/
//!   weak-MVI parameters, theorem-constant calculators, and rate fitting.

pub mod analysis;
pub mod continuous;
pub mod error;
pub mod geometry;
pub mod oracle;
pub mod problems;
pub mod solvers;
pub mod subproblems;

pub use error::{Error, Result};
