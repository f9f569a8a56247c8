//! Dissipativity certificates for linear delay differential equations.
//!
//! A linear delay system `u'(t) = B u(t) + ∫_{-1}^0 dζ(σ) u(t+σ)` generates a
//! semigroup on the product space `ℝⁿ × L²([-1,0]; ℝⁿ)`. This crate builds a
//! weighted inner product
//!
//! ```text
//! ((x, f), (y, g))_τ = ⟨x, y⟩ + ∫_{-1}^0 τ(s) ⟨f(s), g(s)⟩ ds
//! ```
//!
//! under which `A - μI` is dissipative, and checks the resulting decay rate
//! against the spectrum of the generator, a discretized Rayleigh quotient,
//! deterministic trajectories and stochastic ensembles.
//!
//! Modules:
//!
//! - [`kernel`]: delay measures, drift matrices and the scalar functionals
//!   (dissipativity constant, total variation, exponential moments).
//! - [`certificate`]: the gap condition, the optimal rate, the weight `τ` and
//!   the simpler sufficient bounds; Lyapunov renorming for plain matrices.
//! - [`spectrum`]: characteristic roots and generator eigenvalues.
//! - [`operator_check`]: discrete verification of `((A - μI)x, x)_τ ≤ 0`.
//! - [`simulation`]: method-of-steps integration and SDDE ensembles.

pub mod certificate;
pub mod discretization;
mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod operator_check;
pub mod quadrature;
pub mod simulation;
pub mod spectrum;

pub use certificate::{
    build_certificate, corollary_bounds, density_gap, dissipativity_gap,
    generalized_contraction_shift, lyapunov_renorm, min_mu, ContractionCertificate,
    CorollaryBounds, RenormMatrix, Side, WeightFunction,
};
pub use error::{Error, Result};
pub use kernel::{
    dissipativity_lambda, exp_moment, sq_exp_moment, total_variation, DelayAtom, DelayDensity,
    DelayKernel, LinearDelaySystem,
};
pub use operator_check::{check_dissipativity, refinement_study, DissipativityReport};
pub use spectrum::{dominant_real_root, generator_eigenvalues, verify_characteristic};

/// Version string embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
