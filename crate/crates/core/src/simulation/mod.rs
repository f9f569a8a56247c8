//! Trajectory-level checks of certified decay.
//!
//! - [`integrate_dde`]: classical RK4 by the method of steps, with the delayed
//!   terms read from a cubic Hermite dense output.
//! - [`weighted_norm`] and [`contraction_report`]: the certificate norm of the
//!   segment `(u(t), u_t)` and the ratio against `e^{μt}`.
//! - [`simulate_sdde_pair`], [`mean_square_contraction`] and
//!   [`as_lyapunov_exponent`]: Euler–Maruyama ensembles for stochastic delay
//!   equations with per-path counter-based random streams.

mod deterministic;
mod history;
mod stochastic;

pub use deterministic::{
    contraction_report, integrate_dde, ContractionReport, DeterministicTrajectory,
};
pub use history::{steps_per_unit, weighted_norm, HistorySegment, NormPlan};
pub use stochastic::{
    as_lyapunov_exponent, mean_square_contraction, simulate_sdde_pair, stability_region,
    AdditiveNoise, Diffusion, LyapunovConfig, LyapunovReport, MeanSquareReport,
    MultiplicativeNoise, Nonlinearity, PathRecord, RegionCheck, SddeProblem, SineDrift,
    StabilityEstimate, StabilityFunctional, StochasticEnsemble, ZeroDrift, ZeroNoise,
};
