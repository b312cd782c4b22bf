//! # mildsol
//!
//! A desk-scale laboratory for semilinear evolution equations driven by
//! compensated Poisson jump noise,
//!
//! ```text
//! dX_t = A X_t dt + f(t, X_t) dt + \int_E k(t, xi, X_{t-}) Ntilde(dt, dxi),
//! ```
//!
//! on a finite spectral truncation of a separable Hilbert space. The crate
//! builds mild solutions two independent ways (successive approximation and a
//! jump-adapted exponential integrator), and ships evaluators for the moment
//! inequalities the solvers rely on, so every run can check itself.
//!
//! | Module          | Contents                                                        |
//! |-----------------|-----------------------------------------------------------------|
//! | [`hilbert`]     | State vectors and the diagonal semigroup `S_t = e^{tA}`         |
//! | [`measure`]     | Finite-activity Poisson random measures and their integrals     |
//! | [`coeffs`]      | Drift/jump coefficient families, growth/monotonicity validator  |
//! | [`builtin`]     | Named problem families with analytically known constants        |
//! | [`convolution`] | Stochastic convolution, pathwise pth-power inequality evaluators|
//! | [`solver`]      | Skeleton solver, successive approximation, direct jump scheme   |
//! | [`stability`]   | Decay exponents and coupled two-solution moment decay           |
//! | [`harness`]     | Config files, experiment runner, JSON/CSV reports               |
//!
//! All randomness is driven by counter-style per-path streams, so results are
//! independent of worker count and execution order; see [`rng`].

pub mod builtin;
pub mod coeffs;
pub mod convolution;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod hilbert;
pub mod measure;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod stability;

pub use coeffs::{DriftCoefficient, InitialLaw, JumpCoefficient, SystemSpec, ValidationReport};
pub use convolution::{PathGrid, ResidualSeries};
pub use error::{CoreError, Result};
pub use estimate::MonteCarloEstimate;
pub use harness::{ExperimentConfig, ExperimentKind, RunSummary};
pub use hilbert::{SpectralSemigroup, StateVector};
pub use measure::{IntensityMeasure, JumpPath, MarkLaw};
pub use solver::PicardTrace;
pub use stability::{DecayCurve, HypothesisConstants};
