//! Bivariate tempered space-fractional Poisson counts and the competing-risks
//! shock model built on them.
//!
//! Two independent Poisson streams with rates `lambda1`, `lambda2` are run on
//! the clock of a tempered stable subordinator with Laplace exponent
//! `(u + theta)^alpha - theta^alpha`. The crate evaluates the joint count law
//! by several independent routes, derives reliability, hazard and failure-cause
//! quantities for a system that fails once the cumulative shock count reaches a
//! random threshold, and checks all of it against exact-path Monte Carlo.
//!
//! Module map:
//!
//! - [`special_fn`]: Fox-Wright `1psi1` series, generalized exponential
//!   integral, falling factorials and compensated sums.
//! - [`subordinator`]: Laplace exponents, Levy densities and exact increment
//!   samplers for tempered stable, stable, gamma and pure-drift subordinators.
//! - [`process`]: the counting process itself (pmf routes, pgf, governing
//!   equations, Levy measure, path simulation).
//! - [`shock`]: threshold laws, reliability, hazards and failure causes.
//! - [`montecarlo`]: seeded, parallel, reproducible estimators.
//! - [`cli`]: table output and the subcommands behind the `btsfpp` binary.

pub mod cli;
pub mod error;
pub mod montecarlo;
pub mod process;
pub mod quad;
pub mod shock;
pub mod special_fn;
pub mod subordinator;

pub use error::{Error, Result};
pub use process::{BivariateCount, ProcessParams, SubordinatedPoisson};
pub use shock::{FailureLaw, FailureSemantics, MixingLaw, ThresholdDist};


pub use subordinator::SubordinatorSpec;
