//! Numerical laboratory for finite-state symmetric Markov chains with
//! killing, observed under Feynman-Kac weighting.
//!
//! The crate computes, exactly where linear algebra allows and by path
//! simulation everywhere else:
//!
//! - tilted generators, their Dirichlet forms, and validated chain models
//!   ([`model`]), including a discretized absorbing stable process;
//! - principal eigenpairs, the ground-state (Doob) transform, and the
//!   quasi-stationary / quasi-ergodic / tilted-jump limit measures
//!   ([`spectral`]);
//! - time-t survival, conditional endpoint and two-time laws, and the first
//!   two conditional moments of additive path functionals through block
//!   matrix exponentials ([`semigroup`]);
//! - event-driven path sampling, self-normalized conditional estimators,
//!   ergodic occupation checks, and tilted importance sampling of tail
//!   probabilities ([`montecarlo`]);
//! - the scaled cumulant generating function, its exact derivative, and the
//!   large-deviation rate computed along two independent routes ([`ldp`]).

pub mod error;
mod expm;
pub mod ldp;
pub mod model;
pub mod montecarlo;
pub mod semigroup;
pub mod spectral;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
