//! Numerical laboratory for batch-normalization theory.
//!
//! The crate is organized around five subsystems:
//!
//! - [`kernels`]: closed-form and quadrature/Monte-Carlo evaluation of the
//!   Gaussian expectations `I1`, `I2`, `I3` and the generalization integral
//!   that drive everything else.
//! - [`dynamics`]: the order-parameter ODE system `(Q, R, L)`, its fixed
//!   points, Jacobian eigenvalues and maximum/effective learning rates.
//! - [`statmech`]: closed-form generalization-error curves (vanilla SGD,
//!   weight normalization with gamma decay) and the replica free energy with
//!   its equilibrium order parameters.
//! - [`sgd`]: finite-N teacher-student SGD simulation for vanilla SGD, WN,
//!   WN+gamma-decay and BN students, online and offline.
//! - [`decompose`]: empirical verification that the expected BN loss equals
//!   population normalization plus an adaptive gamma-decay penalty, including
//!   the Gaussian priors of the batch statistics.
//!
//! Supporting modules: [`quadrature`] (Gauss-Legendre / Gauss-Hermite rules
//! and kink-aware integration against Gaussian weights), [`optim`] (bounded
//! Nelder-Mead), [`sweeps`] (experiment recipes shared by the CLI and the
//! acceptance suite).

pub mod decompose;
pub mod dynamics;
pub mod error;
pub mod kernels;
pub mod optim;
pub mod quadrature;
pub mod sgd;
pub mod special;
pub mod statmech;
pub mod sweeps;

pub use error::{Error, Result};
pub use kernels::{ActivationKind, GaussIntegrals, OrderState};
pub use dynamics::MethodKind;
