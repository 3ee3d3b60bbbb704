//! Adversarial training of linear classifiers on a symmetric two-class
//! Gaussian model.
//!
//! The crate is split by concern:
//!
//! - [`specfun`]: `erf`, the standard normal CDF and a quadrature oracle.
//! - [`model`]: the Gaussian data model, its shifted-mean variant, sampling
//!   and Bayes quantities.
//! - [`losses`]: linear, logistic and hinge losses together with the exact
//!   l-infinity worst-case perturbation for linear hypotheses.
//! - [`dynamics`]: the expected gradient-descent recurrence in exact rational
//!   arithmetic, with checks of its oscillation properties.
//! - [`trainer`]: stochastic adversarial training runs.
//! - [`experiments`]: the experiment runners behind the `advlin` binary.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod losses;
pub mod model;
pub mod output;
pub mod rng;
pub mod specfun;
pub mod svg;
pub mod trainer;

pub use error::{Error, Result};
pub use losses::{AttackBudget, LinearHypothesis, LossKind};
pub use model::{Dataset, GaussianModel, Label, LabeledSample, ShiftedModel};
pub use specfun::Probability;
pub use trainer::{RunStats, TrainConfig, TrainMode};
