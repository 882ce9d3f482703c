//! Multisource classification under ranked transfer exponents.
//!
//! The crate bundles hypothesis classes with exact ERM, closed-form task
//! distributions, the four multisource learners, rate calculators, the
//! adversarial constructions used for impossibility and lower-bound
//! experiments, and a seeded experiment harness.

pub mod adversarial;
pub mod concentration;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod hypothesis;
pub mod procedures;
pub mod rho_serde;
pub mod streams;
pub mod theory;

pub use distributions::{ConditionReport, Marginal, Noise, TaskDistribution};
pub use error::{Error, Result};
pub use hypothesis::{Hypothesis, HypothesisClass, Label, LabeledSample, Point, Side};
pub use procedures::{Fallback, MultiSample, MultisourceInstance, ProcedureConfig, Ranking};
pub use theory::{BoundValue, RateQuery};
