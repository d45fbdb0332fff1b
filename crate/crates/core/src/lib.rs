//! Inference-aware sizing of language models.
//!
//! The Chinchilla parametric loss law `L(N, D) = E + A/N^α + B/D^β` fixes a
//! quality target; this crate finds the parameter count `N` and training-token
//! count `D` that reach that target at the lowest lifetime cost, where the
//! lifetime includes serving a known volume of inference tokens.
//!
//! * [`scaling_law`] evaluates and inverts the loss law, counts FLOPs and
//!   gives the closed-form training-only optimum.
//! * [`optimizer`] solves the inference-adjusted problem through the
//!   first-order Lagrange condition and a safeguarded Newton root finder.
//! * [`cost`] maps hardware prices, utilization and request volumes onto the
//!   same solver to produce dollar-optimal plans.
//! * [`fitting`] recovers the five law coefficients from training-run logs.
//! * [`sweep`] and [`tables`] drive grid sweeps and reference configurations.

pub mod cost;
mod error;
pub mod fitting;
pub mod format;
pub mod optimizer;
pub mod scaling_law;
pub mod sweep;
pub mod tables;

pub use cost::{CostBreakdown, CostConfig, CostPlan, HardwareProfile, InferenceDemand, MfuProfile};
pub use error::{Error, Result};
pub use fitting::{FitConfig, FitParams, FitReport, TrainingRun};
pub use optimizer::{OptimalPlan, TradeoffObjective};
pub use scaling_law::{Coefficients, FlopAccount, ModelConfig};
