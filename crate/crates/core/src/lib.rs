//! Robust optimization under endogenous uncertainty with uncertainty
//! preferences.
//!
//! A decision maker picks an uncertainty regime (at an activation cost) and a
//! solution. Besides worst-case performance, the engine can rank regimes by
//! the predictability, best-case performance, or maximum regret of their
//! robustly optimal solutions, either through an ε-constraint model or a
//! bilevel model. Shortest path and budgeted knapsack applications are
//! included, together with brute-force oracles for small instances.

mod error;
pub mod knapsack;
pub mod io;
pub mod milp;
pub mod oracle;
pub mod preferences;
pub mod robust;
mod scalar;
pub mod spp;
pub mod study;
pub mod uncertainty;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Model64 = milp::Model<f64>;
pub type Model32 = milp::Model<f32>;
pub type LinExpr64 = milp::LinExpr<f64>;
pub type LpResult64 = milp::LpResult<f64>;
pub type MilpResult64 = milp::MilpResult<f64>;
