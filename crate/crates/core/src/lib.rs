//! Economic design of memory-type control charts.
//!
//! * [`model`]: process, cost and design types and the benchmark catalog.
//! * [`chart`]: the EWMA/MEWMA statistic.
//! * [`cost`]: closed-form long-run average cost formulas.
//! * [`mcsim`]: renewal-cycle Monte Carlo and run-length estimators.
//! * [`design`]: direct search over the EWMA weight and method comparisons.

pub mod chart;
pub mod cost;
pub mod design;
pub mod error;
pub mod linalg;
pub mod mcsim;
pub mod model;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use stats::Estimate;
