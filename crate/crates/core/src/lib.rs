//! Multi-factor quantile regression of commodity excess returns: data
//! ingest and transforms, an interior-point quantile regression solver with
//! bootstrap inference, econometric diagnostics, risk metrics, event dummies
//! and causal impact, and the report pipeline tying them together.

pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod events;
pub mod ingest;
pub mod linalg;
pub mod quantreg;
pub mod report;
pub mod risk;
pub mod transform;

pub use error::{Error, Result};
pub use ingest::{RunConfig, TimeSeries, YearMonth};
pub use transform::FactorPanel;
