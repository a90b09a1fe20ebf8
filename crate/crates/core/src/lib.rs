//! Two-area generation adequacy and the capacity value of interconnection.
//!
//! The crate computes, for two power systems joined by an interconnector, the
//! set of constant load additions `(l_a, l_b)` that both systems can carry
//! without their loss-of-load expectation exceeding the isolated baseline.
//! The frontier of that set is the capacity allocation curve.
//!
//! Pipeline, bottom-up:
//!
//! * [`gridpmf`]: discretized distributions on regular MW grids and their
//!   convolutions.
//! * [`fleet`]: two-state generating units and available-capacity pmfs.
//! * [`weather_demand`]: joint demand and wind distributions, including the
//!   Gaussian-copula coupling of wind between systems.
//! * [`risk_engine`]: joint margin assembly, region integrals and the
//!   per-policy loss-of-load probabilities.
//! * [`calibration`]: sizing each isolated system to a LOLE standard.
//! * [`allocation`]: acceptable-set membership and curve tracing.
//! * [`scenario`]: study configuration, data ingestion and preparation.
//! * [`oracle`]: brute-force verifiers that share no numerics with the engine.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod calibration;
mod error;
pub mod fleet;
pub mod gridpmf;
pub mod normal;
pub mod oracle;
pub mod risk_engine;
pub mod scenario;
pub mod weather_demand;

pub use error::{Error, Result};

/// Hours in a non-leap year.
pub const HOURS_PER_YEAR: f64 = 8760.0;
