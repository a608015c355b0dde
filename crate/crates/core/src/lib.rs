//! Simulation-based inference under model misspecification.
//!
//! Rejection ABC with summary and full-data discrepancies, generalised
//! Bayesian losses, Bayesian synthetic likelihood and its adjustment-parameter
//! robustifications, with predictive and prior-shift diagnostics. The
//! [`benchmark`] module sets up an MA(1) model fitted to stochastic
//! volatility data, where no parameter matches the observed variance.
//!
//! All randomness flows through [`RngStream`], so results depend only on the
//! seed and never on thread scheduling.

pub mod abc;
pub mod benchmark;
pub mod diagnostics;
pub mod discrepancies;
pub mod error;
pub mod gbi;
pub mod model;
pub mod rng;
pub mod robust_bsl;
pub mod slice;
pub mod stats;
pub mod summaries;
pub mod synthetic_likelihood;

pub use error::{Result, SbiError};
pub use model::{PriorSpec, Simulator, Theta, TimeSeries};
pub use rng::RngStream;
pub use summaries::{SummaryStatistic, SummaryVec};
