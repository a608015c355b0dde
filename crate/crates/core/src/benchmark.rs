//! The misspecified MA(1) benchmark: MA(1) model with autocovariance
//! summaries, fitted to data from a stochastic volatility process.

use crate::error::Result;
use crate::model::{simulate_ma1, simulate_sv, Ma1, PriorSpec, SvParams, Theta, TimeSeries};
use crate::rng::RngStream;
use crate::summaries::{autocov_summaries, Autocovariances, SummaryVec};

pub const SERIES_LEN: usize = 100;
pub const NUM_LAGS: usize = 2;
pub const PRIOR_LO: f64 = -1.0;
pub const PRIOR_HI: f64 = 1.0;

pub fn prior() -> PriorSpec {
    PriorSpec::uniform(PRIOR_LO, PRIOR_HI).expect("valid bounds")
}

pub fn model() -> Ma1 {
    Ma1 { len: SERIES_LEN }
}

pub fn summary() -> Autocovariances {
    Autocovariances { num_lags: NUM_LAGS }
}

/// Observed series from the stochastic volatility process at the benchmark parameters.
pub fn sv_data(seed: u64) -> Result<TimeSeries> {
    simulate_sv(&SvParams::benchmark(), SERIES_LEN, RngStream::new(seed, 0))
}

/// Observed series from the model itself.
pub fn ma1_data(theta0: f64, seed: u64) -> Result<TimeSeries> {
    simulate_ma1(&Theta::scalar(theta0)?, SERIES_LEN, RngStream::new(seed, 0))
}

pub fn observed_summaries(data: &TimeSeries) -> Result<SummaryVec> {
    autocov_summaries(data, NUM_LAGS)
}
