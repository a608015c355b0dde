//! Summary statistics, binding functions and the incompatibility search.

use crate::error::{Result, SbiError};
use crate::model::{SvParams, Theta, TimeSeries};

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryVec(Vec<f64>);

impl SummaryVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SbiError::Empty("summary vector"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SbiError::InvalidParameter("summaries must be finite".into()));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Maps a dataset to a fixed-length summary vector.
pub trait SummaryStatistic: Sync {
    fn dim(&self) -> usize;
    fn summarise(&self, ts: &TimeSeries) -> Result<SummaryVec>;
}

/// Autocovariances at lags `0..num_lags`, normalised by the series length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Autocovariances {
    pub num_lags: usize,
}

impl SummaryStatistic for Autocovariances {
    fn dim(&self) -> usize {
        self.num_lags
    }

    fn summarise(&self, ts: &TimeSeries) -> Result<SummaryVec> {
        autocov_summaries(ts, self.num_lags)
    }
}

/// `zeta_j = (1/T) sum_{i>j} x_i x_{i-j}` for `j = 0..num_lags`. Not mean-centred.
pub fn autocov_summaries(ts: &TimeSeries, num_lags: usize) -> Result<SummaryVec> {
    let x = ts.as_slice();
    if num_lags == 0 {
        return Err(SbiError::InvalidParameter("need at least one lag".into()));
    }
    if num_lags >= x.len() {
        return Err(SbiError::SeriesTooShort {
            needed: num_lags + 1,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let out = (0..num_lags)
        .map(|j| x[j..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / n)
        .collect();
    SummaryVec::new(out)
}

/// Large-sample limit of the two autocovariances under MA(1): `(1 + theta^2, theta)`.
pub fn binding_ma1(theta: &Theta) -> Result<SummaryVec> {
    let t = theta.first();
    if t.abs() > 1.0 {
        return Err(SbiError::InvalidParameter(format!("|theta| must be <= 1, got {t}")));
    }
    SummaryVec::new(vec![1.0 + t * t, t])
}

/// Expected observed summaries under the stochastic-volatility process:
/// `E[y^2] = exp(mean + var / 2)` of the stationary log-volatility, and zero
/// lag-1 autocovariance.
pub fn binding_star_sv(p: &SvParams) -> Result<SummaryVec> {
    if p.kappa == 1.0 {
        return Err(SbiError::InvalidParameter("kappa = 1 has no stationary law".into()));
    }
    p.validate()?;
    let (mean, var) = p.stationary_log_vol();
    SummaryVec::new(vec![(mean + 0.5 * var).exp(), 0.0])
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompatibilityReport {
    pub epsilon_star: f64,
    pub theta_star: Theta,
    pub distance_name: String,
}

/// Grid search for `inf_theta d(b_star, b(theta))` and its minimiser. The first
/// grid point attaining the minimum wins ties.
pub fn epsilon_star<B, D>(
    b_star: &SummaryVec,
    binding: B,
    grid: &[Theta],
    distance: D,
    distance_name: &str,
) -> Result<CompatibilityReport>
where
    B: Fn(&Theta) -> Result<SummaryVec>,
    D: Fn(&SummaryVec, &SummaryVec) -> Result<f64>,
{
    if grid.is_empty() {
        return Err(SbiError::Empty("theta grid"));
    }
    let mut best: Option<(f64, &Theta)> = None;
    for theta in grid {
        let d = distance(b_star, &binding(theta)?)?;
        if best.is_none_or(|(b, _)| d < b) {
            best = Some((d, theta));
        }
    }
    let (epsilon_star, theta) = best.expect("grid nonempty");
    Ok(CompatibilityReport {
        epsilon_star,
        theta_star: theta.clone(),
        distance_name: distance_name.to_string(),
    })
}

/// `n` evenly spaced scalar parameters from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<Theta> {
    match n {
        0 => Vec::new(),
        1 => vec![Theta::scalar(0.5 * (lo + hi)).expect("finite")],
        _ => (0..n)
            .map(|i| {
                let x = if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                };
                Theta::scalar(x).expect("finite")
            })
            .collect(),
    }
}

/// Golden-section refinement of a scalar minimiser inside `[lo, hi]`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}
