//! Parameters, priors and the two benchmark data-generating processes.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SbiError};
use crate::rng::{RngStream, SimRng};

/// Model-parameter vector. Finite by construction; box constraints live on
/// the [`PriorSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct Theta(Vec<f64>);

impl Theta {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(SbiError::Empty("theta"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SbiError::InvalidParameter("theta must be finite".into()));
        }
        Ok(Self(values))
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(vec![value])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// First component; the benchmark parameter is scalar.
    pub fn first(&self) -> f64 {
        self.0[0]
    }
}

/// Observed or simulated series.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries(Vec<f64>);

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(SbiError::SeriesTooShort {
                needed: 2,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SbiError::InvalidParameter("series values must be finite".into()));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Stochastic-volatility parameters: log-volatility `z_t = omega + kappa z_{t-1} + sigma_v v_t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvParams {
    pub omega: f64,
    pub kappa: f64,
    pub sigma_v: f64,
}

impl SvParams {
    pub fn new(omega: f64, kappa: f64, sigma_v: f64) -> Result<Self> {
        let p = Self {
            omega,
            kappa,
            sigma_v,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters used to generate the benchmark's observed data.
    pub fn benchmark() -> Self {
        Self {
            omega: -0.76,
            kappa: 0.90,
            sigma_v: 0.36,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega.is_finite() {
            return Err(SbiError::InvalidParameter("omega must be finite".into()));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(SbiError::InvalidParameter(format!(
                "kappa must lie in (0, 1), got {}",
                self.kappa
            )));
        }
        if !(self.sigma_v > 0.0 && self.sigma_v < 1.0) {
            return Err(SbiError::InvalidParameter(format!(
                "sigma_v must lie in (0, 1), got {}",
                self.sigma_v
            )));
        }
        Ok(())
    }

    /// Mean and variance of the stationary log-volatility.
    pub fn stationary_log_vol(&self) -> (f64, f64) {
        (
            self.omega / (1.0 - self.kappa),
            self.sigma_v * self.sigma_v / (1.0 - self.kappa * self.kappa),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PriorComponent {
    Uniform { lo: f64, hi: f64 },
}

impl PriorComponent {
    fn logpdf(&self, x: f64) -> f64 {
        match *self {
            PriorComponent::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            PriorComponent::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            PriorComponent::Uniform { lo, hi } => (lo, hi),
        }
    }
}

/// Independent product prior over the components of [`Theta`].
#[derive(Clone, Debug, PartialEq)]
pub struct PriorSpec {
    components: Vec<PriorComponent>,
}

impl PriorSpec {
    pub fn new(components: Vec<PriorComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(SbiError::Empty("prior components"));
        }
        for c in &components {
            match *c {
                PriorComponent::Uniform { lo, hi } => {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(SbiError::InvalidParameter(format!(
                            "uniform prior needs finite lo < hi, got [{lo}, {hi}]"
                        )));
                    }
                }
            }
        }
        Ok(Self { components })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![PriorComponent::Uniform { lo, hi }])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[PriorComponent] {
        &self.components
    }

    pub fn logpdf(&self, theta: &Theta) -> f64 {
        if theta.dim() != self.dim() {
            return f64::NEG_INFINITY;
        }
        self.components
            .iter()
            .zip(theta.as_slice())
            .map(|(c, &x)| c.logpdf(x))
            .sum()
    }

    pub fn contains(&self, theta: &Theta) -> bool {
        self.logpdf(theta) > f64::NEG_INFINITY
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Theta {
        Theta(self.components.iter().map(|c| c.sample(rng)).collect())
    }
}

/// `n` i.i.d. prior draws from one stream.
pub fn prior_sample(prior: &PriorSpec, n: usize, stream: RngStream) -> Result<Vec<Theta>> {
    if n == 0 {
        return Err(SbiError::InvalidParameter("need at least one prior draw".into()));
    }
    let mut rng = stream.rng();
    Ok((0..n).map(|_| prior.sample(&mut rng)).collect())
}

pub fn prior_logpdf(prior: &PriorSpec, theta: &Theta) -> f64 {
    prior.logpdf(theta)
}

/// In-process simulator contract: a pure function of parameters and randomness.
pub trait Simulator: Sync {
    fn simulate(&self, theta: &Theta, rng: &mut SimRng) -> Result<TimeSeries>;
}

/// Assumed model: `y_t = w_t + theta w_{t-1}` with standard normal noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ma1 {
    pub len: usize,
}

impl Simulator for Ma1 {
    fn simulate(&self, theta: &Theta, rng: &mut SimRng) -> Result<TimeSeries> {
        let t = theta.first();
        check_ma1(t, self.len)?;
        let mut prev: f64 = rng.sample(StandardNormal);
        let mut out = Vec::with_capacity(self.len);
        for _ in 0..self.len {
            let w: f64 = rng.sample(StandardNormal);
            out.push(w + t * prev);
            prev = w;
        }
        Ok(TimeSeries(out))
    }
}

fn check_ma1(theta: f64, len: usize) -> Result<()> {
    if !theta.is_finite() || theta.abs() > 1.0 {
        return Err(SbiError::InvalidParameter(format!(
            "MA(1) coefficient must be finite with |theta| <= 1, got {theta}"
        )));
    }
    if len < 2 {
        return Err(SbiError::SeriesTooShort { needed: 2, got: len });
    }
    Ok(())
}

pub fn simulate_ma1(theta: &Theta, len: usize, stream: RngStream) -> Result<TimeSeries> {
    Ma1 { len }.simulate(theta, &mut stream.rng())
}

/// MA(1) driven by a supplied noise sequence `w_0, ..., w_T`.
pub fn ma1_from_noise(theta: f64, noise: &[f64]) -> Result<TimeSeries> {
    check_ma1(theta, noise.len().saturating_sub(1))?;
    TimeSeries::new(noise.windows(2).map(|w| w[1] + theta * w[0]).collect())
}

/// True process of the benchmark. Ignores `theta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StochasticVolatility {
    pub params: SvParams,
    pub len: usize,
}

impl Simulator for StochasticVolatility {
    fn simulate(&self, _theta: &Theta, rng: &mut SimRng) -> Result<TimeSeries> {
        sv_series(&self.params, self.len, rng)
    }
}

fn sv_series(p: &SvParams, len: usize, rng: &mut SimRng) -> Result<TimeSeries> {
    p.validate()?;
    if len < 2 {
        return Err(SbiError::SeriesTooShort { needed: 2, got: len });
    }
    let (mean, var) = p.stationary_log_vol();
    let mut z = mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let v: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.sample(StandardNormal);
        z = p.omega + p.kappa * z + p.sigma_v * v;
        out.push((0.5 * z).exp() * u);
    }
    Ok(TimeSeries(out))
}

pub fn simulate_sv(p: &SvParams, len: usize, stream: RngStream) -> Result<TimeSeries> {
    sv_series(p, len, &mut stream.rng())
}
