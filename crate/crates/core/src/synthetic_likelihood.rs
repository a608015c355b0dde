//! Bayesian synthetic likelihood: Gaussian surrogate for the summary
//! statistics with simulation-estimated moments, sampled by pseudo-marginal
//! Metropolis-Hastings.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SbiError};
use crate::model::{PriorComponent, PriorSpec, Simulator, Theta};
use crate::robust_bsl::AdjustmentVector;
use crate::rng::{RngStream, SimRng};
use crate::summaries::{SummaryStatistic, SummaryVec};

/// Sample mean and unbiased sample covariance of `m` simulated summaries.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentEstimate {
    pub mu: Vec<f64>,
    pub sigma: DMatrix<f64>,
    pub m: usize,
}

impl MomentEstimate {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Moments from a list of summary vectors.
    pub fn from_summaries(summaries: &[SummaryVec]) -> Result<Self> {
        let m = summaries.len();
        let d = summaries.first().map(SummaryVec::dim).ok_or(SbiError::Empty("summaries"))?;
        if m < d + 2 {
            return Err(SbiError::TooFewSamples { needed: d + 2, got: m });
        }
        let mut mu = vec![0.0; d];
        for s in summaries {
            if s.dim() != d {
                return Err(SbiError::DimensionMismatch { expected: d, got: s.dim() });
            }
            for (a, v) in mu.iter_mut().zip(s.as_slice()) {
                *a += v;
            }
        }
        mu.iter_mut().for_each(|a| *a /= m as f64);
        let mut sigma = DMatrix::zeros(d, d);
        for s in summaries {
            let v = s.as_slice();
            for i in 0..d {
                for j in 0..=i {
                    sigma[(i, j)] += (v[i] - mu[i]) * (v[j] - mu[j]);
                }
            }
        }
        for i in 0..d {
            for j in 0..=i {
                let c = sigma[(i, j)] / (m as f64 - 1.0);
                sigma[(i, j)] = c;
                sigma[(j, i)] = c;
            }
        }
        Ok(Self { mu, sigma, m })
    }

    /// Standard deviations `sqrt(diag(sigma))`.
    pub fn std_devs(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.sigma[(i, i)].max(0.0).sqrt()).collect()
    }
}

/// Anything that can produce summary moments at a parameter value.
pub trait MomentSource: Sync {
    fn dim(&self) -> usize;
    fn moments(&self, theta: &Theta, stream: RngStream) -> Result<MomentEstimate>;
}

/// Moments estimated from `m` fresh simulations.
#[derive(Clone, Copy, Debug)]
pub struct SimulatedMoments<S, F> {
    pub simulator: S,
    pub summary: F,
    pub m: usize,
}

impl<S: Simulator, F: SummaryStatistic> MomentSource for SimulatedMoments<S, F> {
    fn dim(&self) -> usize {
        self.summary.dim()
    }

    fn moments(&self, theta: &Theta, stream: RngStream) -> Result<MomentEstimate> {
        estimate_moments(&self.simulator, &self.summary, theta, self.m, stream)
    }
}

/// Simulation `j` uses `stream.child(j)`.
pub fn estimate_moments<S, F>(simulator: &S, summary: &F, theta: &Theta, m: usize, stream: RngStream) -> Result<MomentEstimate>
where
    S: Simulator + ?Sized,
    F: SummaryStatistic + ?Sized,
{
    let d = summary.dim();
    if m < d + 2 {
        return Err(SbiError::TooFewSamples { needed: d + 2, got: m });
    }
    let sums = (0..m as u64)
        .map(|j| summary.summarise(&simulator.simulate(theta, &mut stream.child(j).rng())?))
        .collect::<Result<Vec<_>>>()?;
    MomentEstimate::from_summaries(&sums)
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Multivariate normal log-density. A covariance that fails Cholesky gets
/// diagonal jitter `c * trace / d` for `c = 1e-8, 1e-7, ..., 1e-4`.
pub fn gaussian_logpdf(x: &[f64], mean: &[f64], cov: &DMatrix<f64>) -> Result<f64> {
    let d = x.len();
    if mean.len() != d {
        return Err(SbiError::DimensionMismatch { expected: d, got: mean.len() });
    }
    if cov.nrows() != d || cov.ncols() != d {
        return Err(SbiError::DimensionMismatch { expected: d, got: cov.nrows() });
    }
    let r = DVector::from_iterator(d, x.iter().zip(mean).map(|(a, b)| a - b));
    let chol = match cov.clone().cholesky() {
        Some(c) => c,
        None => {
            let base = cov.trace() / d as f64;
            if !(base > 0.0 && base.is_finite()) {
                return Err(SbiError::SingularCovariance);
            }
            let mut found = None;
            let mut c = 1e-8;
            while c <= 1e-4 * 1.000_001 {
                let jittered = cov + DMatrix::<f64>::identity(d, d) * (c * base);
                if let Some(ch) = jittered.cholesky() {
                    found = Some(ch);
                    break;
                }
                c *= 10.0;
            }
            found.ok_or(SbiError::SingularCovariance)?
        }
    };
    let l = chol.l();
    let z = l.solve_lower_triangular(&r).ok_or(SbiError::SingularCovariance)?;
    let log_det: f64 = 2.0 * (0..d).map(|i| l[(i, i)].ln()).sum::<f64>();
    Ok(-0.5 * (d as f64 * LN_2PI + log_det + z.norm_squared()))
}

/// `log N(s_obs | mu_hat, sigma_hat)`.
pub fn synthetic_loglik(s_obs: &SummaryVec, moments: &MomentEstimate) -> Result<f64> {
    gaussian_logpdf(s_obs.as_slice(), &moments.mu, &moments.sigma)
}

#[derive(Clone, Debug, PartialEq)]
pub struct McmcConfig {
    pub iters: usize,
    pub proposal_scale: f64,
    /// Leading fraction of the chain used for proposal adaptation and discarded downstream.
    pub burn_in_frac: f64,
    pub adapt: bool,
    /// Starting parameter; a prior draw when absent.
    pub init: Option<Theta>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iters: 50_000,
            proposal_scale: 0.1,
            burn_in_frac: 0.2,
            adapt: true,
            init: None,
        }
    }
}

impl McmcConfig {
    pub fn burn_in(&self) -> usize {
        (self.iters as f64 * self.burn_in_frac).floor() as usize
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(SbiError::InvalidParameter("iters must be at least 1".into()));
        }
        if !(self.proposal_scale > 0.0 && self.proposal_scale.is_finite()) {
            return Err(SbiError::InvalidParameter("proposal scale must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in_frac) {
            return Err(SbiError::InvalidParameter("burn-in fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Ordered MCMC draws. All iterations are stored, burn-in included.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub thetas: Vec<Theta>,
    pub gammas: Option<Vec<AdjustmentVector>>,
    pub loglik: Vec<f64>,
    pub accepted: usize,
    pub burn_in: usize,
    pub final_proposal_scale: f64,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Accepted theta moves over all iterations.
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.thetas.len() as f64
    }

    pub fn post_burn_in(&self) -> &[Theta] {
        &self.thetas[self.burn_in.min(self.len())..]
    }

    /// First theta component after burn-in.
    pub fn theta_draws(&self) -> Vec<f64> {
        self.post_burn_in().iter().map(Theta::first).collect()
    }

    /// Component `j` of the adjustment parameters after burn-in.
    pub fn gamma_draws(&self, j: usize) -> Vec<f64> {
        self.gammas
            .as_ref()
            .map(|g| g[self.burn_in.min(g.len())..].iter().map(|v| v.as_slice()[j]).collect())
            .unwrap_or_default()
    }
}

/// Per-iteration random streams: theta proposal, fresh moments, and one per
/// adjustment-parameter slice update.
pub(crate) struct IterationStreams(RngStream);

impl IterationStreams {
    pub(crate) fn new(chain: RngStream, iteration: usize) -> Self {
        Self(chain.child(iteration as u64))
    }
    pub(crate) fn theta(&self) -> RngStream {
        self.0.child(0)
    }
    pub(crate) fn proposal(&self) -> SimRng {
        self.0.child(0).rng()
    }
    pub(crate) fn moments(&self) -> RngStream {
        self.0.child(1)
    }
    pub(crate) fn slice(&self, j: usize) -> SimRng {
        self.0.child(2 + j as u64).rng()
    }
}

/// Random-walk proposal scale tuned in windows during burn-in towards an
/// acceptance rate in [0.2, 0.4]. The scale stays within a factor of 4 of its
/// starting value, since a pseudo-marginal chain's acceptance is capped by
/// likelihood-estimate noise and shrinking the step further does not help.
pub(crate) struct ProposalAdapter {
    pub(crate) scale: f64,
    initial: f64,
    window_accepts: usize,
    window_len: usize,
    enabled: bool,
    burn_in: usize,
}

impl ProposalAdapter {
    const WINDOW: usize = 50;

    pub(crate) fn new(cfg: &McmcConfig) -> Self {
        Self {
            scale: cfg.proposal_scale,
            initial: cfg.proposal_scale,
            window_accepts: 0,
            window_len: 0,
            enabled: cfg.adapt,
            burn_in: cfg.burn_in(),
        }
    }

    pub(crate) fn record(&mut self, iteration: usize, accepted: bool) {
        if !self.enabled || iteration >= self.burn_in {
            return;
        }
        self.window_len += 1;
        self.window_accepts += accepted as usize;
        if self.window_len == Self::WINDOW {
            let rate = self.window_accepts as f64 / Self::WINDOW as f64;
            if rate < 0.2 {
                self.scale *= 0.8;
            } else if rate > 0.4 {
                self.scale *= 1.25;
            }
            self.scale = self.scale.clamp(0.25 * self.initial, 4.0 * self.initial);
            self.window_len = 0;
            self.window_accepts = 0;
        }
    }
}

/// Gaussian random walk, reflected into the prior's bounding box.
pub(crate) fn propose(prior: &PriorSpec, theta: &Theta, scale: f64, rng: &mut SimRng) -> Theta {
    let values = theta
        .as_slice()
        .iter()
        .zip(prior.components())
        .map(|(&x, c)| {
            let step: f64 = rng.sample(StandardNormal);
            match *c {
                PriorComponent::Uniform { lo, hi } => reflect(x + scale * step, lo, hi),
            }
        })
        .collect();
    Theta::new(values).expect("finite proposal")
}

fn reflect(mut x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    // fold onto [lo, lo + 2 width) then mirror the upper half
    let period = 2.0 * width;
    x = (x - lo).rem_euclid(period);
    if x > width {
        x = period - x;
    }
    lo + x
}

pub(crate) fn initial_theta(prior: &PriorSpec, cfg: &McmcConfig, stream: RngStream) -> Result<Theta> {
    let theta = match &cfg.init {
        Some(t) => t.clone(),
        None => prior.sample(&mut stream.rng()),
    };
    if !prior.contains(&theta) {
        return Err(SbiError::OutsideSupport);
    }
    Ok(theta)
}

/// Best of `candidates` prior draws by estimated synthetic likelihood, for
/// use as [`McmcConfig::init`]. A chain started in the far tail can hold on
/// to an overestimated likelihood for a very long time; starting in a
/// plausible region avoids that. Candidate `i` is drawn from
/// `stream.child(2i)` and scored with moments from `stream.child(2i + 1)`.
pub fn pilot_init<M: MomentSource + ?Sized>(
    prior: &PriorSpec,
    s_obs: &SummaryVec,
    source: &M,
    candidates: usize,
    stream: RngStream,
) -> Result<Theta> {
    if candidates == 0 {
        return Err(SbiError::InvalidParameter("need at least one pilot candidate".into()));
    }
    let mut best: Option<(f64, Theta)> = None;
    for i in 0..candidates as u64 {
        let theta = prior.sample(&mut stream.child(2 * i).rng());
        let ll = source
            .moments(&theta, stream.child(2 * i + 1))
            .and_then(|m| synthetic_loglik(s_obs, &m))
            .unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(b, _)| ll > *b) {
            best = Some((ll, theta));
        }
    }
    Ok(best.expect("at least one candidate").1)
}

/// MH acceptance with `-inf`/NaN handling: an invalid proposal is always rejected.
pub(crate) fn mh_accept(log_target_new: f64, log_target_old: f64, rng: &mut SimRng) -> bool {
    let u: f64 = rng.random();
    if log_target_new.is_nan() || log_target_new == f64::NEG_INFINITY {
        return false;
    }
    if log_target_old == f64::NEG_INFINITY {
        return true;
    }
    u.ln() < log_target_new - log_target_old
}

/// Pseudo-marginal MH over theta with the synthetic likelihood. The current
/// state's likelihood estimate is kept until a proposal is accepted.
pub fn bsl_mcmc<M: MomentSource + ?Sized>(
    prior: &PriorSpec,
    s_obs: &SummaryVec,
    source: &M,
    cfg: &McmcConfig,
    stream: RngStream,
) -> Result<Chain> {
    cfg.validate()?;
    if source.dim() != s_obs.dim() {
        return Err(SbiError::DimensionMismatch { expected: source.dim(), got: s_obs.dim() });
    }
    let init = IterationStreams::new(stream, 0);
    let mut theta = initial_theta(prior, cfg, init.theta())?;
    let loglik_at = |t: &Theta, s: RngStream| -> Result<f64> {
        Ok(source
            .moments(t, s)
            .and_then(|m| synthetic_loglik(s_obs, &m))
            .unwrap_or(f64::NEG_INFINITY))
    };
    let mut ll = loglik_at(&theta, init.moments())?;
    let mut lp = prior.logpdf(&theta);
    let mut adapter = ProposalAdapter::new(cfg);
    let mut chain = Chain {
        thetas: Vec::with_capacity(cfg.iters),
        gammas: None,
        loglik: Vec::with_capacity(cfg.iters),
        accepted: 0,
        burn_in: cfg.burn_in(),
        final_proposal_scale: cfg.proposal_scale,
    };
    for t in 0..cfg.iters {
        let streams = IterationStreams::new(stream, t + 1);
        let mut prng = streams.proposal();
        let proposal = propose(prior, &theta, adapter.scale, &mut prng);
        let lp_new = prior.logpdf(&proposal);
        let ll_new = if lp_new == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            loglik_at(&proposal, streams.moments())?
        };
        let accept = mh_accept(ll_new + lp_new, ll + lp, &mut prng);
        if accept {
            theta = proposal;
            ll = ll_new;
            lp = lp_new;
            chain.accepted += 1;
        }
        adapter.record(t, accept);
        chain.thetas.push(theta.clone());
        chain.loglik.push(ll);
    }
    chain.final_proposal_scale = adapter.scale;
    Ok(chain)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Moments that ignore theta.
    pub struct FlatMoments(pub MomentEstimate);

    impl MomentSource for FlatMoments {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn moments(&self, _: &Theta, _: RngStream) -> Result<MomentEstimate> {
            Ok(self.0.clone())
        }
    }

    /// Exact large-sample moments of the two MA(1) autocovariances for series length `len`.
    pub struct AnalyticMa1(pub usize);

    impl MomentSource for AnalyticMa1 {
        fn dim(&self) -> usize {
            2
        }
        fn moments(&self, theta: &Theta, _: RngStream) -> Result<MomentEstimate> {
            let t = theta.first();
            let n = self.0 as f64;
            let (g0, g1) = (1.0 + t * t, t);
            // Bartlett: var(zeta_0) ~ 2(g0^2 + 2 g1^2)/n, var(zeta_1) ~ (g0^2 + 3 g1^2)/n, cov ~ 4 g0 g1 / n
            let v0 = 2.0 * (g0 * g0 + 2.0 * g1 * g1) / n;
            let v1 = (g0 * g0 + 3.0 * g1 * g1) / n;
            let c = 4.0 * g0 * g1 / n;
            Ok(MomentEstimate {
                mu: vec![g0, g1],
                sigma: DMatrix::from_row_slice(2, 2, &[v0, c, c, v1]),
                m: usize::MAX,
            })
        }
    }
}
