//! Robust synthetic likelihood with adjustment parameters.
//!
//! Mean adjustment shifts the simulated mean by `sigma_hat * gamma`; variance
//! adjustment inflates the diagonal by `Sigma_ii * gamma_i^2`. Each `gamma_j`
//! is updated by slice sampling on the cached moments, followed by a
//! pseudo-marginal MH step for theta.

use rand::Rng;

use crate::error::{Result, SbiError};
use crate::model::PriorSpec;
use crate::rng::RngStream;
use crate::slice::{slice_step, DEFAULT_MAX_STEPS, DEFAULT_WIDTH};
use crate::summaries::SummaryVec;
use crate::synthetic_likelihood::{
    gaussian_logpdf, initial_theta, mh_accept, propose, synthetic_loglik, Chain, IterationStreams, McmcConfig,
    MomentEstimate, MomentSource, ProposalAdapter,
};

#[derive(Clone, Debug, PartialEq)]
pub struct AdjustmentVector(Vec<f64>);

impl AdjustmentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SbiError::InvalidParameter("adjustment parameters must be finite".into()));
        }
        Ok(Self(values))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    fn with(&self, j: usize, value: f64) -> Self {
        let mut v = self.0.clone();
        v[j] = value;
        Self(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RbslVariant {
    Mean,
    Variance,
}

impl RbslVariant {
    pub fn name(&self) -> &'static str {
        match self {
            RbslVariant::Mean => "rbsl-m",
            RbslVariant::Variance => "rbsl-v",
        }
    }

    /// Laplace prior for mean shifts, exponential for variance inflation.
    pub fn default_prior(&self, lambda: f64) -> Result<GammaPrior> {
        match self {
            RbslVariant::Mean => GammaPrior::laplace(lambda),
            RbslVariant::Variance => GammaPrior::exponential(lambda),
        }
    }
}

pub const DEFAULT_LAMBDA: f64 = 0.5;

/// Independent per-component prior on the adjustment parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GammaPrior {
    /// Laplace(0, lambda), lambda the scale.
    Laplace { lambda: f64 },
    /// Exponential with rate lambda.
    Exponential { lambda: f64 },
}

impl GammaPrior {
    pub fn laplace(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(GammaPrior::Laplace { lambda })
    }

    pub fn exponential(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(GammaPrior::Exponential { lambda })
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            GammaPrior::Laplace { lambda } | GammaPrior::Exponential { lambda } => lambda,
        }
    }

    pub fn logpdf(&self, x: f64) -> f64 {
        match *self {
            GammaPrior::Laplace { lambda } => -(2.0 * lambda).ln() - x.abs() / lambda,
            GammaPrior::Exponential { lambda } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    lambda.ln() - lambda * x
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            GammaPrior::Laplace { lambda } => {
                if x < 0.0 {
                    0.5 * (x / lambda).exp()
                } else {
                    1.0 - 0.5 * (-x / lambda).exp()
                }
            }
            GammaPrior::Exponential { lambda } => {
                if x < 0.0 {
                    0.0
                } else {
                    -(-lambda * x).exp_m1()
                }
            }
        }
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match *self {
            GammaPrior::Laplace { lambda } => {
                let v = u - 0.5;
                -lambda * v.signum() * (1.0 - 2.0 * v.abs()).ln()
            }
            GammaPrior::Exponential { lambda } => -(1.0 - u).ln() / lambda,
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(SbiError::InvalidParameter(format!("lambda must be positive, got {lambda}")))
    }
}

pub fn gamma_log_prior(prior: &GammaPrior, gamma: &AdjustmentVector) -> f64 {
    gamma.as_slice().iter().map(|&g| prior.logpdf(g)).sum()
}

fn check_dims(s_obs: &SummaryVec, moments: &MomentEstimate, gamma: &AdjustmentVector) -> Result<()> {
    let d = moments.dim();
    for got in [s_obs.dim(), gamma.dim()] {
        if got != d {
            return Err(SbiError::DimensionMismatch { expected: d, got });
        }
    }
    Ok(())
}

/// Gaussian log-density with mean `mu_hat + sigma_hat * gamma`.
pub fn rbsl_m_loglik(s_obs: &SummaryVec, moments: &MomentEstimate, gamma: &AdjustmentVector) -> Result<f64> {
    check_dims(s_obs, moments, gamma)?;
    let shifted: Vec<f64> = moments
        .mu
        .iter()
        .zip(moments.std_devs())
        .zip(gamma.as_slice())
        .map(|((m, s), g)| m + s * g)
        .collect();
    gaussian_logpdf(s_obs.as_slice(), &shifted, &moments.sigma)
}

/// Gaussian log-density with covariance `Sigma + diag(Sigma_ii * gamma_i^2)`.
pub fn rbsl_v_loglik(s_obs: &SummaryVec, moments: &MomentEstimate, gamma: &AdjustmentVector) -> Result<f64> {
    check_dims(s_obs, moments, gamma)?;
    if let Some(g) = gamma.as_slice().iter().find(|&&g| g < 0.0) {
        return Err(SbiError::InvalidParameter(format!("variance adjustment must be non-negative, got {g}")));
    }
    let mut v = moments.sigma.clone();
    for (i, g) in gamma.as_slice().iter().enumerate() {
        v[(i, i)] += moments.sigma[(i, i)] * g * g;
    }
    gaussian_logpdf(s_obs.as_slice(), &moments.mu, &v)
}

pub fn rbsl_loglik(variant: RbslVariant, s_obs: &SummaryVec, moments: &MomentEstimate, gamma: &AdjustmentVector) -> Result<f64> {
    match variant {
        RbslVariant::Mean => rbsl_m_loglik(s_obs, moments, gamma),
        RbslVariant::Variance => rbsl_v_loglik(s_obs, moments, gamma),
    }
}

/// One slice update of `gamma_j` against its full conditional at fixed moments.
pub fn slice_update_gamma<R: Rng + ?Sized>(
    j: usize,
    gamma: &AdjustmentVector,
    variant: RbslVariant,
    moments: &MomentEstimate,
    s_obs: &SummaryVec,
    prior: &GammaPrior,
    rng: &mut R,
) -> f64 {
    slice_update_with(j, gamma, |g| rbsl_loglik(variant, s_obs, moments, g).unwrap_or(f64::NEG_INFINITY), prior, rng)
}

/// Slice update of `gamma_j` for an arbitrary log-likelihood in gamma.
pub fn slice_update_with<L, R>(j: usize, gamma: &AdjustmentVector, loglik: L, prior: &GammaPrior, rng: &mut R) -> f64
where
    L: Fn(&AdjustmentVector) -> f64,
    R: Rng + ?Sized,
{
    let log_f = |x: f64| {
        let lp = prior.logpdf(x);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        loglik(&gamma.with(j, x)) + lp
    };
    slice_step(gamma.as_slice()[j], log_f, DEFAULT_WIDTH, DEFAULT_MAX_STEPS, rng)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RbslSpec {
    pub variant: RbslVariant,
    pub gamma_prior: GammaPrior,
    /// When false, gamma stays at zero and the chain is plain BSL.
    pub update_gamma: bool,
}

impl RbslSpec {
    pub fn new(variant: RbslVariant, lambda: f64) -> Result<Self> {
        Ok(Self {
            variant,
            gamma_prior: variant.default_prior(lambda)?,
            update_gamma: true,
        })
    }

    fn validate(&self) -> Result<()> {
        check_lambda(self.gamma_prior.lambda())?;
        match (self.variant, self.gamma_prior) {
            (RbslVariant::Variance, GammaPrior::Laplace { .. }) => Err(SbiError::InvalidParameter(
                "variance adjustment needs a non-negative prior".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// MCMC over (theta, gamma). Uses the same per-iteration stream layout as
/// [`crate::synthetic_likelihood::bsl_mcmc`], so with `update_gamma = false`
/// both produce identical chains from one stream.
pub fn rbsl_mcmc<M: MomentSource + ?Sized>(
    spec: &RbslSpec,
    prior: &PriorSpec,
    s_obs: &SummaryVec,
    source: &M,
    cfg: &McmcConfig,
    stream: RngStream,
) -> Result<Chain> {
    cfg.validate()?;
    spec.validate()?;
    let d = source.dim();
    if d != s_obs.dim() {
        return Err(SbiError::DimensionMismatch { expected: d, got: s_obs.dim() });
    }
    let loglik = |m: &Option<MomentEstimate>, g: &AdjustmentVector| -> f64 {
        m.as_ref()
            .and_then(|m| {
                if spec.update_gamma {
                    rbsl_loglik(spec.variant, s_obs, m, g).ok()
                } else {
                    synthetic_loglik(s_obs, m).ok()
                }
            })
            .unwrap_or(f64::NEG_INFINITY)
    };

    let init = IterationStreams::new(stream, 0);
    let mut theta = initial_theta(prior, cfg, init.theta())?;
    let mut gamma = AdjustmentVector::zeros(d);
    let mut moments = source.moments(&theta, init.moments()).ok();
    let mut ll = loglik(&moments, &gamma);
    let mut lp = prior.logpdf(&theta);
    let mut adapter = ProposalAdapter::new(cfg);
    let mut chain = Chain {
        thetas: Vec::with_capacity(cfg.iters),
        gammas: Some(Vec::with_capacity(cfg.iters)),
        loglik: Vec::with_capacity(cfg.iters),
        accepted: 0,
        burn_in: cfg.burn_in(),
        final_proposal_scale: cfg.proposal_scale,
    };

    for t in 0..cfg.iters {
        let streams = IterationStreams::new(stream, t + 1);
        if spec.update_gamma {
            if let Some(m) = &moments {
                for j in 0..d {
                    let g = slice_update_gamma(j, &gamma, spec.variant, m, s_obs, &spec.gamma_prior, &mut streams.slice(j));
                    gamma = gamma.with(j, g);
                }
                ll = loglik(&moments, &gamma);
            }
        }

        let mut prng = streams.proposal();
        let proposal = propose(prior, &theta, adapter.scale, &mut prng);
        let lp_new = prior.logpdf(&proposal);
        let (m_new, ll_new) = if lp_new == f64::NEG_INFINITY {
            (None, f64::NEG_INFINITY)
        } else {
            let m = source.moments(&proposal, streams.moments()).ok();
            let l = loglik(&m, &gamma);
            (m, l)
        };
        let accept = mh_accept(ll_new + lp_new, ll + lp, &mut prng);
        if accept {
            theta = proposal;
            moments = m_new;
            ll = ll_new;
            lp = lp_new;
            chain.accepted += 1;
        }
        adapter.record(t, accept);
        chain.thetas.push(theta.clone());
        if let Some(g) = chain.gammas.as_mut() {
            g.push(gamma.clone());
        }
        chain.loglik.push(ll);
    }
    chain.final_proposal_scale = adapter.scale;
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Ma1, Theta};
    use crate::stats;
    use crate::summaries::Autocovariances;
    use crate::synthetic_likelihood::test_support::{AnalyticMa1, FlatMoments};
    use crate::synthetic_likelihood::{bsl_mcmc, SimulatedMoments};
    use nalgebra::DMatrix;

    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

    fn sv(v: &[f64]) -> SummaryVec {
        SummaryVec::new(v.to_vec()).unwrap()
    }

    fn gv(v: &[f64]) -> AdjustmentVector {
        AdjustmentVector::new(v.to_vec()).unwrap()
    }

    fn moments(mu: &[f64], cov: &[f64]) -> MomentEstimate {
        let d = mu.len();
        MomentEstimate { mu: mu.to_vec(), sigma: DMatrix::from_row_slice(d, d, cov), m: 100 }
    }

    #[test]
    fn mean_adjustment_values() {
        let m = moments(&[0.0], &[1.0]);
        let v = rbsl_m_loglik(&sv(&[2.0]), &m, &gv(&[2.0])).unwrap();
        assert!((v + HALF_LN_2PI).abs() < 1e-14);

        let m2 = moments(&[1.0, 0.5], &[4.0, 0.6, 0.6, 0.25]);
        let s = sv(&[0.2, 0.9]);
        assert_eq!(rbsl_m_loglik(&s, &m2, &AdjustmentVector::zeros(2)).unwrap(), synthetic_loglik(&s, &m2).unwrap());
        // gamma putting the mean on the observation is the maximiser
        let best = gv(&[(0.2 - 1.0) / 2.0, (0.9 - 0.5) / 0.5]);
        let top = rbsl_m_loglik(&s, &m2, &best).unwrap();
        for dg in [[0.01, 0.0], [0.0, -0.01], [0.05, 0.05], [-0.2, 0.1]] {
            let g = gv(&[best.as_slice()[0] + dg[0], best.as_slice()[1] + dg[1]]);
            assert!(rbsl_m_loglik(&s, &m2, &g).unwrap() < top);
        }
    }

    #[test]
    fn variance_adjustment_values() {
        let m = moments(&[0.0], &[1.0]);
        let v = rbsl_v_loglik(&sv(&[0.0]), &m, &gv(&[1.0])).unwrap();
        assert!((v + 0.5 * (4.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
        let s = sv(&[0.0]);
        assert_eq!(rbsl_v_loglik(&s, &m, &gv(&[0.0])).unwrap(), synthetic_loglik(&s, &m).unwrap());
        let mut prev = f64::INFINITY;
        for g in [0.0, 0.1, 0.5, 1.0, 3.0] {
            let l = rbsl_v_loglik(&s, &m, &gv(&[g])).unwrap();
            assert!(l < prev);
            prev = l;
        }
        assert!(rbsl_v_loglik(&s, &m, &gv(&[-0.1])).is_err());
    }

    #[test]
    fn prior_values() {
        let lap = GammaPrior::laplace(0.5).unwrap();
        assert_eq!(gamma_log_prior(&lap, &gv(&[0.0])), 0.0);
        let slope = (lap.logpdf(0.3) - lap.logpdf(1.3)) / 1.0;
        assert!((slope - 2.0).abs() < 1e-12);
        assert!((lap.logpdf(-0.7) - lap.logpdf(0.7)).abs() < 1e-15);
        let exp = GammaPrior::exponential(0.5).unwrap();
        assert_eq!(gamma_log_prior(&exp, &gv(&[0.2, -0.01])), f64::NEG_INFINITY);
        assert!((lap.cdf(3.0) - 0.998_760_62).abs() < 1e-8);
        assert!(GammaPrior::laplace(0.0).is_err());
        assert!(GammaPrior::exponential(-1.0).is_err());
    }

    #[test]
    fn prior_sampling_matches_cdf() {
        let mut rng = RngStream::new(9, 0).rng();
        for p in [GammaPrior::laplace(0.5).unwrap(), GammaPrior::exponential(0.5).unwrap()] {
            let x: Vec<f64> = (0..20_000).map(|_| p.sample(&mut rng)).collect();
            let d = stats::ks_one_sample(&x, |v| p.cdf(v)).unwrap();
            assert!(stats::ks_pvalue(d, x.len() as f64) > 0.01);
        }
    }

    fn slice_chain(variant: RbslVariant, prior: GammaPrior, m: &MomentEstimate, s: &SummaryVec, n: usize, thin: usize) -> Vec<f64> {
        let mut rng = RngStream::new(11, 0).rng();
        let mut g = AdjustmentVector::zeros(1);
        let mut out = Vec::with_capacity(n);
        for i in 0..n * thin {
            let x = slice_update_gamma(0, &g, variant, m, s, &prior, &mut rng);
            g = gv(&[x]);
            if i % thin == thin - 1 {
                out.push(x);
            }
        }
        out
    }

    #[test]
    fn slice_updates_on_gaussian_conditional_match_grid() {
        // likelihood N(s | mu + g, 1) times Laplace(0, 0.5)
        let m = moments(&[0.0], &[1.0]);
        let s = sv(&[1.5]);
        let prior = GammaPrior::laplace(0.5).unwrap();
        let draws = slice_chain(RbslVariant::Mean, prior, &m, &s, 20_000, 2);
        let grid: Vec<f64> = (0..20_001).map(|i| -8.0 + 16.0 * i as f64 / 20_000.0).collect();
        let dens: Vec<f64> = grid
            .iter()
            .map(|&g| (rbsl_m_loglik(&s, &m, &gv(&[g])).unwrap() + prior.logpdf(g)).exp())
            .collect();
        let total: f64 = dens.iter().sum();
        let mut cdf = Vec::with_capacity(dens.len());
        let mut acc = 0.0;
        for v in &dens {
            acc += v / total;
            cdf.push(acc);
        }
        let f = |x: f64| {
            let k = grid.partition_point(|&g| g <= x);
            if k == 0 { 0.0 } else { cdf[k - 1] }
        };
        let d = stats::ks_one_sample(&draws, f).unwrap();
        assert!(d < 0.05, "KS {d}");
    }

    fn flat_source() -> FlatMoments {
        FlatMoments(moments(&[0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]))
    }

    #[test]
    fn frozen_gamma_reproduces_bsl() {
        let prior = PriorSpec::uniform(-1.0, 1.0).unwrap();
        let src = SimulatedMoments { simulator: Ma1 { len: 100 }, summary: Autocovariances { num_lags: 2 }, m: 30 };
        let obs = sv(&[1.1, 0.3]);
        let cfg = McmcConfig { iters: 400, ..Default::default() };
        let bsl = bsl_mcmc(&prior, &obs, &src, &cfg, RngStream::new(21, 0)).unwrap();
        for variant in [RbslVariant::Mean, RbslVariant::Variance] {
            let spec = RbslSpec { update_gamma: false, ..RbslSpec::new(variant, 0.5).unwrap() };
            let rbsl = rbsl_mcmc(&spec, &prior, &obs, &src, &cfg, RngStream::new(21, 0)).unwrap();
            assert_eq!(rbsl.thetas, bsl.thetas);
            assert_eq!(rbsl.loglik, bsl.loglik);
            assert_eq!(rbsl.accepted, bsl.accepted);
            assert!(rbsl.gammas.unwrap().iter().all(|g| g.as_slice() == [0.0, 0.0]));
        }
    }

    struct Scaled<M>(M, f64);

    impl<M: MomentSource> MomentSource for Scaled<M> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn moments(&self, theta: &Theta, stream: RngStream) -> Result<MomentEstimate> {
            let mut m = self.0.moments(theta, stream)?;
            m.mu.iter_mut().for_each(|v| *v *= self.1);
            m.sigma *= self.1 * self.1;
            Ok(m)
        }
    }

    #[test]
    fn mean_adjustment_is_scale_equivariant() {
        let prior = PriorSpec::uniform(-1.0, 1.0).unwrap();
        let src = SimulatedMoments { simulator: Ma1 { len: 100 }, summary: Autocovariances { num_lags: 2 }, m: 40 };
        let obs = [0.5, 0.1];
        let cfg = McmcConfig { iters: 3_000, ..Default::default() };
        let spec = RbslSpec::new(RbslVariant::Mean, 0.5).unwrap();
        let a = rbsl_mcmc(&spec, &prior, &sv(&obs), &src, &cfg, RngStream::new(31, 0)).unwrap();
        let b = rbsl_mcmc(&spec, &prior, &sv(&[2.0 * obs[0], 2.0 * obs[1]]), &Scaled(src, 2.0), &cfg, RngStream::new(31, 0)).unwrap();
        for j in 0..2 {
            let d = stats::ks_two_sample(&a.gamma_draws(j), &b.gamma_draws(j)).unwrap();
            assert!(d < 0.05, "gamma {j}: KS {d}");
        }
        let d = stats::ks_two_sample(&a.theta_draws(), &b.theta_draws()).unwrap();
        assert!(d < 0.05, "theta KS {d}");
    }

    fn prior_only_draws(prior: GammaPrior, start: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0).rng();
        let mut g = gv(&[start, 0.0]);
        (0..n)
            .map(|_| {
                let x = slice_update_with(0, &g, |_| -3.0, &prior, &mut rng);
                g = gv(&[x, 0.0]);
                x
            })
            .collect()
    }

    #[test]
    fn flat_likelihood_slice_draws_follow_prior() {
        let lap = GammaPrior::laplace(0.5).unwrap();
        let x: Vec<f64> = prior_only_draws(lap, 0.0, 100_000, 41).into_iter().step_by(5).collect();
        assert!(stats::mean(&x).abs() < 0.03);
        assert!((stats::variance(&x) - 0.5).abs() < 0.03);
        let exp = GammaPrior::exponential(0.5).unwrap();
        let y: Vec<f64> = prior_only_draws(exp, 1.0, 100_000, 42).into_iter().step_by(5).collect();
        assert!((stats::mean(&y) - 2.0).abs() < 0.1);
        assert!(y.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn flat_source_keeps_gamma_on_support() {
        let prior = PriorSpec::uniform(-1.0, 1.0).unwrap();
        let cfg = McmcConfig { iters: 2_000, ..Default::default() };
        let spec = RbslSpec::new(RbslVariant::Variance, 0.5).unwrap();
        let chain = rbsl_mcmc(&spec, &prior, &sv(&[0.0, 0.0]), &flat_source(), &cfg, RngStream::new(41, 0)).unwrap();
        assert!(chain.gamma_draws(0).iter().all(|&g| g >= 0.0));
        assert!(chain.gamma_draws(1).iter().all(|&g| g >= 0.0));
    }

    /// d = 1 toy: summary mean equals theta with unit variance.
    struct Linear;

    impl MomentSource for Linear {
        fn dim(&self) -> usize {
            1
        }
        fn moments(&self, theta: &Theta, _: RngStream) -> Result<MomentEstimate> {
            Ok(MomentEstimate { mu: vec![theta.first()], sigma: DMatrix::from_element(1, 1, 0.25), m: usize::MAX })
        }
    }

    #[test]
    fn joint_chain_matches_grid_posterior() {
        let prior = PriorSpec::uniform(-1.0, 1.0).unwrap();
        let s = sv(&[1.6]);
        let spec = RbslSpec::new(RbslVariant::Mean, 0.5).unwrap();
        let cfg = McmcConfig { iters: 100_000, proposal_scale: 0.5, ..Default::default() };
        let chain = rbsl_mcmc(&spec, &prior, &s, &Linear, &cfg, RngStream::new(51, 0)).unwrap();

        let nt = 401;
        let ng = 1601;
        let tg: Vec<f64> = (0..nt).map(|i| -1.0 + 2.0 * i as f64 / (nt - 1) as f64).collect();
        let gg: Vec<f64> = (0..ng).map(|i| -6.0 + 12.0 * i as f64 / (ng - 1) as f64).collect();
        let mut wt = vec![0.0; nt];
        let mut wg = vec![0.0; ng];
        for (a, &t) in tg.iter().enumerate() {
            let m = Linear.moments(&Theta::scalar(t).unwrap(), RngStream::new(0, 0)).unwrap();
            for (b, &g) in gg.iter().enumerate() {
                let l = (rbsl_m_loglik(&s, &m, &gv(&[g])).unwrap() + spec.gamma_prior.logpdf(g)).exp();
                wt[a] += l;
                wg[b] += l;
            }
        }
        let cdf_of = |grid: &[f64], w: &[f64]| {
            let total: f64 = w.iter().sum();
            let mut acc = 0.0;
            let c: Vec<f64> = w.iter().map(|v| { acc += v / total; acc }).collect();
            let grid = grid.to_vec();
            move |x: f64| {
                let k = grid.partition_point(|&g| g <= x);
                if k == 0 { 0.0 } else { c[k - 1] }
            }
        };
        let dt = stats::ks_one_sample(&chain.theta_draws(), cdf_of(&tg, &wt)).unwrap();
        let dg = stats::ks_one_sample(&chain.gamma_draws(0), cdf_of(&gg, &wg)).unwrap();
        assert!(dt < 0.05, "theta KS {dt}");
        assert!(dg < 0.05, "gamma KS {dg}");
    }

    #[test]
    fn analytic_ma1_gamma_shifts_under_mismatch() {
        // observed variance far below anything the model produces
        let prior = PriorSpec::uniform(-1.0, 1.0).unwrap();
        let spec = RbslSpec::new(RbslVariant::Mean, 0.5).unwrap();
        let cfg = McmcConfig { iters: 20_000, ..Default::default() };
        let chain = rbsl_mcmc(&spec, &prior, &sv(&[0.0007, 0.0]), &AnalyticMa1(100), &cfg, RngStream::new(61, 0)).unwrap();
        assert!(stats::mean(&chain.gamma_draws(0)) < -1.0);
    }

    #[test]
    fn invalid_spec_rejected() {
        let prior = PriorSpec::uniform(-1.0, 1.0).unwrap();
        let spec = RbslSpec { variant: RbslVariant::Variance, gamma_prior: GammaPrior::Laplace { lambda: 0.5 }, update_gamma: true };
        let cfg = McmcConfig { iters: 10, ..Default::default() };
        assert!(rbsl_mcmc(&spec, &prior, &sv(&[0.0, 0.0]), &flat_source(), &cfg, RngStream::new(1, 0)).is_err());
    }
}
