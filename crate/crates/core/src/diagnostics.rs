//! Posterior predictive checks on summaries and prior-to-posterior shift of
//! adjustment parameters.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Result, SbiError};
use crate::model::{Simulator, Theta};
use crate::robust_bsl::GammaPrior;
use crate::rng::RngStream;
use crate::stats;
use crate::summaries::{SummaryStatistic, SummaryVec};
use crate::synthetic_likelihood::Chain;

/// Central predictive interval mass.
pub const PREDICTIVE_LEVEL: f64 = 0.95;
/// Prior draws used by [`prior_posterior_shift`].
pub const PRIOR_REFERENCE_DRAWS: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveTable {
    pub thetas: Vec<Theta>,
    pub summaries: Vec<SummaryVec>,
    pub observed: SummaryVec,
    pub intervals: Vec<(f64, f64)>,
    pub coverage: Vec<bool>,
}

impl PredictiveTable {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Simulated values of summary component `j`.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.summaries.iter().map(|s| s.as_slice()[j]).collect()
    }

    /// Recompute intervals and coverage from the rows.
    pub fn coverage_flags(&self) -> (Vec<(f64, f64)>, Vec<bool>) {
        intervals_and_flags(&self.summaries, &self.observed)
    }
}

fn intervals_and_flags(rows: &[SummaryVec], observed: &SummaryVec) -> (Vec<(f64, f64)>, Vec<bool>) {
    let tail = (1.0 - PREDICTIVE_LEVEL) / 2.0;
    (0..observed.dim())
        .map(|j| {
            if rows.is_empty() {
                return ((f64::NAN, f64::NAN), false);
            }
            let mut col: Vec<f64> = rows.iter().map(|s| s.as_slice()[j]).collect();
            col.sort_by(f64::total_cmp);
            let lo = stats::quantile_sorted(&col, tail);
            let hi = stats::quantile_sorted(&col, 1.0 - tail);
            let o = observed.as_slice()[j];
            ((lo, hi), lo <= o && o <= hi)
        })
        .unzip()
}

/// `n_rep` rows, each a theta drawn uniformly from the post-burn-in chain and
/// one simulated summary at it. Row `r` uses `stream.child(r)`.
pub fn posterior_predictive<S, F>(
    chain: &Chain,
    n_rep: usize,
    simulator: &S,
    summary: &F,
    observed: &SummaryVec,
    stream: RngStream,
) -> Result<PredictiveTable>
where
    S: Simulator + ?Sized,
    F: SummaryStatistic + ?Sized,
{
    let pool = chain.post_burn_in();
    if pool.is_empty() {
        return Err(SbiError::Empty("chain"));
    }
    if summary.dim() != observed.dim() {
        return Err(SbiError::DimensionMismatch { expected: summary.dim(), got: observed.dim() });
    }
    let rows = (0..n_rep as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream.child(r).rng();
            let theta = pool[rng.random_range(0..pool.len())].clone();
            let s = summary.summarise(&simulator.simulate(&theta, &mut rng)?)?;
            Ok((theta, s))
        })
        .collect::<Result<Vec<_>>>()?;
    let (thetas, summaries): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let (intervals, coverage) = intervals_and_flags(&summaries, observed);
    Ok(PredictiveTable { thetas, summaries, observed: observed.clone(), intervals, coverage })
}

/// Fresh draws from an adjustment-parameter prior.
pub fn gamma_prior_draws(prior: &GammaPrior, n: usize, stream: RngStream) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..n).map(|_| prior.sample(&mut rng)).collect()
}

/// Two-sample KS statistic between posterior draws of one adjustment
/// parameter and fresh prior draws.
pub fn prior_posterior_shift(posterior: &[f64], prior: &GammaPrior, stream: RngStream) -> Result<f64> {
    if posterior.is_empty() {
        return Err(SbiError::Empty("posterior draws"));
    }
    stats::ks_two_sample(posterior, &gamma_prior_draws(prior, PRIOR_REFERENCE_DRAWS, stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Ma1;
    use crate::summaries::Autocovariances;

    fn frozen_chain(theta: f64, n: usize) -> Chain {
        Chain {
            thetas: vec![Theta::scalar(theta).unwrap(); n],
            gammas: None,
            loglik: vec![0.0; n],
            accepted: 0,
            burn_in: n / 5,
            final_proposal_scale: 0.1,
        }
    }

    #[test]
    fn frozen_chain_predictive_centres_on_binding() {
        let obs = SummaryVec::new(vec![1.0, 0.0]).unwrap();
        let t = posterior_predictive(&frozen_chain(0.0, 100), 4000, &Ma1 { len: 100 }, &Autocovariances { num_lags: 2 }, &obs, RngStream::new(1, 0)).unwrap();
        assert_eq!(t.len(), 4000);
        let z0 = t.component(0);
        let z1 = t.component(1);
        // sd of zeta_0 ~ sqrt(2/100), zeta_1 ~ 0.1; 4000 rows
        assert!((stats::mean(&z0) - 1.0).abs() < 4.0 * 0.1414 / 63.0);
        assert!(stats::mean(&z1).abs() < 4.0 * 0.1 / 63.0);
        assert_eq!(t.coverage, vec![true, true]);
        assert_eq!(t.coverage_flags(), (t.intervals.clone(), t.coverage.clone()));
    }

    #[test]
    fn far_observation_not_covered() {
        let obs = SummaryVec::new(vec![0.0007, 0.0]).unwrap();
        let t = posterior_predictive(&frozen_chain(0.0, 10), 500, &Ma1 { len: 100 }, &Autocovariances { num_lags: 2 }, &obs, RngStream::new(2, 0)).unwrap();
        assert_eq!(t.coverage, vec![false, true]);
    }

    #[test]
    fn empty_request_gives_empty_table() {
        let obs = SummaryVec::new(vec![1.0, 0.0]).unwrap();
        let t = posterior_predictive(&frozen_chain(0.0, 10), 0, &Ma1 { len: 100 }, &Autocovariances { num_lags: 2 }, &obs, RngStream::new(3, 0)).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.coverage, vec![false, false]);
    }

    #[test]
    fn predictive_is_deterministic() {
        let obs = SummaryVec::new(vec![1.0, 0.0]).unwrap();
        let mut chain = frozen_chain(0.0, 50);
        for (i, t) in chain.thetas.iter_mut().enumerate() {
            *t = Theta::scalar(i as f64 / 50.0 - 0.5).unwrap();
        }
        let a = posterior_predictive(&chain, 200, &Ma1 { len: 50 }, &Autocovariances { num_lags: 2 }, &obs, RngStream::new(4, 0)).unwrap();
        let b = posterior_predictive(&chain, 200, &Ma1 { len: 50 }, &Autocovariances { num_lags: 2 }, &obs, RngStream::new(4, 0)).unwrap();
        assert_eq!(a, b);
        assert!(a.thetas.iter().all(|t| t.first() >= 10.0 / 50.0 - 0.5));
    }

    #[test]
    fn shift_statistic_reference_cases() {
        let lap = GammaPrior::laplace(0.5).unwrap();
        let same = gamma_prior_draws(&lap, 10_000, RngStream::new(5, 1));
        assert!(prior_posterior_shift(&same, &lap, RngStream::new(5, 2)).unwrap() < 0.05);
        let point = vec![3.0; 1000];
        let d = prior_posterior_shift(&point, &lap, RngStream::new(5, 3)).unwrap();
        assert!((d - lap.cdf(3.0)).abs() < 0.003, "{d}");
        assert!(prior_posterior_shift(&[], &lap, RngStream::new(5, 3)).is_err());
    }
}
