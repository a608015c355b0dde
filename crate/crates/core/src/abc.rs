//! Rejection ABC with retained simulations, tolerance selection and the
//! acceptance-decay diagnostic.

use rayon::prelude::*;

use crate::discrepancies::{
    cvm, euclidean_slices, kl_knn, median_heuristic_bandwidth, mmd2_unbiased, pooled, wasserstein_1d, KernelSpec,
    SampleSet,
};
use crate::error::{Result, SbiError};
use crate::model::{PriorSpec, Simulator, Theta, TimeSeries};
use crate::rng::RngStream;
use crate::stats;
use crate::summaries::{autocov_summaries, SummaryVec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Discrepancy {
    Euclidean,
    /// Unbiased squared MMD with a Gaussian kernel; median heuristic when no bandwidth is given.
    Mmd { bandwidth: Option<f64> },
    /// k-NN estimate of KL(observed || simulated).
    KlKnn { k: usize },
    Wasserstein,
    Cvm,
}

impl Discrepancy {
    pub fn name(&self) -> &'static str {
        match self {
            Discrepancy::Euclidean => "euclidean",
            Discrepancy::Mmd { .. } => "mmd",
            Discrepancy::KlKnn { .. } => "kl",
            Discrepancy::Wasserstein => "wasserstein",
            Discrepancy::Cvm => "cvm",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DataMode {
    /// Autocovariance summaries at lags `0..num_lags`, standardised by pilot scales.
    Summaries { num_lags: usize },
    /// Raw observations, compared as i.i.d. scalar samples (or as one vector for Euclidean).
    FullData,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tolerance {
    Absolute(f64),
    Quantile(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbcConfig {
    pub num_sims: usize,
    pub tolerance: Tolerance,
    pub discrepancy: Discrepancy,
    pub mode: DataMode,
    /// Prior-predictive simulations used to calibrate summary scales or the kernel bandwidth.
    pub pilot_size: usize,
}

impl AbcConfig {
    pub fn new(num_sims: usize, tolerance: Tolerance, discrepancy: Discrepancy, mode: DataMode) -> Self {
        Self {
            num_sims,
            tolerance,
            discrepancy,
            mode,
            pilot_size: 1000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_sims == 0 {
            return Err(SbiError::InvalidParameter("num_sims must be at least 1".into()));
        }
        match self.tolerance {
            Tolerance::Absolute(e) if e.is_nan() || e < 0.0 => {
                return Err(SbiError::InvalidParameter(format!("tolerance must be >= 0, got {e}")))
            }
            Tolerance::Quantile(q) if !(q > 0.0 && q <= 1.0) => {
                return Err(SbiError::InvalidParameter(format!("quantile must lie in (0, 1], got {q}")))
            }
            _ => {}
        }
        if let DataMode::Summaries { num_lags } = self.mode {
            if num_lags == 0 {
                return Err(SbiError::InvalidParameter("need at least one summary lag".into()));
            }
            if self.discrepancy != Discrepancy::Euclidean {
                return Err(SbiError::InvalidParameter(format!(
                    "{} compares sample sets; use full-data mode",
                    self.discrepancy.name()
                )));
            }
        }
        match self.discrepancy {
            Discrepancy::KlKnn { k: 0 } => Err(SbiError::InvalidParameter("kl needs k >= 1".into())),
            Discrepancy::Mmd { bandwidth: Some(h) } if h.is_nan() || h <= 0.0 => {
                Err(SbiError::InvalidParameter("mmd bandwidth must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Discrepancy between a simulated series and fixed observed data.
#[derive(Clone, Debug)]
pub struct DiscrepancyEvaluator {
    discrepancy: Discrepancy,
    mode: DataMode,
    observed: TimeSeries,
    observed_summary: Option<SummaryVec>,
    observed_samples: SampleSet,
    scales: Vec<f64>,
    kernel: Option<KernelSpec>,
}

impl DiscrepancyEvaluator {
    /// Builds the evaluator, running `pilot_size` prior-predictive simulations
    /// on children of `stream` to set summary scales and the MMD bandwidth.
    pub fn calibrate<S: Simulator + ?Sized>(
        discrepancy: Discrepancy,
        mode: DataMode,
        observed: &TimeSeries,
        simulator: &S,
        prior: &PriorSpec,
        pilot_size: usize,
        stream: RngStream,
    ) -> Result<Self> {
        let pilot: Vec<TimeSeries> = (0..pilot_size as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream.child(i).rng();
                let theta = prior.sample(&mut rng);
                simulator.simulate(&theta, &mut rng)
            })
            .collect::<Result<_>>()?;

        let observed_samples = SampleSet::scalar(observed.as_slice().to_vec())?;
        let (observed_summary, scales) = match mode {
            DataMode::Summaries { num_lags } => {
                let obs = autocov_summaries(observed, num_lags)?;
                let scales = if pilot.len() >= 2 {
                    let sums: Vec<SummaryVec> = pilot
                        .iter()
                        .map(|x| autocov_summaries(x, num_lags))
                        .collect::<Result<_>>()?;
                    (0..num_lags)
                        .map(|j| {
                            let col: Vec<f64> = sums.iter().map(|s| s.as_slice()[j]).collect();
                            let sd = stats::std_dev(&col);
                            if sd > 0.0 && sd.is_finite() {
                                sd
                            } else {
                                1.0
                            }
                        })
                        .collect()
                } else {
                    vec![1.0; num_lags]
                };
                (Some(obs), scales)
            }
            DataMode::FullData => (None, Vec::new()),
        };

        let kernel = match discrepancy {
            Discrepancy::Mmd { bandwidth: Some(h) } => Some(KernelSpec::gaussian(h)?),
            Discrepancy::Mmd { bandwidth: None } => {
                let z = match (mode, pilot.first()) {
                    (DataMode::FullData, Some(x)) => pooled(&observed_samples, &SampleSet::scalar(x.as_slice().to_vec())?)?,
                    _ => observed_samples.clone(),
                };
                Some(KernelSpec::gaussian(median_heuristic_bandwidth(&z))?)
            }
            _ => None,
        };

        Ok(Self {
            discrepancy,
            mode,
            observed: observed.clone(),
            observed_summary,
            observed_samples,
            scales,
            kernel,
        })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn kernel(&self) -> Option<&KernelSpec> {
        self.kernel.as_ref()
    }

    pub fn observed_summary(&self) -> Option<&SummaryVec> {
        self.observed_summary.as_ref()
    }

    pub fn evaluate(&self, x: &TimeSeries) -> Result<f64> {
        match self.mode {
            DataMode::Summaries { num_lags } => {
                let s = autocov_summaries(x, num_lags)?;
                let obs = self.observed_summary.as_ref().expect("summary mode");
                let a: Vec<f64> = s.as_slice().iter().zip(&self.scales).map(|(v, c)| v / c).collect();
                let b: Vec<f64> = obs.as_slice().iter().zip(&self.scales).map(|(v, c)| v / c).collect();
                euclidean_slices(&a, &b)
            }
            DataMode::FullData => {
                if self.discrepancy == Discrepancy::Euclidean {
                    return euclidean_slices(x.as_slice(), self.observed.as_slice());
                }
                let sim = SampleSet::scalar(x.as_slice().to_vec())?;
                let obs = &self.observed_samples;
                match self.discrepancy {
                    Discrepancy::Mmd { .. } => mmd2_unbiased(obs, &sim, self.kernel.as_ref().expect("mmd kernel")),
                    Discrepancy::KlKnn { k } => kl_knn(obs, &sim, k),
                    Discrepancy::Wasserstein => wasserstein_1d(obs, &sim),
                    Discrepancy::Cvm => cvm(obs, &sim),
                    Discrepancy::Euclidean => unreachable!(),
                }
            }
        }
    }
}

/// All prior draws with their discrepancies; acceptance can be recomputed at
/// any tolerance without new simulations.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSamples {
    pub thetas: Vec<Theta>,
    pub discrepancies: Vec<f64>,
    pub accepted: Vec<bool>,
    pub epsilon: f64,
    pub acceptance_rate: f64,
    pub warnings: Vec<String>,
}

impl WeightedSamples {
    fn from_draws(thetas: Vec<Theta>, discrepancies: Vec<f64>, epsilon: f64) -> Self {
        let accepted: Vec<bool> = discrepancies.iter().map(|&d| d <= epsilon).collect();
        let n_acc = accepted.iter().filter(|&&a| a).count();
        let mut warnings = Vec::new();
        if n_acc == 0 {
            warnings.push(format!("no draws accepted at tolerance {epsilon}"));
        }
        Self {
            acceptance_rate: n_acc as f64 / thetas.len() as f64,
            thetas,
            discrepancies,
            accepted,
            epsilon,
            warnings,
        }
    }

    pub fn num_accepted(&self) -> usize {
        self.accepted.iter().filter(|&&a| a).count()
    }

    pub fn accepted_thetas(&self) -> Vec<&Theta> {
        self.thetas
            .iter()
            .zip(&self.accepted)
            .filter_map(|(t, &a)| a.then_some(t))
            .collect()
    }

    /// First component of each accepted parameter.
    pub fn accepted_scalar(&self) -> Vec<f64> {
        self.accepted_thetas().into_iter().map(Theta::first).collect()
    }

    pub fn rethreshold(&self, epsilon: f64) -> Self {
        Self::from_draws(self.thetas.clone(), self.discrepancies.clone(), epsilon)
    }

    pub fn rethreshold_quantile(&self, q: f64) -> Result<Self> {
        Ok(self.rethreshold(tolerance_from_quantile(&self.discrepancies, q)?))
    }
}

/// Rejection ABC. Draw `i` uses `stream.child(i)` for both its prior draw and
/// its simulation; the calibration pilot uses a separate child.
pub fn rejection_abc<S: Simulator + ?Sized>(
    cfg: &AbcConfig,
    simulator: &S,
    observed: &TimeSeries,
    prior: &PriorSpec,
    stream: RngStream,
) -> Result<WeightedSamples> {
    cfg.validate()?;
    let evaluator = DiscrepancyEvaluator::calibrate(
        cfg.discrepancy,
        cfg.mode,
        observed,
        simulator,
        prior,
        cfg.pilot_size,
        stream.child(u64::MAX),
    )?;
    rejection_abc_with(cfg, simulator, &evaluator, prior, stream)
}

/// Rejection ABC against a pre-calibrated evaluator.
pub fn rejection_abc_with<S: Simulator + ?Sized>(
    cfg: &AbcConfig,
    simulator: &S,
    evaluator: &DiscrepancyEvaluator,
    prior: &PriorSpec,
    stream: RngStream,
) -> Result<WeightedSamples> {
    cfg.validate()?;
    let draws: Vec<(Theta, f64)> = (0..cfg.num_sims as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i).rng();
            let theta = prior.sample(&mut rng);
            let x = simulator.simulate(&theta, &mut rng)?;
            let d = evaluator.evaluate(&x)?;
            Ok((theta, d))
        })
        .collect::<Result<_>>()?;
    let (thetas, discrepancies): (Vec<Theta>, Vec<f64>) = draws.into_iter().unzip();
    let epsilon = match cfg.tolerance {
        Tolerance::Absolute(e) => e,
        Tolerance::Quantile(q) => tolerance_from_quantile(&discrepancies, q)?,
    };
    Ok(WeightedSamples::from_draws(thetas, discrepancies, epsilon))
}

/// Inclusive linear-interpolation `q`-quantile of the discrepancies.
pub fn tolerance_from_quantile(discrepancies: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(SbiError::InvalidParameter(format!("quantile must lie in (0, 1], got {q}")));
    }
    stats::quantile(discrepancies, q)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcceptDecayCurve {
    pub epsilons: Vec<f64>,
    pub acceptance: Vec<f64>,
    /// Largest absolute residual at interior grid points of the least-squares
    /// line through all `(epsilon, acceptance)` pairs.
    pub linearity_deviation: f64,
}

/// Acceptance probability as a function of tolerance.
pub fn acceptance_decay(discrepancies: &[f64], eps_grid: &[f64]) -> Result<AcceptDecayCurve> {
    if eps_grid.is_empty() {
        return Err(SbiError::Empty("tolerance grid"));
    }
    if discrepancies.is_empty() {
        return Err(SbiError::Empty("discrepancies"));
    }
    if eps_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(SbiError::InvalidParameter("tolerance grid must be ascending".into()));
    }
    let mut sorted = discrepancies.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let acceptance: Vec<f64> = eps_grid
        .iter()
        .map(|&e| sorted.partition_point(|&d| d <= e) as f64 / n)
        .collect();

    let k = eps_grid.len();
    let linearity_deviation = if k < 3 {
        0.0
    } else {
        let mx = stats::mean(eps_grid);
        let my = stats::mean(&acceptance);
        let sxx: f64 = eps_grid.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = eps_grid.iter().zip(&acceptance).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        (1..k - 1)
            .map(|i| (acceptance[i] - (my + slope * (eps_grid[i] - mx))).abs())
            .fold(0.0, f64::max)
    };
    Ok(AcceptDecayCurve {
        epsilons: eps_grid.to_vec(),
        acceptance,
        linearity_deviation,
    })
}

/// `points` evenly spaced tolerances from 0 to the `q_max` quantile of the
/// discrepancies.
pub fn decay_grid(discrepancies: &[f64], q_max: f64, points: usize) -> Result<Vec<f64>> {
    let top = tolerance_from_quantile(discrepancies, q_max)?;
    Ok((0..points).map(|i| top * i as f64 / (points - 1).max(1) as f64).collect())
}
