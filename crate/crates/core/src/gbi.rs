//! Generalised (Gibbs) posteriors and the Monte Carlo ABC-kernel loss.

use crate::abc::DiscrepancyEvaluator;
use crate::error::{Result, SbiError};
use crate::model::{PriorSpec, Simulator, Theta};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AbcKernel {
    /// Indicator `rho <= eps`.
    Uniform,
    /// Unnormalised `exp(-rho^2 / (2 eps^2))`.
    Gaussian,
}

impl AbcKernel {
    pub fn eval(&self, rho: f64, eps: f64) -> f64 {
        match self {
            AbcKernel::Uniform => {
                if rho <= eps {
                    1.0
                } else {
                    0.0
                }
            }
            AbcKernel::Gaussian => (-rho * rho / (2.0 * eps * eps)).exp(),
        }
    }
}

/// `-log` of the Monte Carlo kernel average. When every kernel weight is zero
/// the loss is `+inf` and `degenerate` is set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbcLoss {
    pub value: f64,
    pub degenerate: bool,
}

/// ABC kernel recast as a loss: `-log((1/N) sum_i K_eps(rho_i))` with
/// `x_i ~ P_theta`, simulation `i` drawn from `stream.child(i)`.
pub fn abc_mc_loss<S: Simulator + ?Sized>(
    evaluator: &DiscrepancyEvaluator,
    simulator: &S,
    theta: &Theta,
    num_sims: usize,
    kernel: AbcKernel,
    eps: f64,
    stream: RngStream,
) -> Result<AbcLoss> {
    if num_sims == 0 {
        return Err(SbiError::InvalidParameter("need at least one simulation".into()));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(SbiError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let mut total = 0.0;
    for i in 0..num_sims as u64 {
        let x = simulator.simulate(theta, &mut stream.child(i).rng())?;
        total += kernel.eval(evaluator.evaluate(&x)?, eps);
    }
    Ok(loss_from_kernel_sum(total, num_sims))
}

fn loss_from_kernel_sum(total: f64, n: usize) -> AbcLoss {
    let avg = total / n as f64;
    if avg > 0.0 {
        AbcLoss {
            value: -avg.ln(),
            degenerate: false,
        }
    } else {
        AbcLoss {
            value: f64::INFINITY,
            degenerate: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GibbsPosteriorSpec {
    /// Calibration (tempering) weight `w >= 0`.
    pub weight: f64,
    pub prior: PriorSpec,
}

impl GibbsPosteriorSpec {
    pub fn new(weight: f64, prior: PriorSpec) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(SbiError::InvalidParameter(format!("weight must be finite and >= 0, got {weight}")));
        }
        Ok(Self { weight, prior })
    }
}

/// `-w * loss + log prior(theta)`. With `w = 0` this is the prior log-density
/// whatever the loss; otherwise an infinite loss gives `-inf`.
pub fn gibbs_log_posterior(spec: &GibbsPosteriorSpec, theta: &Theta, loss: f64) -> f64 {
    let lp = spec.prior.logpdf(theta);
    if spec.weight == 0.0 {
        return lp;
    }
    if lp == f64::NEG_INFINITY || loss.is_nan() || loss == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    -spec.weight * loss + lp
}
