//! Single experiment runs and post-hoc diagnostics of a run directory.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use robust_sbi::abc::{decay_grid, acceptance_decay, rejection_abc, AbcConfig, DataMode, Discrepancy, Tolerance, WeightedSamples};
use robust_sbi::benchmark as bm;
use robust_sbi::diagnostics::{posterior_predictive, prior_posterior_shift, PredictiveTable};
use robust_sbi::model::{simulate_ma1, simulate_sv, Ma1, SvParams, Theta, TimeSeries};
use robust_sbi::robust_bsl::{rbsl_mcmc, AdjustmentVector, GammaPrior, RbslSpec, RbslVariant};
use robust_sbi::stats;
use robust_sbi::summaries::{autocov_summaries, Autocovariances, SummaryVec};
use robust_sbi::synthetic_likelihood::{bsl_mcmc, pilot_init, Chain, McmcConfig, SimulatedMoments};
use robust_sbi::RngStream;

use crate::config::{AbcMode, DataSection, DataSource, DiscrepancyName, ExperimentConfig, Method};
use crate::output::{headers, write_csv, write_report};

/// Root streams of one run, all children of `RngStream::from_seed(seed)`.
pub mod streams {
    pub const ABC: u64 = 1;
    pub const CHAIN: u64 = 2;
    pub const INIT: u64 = 3;
    pub const PREDICTIVE: u64 = 4;
    /// Prior reference draws for adjustment component `j` use `GAMMA_PRIOR + j`.
    pub const GAMMA_PRIOR: u64 = 5;
}

pub fn load_data(d: &DataSection) -> Result<TimeSeries> {
    let stream = RngStream::new(d.seed, 0);
    Ok(match d.source {
        DataSource::Sv => simulate_sv(&SvParams::benchmark(), d.len, stream)?,
        DataSource::Ma1 => simulate_ma1(&Theta::scalar(d.theta0)?, d.len, stream)?,
        DataSource::File => {
            let path = d.path.as_ref().context("data.path missing")?;
            read_series(path)?
        }
    })
}

/// Last column of a headed CSV file.
pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = rec.iter().next_back().with_context(|| format!("empty row {}", i + 1))?;
        values.push(field.trim().parse::<f64>().with_context(|| format!("row {}: not a number: {field:?}", i + 1))?);
    }
    Ok(TimeSeries::new(values)?)
}

pub fn posterior_stats(draws: &[f64]) -> Value {
    if draws.is_empty() {
        return json!({ "n": 0 });
    }
    let q = |p: f64| stats::quantile(draws, p).unwrap_or(f64::NAN);
    json!({
        "n": draws.len(),
        "mean": stats::mean(draws),
        "std": if draws.len() > 1 { stats::std_dev(draws) } else { 0.0 },
        "q025": q(0.025),
        "q50": q(0.5),
        "q975": q(0.975),
        "mode": stats::kde_mode(draws, bm::PRIOR_LO, bm::PRIOR_HI),
    })
}

fn discrepancy(cfg: &ExperimentConfig) -> Discrepancy {
    match cfg.abc.discrepancy {
        DiscrepancyName::Euclidean => Discrepancy::Euclidean,
        DiscrepancyName::Mmd => Discrepancy::Mmd { bandwidth: cfg.abc.bandwidth },
        DiscrepancyName::Kl => Discrepancy::KlKnn { k: cfg.abc.k },
        DiscrepancyName::Wasserstein => Discrepancy::Wasserstein,
        DiscrepancyName::Cvm => Discrepancy::Cvm,
    }
}

pub fn abc_config(cfg: &ExperimentConfig) -> AbcConfig {
    let mode = match cfg.abc.mode {
        AbcMode::Summaries => DataMode::Summaries { num_lags: bm::NUM_LAGS },
        AbcMode::Full => DataMode::FullData,
    };
    let tol = match cfg.abc.epsilon {
        Some(e) => Tolerance::Absolute(e),
        None => Tolerance::Quantile(cfg.abc.quantile),
    };
    let mut c = AbcConfig::new(cfg.abc.n_sims, tol, discrepancy(cfg), mode);
    c.pilot_size = cfg.abc.pilot;
    c
}

fn summary_stat() -> Autocovariances {
    Autocovariances { num_lags: bm::NUM_LAGS }
}

pub fn variant(method: Method) -> Option<RbslVariant> {
    match method {
        Method::RbslM => Some(RbslVariant::Mean),
        Method::RbslV => Some(RbslVariant::Variance),
        _ => None,
    }
}

pub fn gamma_prior(cfg: &ExperimentConfig) -> Result<Option<GammaPrior>> {
    Ok(match variant(cfg.experiment.method) {
        Some(v) => Some(v.default_prior(cfg.bsl.lambda)?),
        None => None,
    })
}

/// Runs the synthetic-likelihood sampler chosen by `cfg.experiment.method`.
pub fn run_chain(cfg: &ExperimentConfig, data: &TimeSeries, root: RngStream) -> Result<Chain> {
    let obs = autocov_summaries(data, bm::NUM_LAGS)?;
    let src = SimulatedMoments { simulator: Ma1 { len: data.len() }, summary: summary_stat(), m: cfg.bsl.m };
    let prior = bm::prior();
    let init = pilot_init(&prior, &obs, &src, cfg.bsl.pilot, root.child(streams::INIT))?;
    let mc = McmcConfig {
        iters: cfg.bsl.iters,
        proposal_scale: cfg.bsl.proposal_scale,
        burn_in_frac: cfg.bsl.burn_in_frac,
        adapt: true,
        init: Some(init),
    };
    let stream = root.child(streams::CHAIN);
    Ok(match variant(cfg.experiment.method) {
        None => bsl_mcmc(&prior, &obs, &src, &mc, stream)?,
        Some(v) => rbsl_mcmc(&RbslSpec::new(v, cfg.bsl.lambda)?, &prior, &obs, &src, &mc, stream)?,
    })
}

pub fn predictive(chain: &Chain, data: &TimeSeries, n_rep: usize, root: RngStream) -> Result<PredictiveTable> {
    let obs = autocov_summaries(data, bm::NUM_LAGS)?;
    Ok(posterior_predictive(chain, n_rep, &Ma1 { len: data.len() }, &summary_stat(), &obs, root.child(streams::PREDICTIVE))?)
}

/// A chain holding accepted ABC draws, so they can feed predictive checks.
pub fn abc_chain(res: &WeightedSamples) -> Chain {
    let thetas: Vec<Theta> = res.accepted_thetas().into_iter().cloned().collect();
    Chain {
        loglik: vec![f64::NAN; thetas.len()],
        thetas,
        gammas: None,
        accepted: res.num_accepted(),
        burn_in: 0,
        final_proposal_scale: f64::NAN,
    }
}

pub fn abc_samples_csv(path: &Path, res: &WeightedSamples) -> Result<()> {
    let rows = res.thetas.iter().zip(&res.discrepancies).zip(&res.accepted).enumerate().map(|(i, ((t, d), a))| {
        vec![i.to_string(), t.first().to_string(), d.to_string(), (*a as u8).to_string()]
    });
    write_csv(path, &headers(&["draw_index", "theta", "discrepancy", "accepted"]), rows)
}

pub fn chain_samples_csv(path: &Path, chain: &Chain) -> Result<()> {
    let d = chain.gammas.as_ref().and_then(|g| g.first()).map_or(0, AdjustmentVector::dim);
    let mut header = headers(&["draw_index", "theta"]);
    header.extend((1..=d).map(|j| format!("gamma_{j}")));
    header.extend(headers(&["loglik", "burn_in"]));
    let rows = (0..chain.len()).map(|i| {
        let mut r = vec![i.to_string(), chain.thetas[i].first().to_string()];
        if let Some(g) = &chain.gammas {
            r.extend(g[i].as_slice().iter().map(f64::to_string));
        }
        r.push(chain.loglik[i].to_string());
        r.push(((i < chain.burn_in) as u8).to_string());
        r
    });
    write_csv(path, &header, rows)
}

pub fn predictive_csv(path: &Path, t: &PredictiveTable) -> Result<()> {
    let d = t.observed.dim();
    let mut header = headers(&["row", "theta"]);
    header.extend((0..d).map(|j| format!("zeta_{j}")));
    let rows = t.thetas.iter().zip(&t.summaries).enumerate().map(|(i, (th, s))| {
        let mut r = vec![i.to_string(), th.first().to_string()];
        r.extend(s.as_slice().iter().map(f64::to_string));
        r
    });
    write_csv(path, &header, rows)
}

pub fn predictive_json(t: &PredictiveTable) -> Value {
    json!({
        "n_rep": t.len(),
        "observed": t.observed.as_slice(),
        "intervals": t.intervals.iter().map(|(a, b)| [*a, *b]).collect::<Vec<_>>(),
        "covered": t.coverage,
    })
}

pub fn gamma_json(chain: &Chain, prior: &GammaPrior, root: RngStream) -> Result<Value> {
    let d = chain.gammas.as_ref().and_then(|g| g.first()).map_or(0, AdjustmentVector::dim);
    let mut out = Vec::new();
    for j in 0..d {
        let draws = chain.gamma_draws(j);
        let ks = prior_posterior_shift(&draws, prior, root.child(streams::GAMMA_PRIOR + j as u64))?;
        out.push(json!({
            "component": j + 1,
            "mean": stats::mean(&draws),
            "std": stats::std_dev(&draws),
            "prior_ks": ks,
        }));
    }
    Ok(Value::Array(out))
}

/// Runs one configured experiment, writing `samples.csv`, `summary.json` and
/// `predictive.csv` under the output directory. Returns the `results` object.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Value> {
    cfg.validate()?;
    let out = &cfg.experiment.out;
    let root = RngStream::from_seed(cfg.experiment.seed);
    let data = load_data(&cfg.data)?;
    let obs: SummaryVec = autocov_summaries(&data, bm::NUM_LAGS)?;
    let mut warnings = Vec::new();

    let results = match cfg.experiment.method {
        Method::Abc => {
            let res = rejection_abc(&abc_config(cfg), &Ma1 { len: data.len() }, &data, &bm::prior(), root.child(streams::ABC))?;
            warnings.extend(res.warnings.iter().cloned());
            abc_samples_csv(&out.join("samples.csv"), &res)?;
            let decay = acceptance_decay(&res.discrepancies, &decay_grid(&res.discrepancies, cfg.abc.quantile, 20)?)?;
            let chain = abc_chain(&res);
            let pred = if chain.is_empty() {
                warnings.push("no accepted draws; predictive table is empty".into());
                None
            } else {
                Some(predictive(&chain, &data, cfg.predictive.n_rep, root)?)
            };
            write_predictive(out, pred.as_ref(), obs.dim())?;
            json!({
                "method": "abc",
                "discrepancy": discrepancy(cfg).name(),
                "observed_summaries": obs.as_slice(),
                "n_sims": res.thetas.len(),
                "epsilon": res.epsilon,
                "num_accepted": res.num_accepted(),
                "acceptance_rate": res.acceptance_rate,
                "posterior": posterior_stats(&res.accepted_scalar()),
                "acceptance_decay": {
                    "epsilons": decay.epsilons,
                    "acceptance": decay.acceptance,
                    "linearity_deviation": decay.linearity_deviation,
                },
                "predictive": pred.as_ref().map(predictive_json),
            })
        }
        method => {
            let chain = run_chain(cfg, &data, root)?;
            chain_samples_csv(&out.join("samples.csv"), &chain)?;
            let pred = predictive(&chain, &data, cfg.predictive.n_rep, root)?;
            write_predictive(out, Some(&pred), obs.dim())?;
            let gamma = match gamma_prior(cfg)? {
                Some(p) => gamma_json(&chain, &p, root)?,
                None => Value::Null,
            };
            json!({
                "method": method.name(),
                "observed_summaries": obs.as_slice(),
                "iters": chain.len(),
                "burn_in": chain.burn_in,
                "acceptance_rate": chain.acceptance_rate(),
                "final_proposal_scale": chain.final_proposal_scale,
                "posterior": posterior_stats(&chain.theta_draws()),
                "gamma": gamma,
                "predictive": predictive_json(&pred),
            })
        }
    };
    write_report(&out.join("summary.json"), cfg, cfg.experiment.seed, results.clone(), &warnings)?;
    Ok(results)
}

fn write_predictive(out: &Path, t: Option<&PredictiveTable>, d: usize) -> Result<()> {
    match t {
        Some(t) => predictive_csv(&out.join("predictive.csv"), t),
        None => {
            let mut header = headers(&["row", "theta"]);
            header.extend((0..d).map(|j| format!("zeta_{j}")));
            write_csv(&out.join("predictive.csv"), &header, std::iter::empty())
        }
    }
}

/// Rebuilds the posterior from a run directory and recomputes the predictive
/// table and adjustment-parameter shifts. Writes `predictive.csv` and
/// `diagnostics.json`; with an unchanged run these reproduce the run's own output.
pub fn diagnose(dir: &Path) -> Result<Value> {
    let summary: Value = serde_json::from_str(
        &fs::read_to_string(dir.join("summary.json")).with_context(|| format!("no summary.json in {}", dir.display()))?,
    )?;
    let cfg: ExperimentConfig = serde_json::from_value(summary["config"].clone()).context("summary.json has no usable config")?;
    let data = load_data(&cfg.data)?;
    let root = RngStream::from_seed(cfg.experiment.seed);
    let chain = read_chain(&dir.join("samples.csv"), cfg.experiment.method)?;
    let mut warnings = Vec::new();
    let obs = autocov_summaries(&data, bm::NUM_LAGS)?;
    let pred = if chain.is_empty() {
        warnings.push("no posterior draws; predictive table is empty".to_string());
        None
    } else {
        Some(predictive(&chain, &data, cfg.predictive.n_rep, root)?)
    };
    write_predictive(dir, pred.as_ref(), obs.dim())?;
    let gamma = match gamma_prior(&cfg)? {
        Some(p) if !chain.is_empty() => gamma_json(&chain, &p, root)?,
        _ => Value::Null,
    };
    let results = json!({
        "method": cfg.experiment.method.name(),
        "posterior": posterior_stats(&chain.theta_draws()),
        "gamma": gamma,
        "predictive": pred.as_ref().map(predictive_json),
    });
    write_report(&dir.join("diagnostics.json"), &cfg, cfg.experiment.seed, results.clone(), &warnings)?;
    Ok(results)
}

fn read_chain(path: &Path, method: Method) -> Result<Chain> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let head = r.headers()?.clone();
    let col = |name: &str| head.iter().position(|h| h == name).with_context(|| format!("samples.csv lacks column {name}"));
    let theta_col = col("theta")?;
    let mut thetas = Vec::new();
    let mut gammas = Vec::new();
    let mut burn_in = 0;
    let num = |s: &str| s.parse::<f64>().with_context(|| format!("not a number: {s:?}"));
    if method == Method::Abc {
        let acc = col("accepted")?;
        for rec in r.records() {
            let rec = rec?;
            if &rec[acc] == "1" {
                thetas.push(Theta::scalar(num(&rec[theta_col])?)?);
            }
        }
    } else {
        let gamma_cols: Vec<usize> = head.iter().enumerate().filter(|(_, h)| h.starts_with("gamma_")).map(|(i, _)| i).collect();
        let b = col("burn_in")?;
        for rec in r.records() {
            let rec = rec?;
            thetas.push(Theta::scalar(num(&rec[theta_col])?)?);
            if !gamma_cols.is_empty() {
                gammas.push(AdjustmentVector::new(gamma_cols.iter().map(|&c| num(&rec[c])).collect::<Result<_>>()?)?);
            }
            if &rec[b] == "1" {
                burn_in += 1;
            }
        }
        if burn_in == thetas.len() && !thetas.is_empty() {
            bail!("every row of samples.csv is burn-in");
        }
    }
    Ok(Chain {
        loglik: vec![f64::NAN; thetas.len()],
        thetas,
        gammas: (!gammas.is_empty()).then_some(gammas),
        accepted: 0,
        burn_in,
        final_proposal_scale: f64::NAN,
    })
}
