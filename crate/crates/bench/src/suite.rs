//! The full benchmark suite: one sub-bundle per experiment plus a
//! machine-readable `assertions.json`.

use std::path::Path;

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use robust_sbi::abc::{rejection_abc, WeightedSamples};
use robust_sbi::benchmark as bm;
use robust_sbi::diagnostics::gamma_prior_draws;
use robust_sbi::discrepancies::euclidean;
use robust_sbi::model::SvParams;
use robust_sbi::stats;
use robust_sbi::summaries::{binding_ma1, binding_star_sv, epsilon_star, uniform_grid};
use robust_sbi::synthetic_likelihood::Chain;
use robust_sbi::{RngStream, TimeSeries};

use crate::config::{AbcMode, DataSection, DiscrepancyName, ExperimentConfig, Method};
use crate::output::{headers, write_csv, write_report};
use crate::runner::{
    abc_config, abc_samples_csv, chain_samples_csv, gamma_json, gamma_prior, load_data, posterior_stats, predictive,
    predictive_csv, predictive_json, run_chain, streams,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteBudget {
    pub abc_sims: usize,
    pub full_data_sims: usize,
    pub m: usize,
    pub iters: usize,
    pub n_rep: usize,
    pub lambda: f64,
}

impl Default for SuiteBudget {
    fn default() -> Self {
        Self { abc_sims: 1_000_000, full_data_sims: 20_000, m: 200, iters: 50_000, n_rep: 1000, lambda: 0.5 }
    }
}

#[derive(Clone, Debug, Serialize)]
struct SuiteConfig<'a> {
    budget: &'a SuiteBudget,
    data: DataSection,
    abc_quantiles: [f64; 2],
    full_data_quantile: f64,
}

const ABC_QUANTILES: [f64; 2] = [0.01, 0.001];
const FULL_DATA_QUANTILE: f64 = 0.01;
const FULL_DATA_DISCREPANCIES: [DiscrepancyName; 3] = [DiscrepancyName::Euclidean, DiscrepancyName::Kl, DiscrepancyName::Mmd];

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn lt(name: &str, value: f64, threshold: f64) -> Assertion {
    Assertion { name: format!("{name} < {threshold}"), value, threshold, pass: value < threshold }
}

fn gt(name: &str, value: f64, threshold: f64) -> Assertion {
    Assertion { name: format!("{name} > {threshold}"), value, threshold, pass: value > threshold }
}

fn le(name: &str, value: f64, threshold: f64) -> Assertion {
    Assertion { name: format!("{name} <= {threshold}"), value, threshold, pass: value <= threshold }
}

fn sub_config(method: Method, b: &SuiteBudget, data: &DataSection) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.experiment.method = method;
    c.data = data.clone();
    c.bsl.m = b.m;
    c.bsl.iters = b.iters;
    c.bsl.lambda = b.lambda;
    c.predictive.n_rep = b.n_rep;
    c
}

fn abc_bundle(dir: &Path, b: &SuiteBudget, data: &TimeSeries, ds: &DataSection, root: RngStream) -> Result<Vec<Assertion>> {
    let mut cfg = sub_config(Method::Abc, b, ds);
    cfg.abc.n_sims = b.abc_sims;
    cfg.abc.quantile = ABC_QUANTILES[0];
    let res = rejection_abc(&abc_config(&cfg), &bm::model(), data, &bm::prior(), root.child(streams::ABC))?;
    let kept = res.rethreshold_quantile(ABC_QUANTILES[0])?;
    let rows = (0..kept.thetas.len()).filter(|&i| kept.accepted[i]).map(|i| {
        vec![i.to_string(), kept.thetas[i].first().to_string(), kept.discrepancies[i].to_string()]
    });
    write_csv(&dir.join("samples.csv"), &headers(&["draw_index", "theta", "discrepancy"]), rows)?;

    let levels: Vec<(f64, WeightedSamples)> =
        ABC_QUANTILES.iter().map(|&q| Ok((q, res.rethreshold_quantile(q)?))).collect::<Result<_>>()?;
    let per_q: Vec<Value> = levels
        .iter()
        .map(|(q, r)| json!({ "quantile": q, "epsilon": r.epsilon, "posterior": posterior_stats(&r.accepted_scalar()) }))
        .collect();
    let b_star = binding_star_sv(&SvParams::benchmark())?;
    let compat = epsilon_star(&b_star, binding_ma1, &uniform_grid(bm::PRIOR_LO, bm::PRIOR_HI, 10_001), euclidean, "euclidean")?;
    write_report(
        &dir.join("summary.json"),
        &cfg,
        root.seed,
        json!({
            "n_sims": res.thetas.len(),
            "quantiles": per_q,
            "binding_star": b_star.as_slice(),
            "epsilon_star": compat.epsilon_star,
            "theta_star": compat.theta_star.first(),
        }),
        &res.warnings,
    )?;

    let fine = levels[1].1.accepted_scalar();
    let coarse = levels[0].1.accepted_scalar();
    let sd_ratio = if fine.len() > 1 && coarse.len() > 1 { stats::std_dev(&fine) / stats::std_dev(&coarse) } else { f64::NAN };
    Ok(vec![
        lt("abc_pseudo_true_mean_abs", stats::mean(&fine).abs(), 0.1),
        lt("abc_sd_fine_over_coarse", sd_ratio, 1.0),
        lt("epsilon_star_abs_error", (compat.epsilon_star - 0.99930).abs(), 1e-4),
        le("theta_star_abs", compat.theta_star.first().abs(), 0.0),
    ])
}

fn bsl_bundle(dir: &Path, b: &SuiteBudget, data: &TimeSeries, ds: &DataSection, root: RngStream) -> Result<Vec<Assertion>> {
    let cfg = sub_config(Method::Bsl, b, ds);
    let chain = run_chain(&cfg, data, root)?;
    chain_samples_csv(&dir.join("samples.csv"), &chain)?;
    let pred = predictive(&chain, data, b.n_rep, root)?;
    predictive_csv(&dir.join("predictive.csv"), &pred)?;
    let th = chain.theta_draws();
    let far = th.iter().filter(|t| t.abs() > 0.2).count() as f64 / th.len().max(1) as f64;
    write_report(
        &dir.join("summary.json"),
        &cfg,
        root.seed,
        json!({
            "acceptance_rate": chain.acceptance_rate(),
            "posterior": posterior_stats(&th),
            "mass_abs_theta_gt_0.2": far,
            "predictive": predictive_json(&pred),
        }),
        &[],
    )?;
    Ok(vec![
        gt("bsl_mass_abs_theta_gt_0.2", far, 0.5),
        lt("bsl_zeta0_observed_covered", pred.coverage[0] as u8 as f64, 0.5),
    ])
}

fn full_data_bundle(dir: &Path, b: &SuiteBudget, data: &TimeSeries, ds: &DataSection, root: RngStream) -> Result<Vec<Assertion>> {
    let mut stats_by = Vec::new();
    let mut warnings = Vec::new();
    let mut cfg = sub_config(Method::Abc, b, ds);
    cfg.abc.n_sims = b.full_data_sims;
    cfg.abc.quantile = FULL_DATA_QUANTILE;
    cfg.abc.mode = AbcMode::Full;
    for d in FULL_DATA_DISCREPANCIES {
        cfg.abc.discrepancy = d;
        let res = rejection_abc(&abc_config(&cfg), &bm::model(), data, &bm::prior(), root.child(streams::ABC))?;
        let name = abc_config(&cfg).discrepancy.name();
        abc_samples_csv(&dir.join(format!("samples_{name}.csv")), &res)?;
        warnings.extend(res.warnings.iter().map(|w| format!("{name}: {w}")));
        let acc = res.accepted_scalar();
        stats_by.push((name, res.num_accepted(), stats::mean(&acc), stats::std_dev(&acc), res.epsilon));
    }
    let by_name = |n: &str| *stats_by.iter().find(|s| s.0 == n).expect("ran");
    let (e, k, m) = (by_name("euclidean"), by_name("kl"), by_name("mmd"));
    let results: Value = stats_by
        .iter()
        .map(|(n, acc, mean, sd, eps)| (n.to_string(), json!({ "num_accepted": acc, "mean": mean, "std": sd, "epsilon": eps })))
        .collect::<serde_json::Map<_, _>>()
        .into();
    write_report(&dir.join("summary.json"), &cfg, root.seed, results, &warnings)?;
    Ok(vec![
        gt("kl_std_over_mmd_std", k.3 / m.3, 1.0),
        gt("kl_std_over_euclidean_std", k.3 / e.3, 1.0),
        lt("mmd_mean_abs", m.2.abs(), 0.1),
        lt("euclidean_mean_abs", e.2.abs(), 0.1),
    ])
}

fn rbsl_bundles(post_dir: &Path, adj_dir: &Path, b: &SuiteBudget, data: &TimeSeries, ds: &DataSection, root: RngStream) -> Result<Vec<Assertion>> {
    let mut assertions = Vec::new();
    let mut post_results = serde_json::Map::new();
    let mut adj_results = serde_json::Map::new();
    let mut overlay = Vec::new();
    for (i, method) in [Method::RbslM, Method::RbslV].into_iter().enumerate() {
        let name = method.name();
        let stream = root.child(i as u64);
        let cfg = sub_config(method, b, ds);
        let chain: Chain = run_chain(&cfg, data, stream)?;
        chain_samples_csv(&post_dir.join(format!("samples_{name}.csv")), &chain)?;
        let pred = predictive(&chain, data, b.n_rep, stream)?;
        predictive_csv(&post_dir.join(format!("predictive_{name}.csv")), &pred)?;
        let post = posterior_stats(&chain.theta_draws());
        let mode = post["mode"].as_f64().unwrap_or(f64::NAN);
        post_results.insert(
            name.into(),
            json!({ "acceptance_rate": chain.acceptance_rate(), "posterior": post, "predictive": predictive_json(&pred) }),
        );
        assertions.push(le(&format!("{name}_mode_abs"), mode.abs(), 0.15));
        assertions.push(gt(&format!("{name}_zeta1_observed_covered"), pred.coverage[1] as u8 as f64, 0.5));

        let prior = gamma_prior(&cfg)?.expect("robust method");
        let g = gamma_json(&chain, &prior, stream)?;
        for j in 0..2 {
            let comp = (j + 1).to_string();
            for v in chain.gamma_draws(j) {
                overlay.push(vec![name.to_string(), comp.clone(), "posterior".into(), v.to_string()]);
            }
            for v in gamma_prior_draws(&prior, 10_000, stream.child(streams::GAMMA_PRIOR + 100 + j as u64)) {
                overlay.push(vec![name.to_string(), comp.clone(), "prior".into(), v.to_string()]);
            }
        }
        if method == Method::RbslM {
            let ks = |j: usize| g[j]["prior_ks"].as_f64().unwrap_or(f64::NAN);
            assertions.push(gt("gamma1_prior_ks", ks(0), 0.25));
            assertions.push(lt("gamma2_prior_ks", ks(1), 0.1));
        }
        adj_results.insert(name.into(), g);
    }
    let cfg = sub_config(Method::RbslM, b, ds);
    write_report(&post_dir.join("summary.json"), &cfg, root.seed, post_results.into(), &[])?;
    write_csv(&adj_dir.join("overlay.csv"), &headers(&["variant", "component", "kind", "value"]), overlay)?;
    write_report(&adj_dir.join("summary.json"), &cfg, root.seed, adj_results.into(), &[])?;
    Ok(assertions)
}

pub const BUNDLES: [&str; 5] = ["abc_tolerances", "bsl_posterior", "full_data_abc", "rbsl_posteriors", "adjustment_parameters"];

/// Runs every sub-experiment in parallel on its own child stream and writes
/// `assertions.json`. Returns the assertions.
pub fn reproduce_ma1_suite(out: &Path, seed: u64, budget: &SuiteBudget) -> Result<Vec<Assertion>> {
    let ds = DataSection::default();
    let data = load_data(&ds)?;
    let root = RngStream::from_seed(seed);
    let dirs: Vec<_> = BUNDLES.iter().map(|b| out.join(b)).collect();
    let tasks: Vec<Result<Vec<Assertion>>> = (0..4u64)
        .into_par_iter()
        .map(|k| {
            let stream = root.child(k);
            match k {
                0 => abc_bundle(&dirs[0], budget, &data, &ds, stream),
                1 => bsl_bundle(&dirs[1], budget, &data, &ds, stream),
                2 => full_data_bundle(&dirs[2], budget, &data, &ds, stream),
                _ => rbsl_bundles(&dirs[3], &dirs[4], budget, &data, &ds, stream),
            }
        })
        .collect();
    let mut assertions = Vec::new();
    for t in tasks {
        assertions.extend(t?);
    }
    let cfg = SuiteConfig { budget, data: ds, abc_quantiles: ABC_QUANTILES, full_data_quantile: FULL_DATA_QUANTILE };
    let failed: Vec<String> = assertions.iter().filter(|a| !a.pass).map(|a| format!("failed: {}", a.name)).collect();
    write_report(&out.join("assertions.json"), &cfg, seed, serde_json::to_value(&assertions)?, &failed)?;
    Ok(assertions)
}
