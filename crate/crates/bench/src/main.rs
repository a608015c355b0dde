use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use robust_sbi::summaries::autocov_summaries;
use robust_sbi_bench::config::{DiscrepancyName, ExperimentConfig, Method, Overrides};
use robust_sbi_bench::output::{headers, write_csv, write_report};
use robust_sbi_bench::runner::{diagnose, load_data, run_experiment};
use robust_sbi_bench::suite::{reproduce_ma1_suite, SuiteBudget};

const SCHEMAS: &str = "\
Output files (UTF-8 CSV with a header row; JSON reports have keys config, seed, results, warnings):

  data.csv         t, y
  samples.csv      abc:        draw_index, theta, discrepancy, accepted (0/1); one row per simulation
                   bsl/rbsl:   draw_index, theta, [gamma_1, gamma_2,] loglik, burn_in (0/1); one row per iteration
  predictive.csv   row, theta, zeta_0, zeta_1; one posterior predictive simulation per row
  summary.json     posterior mean/std/quantiles/mode, acceptance rate, predictive intervals
  diagnostics.json written by `diagnose`, same layout as summary.json

suite sub-bundles: abc_tolerances, bsl_posterior, full_data_abc (samples_<discrepancy>.csv),
rbsl_posteriors (samples_<variant>.csv, predictive_<variant>.csv),
adjustment_parameters (overlay.csv: variant, component, kind = prior|posterior, value),
plus assertions.json with one {name, value, threshold, pass} entry per check.";

#[derive(Parser)]
#[command(name = "robust-sbi", version, about = "Simulation-based inference under misspecification on the MA(1) benchmark", after_long_help = SCHEMAS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the observed series and its summaries
    Simulate(Flags),
    /// Rejection ABC
    Abc(Flags),
    /// Bayesian synthetic likelihood
    Bsl(Flags),
    /// Robust synthetic likelihood (--method rbsl-m or rbsl-v)
    Rbsl(Flags),
    /// Recompute predictive checks and adjustment diagnostics for a run directory (--out)
    Diagnose(Flags),
    /// Run every benchmark experiment
    Suite(Flags),
}

#[derive(Args, Clone, Debug, Default)]
struct Flags {
    /// TOML config with [experiment], [data], [abc], [bsl], [predictive] sections
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// ABC tolerance as a quantile of the simulated discrepancies
    #[arg(long)]
    quantile: Option<f64>,
    #[arg(long)]
    n_sims: Option<usize>,
    /// Simulations per synthetic-likelihood estimate
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    /// Adjustment-parameter prior scale (Laplace) or rate (exponential)
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    discrepancy: Option<DiscrepancyName>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            method: self.method,
            quantile: self.quantile,
            n_sims: self.n_sims,
            m: self.m,
            iters: self.iters,
            lambda: self.lambda,
            discrepancy: self.discrepancy,
        }
    }

    fn config(&self, family: Option<&[Method]>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let file_method = cfg.experiment.method;
        cfg.apply(&self.overrides());
        if let Some(allowed) = family {
            if self.method.is_none() && !allowed.contains(&file_method) {
                cfg.experiment.method = allowed[0];
            }
            if !allowed.contains(&cfg.experiment.method) {
                bail!("method {} does not belong to this subcommand", cfg.experiment.method.name());
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

fn run(cli: Cli) -> Result<(), Failure> {
    use Failure::{Config, Run};
    let experiment = |f: &Flags, family: &[Method]| -> Result<(), Failure> {
        let cfg = f.config(Some(family)).map_err(Config)?;
        let res = run_experiment(&cfg).map_err(Run)?;
        println!("{}", json!({ "out": cfg.experiment.out, "posterior": res["posterior"] }));
        Ok(())
    };
    match cli.command {
        Command::Abc(f) => experiment(&f, &[Method::Abc]),
        Command::Bsl(f) => experiment(&f, &[Method::Bsl]),
        Command::Rbsl(f) => experiment(&f, &[Method::RbslM, Method::RbslV]),
        Command::Simulate(f) => {
            let cfg = f.config(None).map_err(Config)?;
            let data = load_data(&cfg.data).map_err(Run)?;
            let out = &cfg.experiment.out;
            let rows = data.as_slice().iter().enumerate().map(|(t, y)| vec![t.to_string(), y.to_string()]);
            write_csv(&out.join("data.csv"), &headers(&["t", "y"]), rows).map_err(Run)?;
            let s = autocov_summaries(&data, 2).map_err(|e| Run(e.into()))?;
            let results = json!({ "len": data.len(), "summaries": s.as_slice() });
            write_report(&out.join("summary.json"), &cfg, cfg.experiment.seed, results.clone(), &[]).map_err(Run)?;
            println!("{results}");
            Ok(())
        }
        Command::Diagnose(f) => {
            let dir = f.out.clone().unwrap_or_else(|| ExperimentConfig::default().experiment.out);
            let res = diagnose(&dir).map_err(Run)?;
            println!("{}", json!({ "out": dir, "predictive": res["predictive"], "gamma": res["gamma"] }));
            Ok(())
        }
        Command::Suite(f) => {
            let cfg = f.config(None).map_err(Config)?;
            let d = SuiteBudget::default();
            let budget = SuiteBudget {
                abc_sims: f.n_sims.unwrap_or(d.abc_sims),
                full_data_sims: f.n_sims.map_or(d.full_data_sims, |n| n.min(d.full_data_sims)),
                m: cfg.bsl.m,
                iters: cfg.bsl.iters,
                n_rep: cfg.predictive.n_rep,
                lambda: cfg.bsl.lambda,
            };
            let assertions = reproduce_ma1_suite(&cfg.experiment.out, cfg.experiment.seed, &budget).map_err(Run)?;
            let passed = assertions.iter().filter(|a| a.pass).count();
            println!("{}", json!({ "out": cfg.experiment.out, "passed": passed, "total": assertions.len() }));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("{}", json!({ "error": "invalid_config", "message": format!("{e:#}") }));
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("{}", json!({ "error": "run_failed", "message": format!("{e:#}") }));
            ExitCode::from(1)
        }
    }
}
