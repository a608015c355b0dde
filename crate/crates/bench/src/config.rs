//! Experiment configuration: a TOML file with sections, overridden by CLI flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Abc,
    Bsl,
    RbslM,
    RbslV,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Abc => "abc",
            Method::Bsl => "bsl",
            Method::RbslM => "rbsl-m",
            Method::RbslV => "rbsl-v",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DiscrepancyName {
    Euclidean,
    Mmd,
    Kl,
    Wasserstein,
    Cvm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AbcMode {
    Summaries,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    /// Stochastic volatility process at the benchmark parameters.
    Sv,
    /// MA(1) at `theta0`.
    Ma1,
    /// CSV file; the last column of each row is read.
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub method: Method,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self { method: Method::Abc, seed: 1, out: PathBuf::from("out") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSource,
    pub theta0: f64,
    pub path: Option<PathBuf>,
    /// Seed of the observed series, separate from the inference seed.
    pub seed: u64,
    pub len: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { source: DataSource::Sv, theta0: 0.5, path: None, seed: 1, len: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbcSection {
    pub n_sims: usize,
    pub quantile: f64,
    /// Absolute tolerance; replaces the quantile rule when set.
    pub epsilon: Option<f64>,
    pub discrepancy: DiscrepancyName,
    pub mode: AbcMode,
    pub k: usize,
    pub bandwidth: Option<f64>,
    pub pilot: usize,
}

impl Default for AbcSection {
    fn default() -> Self {
        Self {
            n_sims: 100_000,
            quantile: 0.01,
            epsilon: None,
            discrepancy: DiscrepancyName::Euclidean,
            mode: AbcMode::Summaries,
            k: 1,
            bandwidth: None,
            pilot: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BslSection {
    pub m: usize,
    pub iters: usize,
    pub proposal_scale: f64,
    pub burn_in_frac: f64,
    pub lambda: f64,
    /// Prior draws scored to pick the starting point.
    pub pilot: usize,
}

impl Default for BslSection {
    fn default() -> Self {
        Self { m: 200, iters: 50_000, proposal_scale: 0.1, burn_in_frac: 0.2, lambda: 0.5, pilot: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictiveSection {
    pub n_rep: usize,
}

impl Default for PredictiveSection {
    fn default() -> Self {
        Self { n_rep: 1000 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub data: DataSection,
    pub abc: AbcSection,
    pub bsl: BslSection,
    pub predictive: PredictiveSection,
}

/// Values given on the command line; each one present replaces the file value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub method: Option<Method>,
    pub quantile: Option<f64>,
    pub n_sims: Option<usize>,
    pub m: Option<usize>,
    pub iters: Option<usize>,
    pub lambda: Option<f64>,
    pub discrepancy: Option<DiscrepancyName>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid config")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.experiment.seed = v;
        }
        if let Some(v) = &o.out {
            self.experiment.out = v.clone();
        }
        if let Some(v) = o.method {
            self.experiment.method = v;
        }
        if let Some(v) = o.quantile {
            self.abc.quantile = v;
        }
        if let Some(v) = o.n_sims {
            self.abc.n_sims = v;
        }
        if let Some(v) = o.m {
            self.bsl.m = v;
        }
        if let Some(v) = o.iters {
            self.bsl.iters = v;
        }
        if let Some(v) = o.lambda {
            self.bsl.lambda = v;
        }
        if let Some(v) = o.discrepancy {
            self.abc.discrepancy = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.len < 3 {
            bail!("data.len must be at least 3, got {}", d.len);
        }
        if d.source == DataSource::Ma1 && !d.theta0.is_finite() {
            bail!("data.theta0 must be finite");
        }
        if d.source == DataSource::File && d.path.is_none() {
            bail!("data.path is required when data.source = \"file\"");
        }
        match self.experiment.method {
            Method::Abc => {
                let a = &self.abc;
                if a.n_sims == 0 || a.pilot == 0 {
                    bail!("abc.n_sims and abc.pilot must be positive");
                }
                if !(a.quantile > 0.0 && a.quantile <= 1.0) {
                    bail!("abc.quantile must lie in (0, 1], got {}", a.quantile);
                }
                if a.epsilon.is_some_and(|e| e.is_nan() || e < 0.0) {
                    bail!("abc.epsilon must be non-negative");
                }
                if a.mode == AbcMode::Summaries && a.discrepancy != DiscrepancyName::Euclidean {
                    bail!("discrepancy \"{}\" needs abc.mode = \"full\"", serde_plain(a.discrepancy));
                }
                if a.k == 0 {
                    bail!("abc.k must be positive");
                }
                if a.bandwidth.is_some_and(|h| !(h > 0.0 && h.is_finite())) {
                    bail!("abc.bandwidth must be positive");
                }
            }
            _ => {
                let b = &self.bsl;
                if b.m < 4 {
                    bail!("bsl.m must be at least 4 (summary dimension + 2), got {}", b.m);
                }
                if b.iters == 0 || b.pilot == 0 {
                    bail!("bsl.iters and bsl.pilot must be positive");
                }
                if !(b.proposal_scale > 0.0 && b.proposal_scale.is_finite()) {
                    bail!("bsl.proposal_scale must be positive");
                }
                if !(0.0..1.0).contains(&b.burn_in_frac) {
                    bail!("bsl.burn_in_frac must lie in [0, 1)");
                }
                if !(b.lambda > 0.0 && b.lambda.is_finite()) {
                    bail!("bsl.lambda must be positive, got {}", b.lambda);
                }
            }
        }
        Ok(())
    }
}

fn serde_plain(d: DiscrepancyName) -> String {
    serde_json::to_value(d).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [experiment]
            method = "rbsl-v"
            seed = 9

            [bsl]
            iters = 1000
            "#,
        )
        .unwrap();
        assert_eq!(cfg.experiment.method, Method::RbslV);
        assert_eq!(cfg.experiment.seed, 9);
        assert_eq!(cfg.bsl.iters, 1000);
        assert_eq!(cfg.bsl.m, 200);
        assert_eq!(cfg.data.source, DataSource::Sv);
        cfg.validate().unwrap();
    }

    #[test]
    fn flags_override_file() {
        let mut cfg = ExperimentConfig::from_toml("[abc]\nquantile = 0.05\nn_sims = 10").unwrap();
        cfg.apply(&Overrides { quantile: Some(0.2), seed: Some(3), ..Default::default() });
        assert_eq!(cfg.abc.quantile, 0.2);
        assert_eq!(cfg.abc.n_sims, 10);
        assert_eq!(cfg.experiment.seed, 3);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml("[abc]\nbogus = 1").is_err());
        assert!(ExperimentConfig::from_toml("[experiment]\nmethod = \"nle\"").is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.abc.quantile = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.abc.discrepancy = DiscrepancyName::Mmd;
        assert!(cfg.validate().unwrap_err().to_string().contains("\"mmd\""));
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.method = Method::RbslM;
        cfg.bsl.lambda = -1.0;
        assert!(cfg.validate().is_err());
        cfg.bsl.lambda = 0.5;
        cfg.abc.discrepancy = DiscrepancyName::Kl;
        cfg.validate().unwrap();
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }
}
