use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calibration::{DEFAULT_BINS, DEFAULT_FOLDS, DEFAULT_LEVEL, DEFAULT_RESAMPLES};
use crate::error::{Error, Result};
use crate::selection::Strategy;
use crate::surrogate::SurrogateConfig;

/// Where per-example data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Synthetic examples generated on the fly.
    Surrogate(SurrogateConfig),
    /// Extracted data: one `<cell tag>.jsonl` prediction file per grid cell,
    /// plus optional `*.pcf` feature files that selection runs against.
    Files {
        predictions_dir: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        features_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    pub bins: usize,
    pub resamples: usize,
    pub level: f64,
    pub folds: usize,
    pub seed: u64,
    /// Coverage at which selective accuracy is reported.
    pub selective_coverage: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            resamples: DEFAULT_RESAMPLES,
            level: DEFAULT_LEVEL,
            folds: DEFAULT_FOLDS,
            seed: 0,
            selective_coverage: 0.8,
        }
    }
}

impl MetricOptions {
    pub fn report_options(&self) -> crate::calibration::ReportOptions {
        crate::calibration::ReportOptions {
            bins: self.bins,
            resamples: self.resamples,
            level: self.level,
            seed: self.seed,
        }
    }
}

fn default_alphas() -> Vec<f64> {
    vec![1.0]
}

fn default_gap_powers() -> Vec<f64> {
    vec![1.0]
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub strategies: Vec<Strategy>,
    pub budgets: Vec<usize>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_gap_powers")]
    pub gap_powers: Vec<f64>,
    /// Seeds for the random strategy.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub metrics: MetricOptions,
    pub data: DataSource,
}

impl ExperimentConfig {
    /// A surrogate-backed config with default grids: all strategies at `budgets`.
    pub fn surrogate(surrogate: SurrogateConfig, budgets: Vec<usize>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            strategies: Strategy::ALL.to_vec(),
            budgets,
            alphas: default_alphas(),
            gap_powers: default_gap_powers(),
            seeds: default_seeds(),
            output_dir: output_dir.into(),
            metrics: MetricOptions::default(),
            data: DataSource::Surrogate(surrogate),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("strategies", self.strategies.is_empty()),
            ("budgets", self.budgets.is_empty()),
            ("alphas", self.alphas.is_empty()),
            ("gap_powers", self.gap_powers.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::InvalidConfig(format!("{name} grid is empty")));
        }
        if self.strategies.contains(&Strategy::Random) && self.seeds.is_empty() {
            return Err(Error::InvalidConfig("random strategy needs at least one seed".into()));
        }
        if self.budgets.contains(&0) {
            return Err(Error::ZeroBudget);
        }
        if let Some(&a) = self.alphas.iter().find(|a| !a.is_finite() || **a < 0.0) {
            return Err(Error::InvalidAlpha(a));
        }
        if let Some(&p) = self.gap_powers.iter().find(|p| !p.is_finite() || **p < 1.0) {
            return Err(Error::InvalidGapPower(p));
        }
        let m = &self.metrics;
        if m.bins == 0 || m.resamples == 0 || m.folds < 2 {
            return Err(Error::InvalidOption("bins and resamples must be >= 1 and folds >= 2".into()));
        }
        if !(m.level > 0.0 && m.level < 1.0) {
            return Err(Error::InvalidOption(format!("confidence level {} outside (0, 1)", m.level)));
        }
        if !(m.selective_coverage > 0.0 && m.selective_coverage <= 1.0) {
            return Err(Error::CoverageOutOfRange(m.selective_coverage));
        }
        if let DataSource::Surrogate(s) = &self.data {
            s.validate()?;
            if let Some(&k) = self.budgets.iter().find(|&&k| k > s.num_tokens) {
                return Err(Error::BudgetExceedsTokens {
                    budget: k,
                    tokens: s.num_tokens,
                });
            }
        }
        Ok(())
    }
}

/// Everything needed to rerun a sweep: the full config and the toolkit version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub toolkit_version: String,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}
