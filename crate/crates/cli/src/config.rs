use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use depmeter::dependence::{Bandwidth, Estimator, EstimatorConfig};
use depmeter::structure::LearnConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_ENV: &str = "DEPMETER_CONFIG";

/// Kernel bandwidth: a positive number or `median`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandwidthArg {
    Fixed(f64),
    Named(MedianTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MedianTag {
    Median,
}

impl BandwidthArg {
    fn to_core(self) -> Bandwidth {
        match self {
            BandwidthArg::Fixed(h) => Bandwidth::Fixed(h),
            BandwidthArg::Named(MedianTag::Median) => Bandwidth::Median,
        }
    }
}

impl FromStr for BandwidthArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "median" {
            return Ok(BandwidthArg::Named(MedianTag::Median));
        }
        s.parse::<f64>().map(BandwidthArg::Fixed).map_err(|_| format!("expected a positive number or `median`, got {s:?}"))
    }
}

/// Flags shared by every subcommand. Anything left unset falls back to the
/// JSON config named by `DEPMETER_CONFIG`, then to built-in defaults.
#[derive(Args, Clone, Debug, Default)]
pub struct RunArgs {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub estimator: Option<Estimator>,
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    #[arg(long, global = true)]
    pub min_occupancy: Option<usize>,
    #[arg(long, global = true)]
    pub threshold_c0: Option<f64>,
    #[arg(long, global = true)]
    pub bandwidth: Option<BandwidthArg>,
    #[arg(long, global = true)]
    pub max_cond_size: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Config file layout; every key optional, unknown keys rejected.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub estimator: Option<Estimator>,
    pub bins: Option<usize>,
    pub min_occupancy: Option<usize>,
    pub threshold_c0: Option<f64>,
    #[serde(alias = "kernel-bandwidth")]
    pub bandwidth: Option<BandwidthArg>,
    pub max_cond_size: Option<usize>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::BadConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }
}

/// Effective configuration of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    pub seed: u64,
    pub estimator: Estimator,
    pub bins: usize,
    pub min_occupancy: usize,
    pub threshold_c0: f64,
    pub bandwidth: BandwidthArg,
    pub max_cond_size: usize,
    pub out: PathBuf,
}

pub const MAX_BINS: usize = 64;
pub const MAX_COND_SIZE: usize = 8;

impl Default for RunConfig {
    fn default() -> Self {
        let est = EstimatorConfig::default();
        let learn = LearnConfig::default();
        RunConfig {
            seed: 0,
            estimator: est.estimator,
            bins: est.bins,
            min_occupancy: est.min_occupancy,
            threshold_c0: est.threshold_c0,
            bandwidth: BandwidthArg::Named(MedianTag::Median),
            max_cond_size: learn.max_cond_size,
            out: PathBuf::from("depmeter-out"),
        }
    }
}

impl RunConfig {
    /// Flags over file over defaults.
    pub fn resolve(flags: &RunArgs, file: &FileConfig) -> Result<Self, CliError> {
        let d = RunConfig::default();
        let cfg = RunConfig {
            seed: flags.seed.or(file.seed).unwrap_or(d.seed),
            estimator: flags.estimator.or(file.estimator).unwrap_or(d.estimator),
            bins: flags.bins.or(file.bins).unwrap_or(d.bins),
            min_occupancy: flags.min_occupancy.or(file.min_occupancy).unwrap_or(d.min_occupancy),
            threshold_c0: flags.threshold_c0.or(file.threshold_c0).unwrap_or(d.threshold_c0),
            bandwidth: flags.bandwidth.or(file.bandwidth).unwrap_or(d.bandwidth),
            max_cond_size: flags.max_cond_size.or(file.max_cond_size).unwrap_or(d.max_cond_size),
            out: flags.out.clone().or_else(|| file.out.clone()).unwrap_or(d.out),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `DEPMETER_CONFIG` when set.
    pub fn from_env(flags: &RunArgs) -> Result<Self, CliError> {
        let file = match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => FileConfig::load(Path::new(&p))?,
            _ => FileConfig::default(),
        };
        Self::resolve(flags, &file)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::BadConfig(m));
        if !(2..=MAX_BINS).contains(&self.bins) {
            return bad(format!("bins must be in 2..={MAX_BINS}, got {}", self.bins));
        }
        if self.min_occupancy == 0 {
            return bad("min-occupancy must be at least 1".into());
        }
        if !(self.threshold_c0 > 0.0 && self.threshold_c0.is_finite()) {
            return bad(format!("threshold-c0 must be a positive number, got {}", self.threshold_c0));
        }
        if let BandwidthArg::Fixed(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("bandwidth must be positive or \"median\", got {h}"));
            }
        }
        if self.max_cond_size > MAX_COND_SIZE {
            return bad(format!("max-cond-size must be at most {MAX_COND_SIZE}, got {}", self.max_cond_size));
        }
        Ok(())
    }

    /// `bins` sets the per-variable bin count; the marginal `x_j` resolution
    /// keeps its default ratio of two.
    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            estimator: self.estimator,
            bins: self.bins,
            marginal_bins: 2 * self.bins,
            min_occupancy: self.min_occupancy,
            threshold_c0: self.threshold_c0,
            bandwidth: self.bandwidth.to_core(),
            ..EstimatorConfig::default()
        }
    }

    pub fn learn_config(&self) -> LearnConfig {
        LearnConfig { estimator: self.estimator_config(), max_cond_size: self.max_cond_size, ..LearnConfig::default() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data") + "\n"
    }
}
