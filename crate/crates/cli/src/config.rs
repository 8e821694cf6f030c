//! Experiment configuration: a single JSON document bundling the dataset
//! spec, training hyperparameters, probe settings, and sweep grid.
//! Command-line flags override file values; every command echoes the fully
//! resolved result into its output directory before computing anything.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use disent_core::data::SynthSpec;
use disent_core::eval::ProbeConfig;
use disent_core::training::{Measure, TrainConfig};
use disent_core::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_grid() -> Vec<f64> {
    vec![0.001, 0.01, 0.1, 1.0, 10.0]
}

/// Everything one experiment needs, resolvable from a JSON file plus flag
/// overrides. Unknown keys are rejected so typos fail loudly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    /// Synthetic dataset spec; ignored when `data_dir` points at CSVs.
    #[serde(default)]
    pub data: SynthSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    /// Measures covered by `sweep`; `train` uses `train.measure`.
    #[serde(default)]
    pub measures: Vec<Measure>,
    /// λ grid for `sweep`.
    #[serde(default = "default_grid")]
    pub lambdas: Vec<f64>,
    /// Output directory; the `--out` flag overrides.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Directory containing `train.csv`/`test.csv`/`aux.csv`. When unset,
    /// the dataset is generated in memory from `data`.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
            Error::Config(format!("invalid config {}: {e}", path.display()))
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {}; this build reads version {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        self.data.validate()?;
        self.train.validate()?;
        self.probe.validate()?;
        for lambda in &self.lambdas {
            if !lambda.is_finite() || *lambda < 0.0 {
                return Err(Error::Config(format!(
                    "sweep lambdas must be finite and non-negative, got {lambda}"
                )));
            }
        }
        Ok(())
    }
}

/// Flags shared by every command. Precedence: flag > config file > default.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonOpts {
    /// JSON experiment config; omit to run entirely on defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Master seed; overrides the data, training, and probe seeds.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Parallel per-λ runs during `sweep`.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Similarity measure (mmd | sinkhorn | jeffrey | fisher_rao |
    /// gaussian_w | adversarial | none).
    #[arg(long, value_name = "NAME")]
    pub measure: Option<String>,
    /// Trade-off weight λ; repeat to define a sweep grid.
    #[arg(long = "lambda", value_name = "X")]
    pub lambdas: Vec<f64>,
}

/// Load the config file (or defaults) and fold the flag overrides in.
/// λ overrides are applied here for sweeps; `train` additionally maps a
/// single `--lambda` onto `train.lambda` in its own command handler.
pub fn resolve(opts: &CommonOpts) -> Result<ExperimentConfig> {
    let mut cfg = match &opts.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = opts.seed {
        cfg.data.seed = seed;
        cfg.train.seed = seed;
        cfg.probe.seed = seed;
    }
    if let Some(name) = &opts.measure {
        let measure: Measure = name.parse()?;
        cfg.train.measure = measure;
        cfg.measures = vec![measure];
    }
    if !opts.lambdas.is_empty() {
        cfg.lambdas = opts.lambdas.clone();
    }
    if let Some(out) = &opts.out {
        cfg.out_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The output directory this command must use, from flag or config.
pub fn required_out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.out_dir.clone().ok_or_else(|| {
        Error::Config("no output directory: pass --out DIR or set out_dir in the config".into())
    })
}
