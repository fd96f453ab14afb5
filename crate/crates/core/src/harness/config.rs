use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};

use crate::aps_fitting::GridSpacing;
use crate::bussgang::{FilterOptions, DEFAULT_COND_CAP, DEFAULT_DIAG_FLOOR};
use crate::channel_model::{snr_db_to_noise_power, GeometrySpec};
use crate::receivers::ReceiverKind;

/// Noise level, given either directly or as an SNR under the unit
/// peak-diagonal normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    N0(f64),
    SnrDb(f64),
}

impl Noise {
    pub fn power(self) -> f64 {
        match self {
            Noise::N0(n0) => n0,
            Noise::SnrDb(db) => snr_db_to_noise_power(db),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Unquantized,
    Nondithered,
    Dithered,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Unquantized => "unquantized",
            EstimatorKind::Nondithered => "nondithered",
            EstimatorKind::Dithered => "dithered",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Paper,
    Desk,
}

fn default_diag_floor() -> f64 {
    DEFAULT_DIAG_FLOOR
}

fn default_cond_cap() -> f64 {
    DEFAULT_COND_CAP
}

/// Everything an experiment needs. Trials are nested as geometry realizations
/// x sample groups; each (geometry, group) pair is one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub lambdas: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    /// Angle grid size; `2 M` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    #[serde(default)]
    pub grid_spacing: GridSpacing,
    pub num_users: usize,
    pub geometries: usize,
    pub groups: usize,
    /// Channel realizations per estimated covariance.
    pub channel_draws: usize,
    pub estimators: Vec<EstimatorKind>,
    pub receivers: Vec<ReceiverKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_diag_floor")]
    pub diag_floor: f64,
    #[serde(default = "default_cond_cap")]
    pub cond_cap: f64,
    pub noise: Noise,
    pub geometry: GeometrySpec,
}

impl ExperimentConfig {
    /// `M = 256`, 10 geometries x 20 groups x 100 channel draws.
    pub fn paper() -> Self {
        Self {
            seed: 20230101,
            lambdas: vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.5, 2.0, 2.5, 3.0],
            sample_sizes: vec![10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000],
            grid_size: None,
            grid_spacing: GridSpacing::Angle,
            num_users: 4,
            geometries: 10,
            groups: 20,
            channel_draws: 100,
            estimators: vec![EstimatorKind::Unquantized, EstimatorKind::Nondithered, EstimatorKind::Dithered],
            receivers: ReceiverKind::ALL.to_vec(),
            output: None,
            diag_floor: DEFAULT_DIAG_FLOOR,
            cond_cap: DEFAULT_COND_CAP,
            noise: Noise::SnrDb(10.0),
            geometry: GeometrySpec::quarter_split(256),
        }
    }

    /// Same code paths at `M = 32` with a handful of trials.
    pub fn desk() -> Self {
        Self {
            seed: 7,
            lambdas: vec![0.5, 1.0, 2.0],
            sample_sizes: vec![50, 200, 1000],
            geometries: 2,
            groups: 3,
            channel_draws: 20,
            geometry: GeometrySpec::quarter_split(32),
            ..Self::paper()
        }
    }

    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Paper => Self::paper(),
            Preset::Desk => Self::desk(),
        }
    }

    pub fn num_antennas(&self) -> usize {
        self.geometry.num_antennas
    }

    pub fn n0(&self) -> f64 {
        self.noise.power()
    }

    pub fn grid_points(&self) -> usize {
        self.grid_size.unwrap_or(2 * self.num_antennas())
    }

    pub fn filter_options(&self) -> FilterOptions {
        FilterOptions {
            diag_floor: self.diag_floor,
            cond_cap: self.cond_cap,
        }
    }

    pub fn uses(&self, e: EstimatorKind) -> bool {
        self.estimators.contains(&e)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.geometry.validate().context("field `geometry`")?;
        ensure!(self.geometries >= 1, "field `geometries` must be at least 1");
        ensure!(self.groups >= 1, "field `groups` must be at least 1");
        ensure!(self.channel_draws >= 1, "field `channel_draws` must be at least 1");
        ensure!(self.num_users >= 1, "field `num_users` must be at least 1");
        ensure!(!self.sample_sizes.is_empty(), "field `sample_sizes` is empty");
        ensure!(self.sample_sizes.iter().all(|&n| n >= 1), "field `sample_sizes` has a zero entry");
        ensure!(!self.estimators.is_empty(), "field `estimators` is empty");
        if let Some(g) = self.grid_size {
            ensure!(g >= 1, "field `grid_size` must be at least 1");
        }
        for &l in &self.lambdas {
            ensure!(l > 0.0 && l.is_finite(), "field `lambdas` has a non-positive entry {l}");
        }
        if self.uses(EstimatorKind::Dithered) && self.lambdas.is_empty() {
            bail!("field `lambdas` is empty but the dithered estimator is enabled");
        }
        let n0 = self.n0();
        ensure!(n0 >= 0.0 && n0.is_finite(), "field `noise` gives an invalid noise power {n0}");
        ensure!(self.diag_floor >= 0.0, "field `diag_floor` must be non-negative");
        ensure!(self.cond_cap > 1.0, "field `cond_cap` must exceed 1");
        Ok(())
    }
}

/// Parses and validates a TOML config.
pub fn config_from_str(s: &str) -> anyhow::Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(s)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    config_from_str(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn emit_config(cfg: &ExperimentConfig) -> anyhow::Result<String> {
    Ok(toml::to_string(cfg)?)
}
