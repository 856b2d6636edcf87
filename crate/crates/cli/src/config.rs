//! Run configuration: command-line flags override a JSON config file, which
//! overrides the built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::Args;
use serde::{Deserialize, Serialize};

use gnssbench::align::{AlignmentModel, RotationSource, DEFAULT_SIGMA_MAX_M};
use gnssbench::continuity::DEFAULT_WINDOWS_S;
use gnssbench::ingest::DEFAULT_MAX_GAP_S;
use gnssbench::perfmap::DEFAULT_CELL_SIZE_DEG;
use gnssbench::stats::DEFAULT_SERVICE_THRESHOLDS;

use crate::error::CliError;

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Reference INS CSV.
    #[arg(long = "ref", value_name = "CSV")]
    pub ref_path: Option<PathBuf>,
    /// NMEA log of the receiver under evaluation.
    #[arg(long = "eval", value_name = "NMEA")]
    pub eval_path: Option<PathBuf>,
    /// Output directory.
    #[arg(long = "out", value_name = "DIR")]
    pub output_path: Option<PathBuf>,
    /// JSON config file; flags take precedence over it.
    #[arg(long, value_name = "JSON")]
    pub config: Option<PathBuf>,
    /// Largest reference σ_H accepted for alignment, meters.
    #[arg(long)]
    pub sigma_max: Option<f64>,
    /// Widest reference bracket to interpolate across, seconds.
    #[arg(long)]
    pub max_gap: Option<f64>,
    /// Continuity windows, seconds.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub windows: Option<Vec<f64>>,
    /// Service-level lateral thresholds, meters, decreasing.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub thresholds: Option<Vec<f64>>,
    /// Map cell size, degrees of latitude (and longitude unless
    /// --cell-size-lon is given).
    #[arg(long)]
    pub cell_size: Option<f64>,
    #[arg(long)]
    pub cell_size_lon: Option<f64>,
    /// full15, no-global-offset or translation-only.
    #[arg(long, value_parser = parse_model)]
    pub model: Option<AlignmentModel>,
    /// raw or orthonormalized.
    #[arg(long, value_parser = parse_rotation_source)]
    pub rotation_source: Option<RotationSource>,
    /// UTC date of the NMEA log, YYYY-MM-DD. Defaults to the date of the
    /// first reference epoch.
    #[arg(long, value_parser = parse_date)]
    pub date: Option<NaiveDate>,
}

fn parse_model(s: &str) -> Result<AlignmentModel, String> {
    AlignmentModel::parse(s).ok_or_else(|| format!("unknown model `{s}`"))
}

fn parse_rotation_source(s: &str) -> Result<RotationSource, String> {
    RotationSource::parse(s).ok_or_else(|| format!("unknown rotation source `{s}`"))
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("bad date `{s}`: {e}"))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    ref_path: Option<PathBuf>,
    eval_path: Option<PathBuf>,
    output_path: Option<PathBuf>,
    sigma_max: Option<f64>,
    max_gap: Option<f64>,
    windows: Option<Vec<f64>>,
    service_thresholds: Option<Vec<f64>>,
    cell_size: Option<f64>,
    cell_size_lon: Option<f64>,
    model: Option<AlignmentModel>,
    rotation_source: Option<RotationSource>,
    date: Option<String>,
}

/// Fully resolved settings, embedded in every JSON output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub ref_path: Option<PathBuf>,
    pub eval_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    pub sigma_max: f64,
    pub max_gap: f64,
    pub windows: Vec<f64>,
    pub service_thresholds: Vec<f64>,
    pub cell_size: f64,
    pub cell_size_lon: f64,
    pub model: AlignmentModel,
    pub rotation_source: RotationSource,
    pub date: Option<NaiveDate>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ref_path: None,
            eval_path: None,
            output_path: None,
            sigma_max: DEFAULT_SIGMA_MAX_M,
            max_gap: DEFAULT_MAX_GAP_S,
            windows: DEFAULT_WINDOWS_S.to_vec(),
            service_thresholds: DEFAULT_SERVICE_THRESHOLDS.to_vec(),
            cell_size: DEFAULT_CELL_SIZE_DEG,
            cell_size_lon: DEFAULT_CELL_SIZE_DEG,
            model: AlignmentModel::Full15,
            rotation_source: RotationSource::Raw,
            date: None,
        }
    }
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => read_config_file(p)?,
            None => ConfigFile::default(),
        };
        let file_date = file.date.as_deref().map(parse_date).transpose().map_err(CliError::Format)?;
        let d = RunConfig::default();
        let cell_size = flags.cell_size.or(file.cell_size).unwrap_or(d.cell_size);
        let cfg = RunConfig {
            ref_path: flags.ref_path.clone().or(file.ref_path),
            eval_path: flags.eval_path.clone().or(file.eval_path),
            output_path: flags.output_path.clone().or(file.output_path),
            sigma_max: flags.sigma_max.or(file.sigma_max).unwrap_or(d.sigma_max),
            max_gap: flags.max_gap.or(file.max_gap).unwrap_or(d.max_gap),
            windows: flags.windows.clone().or(file.windows).unwrap_or(d.windows),
            service_thresholds: flags
                .thresholds
                .clone()
                .or(file.service_thresholds)
                .unwrap_or(d.service_thresholds),
            cell_size,
            cell_size_lon: flags.cell_size_lon.or(file.cell_size_lon).unwrap_or(cell_size),
            model: flags.model.or(file.model).unwrap_or(d.model),
            rotation_source: flags.rotation_source.or(file.rotation_source).unwrap_or(d.rotation_source),
            date: flags.date.or(file_date),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CliError::Format(format!("{name} must be positive, got {v}")))
            }
        };
        positive("sigma_max", self.sigma_max)?;
        positive("max_gap", self.max_gap)?;
        positive("cell_size", self.cell_size)?;
        positive("cell_size_lon", self.cell_size_lon)?;
        if self.windows.is_empty() {
            return Err(CliError::Format("at least one continuity window is required".into()));
        }
        for &w in &self.windows {
            positive("window", w)?;
        }
        if self.service_thresholds.is_empty() {
            return Err(CliError::Format("at least one service threshold is required".into()));
        }
        for &t in &self.service_thresholds {
            positive("service threshold", t)?;
        }
        if self.service_thresholds.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CliError::Format("service thresholds must be strictly decreasing".into()));
        }
        Ok(())
    }

    pub fn require_ref(&self) -> Result<&Path, CliError> {
        self.ref_path
            .as_deref()
            .ok_or_else(|| CliError::Format("--ref is required".into()))
    }

    pub fn require_eval(&self) -> Result<&Path, CliError> {
        self.eval_path
            .as_deref()
            .ok_or_else(|| CliError::Format("--eval is required".into()))
    }

    pub fn require_out(&self) -> Result<&Path, CliError> {
        self.output_path
            .as_deref()
            .ok_or_else(|| CliError::Format("--out is required".into()))
    }
}

fn read_config_file(path: &Path) -> Result<ConfigFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format(format!("config {}: {e}", path.display())))
}
