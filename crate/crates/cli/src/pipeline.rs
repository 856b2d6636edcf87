//! Loading the two input streams and pairing them, shared by the
//! subcommands.

use std::io::Cursor;
use std::path::Path;

use chrono::{DateTime, NaiveDate};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use gnssbench::align::{select_confident_pairs, AlignmentSolution};
use gnssbench::geodesy::{GeodeticPosition, LocalFrame};
use gnssbench::ingest::{
    parse_ref_csv, read_nmea, synchronize, EvalEpoch, NmeaLog, PairedEpoch, ParseDiagnostics,
    QualitySample, RefEpoch, RefLog, SyncStats,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::InputFile;

/// Horizontal extent past which a single tangent plane starts to bend the
/// error budget.
const SINGLE_ANCHOR_EXTENT_M: f64 = 100_000.0;

pub fn load_ref(path: &Path) -> Result<(InputFile, RefLog), CliError> {
    let file = InputFile::read("ref", path)?;
    let log = parse_ref_csv(Cursor::new(&file.bytes))
        .map_err(|e| prefix(CliError::from(e), path))?;
    info!(
        "{}: {} epochs, {} rows rejected",
        path.display(),
        log.epochs.len(),
        log.diagnostics.total_failures()
    );
    Ok((file, log))
}

pub fn load_eval(path: &Path, date: NaiveDate) -> Result<(InputFile, NmeaLog), CliError> {
    let file = InputFile::read("eval", path)?;
    let log = read_nmea(Cursor::new(&file.bytes), date)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    info!(
        "{}: {} GGA epochs, {} sentences rejected",
        path.display(),
        log.epochs.len(),
        log.diagnostics.total_failures()
    );
    Ok((file, log))
}

fn prefix(e: CliError, path: &Path) -> CliError {
    let p = path.display();
    match e {
        CliError::Format(m) => CliError::Format(format!("{p}: {m}")),
        CliError::Io(m) => CliError::Io(format!("{p}: {m}")),
        other => other,
    }
}

/// The configured date, else the UTC date of the first reference epoch.
pub fn resolve_date(cfg: &RunConfig, refs: Option<&[RefEpoch]>) -> Result<NaiveDate, CliError> {
    if let Some(d) = cfg.date {
        return Ok(d);
    }
    refs.and_then(|r| r.first())
        .and_then(|e| DateTime::from_timestamp(e.t.floor() as i64, 0))
        .map(|d| d.date_naive())
        .ok_or_else(|| {
            CliError::Format("--date is required when no reference epochs give the NMEA day".into())
        })
}

/// Parse and pairing statistics embedded in reports.
#[derive(Debug, Clone, Serialize)]
pub struct PairingReport {
    pub anchor: GeodeticPosition,
    pub ref_epochs: usize,
    pub eval_epochs: usize,
    pub eval_valid_fixes: usize,
    pub sync: SyncStats,
    pub sigma_max: f64,
    pub confident_pairs: usize,
    pub ref_diagnostics: ParseDiagnostics,
    pub eval_diagnostics: ParseDiagnostics,
    pub warnings: Vec<String>,
}

/// Both streams loaded and paired, keeping only pairs whose reference is
/// confident enough to serve as truth.
pub struct Prepared {
    pub inputs: Vec<InputFile>,
    pub refs: Vec<RefEpoch>,
    pub evals: Vec<EvalEpoch>,
    pub pairs: Vec<PairedEpoch>,
    pub report: PairingReport,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let (ref_file, ref_log) = load_ref(cfg.require_ref()?)?;
    let date = resolve_date(cfg, Some(&ref_log.epochs))?;
    let (eval_file, eval_log) = load_eval(cfg.require_eval()?, date)?;
    let refs = ref_log.epochs;
    let evals = eval_log.epochs;

    let anchor = refs
        .first()
        .ok_or_else(|| CliError::Insufficient("reference file has no usable epochs".into()))?
        .position;
    let valid = evals.iter().filter(|e| e.has_valid_fix()).count();
    if valid == 0 {
        return Err(CliError::Insufficient(format!(
            "evaluated log has no valid fixes ({} GGA epochs)",
            evals.len()
        )));
    }

    let frame = LocalFrame::new(anchor).map_err(|e| CliError::Format(format!("reference anchor: {e}")))?;
    let sync = synchronize(&refs, &evals, &frame, cfg.max_gap);
    let mut warnings = sync.warnings;
    let extent = sync
        .pairs
        .iter()
        .map(|p| p.ref_ned.north.hypot(p.ref_ned.east))
        .fold(0.0, f64::max);
    if extent > SINGLE_ANCHOR_EXTENT_M {
        warnings.push(format!(
            "route reaches {:.0} km from the anchor; a single tangent plane is used throughout",
            extent / 1000.0
        ));
    }
    let pairs = select_confident_pairs(sync.pairs, cfg.sigma_max);
    for w in &warnings {
        warn!("{w}");
    }
    let report = PairingReport {
        anchor,
        ref_epochs: refs.len(),
        eval_epochs: evals.len(),
        eval_valid_fixes: valid,
        sync: sync.stats,
        sigma_max: cfg.sigma_max,
        confident_pairs: pairs.len(),
        ref_diagnostics: ref_log.diagnostics,
        eval_diagnostics: eval_log.diagnostics,
        warnings,
    };
    Ok(Prepared {
        inputs: vec![ref_file, eval_file],
        refs,
        evals,
        pairs,
        report,
    })
}

/// Which receiver's quality stream a continuity or map run reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Ref,
    Eval,
}

/// One receiver's quality samples, strictly increasing in time.
pub struct QualityStream {
    pub inputs: Vec<InputFile>,
    pub source: Source,
    pub samples: Vec<QualitySample>,
    /// Epochs dropped for repeating or reversing time.
    pub dropped_out_of_order: usize,
    pub diagnostics: ParseDiagnostics,
}

pub fn load_quality_stream(cfg: &RunConfig, source: Option<Source>) -> Result<QualityStream, CliError> {
    let source = match source {
        Some(s) => s,
        None if cfg.ref_path.is_some() => Source::Ref,
        None if cfg.eval_path.is_some() => Source::Eval,
        None => return Err(CliError::Format("--ref or --eval is required".into())),
    };
    let (inputs, samples, diagnostics) = match source {
        Source::Ref => {
            let (file, log) = load_ref(cfg.require_ref()?)?;
            let s: Vec<QualitySample> = log.epochs.iter().map(QualitySample::from).collect();
            (vec![file], s, log.diagnostics)
        }
        Source::Eval => {
            let mut inputs = Vec::new();
            let refs = match &cfg.ref_path {
                Some(p) if cfg.date.is_none() => {
                    let (file, log) = load_ref(p)?;
                    inputs.push(file);
                    Some(log.epochs)
                }
                _ => None,
            };
            let date = resolve_date(cfg, refs.as_deref())?;
            let (file, log) = load_eval(cfg.require_eval()?, date)?;
            inputs.insert(0, file);
            let s: Vec<QualitySample> = log.epochs.iter().map(QualitySample::from).collect();
            (inputs, s, log.diagnostics)
        }
    };
    let n = samples.len();
    let mut last = f64::NEG_INFINITY;
    let samples: Vec<QualitySample> = samples
        .into_iter()
        .filter(|s| {
            let keep = s.t > last;
            if keep {
                last = s.t;
            }
            keep
        })
        .collect();
    let dropped = n - samples.len();
    if dropped > 0 {
        warn!("{dropped} epochs dropped for non-increasing time");
    }
    if samples.is_empty() {
        return Err(CliError::Insufficient("input has no epochs".into()));
    }
    Ok(QualityStream {
        inputs,
        source,
        samples,
        dropped_out_of_order: dropped,
        diagnostics,
    })
}

/// Reads an alignment written by `align`, or a bare solution object.
pub fn load_alignment(path: &Path) -> Result<(InputFile, AlignmentSolution), CliError> {
    let file = InputFile::read("alignment", path)?;
    let bad = |e: serde_json::Error| CliError::Format(format!("{}: {e}", path.display()));
    let mut value: serde_json::Value = serde_json::from_slice(&file.bytes).map_err(bad)?;
    let solution = match value.get_mut("solution") {
        Some(s) => serde_json::from_value(s.take()),
        None => serde_json::from_value(value),
    }
    .map_err(bad)?;
    Ok((file, solution))
}
