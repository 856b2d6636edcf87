//! Reading the reference INS CSV and the evaluated receiver's NMEA log, and
//! pairing the two streams in time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{EulerAttitude, GeodeticPosition};

pub mod nmea;
pub mod refcsv;
pub mod sync;

pub use nmea::{parse_nmea_sentence, read_nmea, NmeaError, NmeaLog, NmeaSentence};
pub use refcsv::{parse_ref_csv, write_ref_csv, RefLog, REF_CSV_COLUMNS};
pub use sync::{synchronize, PairedEpoch, SyncResult, SyncStats, DEFAULT_MAX_GAP_S};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),
    #[error("non-monotonic time at row {row}: {t} s does not follow {previous} s")]
    NonMonotonicTime { row: usize, t: f64, previous: f64 },
    #[error("CSV format error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Position solution class, following the five categories a survey-grade
/// INS reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionMode {
    RtkFixed,
    RtkFloat,
    DiffCode,
    Sps,
    None,
}

impl PositionMode {
    pub const ALL: [PositionMode; 5] = [
        PositionMode::RtkFixed,
        PositionMode::RtkFloat,
        PositionMode::DiffCode,
        PositionMode::Sps,
        PositionMode::None,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PositionMode::RtkFixed => "rtk_fixed",
            PositionMode::RtkFloat => "rtk_float",
            PositionMode::DiffCode => "diff_code",
            PositionMode::Sps => "sps",
            PositionMode::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    /// Maps a GGA fix-quality code. The flag is true for codes that have no
    /// direct counterpart and were folded onto `Sps`.
    pub fn from_gga_quality(q: u8) -> (Self, bool) {
        match q {
            0 => (PositionMode::None, false),
            1 => (PositionMode::Sps, false),
            2 => (PositionMode::DiffCode, false),
            4 => (PositionMode::RtkFixed, false),
            5 => (PositionMode::RtkFloat, false),
            // dead reckoning is not a GNSS position
            6 => (PositionMode::None, false),
            _ => (PositionMode::Sps, true),
        }
    }

    /// Inverse of [`from_gga_quality`](Self::from_gga_quality) for writers.
    pub fn gga_quality(self) -> u8 {
        match self {
            PositionMode::RtkFixed => 4,
            PositionMode::RtkFloat => 5,
            PositionMode::DiffCode => 2,
            PositionMode::Sps => 1,
            PositionMode::None => 0,
        }
    }
}

/// One ground-truth INS sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefEpoch {
    /// Unix time, seconds.
    pub t: f64,
    pub position: GeodeticPosition,
    pub attitude: EulerAttitude,
    /// Reported 1σ horizontal position uncertainty, meters.
    pub sigma_h: f64,
    pub mode: PositionMode,
    pub num_sats: Option<u32>,
    pub hdop: Option<f64>,
    /// Age of differential corrections, seconds.
    pub corr_age: Option<f64>,
}

/// One fix from the receiver under evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalEpoch {
    pub t: f64,
    /// `None` when the receiver reported no fix.
    pub position: Option<GeodeticPosition>,
    pub num_sats: Option<u32>,
    pub hdop: Option<f64>,
    /// Raw GGA quality code, 0–8.
    pub fix_quality: u8,
    pub corr_age: Option<f64>,
}

impl EvalEpoch {
    pub fn mode(&self) -> PositionMode {
        PositionMode::from_gga_quality(self.fix_quality).0
    }

    pub fn has_valid_fix(&self) -> bool {
        self.position.is_some() && self.mode() != PositionMode::None
    }
}

/// Failure counts by class plus the first few messages, for run reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseDiagnostics {
    pub lines: usize,
    pub counts: BTreeMap<String, usize>,
    pub messages: Vec<String>,
}

const MAX_DIAGNOSTIC_MESSAGES: usize = 20;

impl ParseDiagnostics {
    pub fn record(&mut self, class: &str, message: impl Into<String>) {
        *self.counts.entry(class.to_string()).or_default() += 1;
        if self.messages.len() < MAX_DIAGNOSTIC_MESSAGES {
            self.messages.push(message.into());
        }
    }

    pub fn count(&self, class: &str) -> usize {
        self.counts.get(class).copied().unwrap_or(0)
    }

    pub fn total_failures(&self) -> usize {
        self.counts.values().sum()
    }
}

/// A receiver-agnostic view of one epoch's quality metadata, used by the
/// availability, continuity and map layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualitySample {
    pub t: f64,
    pub position: Option<GeodeticPosition>,
    pub num_sats: Option<u32>,
    pub hdop: Option<f64>,
    pub mode: PositionMode,
    pub corr_age: Option<f64>,
    /// Aligned lateral error magnitude, when an alignment was applied.
    pub lateral_error: Option<f64>,
}

impl From<&RefEpoch> for QualitySample {
    fn from(e: &RefEpoch) -> Self {
        Self {
            t: e.t,
            position: Some(e.position),
            num_sats: e.num_sats,
            hdop: e.hdop,
            mode: e.mode,
            corr_age: e.corr_age,
            lateral_error: None,
        }
    }
}

impl From<&EvalEpoch> for QualitySample {
    fn from(e: &EvalEpoch) -> Self {
        Self {
            t: e.t,
            position: e.position,
            num_sats: e.num_sats,
            hdop: e.hdop,
            mode: e.mode(),
            corr_age: e.corr_age,
            lateral_error: None,
        }
    }
}
