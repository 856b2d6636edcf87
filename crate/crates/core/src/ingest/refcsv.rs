//! Ground-truth INS CSV.
//!
//! Columns are matched by exact header name, in any order. Empty cells mean
//! "absent" for the optional fields. Angles and coordinates are degrees.

use std::io::{Read, Write};

use super::{IngestError, ParseDiagnostics, PositionMode, RefEpoch};
use crate::geodesy::{wrap_degrees, EulerAttitude, GeodeticPosition};

pub const REF_CSV_COLUMNS: [&str; 12] = [
    "time_unix_s",
    "lat_deg",
    "lon_deg",
    "alt_m",
    "roll_deg",
    "pitch_deg",
    "yaw_deg",
    "sigma_h_m",
    "pos_mode",
    "num_sats",
    "hdop",
    "corr_age_s",
];

#[derive(Debug, Clone, Default)]
pub struct RefLog {
    pub epochs: Vec<RefEpoch>,
    pub diagnostics: ParseDiagnostics,
}

/// Reads the whole CSV. Rows that fail to parse are counted in the
/// diagnostics and skipped; a missing column or time that does not strictly
/// increase aborts with an error.
pub fn parse_ref_csv<R: Read>(reader: R) -> Result<RefLog, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = [0usize; 12];
    for (slot, name) in index.iter_mut().zip(REF_CSV_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))?;
    }

    let mut log = RefLog::default();
    let mut record = csv::StringRecord::new();
    let mut row = 0usize;
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                row += 1;
                log.diagnostics.lines += 1;
                log.diagnostics.record("malformed", format!("row {row}: {e}"));
                continue;
            }
        }
        row += 1;
        log.diagnostics.lines += 1;
        let epoch = match parse_row(&record, &index) {
            Ok(e) => e,
            Err(msg) => {
                log.diagnostics.record("malformed", format!("row {row}: {msg}"));
                continue;
            }
        };
        if let Some(prev) = log.epochs.last() {
            if epoch.t <= prev.t {
                return Err(IngestError::NonMonotonicTime {
                    row,
                    t: epoch.t,
                    previous: prev.t,
                });
            }
        }
        log.epochs.push(epoch);
    }
    Ok(log)
}

fn parse_row(record: &csv::StringRecord, index: &[usize; 12]) -> Result<RefEpoch, String> {
    let cell = |i: usize| record.get(index[i]).unwrap_or("");
    let required = |i: usize| -> Result<f64, String> {
        let s = cell(i);
        let v: f64 = s
            .parse()
            .map_err(|_| format!("bad {} `{s}`", REF_CSV_COLUMNS[i]))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite {}", REF_CSV_COLUMNS[i]))
        }
    };
    let optional = |i: usize| -> Result<Option<f64>, String> {
        if cell(i).is_empty() {
            Ok(None)
        } else {
            required(i).map(Some)
        }
    };

    let t = required(0)?;
    let position = GeodeticPosition::new(required(1)?, required(2)?, required(3)?)
        .map_err(|e| e.to_string())?;
    let roll = wrap_degrees(required(4)?).to_radians();
    let pitch = required(5)?.to_radians();
    let yaw = wrap_degrees(required(6)?).to_radians();
    let attitude = EulerAttitude::new(yaw, pitch, roll).map_err(|e| e.to_string())?;
    let sigma_h = required(7)?;
    if sigma_h < 0.0 {
        return Err(format!("negative sigma_h_m {sigma_h}"));
    }
    let mode = PositionMode::parse(cell(8)).ok_or_else(|| format!("unknown pos_mode `{}`", cell(8)))?;
    let num_sats = match cell(9) {
        "" => None,
        s => Some(s.parse::<u32>().map_err(|_| format!("bad num_sats `{s}`"))?),
    };
    let hdop = optional(10)?;
    if matches!(hdop, Some(h) if h <= 0.0) {
        return Err("hdop must be positive".into());
    }
    let corr_age = optional(11)?;
    if matches!(corr_age, Some(a) if a < 0.0) {
        return Err("negative corr_age_s".into());
    }
    Ok(RefEpoch {
        t,
        position,
        attitude,
        sigma_h,
        mode,
        num_sats,
        hdop,
        corr_age,
    })
}

/// A degree value whose conversion back to radians reproduces `rad` exactly,
/// when one exists near `rad.to_degrees()`.
fn exact_degrees(rad: f64) -> f64 {
    let d = rad.to_degrees();
    if d.to_radians() == rad {
        return d;
    }
    let (mut up, mut down) = (d, d);
    for _ in 0..8 {
        up = up.next_up();
        down = down.next_down();
        if up.to_radians() == rad {
            return up;
        }
        if down.to_radians() == rad {
            return down;
        }
    }
    d
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes epochs with the canonical header. Floats use shortest round-trip
/// formatting, so re-parsing a written file reproduces every field.
pub fn write_ref_csv<W: Write>(epochs: &[RefEpoch], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", REF_CSV_COLUMNS.join(","))?;
    for e in epochs {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            e.t,
            e.position.latitude,
            e.position.longitude,
            e.position.altitude,
            exact_degrees(e.attitude.roll),
            exact_degrees(e.attitude.pitch),
            exact_degrees(e.attitude.yaw),
            e.sigma_h,
            e.mode.as_str(),
            opt(e.num_sats),
            opt(e.hdop),
            opt(e.corr_age),
        )?;
    }
    w.flush()
}
