//! NMEA 0183 ingestion: GGA fixes with GSA as the HDOP fallback.
//!
//! Every sentence is checksum-verified before it is dispatched on type, so a
//! corrupted sentence is always an error and never silently skipped.

use std::io::BufRead;

use chrono::NaiveDate;
use log::warn;
use thiserror::Error;

use super::{EvalEpoch, ParseDiagnostics, PositionMode};
use crate::geodesy::GeodeticPosition;

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NmeaError {
    #[error("checksum mismatch: computed {computed:02X}, sentence carries `{found}`")]
    Checksum { computed: u8, found: String },
    #[error("malformed sentence: {0}")]
    Malformed(String),
}

impl NmeaError {
    pub fn class(&self) -> &'static str {
        match self {
            NmeaError::Checksum { .. } => "checksum",
            NmeaError::Malformed(_) => "malformed",
        }
    }
}

/// Content of a GGA sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct GgaFix {
    /// UTC seconds since midnight.
    pub time_of_day: f64,
    /// `None` for quality 0 or empty coordinate fields.
    pub position: Option<GeodeticPosition>,
    pub quality: u8,
    pub num_sats: Option<u32>,
    pub hdop: Option<f64>,
    /// Age of differential data, seconds.
    pub corr_age: Option<f64>,
}

impl GgaFix {
    pub fn is_no_fix(&self) -> bool {
        self.quality == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NmeaSentence {
    Gga(GgaFix),
    Gsa { hdop: Option<f64> },
}

/// XOR of every byte in `body`.
pub fn checksum(body: &[u8]) -> u8 {
    body.iter().fold(0u8, |acc, b| acc ^ b)
}

/// Parses one physical line. `Ok(None)` means there is nothing to use:
/// an empty line or a valid sentence of a type we do not read.
pub fn parse_nmea_sentence(line: &str) -> Result<Option<NmeaSentence>, NmeaError> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() {
        return Ok(None);
    }
    let rest = line
        .strip_prefix('$')
        .ok_or_else(|| NmeaError::Malformed("sentence does not start with `$`".into()))?;
    let (body, cs) = rest
        .rsplit_once('*')
        .ok_or_else(|| NmeaError::Malformed("missing `*` checksum delimiter".into()))?;
    let computed = checksum(body.as_bytes());
    let given = parse_checksum(cs).ok_or_else(|| NmeaError::Checksum {
        computed,
        found: cs.to_string(),
    })?;
    if given != computed {
        return Err(NmeaError::Checksum {
            computed,
            found: cs.to_string(),
        });
    }

    let fields: Vec<&str> = body.split(',').collect();
    let address = fields[0];
    if address.len() != 5 || !address.is_ascii() {
        return Err(NmeaError::Malformed(format!("bad address field `{address}`")));
    }
    match &address[2..] {
        "GGA" => parse_gga(&fields).map(|g| Some(NmeaSentence::Gga(g))),
        "GSA" => parse_gsa(&fields).map(|hdop| Some(NmeaSentence::Gsa { hdop })),
        _ => Ok(None),
    }
}

/// Exactly two uppercase hex digits.
fn parse_checksum(s: &str) -> Option<u8> {
    let b = s.as_bytes();
    if b.len() != 2 || !b.iter().all(|c| c.is_ascii_digit() || (b'A'..=b'F').contains(c)) {
        return None;
    }
    u8::from_str_radix(s, 16).ok()
}

fn malformed(what: &str, value: &str) -> NmeaError {
    NmeaError::Malformed(format!("bad {what} `{value}`"))
}

fn opt_f64(s: &str, what: &str) -> Result<Option<f64>, NmeaError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Some)
        .ok_or_else(|| malformed(what, s))
}

fn parse_time_of_day(s: &str) -> Result<f64, NmeaError> {
    let bad = || malformed("UTC time", s);
    if s.len() < 6 || !s.is_char_boundary(6) {
        return Err(bad());
    }
    let (hms, frac) = s.split_at(6);
    if !hms.bytes().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let h: u32 = hms[0..2].parse().map_err(|_| bad())?;
    let m: u32 = hms[2..4].parse().map_err(|_| bad())?;
    let sec: f64 = format!("{}{}", &hms[4..6], frac).parse().map_err(|_| bad())?;
    if h > 23 || m > 59 || !(0.0..61.0).contains(&sec) {
        return Err(bad());
    }
    Ok(f64::from(h * 3600 + m * 60) + sec)
}

/// `ddmm.mmmm` / `dddmm.mmmm` into signed decimal degrees. The degree and
/// minute parts are split textually so no precision is lost.
fn parse_coordinate(value: &str, hemi: &str, deg_digits: usize) -> Result<f64, NmeaError> {
    let bad = || malformed("coordinate", value);
    let int_len = value.find('.').unwrap_or(value.len());
    if int_len != deg_digits + 2 || !value.is_ascii() {
        return Err(bad());
    }
    let deg: f64 = value[..deg_digits].parse().map_err(|_| bad())?;
    let min: f64 = value[deg_digits..].parse().map_err(|_| bad())?;
    if !(0.0..60.0).contains(&min) || value[..deg_digits].starts_with(['+', '-']) {
        return Err(bad());
    }
    let v = deg + min / 60.0;
    match (hemi, deg_digits) {
        ("N", 2) | ("E", 3) => Ok(v),
        ("S", 2) | ("W", 3) => Ok(-v),
        _ => Err(malformed("hemisphere", hemi)),
    }
}

fn parse_gga(f: &[&str]) -> Result<GgaFix, NmeaError> {
    if f.len() < 14 {
        return Err(NmeaError::Malformed(format!("GGA has {} fields, expected 15", f.len())));
    }
    let time_of_day = parse_time_of_day(f[1])?;
    let quality: u8 = f[6]
        .parse()
        .ok()
        .filter(|q| *q <= 8)
        .ok_or_else(|| malformed("fix quality", f[6]))?;
    let num_sats = if f[7].is_empty() {
        None
    } else {
        Some(f[7].parse::<u32>().map_err(|_| malformed("satellite count", f[7]))?)
    };
    let hdop = opt_f64(f[8], "HDOP")?;
    if matches!(hdop, Some(h) if h <= 0.0) && quality != 0 {
        return Err(malformed("HDOP", f[8]));
    }
    let corr_age = opt_f64(f[13], "differential age")?;
    if matches!(corr_age, Some(a) if a < 0.0) {
        return Err(malformed("differential age", f[13]));
    }

    let position = if quality == 0 || f[2].is_empty() || f[4].is_empty() {
        None
    } else {
        let lat = parse_coordinate(f[2], f[3], 2)?;
        let lon = parse_coordinate(f[4], f[5], 3)?;
        let alt_msl = opt_f64(f[9], "altitude")?.ok_or_else(|| malformed("altitude", f[9]))?;
        let separation = opt_f64(f[11], "geoid separation")?.unwrap_or(0.0);
        let p = GeodeticPosition::new(lat, lon, alt_msl + separation)
            .map_err(|e| NmeaError::Malformed(e.to_string()))?;
        Some(p)
    };

    Ok(GgaFix {
        time_of_day,
        position,
        quality,
        num_sats,
        hdop,
        corr_age,
    })
}

fn parse_gsa(f: &[&str]) -> Result<Option<f64>, NmeaError> {
    if f.len() < 18 {
        return Err(NmeaError::Malformed(format!("GSA has {} fields, expected 18", f.len())));
    }
    let hdop = opt_f64(f[16], "HDOP")?;
    match hdop {
        Some(h) if h <= 0.0 => Ok(None),
        other => Ok(other),
    }
}

/// Parsed NMEA stream.
#[derive(Debug, Clone, Default)]
pub struct NmeaLog {
    pub epochs: Vec<EvalEpoch>,
    pub diagnostics: ParseDiagnostics,
}

/// Unix time of 00:00 UTC on `date`.
pub fn day_start_unix(date: NaiveDate) -> f64 {
    date.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc().timestamp() as f64
}

/// Streams a log line by line. GGA sentences become epochs on `date`; each
/// backwards jump of the time of day by more than twelve hours is read as a
/// midnight rollover. Failures are counted, never fatal.
pub fn read_nmea<R: BufRead>(mut reader: R, date: NaiveDate) -> std::io::Result<NmeaLog> {
    let day0 = day_start_unix(date);
    let mut log = NmeaLog::default();
    let mut buf = Vec::with_capacity(128);
    let mut line_no = 0usize;
    let mut day = 0u32;
    let mut last_tod: Option<f64> = None;
    let mut current: Option<EvalEpoch> = None;
    let mut orphan_gsa_hdop: Option<f64> = None;

    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        log.diagnostics.lines += 1;
        let Ok(line) = std::str::from_utf8(&buf) else {
            log.diagnostics
                .record("malformed", format!("line {line_no}: not valid UTF-8"));
            continue;
        };
        let sentence = match parse_nmea_sentence(line) {
            Ok(Some(s)) => s,
            Ok(None) => continue,
            Err(e) => {
                log.diagnostics.record(e.class(), format!("line {line_no}: {e}"));
                continue;
            }
        };
        match sentence {
            NmeaSentence::Gga(fix) => {
                if let Some(prev) = last_tod {
                    if fix.time_of_day < prev - SECONDS_PER_DAY / 2.0 {
                        day += 1;
                    }
                }
                let t = day0 + f64::from(day) * SECONDS_PER_DAY + fix.time_of_day;
                let previous_t = current
                    .as_ref()
                    .map(|e| e.t)
                    .or_else(|| log.epochs.last().map(|e| e.t));
                if matches!(previous_t, Some(p) if t <= p) {
                    log.diagnostics.record(
                        "non_monotonic",
                        format!("line {line_no}: time {t} s does not advance"),
                    );
                    continue;
                }
                last_tod = Some(fix.time_of_day);
                let (_, folded) = PositionMode::from_gga_quality(fix.quality);
                if folded {
                    warn!("line {line_no}: GGA quality {} read as standard positioning", fix.quality);
                    log.diagnostics.record(
                        "unmapped_quality",
                        format!("line {line_no}: quality {} mapped to sps", fix.quality),
                    );
                }
                if let Some(done) = current.take() {
                    log.epochs.push(done);
                }
                let hdop = fix.hdop.or(orphan_gsa_hdop.take());
                current = Some(EvalEpoch {
                    t,
                    position: fix.position,
                    num_sats: fix.num_sats,
                    hdop,
                    fix_quality: fix.quality,
                    corr_age: fix.corr_age,
                });
            }
            NmeaSentence::Gsa { hdop } => match current.as_mut() {
                Some(e) if e.hdop.is_none() => e.hdop = hdop,
                Some(_) => {}
                None => orphan_gsa_hdop = hdop,
            },
        }
    }
    if let Some(done) = current.take() {
        log.epochs.push(done);
    }
    Ok(log)
}

/// Fields for [`format_gga`].
#[derive(Debug, Clone, Copy)]
pub struct GgaRecord {
    pub time_of_day: f64,
    pub position: Option<GeodeticPosition>,
    pub quality: u8,
    pub num_sats: Option<u32>,
    pub hdop: Option<f64>,
    pub geoid_separation: f64,
    pub corr_age: Option<f64>,
}

/// Number of decimals written for coordinate minutes. Twelve decimals round
/// positions to within 1e-9 m, well past what receivers emit, so that
/// generated fixtures survive the round trip.
pub const MINUTE_DECIMALS: usize = 12;

fn format_coordinate(value: f64, deg_digits: usize, pos: char, neg: char) -> String {
    let hemi = if value < 0.0 { neg } else { pos };
    let a = value.abs();
    let mut deg = a.floor();
    let scale = 10f64.powi(MINUTE_DECIMALS as i32);
    let mut min = ((a - deg) * 60.0 * scale).round() / scale;
    if min >= 60.0 {
        deg += 1.0;
        min = 0.0;
    }
    format!(
        "{:0dw$}{:0mw$.prec$},{hemi}",
        deg as u32,
        min,
        dw = deg_digits,
        mw = MINUTE_DECIMALS + 3,
        prec = MINUTE_DECIMALS
    )
}

/// Renders a complete GGA sentence with its checksum (no line terminator).
pub fn format_gga(talker: &str, r: &GgaRecord) -> String {
    let tod = (r.time_of_day * 100.0).round() / 100.0;
    let h = (tod / 3600.0).floor();
    let m = ((tod - h * 3600.0) / 60.0).floor();
    let s = tod - h * 3600.0 - m * 60.0;
    let time = format!("{:02}{:02}{:05.2}", h as u32, m as u32, s);
    let (lat, lon, alt) = match r.position {
        Some(p) => (
            format_coordinate(p.latitude, 2, 'N', 'S'),
            format_coordinate(p.longitude, 3, 'E', 'W'),
            format!("{:.9}", p.altitude - r.geoid_separation),
        ),
        None => (",".to_string(), ",".to_string(), String::new()),
    };
    let sats = r.num_sats.map(|n| format!("{n:02}")).unwrap_or_default();
    let hdop = r.hdop.map(|h| format!("{h:.1}")).unwrap_or_default();
    let age = r.corr_age.map(|a| format!("{a:.1}")).unwrap_or_default();
    let body = format!(
        "{talker}GGA,{time},{lat},{lon},{},{sats},{hdop},{alt},M,{:.1},M,{age},0000",
        r.quality, r.geoid_separation
    );
    format!("${body}*{:02X}", checksum(body.as_bytes()))
}

/// Renders a GSA sentence carrying only DOP values.
pub fn format_gsa(talker: &str, pdop: f64, hdop: f64, vdop: f64) -> String {
    let body = format!("{talker}GSA,A,3,,,,,,,,,,,,,{pdop:.1},{hdop:.1},{vdop:.1}");
    format!("${body}*{:02X}", checksum(body.as_bytes()))
}
