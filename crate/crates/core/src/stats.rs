//! Empirical distributions and availability tables.
//!
//! Percentiles use the nearest-rank definition with no interpolation: the
//! p-th percentile of n samples is the sample of rank ⌈p·n⌉. Tools that
//! interpolate between ranks will differ slightly on small samples.
//!
//! Every threshold count is strict (`value < threshold`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::PositionMode;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("empty sample set: nothing to report")]
    Empty,
    #[error("non-finite sample value {0}")]
    NonFinite(f64),
    #[error("percentile {0} outside (0, 1]")]
    Domain(f64),
    #[error("invalid thresholds: {0}")]
    Thresholds(String),
}

/// The reporting percentiles of the accuracy and geometry tables.
pub const REPORT_PERCENTILES: [f64; 3] = [0.68, 0.95, 0.99];

/// A sorted, non-empty sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self, StatsError> {
        if samples.is_empty() {
            return Err(StatsError::Empty);
        }
        if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(*bad));
        }
        samples.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Result<Self, StatsError> {
        Self::new(iter.into_iter().collect())
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.len() as f64
    }

    /// Nearest-rank percentile, `p` in (0, 1].
    pub fn percentile(&self, p: f64) -> Result<f64, StatsError> {
        Ok(self.sorted[nearest_rank(p, self.len())? - 1])
    }

    /// The largest value that at least a fraction `p` of the samples reach
    /// or exceed, i.e. the nearest-rank percentile counted from the top.
    /// This is how "at least k satellites" tables are read.
    pub fn percentile_at_least(&self, p: f64) -> Result<f64, StatsError> {
        let r = nearest_rank(p, self.len())?;
        Ok(self.sorted[self.len() - r])
    }

    /// Fraction of samples strictly below `threshold`.
    pub fn fraction_below(&self, threshold: f64) -> f64 {
        self.sorted.partition_point(|v| *v < threshold) as f64 / self.len() as f64
    }

    /// Step points `(x_(i), i/n)` of the empirical CDF, one per distinct
    /// value. The last fraction is exactly 1.
    pub fn cdf_points(&self) -> Vec<(f64, f64)> {
        let n = self.len();
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &x) in self.sorted.iter().enumerate() {
            let frac = (i + 1) as f64 / n as f64;
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 = frac,
                _ => out.push((x, frac)),
            }
        }
        out
    }
}

/// 1-based rank ⌈p·n⌉. The product is shrunk by one part in 10¹² first so
/// that p·n landing a rounding error above an integer does not skip a rank.
fn nearest_rank(p: f64, n: usize) -> Result<usize, StatsError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(StatsError::Domain(p));
    }
    let r = (p * n as f64 * (1.0 - 1e-12)).ceil() as usize;
    Ok(r.clamp(1, n))
}

pub fn percentile(d: &EmpiricalDistribution, p: f64) -> Result<f64, StatsError> {
    d.percentile(p)
}

pub fn cdf_points(d: &EmpiricalDistribution) -> Vec<(f64, f64)> {
    d.cdf_points()
}

/// Renders CDF points as `value,fraction` CSV.
pub fn cdf_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("value,fraction\n");
    for (x, f) in points {
        s.push_str(&format!("{x},{f}\n"));
    }
    s
}

/// 68/95/99 percentile triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentileRow {
    pub p68: f64,
    pub p95: f64,
    pub p99: f64,
}

impl PercentileRow {
    pub fn upper(d: &EmpiricalDistribution) -> Self {
        let [a, b, c] = REPORT_PERCENTILES.map(|p| d.percentile(p).expect("fixed p in range"));
        Self { p68: a, p95: b, p99: c }
    }

    pub fn at_least(d: &EmpiricalDistribution) -> Self {
        let [a, b, c] = REPORT_PERCENTILES.map(|p| d.percentile_at_least(p).expect("fixed p in range"));
        Self { p68: a, p95: b, p99: c }
    }
}

/// One row of a service-level table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceLevel {
    pub name: String,
    pub threshold: f64,
    pub availability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceLevelReport {
    pub n: usize,
    pub levels: Vec<ServiceLevel>,
}

/// Lateral-accuracy tiers: which road, which lane, where in lane on
/// highways and on local streets.
pub const DEFAULT_SERVICE_THRESHOLDS: [f64; 4] = [5.0, 1.5, 0.5, 0.3];
pub const DEFAULT_SERVICE_NAMES: [&str; 4] = [
    "which_road",
    "which_lane",
    "where_in_lane_highway",
    "where_in_lane_local",
];

/// Availability of each lateral accuracy level. Thresholds must be positive
/// and strictly decreasing; the four default tiers are named, custom ones
/// are numbered.
pub fn service_level_availability(
    lateral_magnitudes: &[f64],
    thresholds: &[f64],
) -> Result<ServiceLevelReport, StatsError> {
    if thresholds.is_empty() || thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(StatsError::Thresholds("service thresholds must be positive".into()));
    }
    if thresholds.windows(2).any(|w| w[1] >= w[0]) {
        return Err(StatsError::Thresholds(
            "service thresholds must be strictly decreasing".into(),
        ));
    }
    let d = EmpiricalDistribution::from_iter(lateral_magnitudes.iter().copied())?;
    let named = thresholds == DEFAULT_SERVICE_THRESHOLDS;
    let levels = thresholds
        .iter()
        .enumerate()
        .map(|(i, &t)| ServiceLevel {
            name: if named {
                DEFAULT_SERVICE_NAMES[i].to_string()
            } else {
                format!("level_{}", i + 1)
            },
            threshold: t,
            availability: d.fraction_below(t),
        })
        .collect();
    Ok(ServiceLevelReport { n: d.len(), levels })
}

/// Fraction of epochs in each position mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeAvailability {
    pub n: usize,
    pub rtk_fixed: f64,
    pub rtk_float: f64,
    pub diff_code: f64,
    pub sps: f64,
    pub none: f64,
}

impl ModeAvailability {
    pub fn get(&self, mode: PositionMode) -> f64 {
        match mode {
            PositionMode::RtkFixed => self.rtk_fixed,
            PositionMode::RtkFloat => self.rtk_float,
            PositionMode::DiffCode => self.diff_code,
            PositionMode::Sps => self.sps,
            PositionMode::None => self.none,
        }
    }

    pub fn total(&self) -> f64 {
        PositionMode::ALL.iter().map(|m| self.get(*m)).sum()
    }
}

pub fn mode_availability<I>(modes: I) -> Result<ModeAvailability, StatsError>
where
    I: IntoIterator<Item = PositionMode>,
{
    let mut counts = [0usize; 5];
    for m in modes {
        counts[m as usize] += 1;
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(StatsError::Empty);
    }
    let f = |c: usize| c as f64 / n as f64;
    Ok(ModeAvailability {
        n,
        rtk_fixed: f(counts[PositionMode::RtkFixed as usize]),
        rtk_float: f(counts[PositionMode::RtkFloat as usize]),
        diff_code: f(counts[PositionMode::DiffCode as usize]),
        sps: f(counts[PositionMode::Sps as usize]),
        none: f(counts[PositionMode::None as usize]),
    })
}

pub const DEFAULT_CORRECTION_AGE_THRESHOLDS: [f64; 3] = [2.0, 10.0, 120.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFraction {
    pub threshold: f64,
    pub fraction: f64,
}

/// Fraction of epochs whose correction age is strictly below each threshold.
/// Epochs without an age fail every threshold.
pub fn correction_age_availability(
    ages: &[Option<f64>],
    thresholds: &[f64],
) -> Result<Vec<ThresholdFraction>, StatsError> {
    if ages.is_empty() {
        return Err(StatsError::Empty);
    }
    if thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0))
        || thresholds.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(StatsError::Thresholds(
            "correction age thresholds must be positive and ascending".into(),
        ));
    }
    let n = ages.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| ThresholdFraction {
            threshold: t,
            fraction: ages.iter().filter(|a| matches!(a, Some(v) if *v < t)).count() as f64 / n,
        })
        .collect())
}
