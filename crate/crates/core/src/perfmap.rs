//! Grid aggregation of per-epoch quality into map cells, exported as
//! GeoJSON polygons.
//!
//! Cells are fixed steps in latitude and longitude, so they are not square on
//! the ground: a 0.001° cell at 37°N is about 111 m by 89 m.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::ingest::{PositionMode, QualitySample};
use crate::stats::EmpiricalDistribution;

pub const DEFAULT_CELL_SIZE_DEG: f64 = 0.001;
pub const COORDINATE_DECIMALS: i32 = 7;

#[derive(Debug, Error)]
pub enum PerfMapError {
    #[error("cell size must be positive, got {0}")]
    CellSize(f64),
    #[error("export failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSize {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl CellSize {
    pub fn new(lat_deg: f64, lon_deg: f64) -> Result<Self, PerfMapError> {
        for v in [lat_deg, lon_deg] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PerfMapError::CellSize(v));
            }
        }
        Ok(Self { lat_deg, lon_deg })
    }

    pub fn square(deg: f64) -> Result<Self, PerfMapError> {
        Self::new(deg, deg)
    }

    pub fn index(&self, lat: f64, lon: f64) -> (i64, i64) {
        ((lat / self.lat_deg).floor() as i64, (lon / self.lon_deg).floor() as i64)
    }
}

/// Epochs grouped by cell, keyed by (lat index, lon index).
#[derive(Debug, Clone)]
pub struct Binning<'a> {
    pub cell_size: CellSize,
    pub groups: BTreeMap<(i64, i64), Vec<&'a QualitySample>>,
    /// Epochs without a position.
    pub excluded: usize,
}

impl Binning<'_> {
    pub fn binned(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }
}

pub fn bin_epochs(epochs: &[QualitySample], cell_size: CellSize) -> Binning<'_> {
    let mut groups: BTreeMap<(i64, i64), Vec<&QualitySample>> = BTreeMap::new();
    let mut excluded = 0;
    for e in epochs {
        match e.position {
            Some(p) => groups
                .entry(cell_size.index(p.latitude, p.longitude))
                .or_default()
                .push(e),
            None => excluded += 1,
        }
    }
    Binning {
        cell_size,
        groups,
        excluded,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub rtk_fixed_availability: f64,
    pub mean_hdop: Option<f64>,
    /// Satellite count reached or exceeded by 68% of the cell's epochs.
    pub p68_sats: Option<f64>,
    pub p95_corr_age: Option<f64>,
    pub p68_lateral_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfMapCell {
    pub cell_lat_index: i64,
    pub cell_lon_index: i64,
    pub cell_size: CellSize,
    pub epoch_count: usize,
    pub metrics: CellMetrics,
}

impl PerfMapCell {
    /// Closed ring of corners in (lon, lat) order, counter-clockwise from
    /// the south-west corner.
    pub fn ring(&self) -> [[f64; 2]; 5] {
        let lat0 = self.cell_lat_index as f64 * self.cell_size.lat_deg;
        let lat1 = (self.cell_lat_index + 1) as f64 * self.cell_size.lat_deg;
        let lon0 = self.cell_lon_index as f64 * self.cell_size.lon_deg;
        let lon1 = (self.cell_lon_index + 1) as f64 * self.cell_size.lon_deg;
        let r = round_coordinate;
        let sw = [r(lon0), r(lat0)];
        [sw, [r(lon1), r(lat0)], [r(lon1), r(lat1)], [r(lon0), r(lat1)], sw]
    }
}

fn round_coordinate(v: f64) -> f64 {
    let scale = 10f64.powi(COORDINATE_DECIMALS);
    let r = (v * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn percentile_of<I: Iterator<Item = f64>>(values: I, p: f64, at_least: bool) -> Option<f64> {
    let d = EmpiricalDistribution::from_iter(values).ok()?;
    let v = if at_least {
        d.percentile_at_least(p)
    } else {
        d.percentile(p)
    };
    v.ok()
}

pub fn cell_metrics(group: &[&QualitySample]) -> CellMetrics {
    let n = group.len();
    let fixed = group.iter().filter(|e| e.mode == PositionMode::RtkFixed).count();
    let hdops: Vec<f64> = group.iter().filter_map(|e| e.hdop).collect();
    CellMetrics {
        rtk_fixed_availability: if n == 0 { 0.0 } else { fixed as f64 / n as f64 },
        mean_hdop: (!hdops.is_empty()).then(|| hdops.iter().sum::<f64>() / hdops.len() as f64),
        p68_sats: percentile_of(group.iter().filter_map(|e| e.num_sats.map(f64::from)), 0.68, true),
        p95_corr_age: percentile_of(group.iter().filter_map(|e| e.corr_age), 0.95, false),
        p68_lateral_error: percentile_of(group.iter().filter_map(|e| e.lateral_error), 0.68, false),
    }
}

/// One cell per non-empty group, ordered by lat index then lon index.
pub fn aggregate_cells(binning: &Binning<'_>) -> Vec<PerfMapCell> {
    binning
        .groups
        .iter()
        .map(|(&(lat, lon), group)| PerfMapCell {
            cell_lat_index: lat,
            cell_lon_index: lon,
            cell_size: binning.cell_size,
            epoch_count: group.len(),
            metrics: cell_metrics(group),
        })
        .collect()
}

fn feature(cell: &PerfMapCell) -> Value {
    let m = &cell.metrics;
    json!({
        "type": "Feature",
        "geometry": {
            "type": "Polygon",
            "coordinates": [cell.ring().to_vec()],
        },
        "properties": {
            "cell_lat_index": cell.cell_lat_index,
            "cell_lon_index": cell.cell_lon_index,
            "cell_size_lat_deg": cell.cell_size.lat_deg,
            "cell_size_lon_deg": cell.cell_size.lon_deg,
            "epoch_count": cell.epoch_count,
            "rtk_fixed_availability": m.rtk_fixed_availability,
            "mean_hdop": m.mean_hdop,
            "p68_sats": m.p68_sats,
            "p95_corr_age": m.p95_corr_age,
            "p68_lateral_error": m.p68_lateral_error,
        },
    })
}

/// A FeatureCollection with one polygon per cell.
pub fn export_geojson(cells: &[PerfMapCell]) -> String {
    let mut sorted: Vec<&PerfMapCell> = cells.iter().collect();
    sorted.sort_by_key(|c| (c.cell_lat_index, c.cell_lon_index));
    let doc = json!({
        "type": "FeatureCollection",
        "features": sorted.into_iter().map(feature).collect::<Vec<_>>(),
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn write_geojson<W: Write>(cells: &[PerfMapCell], mut w: W) -> Result<(), PerfMapError> {
    w.write_all(export_geojson(cells).as_bytes())?;
    w.flush()?;
    Ok(())
}

/// The cell table as CSV; absent metrics are empty fields.
pub fn cells_csv(cells: &[PerfMapCell]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from(
        "cell_lat_index,cell_lon_index,epoch_count,rtk_fixed_availability,mean_hdop,p68_sats,p95_corr_age,p68_lateral_error\n",
    );
    for c in cells {
        let m = &c.metrics;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.cell_lat_index,
            c.cell_lon_index,
            c.epoch_count,
            m.rtk_fixed_availability,
            opt(m.mean_hdop),
            opt(m.p68_sats),
            opt(m.p95_corr_age),
            opt(m.p68_lateral_error),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::GeodeticPosition;
    use crate::stats::mode_availability;
    use proptest::prelude::*;

    fn epoch(lat: f64, lon: f64, mode: PositionMode) -> QualitySample {
        QualitySample {
            t: 0.0,
            position: Some(GeodeticPosition::new(lat, lon, 0.0).unwrap()),
            num_sats: None,
            hdop: None,
            mode,
            corr_age: None,
            lateral_error: None,
        }
    }

    #[test]
    fn floor_indices() {
        let size = CellSize::square(DEFAULT_CELL_SIZE_DEG).unwrap();
        assert_eq!(size.index(37.0005, -122.0004), (37000, -122001));
        assert_eq!(size.index(37.0005, -122.0004), size.index(37.000501, -122.000401));
        assert!(CellSize::square(0.0).is_err());
        assert!(CellSize::new(0.001, -1.0).is_err());
    }

    #[test]
    fn excluded_and_counts() {
        let mut epochs = vec![epoch(37.0005, -122.0004, PositionMode::RtkFixed); 10];
        for e in epochs.iter_mut().skip(5) {
            e.mode = PositionMode::Sps;
        }
        epochs.push(QualitySample { position: None, ..epochs[0].clone() });
        let b = bin_epochs(&epochs, CellSize::square(0.001).unwrap());
        assert_eq!(b.excluded, 1);
        let cells = aggregate_cells(&b);
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].epoch_count, 10);
        assert_eq!(cells[0].metrics.rtk_fixed_availability, 0.5);
        assert_eq!(cells[0].metrics.mean_hdop, None);
        assert_eq!(cells[0].metrics.p68_lateral_error, None);
    }

    #[test]
    fn empty_export_is_valid() {
        let text = export_geojson(&[]);
        let gj: geojson::GeoJson = text.parse().unwrap();
        match gj {
            geojson::GeoJson::FeatureCollection(fc) => assert!(fc.features.is_empty()),
            other => panic!("expected a feature collection, got {other:?}"),
        }
    }

    #[test]
    fn single_cell_corners() {
        let b_epochs = [epoch(37.0005, -122.0004, PositionMode::RtkFixed)];
        let cells = aggregate_cells(&bin_epochs(&b_epochs, CellSize::square(0.001).unwrap()));
        assert_eq!(
            cells[0].ring(),
            [[-122.001, 37.0], [-122.0, 37.0], [-122.0, 37.001], [-122.001, 37.001], [-122.001, 37.0]]
        );
        let text = export_geojson(&cells);
        assert!(text.contains("-122.001"));
        let gj: geojson::GeoJson = text.parse().unwrap();
        let geojson::GeoJson::FeatureCollection(fc) = gj else { panic!("not a collection") };
        let geom = fc.features[0].geometry.as_ref().unwrap();
        let geojson::Value::Polygon(rings) = &geom.value else { panic!("not a polygon") };
        assert_eq!(rings[0].first(), rings[0].last());
        let props = fc.features[0].properties.as_ref().unwrap();
        assert_eq!(props["epoch_count"], 1);
        assert_eq!(props["mean_hdop"], Value::Null);
    }

    fn random_epochs() -> impl Strategy<Value = Vec<QualitySample>> {
        proptest::collection::vec(
            (
                proptest::option::of((36.99f64..37.01, -122.01f64..-121.99)),
                0usize..5,
                proptest::option::of(3u32..20),
                proptest::option::of(0.5f64..5.0),
                proptest::option::of(0.0f64..30.0),
                proptest::option::of(0.0f64..3.0),
            )
                .prop_map(|(pos, m, sats, hdop, age, lat_err)| QualitySample {
                    t: 0.0,
                    position: pos.map(|(a, b)| GeodeticPosition::new(a, b, 10.0).unwrap()),
                    num_sats: sats,
                    hdop,
                    mode: PositionMode::ALL[m],
                    corr_age: age,
                    lateral_error: lat_err,
                }),
            0..400,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn partition_and_per_cell_oracle(epochs in random_epochs(), size in 0.001f64..0.01) {
            let cs = CellSize::square(size).unwrap();
            let b = bin_epochs(&epochs, cs);
            let cells = aggregate_cells(&b);
            let counted: usize = cells.iter().map(|c| c.epoch_count).sum();
            prop_assert_eq!(counted + b.excluded, epochs.len());

            for c in &cells {
                let members: Vec<&QualitySample> = epochs.iter()
                    .filter(|e| e.position.is_some_and(|p| cs.index(p.latitude, p.longitude) == (c.cell_lat_index, c.cell_lon_index)))
                    .collect();
                prop_assert_eq!(members.len(), c.epoch_count);
                let modes = mode_availability(members.iter().map(|e| e.mode)).unwrap();
                prop_assert_eq!(c.metrics.rtk_fixed_availability, modes.rtk_fixed);
                let lat_errs: Vec<f64> = members.iter().filter_map(|e| e.lateral_error).collect();
                let want = EmpiricalDistribution::new(lat_errs).ok().map(|d| d.percentile(0.68).unwrap());
                prop_assert_eq!(c.metrics.p68_lateral_error, want);
                prop_assert!((0.0..=1.0).contains(&c.metrics.rtk_fixed_availability));
            }
        }

        #[test]
        fn export_reparses_and_is_deterministic(epochs in random_epochs()) {
            let cells = aggregate_cells(&bin_epochs(&epochs, CellSize::square(0.002).unwrap()));
            let a = export_geojson(&cells);
            let b = export_geojson(&aggregate_cells(&bin_epochs(&epochs, CellSize::square(0.002).unwrap())));
            prop_assert_eq!(&a, &b);
            let gj: geojson::GeoJson = a.parse().unwrap();
            let geojson::GeoJson::FeatureCollection(fc) = gj else { panic!("not a collection") };
            prop_assert_eq!(fc.features.len(), cells.len());
            for (f, c) in fc.features.iter().zip(&cells) {
                let props = f.properties.as_ref().unwrap();
                prop_assert_eq!(props["epoch_count"].as_u64(), Some(c.epoch_count as u64));
                prop_assert_eq!(props["cell_lat_index"].as_i64(), Some(c.cell_lat_index));
                prop_assert_eq!(props["p95_corr_age"].as_f64(), c.metrics.p95_corr_age);
                let geojson::Value::Polygon(rings) = &f.geometry.as_ref().unwrap().value else { panic!("not a polygon") };
                prop_assert_eq!(rings[0].first(), rings[0].last());
                prop_assert_eq!(rings[0].len(), 5);
            }
        }
    }
}
