use serde::Serialize;

use gnssbench::continuity::{
    continuity_table, hdop_predicates, labelled, make_condition, mode_class_predicates, outage_accounting,
    outages_csv, sats_predicates, ContinuityTable, OutageRecord, Predicate, DEFAULT_HDOP_THRESHOLDS,
    DEFAULT_SATS_THRESHOLDS,
};
use gnssbench::ingest::{ParseDiagnostics, QualitySample};
use gnssbench::stats::{EmpiricalDistribution, PercentileRow};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{json_bytes, Outputs, Provenance};
use crate::pipeline::{load_quality_stream, Source};

#[derive(Serialize)]
struct OutageSummary {
    group: &'static str,
    predicate: String,
    outages: usize,
    outage_s: f64,
    in_service_s: f64,
    gap_s: f64,
    span_s: f64,
    data_gaps: usize,
    median_duration_s: Option<f64>,
    duration_s: Option<PercentileRow>,
}

#[derive(Serialize)]
struct Tables {
    satellites: ContinuityTable,
    hdop: ContinuityTable,
    position_mode: ContinuityTable,
}

#[derive(Serialize)]
struct ContinuityDoc<'a> {
    #[serde(flatten)]
    provenance: Provenance<'a>,
    source: Source,
    epochs: usize,
    dropped_out_of_order: usize,
    diagnostics: &'a ParseDiagnostics,
    windows: &'a [f64],
    tables: Tables,
    outages: Vec<OutageSummary>,
}

struct Group {
    name: &'static str,
    predicates: Vec<(String, Predicate)>,
}

fn groups() -> Vec<Group> {
    vec![
        Group {
            name: "satellites",
            predicates: labelled(sats_predicates(&DEFAULT_SATS_THRESHOLDS)),
        },
        Group {
            name: "hdop",
            predicates: labelled(hdop_predicates(&DEFAULT_HDOP_THRESHOLDS)),
        },
        Group {
            name: "position_mode",
            predicates: mode_class_predicates(),
        },
    ]
}

type LabelledOutages = (String, Vec<OutageRecord>);

fn outage_summaries(
    samples: &[QualitySample],
    groups: &[Group],
) -> Result<(Vec<OutageSummary>, Vec<LabelledOutages>), CliError> {
    let mut summaries = Vec::new();
    let mut records = Vec::new();
    for g in groups {
        for (label, p) in &g.predicates {
            let acc = outage_accounting(&make_condition(samples, p)?);
            let durations = EmpiricalDistribution::from_iter(acc.outages.iter().map(|o| o.duration)).ok();
            let name = format!("{}:{label}", g.name);
            summaries.push(OutageSummary {
                group: g.name,
                predicate: label.clone(),
                outages: acc.outages.len(),
                outage_s: acc.outage_s,
                in_service_s: acc.in_service_s,
                gap_s: acc.gap_s,
                span_s: acc.span_s,
                data_gaps: acc.gaps.len(),
                median_duration_s: durations.as_ref().map(|d| d.percentile(0.5)).transpose()?,
                duration_s: durations.as_ref().map(PercentileRow::upper),
            });
            records.push((name, acc.outages));
        }
    }
    Ok((summaries, records))
}

fn outage_cdf_csv(records: &[(String, Vec<OutageRecord>)]) -> String {
    let mut s = String::from("predicate,duration_s,fraction\n");
    for (name, outages) in records {
        if let Ok(d) = EmpiricalDistribution::from_iter(outages.iter().map(|o| o.duration)) {
            for (x, f) in d.cdf_points() {
                s.push_str(&format!("\"{name}\",{x},{f}\n"));
            }
        }
    }
    s
}

pub fn run(cfg: &RunConfig, source: Option<Source>) -> Result<(), CliError> {
    let out = cfg.require_out()?;
    let stream = load_quality_stream(cfg, source)?;
    let samples = &stream.samples;
    let groups = groups();
    let table = |i: usize| continuity_table(samples, &groups[i].predicates, &cfg.windows);
    let tables = Tables {
        satellites: table(0)?,
        hdop: table(1)?,
        position_mode: table(2)?,
    };
    let (outages, records) = outage_summaries(samples, &groups)?;

    let mut outputs = Outputs::default();
    outputs.add("continuity_satellites.csv", tables.satellites.to_csv());
    outputs.add("continuity_hdop.csv", tables.hdop.to_csv());
    outputs.add("continuity_position_mode.csv", tables.position_mode.to_csv());
    outputs.add(
        "outages.csv",
        outages_csv(records.iter().map(|(n, o)| (n.as_str(), o.as_slice()))),
    );
    outputs.add("outage_cdf.csv", outage_cdf_csv(&records));
    let doc = ContinuityDoc {
        provenance: Provenance::new("continuity", cfg, stream.inputs.iter().map(|f| f.digest()).collect()),
        source: stream.source,
        epochs: samples.len(),
        dropped_out_of_order: stream.dropped_out_of_order,
        diagnostics: &stream.diagnostics,
        windows: &cfg.windows,
        tables,
        outages,
    };
    outputs.add("continuity.json", json_bytes(&doc));
    outputs.commit(out)?;

    println!("epochs: {}", doc.epochs);
    for (name, t) in [
        ("satellites", &doc.tables.satellites),
        ("hdop", &doc.tables.hdop),
        ("position_mode", &doc.tables.position_mode),
    ] {
        println!("{name}:");
        print!("{}", t.to_csv());
    }
    Ok(())
}
