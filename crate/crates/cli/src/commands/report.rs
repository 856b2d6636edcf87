use std::path::Path;

use serde::Serialize;

use gnssbench::align::{
    align_observations, compute_residuals, error_summary, error_summary_signed, observations, AlignmentModel,
    AlignmentSolution, ErrorSummary,
};
use gnssbench::ingest::PositionMode;
use gnssbench::stats::{
    cdf_csv, correction_age_availability, mode_availability, service_level_availability,
    EmpiricalDistribution, ModeAvailability, PercentileRow, ServiceLevelReport, ThresholdFraction,
    DEFAULT_CORRECTION_AGE_THRESHOLDS,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{json_bytes, Outputs, Provenance};
use crate::pipeline::{load_alignment, prepare, PairingReport};

pub struct ReportOptions<'a> {
    pub alignment: Option<&'a Path>,
    pub assume_identity: bool,
    pub signed: bool,
}

#[derive(Serialize)]
struct AlignmentUsed<'a> {
    /// `file` or `inline`.
    origin: &'static str,
    solution: &'a AlignmentSolution,
}

#[derive(Serialize)]
struct Accuracy {
    /// Errors of the evaluated receiver measured against the reference.
    source: &'static str,
    summary: ErrorSummary,
    signed: Option<ErrorSummary>,
}

#[derive(Serialize)]
struct ServiceLevels {
    /// From measured lateral errors of the evaluated receiver.
    measured: ServiceLevelReport,
    /// From the σ_H the reference reports for itself, over all its epochs.
    reference_reported: ServiceLevelReport,
}

#[derive(Serialize)]
struct Visibility {
    n_sats: usize,
    /// Satellite counts reached or exceeded by 68/95/99% of epochs.
    num_sats: Option<PercentileRow>,
    n_hdop: usize,
    hdop: Option<PercentileRow>,
}

#[derive(Serialize)]
struct StreamPair<T> {
    reference: T,
    eval: T,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    #[serde(flatten)]
    provenance: Provenance<'a>,
    pairing: &'a PairingReport,
    alignment: AlignmentUsed<'a>,
    accuracy: Accuracy,
    reference_sigma_h: PercentileRow,
    service_levels: ServiceLevels,
    visibility: StreamPair<Visibility>,
    position_modes: StreamPair<ModeAvailability>,
    correction_age: StreamPair<Vec<ThresholdFraction>>,
    cdf_files: Vec<String>,
}

fn visibility(sats: Vec<f64>, hdop: Vec<f64>) -> Visibility {
    let (n_sats, n_hdop) = (sats.len(), hdop.len());
    let sats = EmpiricalDistribution::new(sats).ok();
    let hdop = EmpiricalDistribution::new(hdop).ok();
    Visibility {
        n_sats,
        num_sats: sats.as_ref().map(PercentileRow::at_least),
        n_hdop,
        hdop: hdop.as_ref().map(PercentileRow::upper),
    }
}

fn add_cdf(outputs: &mut Outputs, name: &str, values: Vec<f64>) {
    if let Ok(d) = EmpiricalDistribution::new(values) {
        outputs.add(name, cdf_csv(&d.cdf_points()));
    }
}

pub fn run(cfg: &RunConfig, opts: &ReportOptions<'_>) -> Result<(), CliError> {
    let out = cfg.require_out()?;
    let loaded = match opts.alignment {
        Some(p) => Some(load_alignment(p)?),
        None if cfg.model == AlignmentModel::TranslationOnly && opts.assume_identity => None,
        None => {
            return Err(CliError::Format(
                "report needs --alignment, or --model translation-only with --assume-identity".into(),
            ))
        }
    };
    let prepared = prepare(cfg)?;
    let mut inputs: Vec<_> = prepared.inputs.iter().map(|f| f.digest()).collect();
    let (origin, solution) = match loaded {
        Some((file, solution)) => {
            inputs.push(file.digest());
            ("file", solution)
        }
        None => (
            "inline",
            align_observations(&observations(&prepared.pairs), AlignmentModel::TranslationOnly)?,
        ),
    };
    for w in &solution.warnings {
        eprintln!("warning: {w}");
    }

    let errors = compute_residuals(&prepared.pairs, &solution, cfg.rotation_source);
    if errors.is_empty() {
        return Err(CliError::Insufficient("no confident pairs to evaluate".into()));
    }
    let accuracy = Accuracy {
        source: "measured",
        summary: error_summary(&errors)?,
        signed: if opts.signed { Some(error_summary_signed(&errors)?) } else { None },
    };
    let lateral: Vec<f64> = errors.iter().map(|e| e.lateral.abs()).collect();
    let refs = &prepared.refs;
    let evals = &prepared.evals;
    let sigma_h: Vec<f64> = refs.iter().map(|r| r.sigma_h).collect();
    let service_levels = ServiceLevels {
        measured: service_level_availability(&lateral, &cfg.service_thresholds)?,
        reference_reported: service_level_availability(&sigma_h, &cfg.service_thresholds)?,
    };
    let reference_sigma_h = PercentileRow::upper(&EmpiricalDistribution::new(sigma_h.clone())?);

    let ref_sats: Vec<f64> = refs.iter().filter_map(|r| r.num_sats.map(f64::from)).collect();
    let ref_hdop: Vec<f64> = refs.iter().filter_map(|r| r.hdop).collect();
    let eval_sats: Vec<f64> = evals.iter().filter_map(|e| e.num_sats.map(f64::from)).collect();
    let eval_hdop: Vec<f64> = evals.iter().filter_map(|e| e.hdop).collect();
    let visibility = StreamPair {
        reference: visibility(ref_sats.clone(), ref_hdop.clone()),
        eval: visibility(eval_sats.clone(), eval_hdop.clone()),
    };
    let position_modes = StreamPair {
        reference: mode_availability(refs.iter().map(|r| r.mode))?,
        eval: mode_availability(evals.iter().map(|e| e.mode()))?,
    };
    let ref_ages: Vec<Option<f64>> = refs.iter().map(|r| r.corr_age).collect();
    let eval_ages: Vec<Option<f64>> = evals.iter().map(|e| e.corr_age).collect();
    let correction_age = StreamPair {
        reference: correction_age_availability(&ref_ages, &DEFAULT_CORRECTION_AGE_THRESHOLDS)?,
        eval: correction_age_availability(&eval_ages, &DEFAULT_CORRECTION_AGE_THRESHOLDS)?,
    };

    let mut outputs = Outputs::default();
    add_cdf(&mut outputs, "cdf_lateral.csv", lateral);
    add_cdf(&mut outputs, "cdf_longitudinal.csv", errors.iter().map(|e| e.longitudinal.abs()).collect());
    add_cdf(&mut outputs, "cdf_horizontal.csv", errors.iter().map(|e| e.horizontal).collect());
    add_cdf(&mut outputs, "cdf_vertical.csv", errors.iter().map(|e| e.vertical.abs()).collect());
    add_cdf(&mut outputs, "cdf_ref_sigma_h.csv", sigma_h);
    add_cdf(&mut outputs, "cdf_ref_num_sats.csv", ref_sats);
    add_cdf(&mut outputs, "cdf_ref_hdop.csv", ref_hdop);
    add_cdf(&mut outputs, "cdf_ref_corr_age.csv", ref_ages.iter().flatten().copied().collect());
    add_cdf(&mut outputs, "cdf_eval_num_sats.csv", eval_sats);
    add_cdf(&mut outputs, "cdf_eval_hdop.csv", eval_hdop);
    add_cdf(&mut outputs, "cdf_eval_corr_age.csv", eval_ages.iter().flatten().copied().collect());
    let cdf_files: Vec<String> = outputs.names().map(str::to_string).collect();

    let doc = ReportDoc {
        provenance: Provenance::new("report", cfg, inputs),
        pairing: &prepared.report,
        alignment: AlignmentUsed {
            origin,
            solution: &solution,
        },
        accuracy,
        reference_sigma_h,
        service_levels,
        visibility,
        position_modes,
        correction_age,
        cdf_files,
    };
    outputs.add("report.json", json_bytes(&doc));
    outputs.commit(out)?;

    let s = &doc.accuracy.summary;
    println!("pairs evaluated: {}", s.n);
    println!(
        "lateral error p68/p95/p99: {:.4} / {:.4} / {:.4} m",
        s.lateral.p68, s.lateral.p95, s.lateral.p99
    );
    for level in &doc.service_levels.measured.levels {
        println!("{} (<{} m): {:.4}", level.name, level.threshold, level.availability);
    }
    println!(
        "eval RTK fixed: {:.4}, reference RTK fixed: {:.4}",
        doc.position_modes.eval.get(PositionMode::RtkFixed),
        doc.position_modes.reference.get(PositionMode::RtkFixed)
    );
    Ok(())
}
