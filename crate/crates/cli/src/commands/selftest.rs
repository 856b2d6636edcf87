//! Generates a fixture pair with known transform parameters, runs it through
//! the file-based pipeline and checks what comes back.

use std::fs;
use std::path::Path;

use serde::Serialize;

use gnssbench::align::{
    align_observations, observations, position_scale, AlignError, AlignmentModel, AlignmentParameters,
    RotationSource, MIN_PAIRS, RECOMMENDED_PAIRS,
};
use gnssbench::geodesy::LocalVector;
use gnssbench::synth::{generate, write_eval_nmea, write_reference_csv, GeneratorConfig, SyntheticRun};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{json_bytes, InputFile, Outputs, Provenance};
use crate::pipeline::prepare;

/// Noise-free recovery bounds. The fixture's NMEA file stores latitude and
/// longitude to 1e-12 arc-minutes, about 2e-9 m, so the residual cannot
/// reach the in-memory floor.
pub const EXACT_PARAMETER_TOL_M: f64 = 1e-6;
pub const EXACT_RMS_TOL_M: f64 = 1e-8;
/// Bounds for noisy fixtures, in standard errors and in standard deviations
/// of the RMS/σ ratio.
pub const NOISY_SIGMAS: f64 = 5.0;

pub struct SelftestOptions {
    pub seed: u64,
    pub n: usize,
    pub noise: f64,
    pub constant_heading: bool,
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    name: String,
    value: f64,
    limit: f64,
    pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            pass: value <= limit,
        }
    }
}

#[derive(Serialize)]
struct Verdict {
    verdict: &'static str,
    seed: u64,
    n: usize,
    noise_m: f64,
    constant_heading: bool,
    model: AlignmentModel,
    /// Error the pipeline was expected to raise and did.
    expected_error: Option<String>,
    truth: AlignmentParameters,
    estimate: AlignmentParameters,
    checks: Vec<Check>,
}

#[derive(Serialize)]
struct SelftestDoc<'a> {
    #[serde(flatten)]
    provenance: Provenance<'a>,
    #[serde(flatten)]
    verdict: &'a Verdict,
}

fn write_fixture(run: &SyntheticRun, dir: &Path) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let tmp_ref = dir.join(".reference.csv.tmp");
    let tmp_eval = dir.join(".eval.nmea.tmp");
    write_reference_csv(run, &tmp_ref).map_err(io)?;
    write_eval_nmea(run, &tmp_eval).map_err(io)?;
    fs::rename(&tmp_ref, dir.join("reference.csv")).map_err(io)?;
    fs::rename(&tmp_eval, dir.join("eval.nmea")).map_err(io)?;
    Ok(())
}

/// Generator truth re-expressed about the pipeline's anchor. Both frames
/// share their axes up to the anchor shift `c`, so only the global offset
/// moves: `y_eval + (R − I)·c`.
fn truth_in_frame(run: &SyntheticRun, shift: &LocalVector) -> AlignmentParameters {
    let mut truth = run.truth;
    let c = shift.to_vector();
    let d = truth.rotation.0 * c - c;
    truth.y_eval = LocalVector::from_vector(truth.y_eval.to_vector() + d);
    truth
}

pub fn run(cfg: &RunConfig, opts: &SelftestOptions) -> Result<(), CliError> {
    let out = cfg.require_out()?;
    if opts.n < RECOMMENDED_PAIRS {
        return Err(CliError::Insufficient(format!(
            "selftest needs n >= {RECOMMENDED_PAIRS}, got {} (alignment itself needs at least {MIN_PAIRS} pairs)",
            opts.n
        )));
    }
    if !(opts.noise.is_finite() && opts.noise >= 0.0) {
        return Err(CliError::Format(format!("noise must be non-negative, got {}", opts.noise)));
    }
    let gen = GeneratorConfig {
        seed: opts.seed,
        n: opts.n,
        noise_sigma_m: opts.noise,
        constant_heading: opts.constant_heading,
        ..GeneratorConfig::default()
    };
    let synthetic = generate(&gen);
    write_fixture(&synthetic, out)?;

    let mut run_cfg = cfg.clone();
    run_cfg.ref_path = Some(out.join("reference.csv"));
    run_cfg.eval_path = Some(out.join("eval.nmea"));
    let prepared = prepare(&run_cfg)?;
    let shift = synthetic
        .frame
        .geodetic_to_local(&prepared.report.anchor)
        .map_err(|e| CliError::Format(e.to_string()))?;
    let truth = truth_in_frame(&synthetic, &shift);
    let obs = observations(&prepared.pairs);
    let scale = position_scale(&obs);

    let mut checks = Vec::new();
    let mut expected_error = None;
    let model = if opts.constant_heading {
        match align_observations(&obs, AlignmentModel::Full15) {
            Err(e @ AlignError::RankDeficient { class, .. }) => {
                let matched = class.lever_arm && class.global_offset && !class.rotation;
                checks.push(Check {
                    name: "full15 rank deficiency is lever arm + global offset".into(),
                    value: f64::from(u8::from(matched)),
                    limit: 1.0,
                    pass: matched,
                });
                expected_error = Some(e.to_string());
            }
            Err(e) => return Err(e.into()),
            Ok(_) => checks.push(Check {
                name: "full15 rank deficiency raised".into(),
                value: 0.0,
                limit: 1.0,
                pass: false,
            }),
        }
        AlignmentModel::NoGlobalOffset
    } else {
        cfg.model
    };

    let solution = align_observations(&obs, model)?;
    let estimate = solution.parameters(RotationSource::Raw);
    if opts.noise == 0.0 {
        checks.push(Check::at_most(
            "max parameter error (m)",
            estimate.equivalent_error_m(&truth, scale),
            EXACT_PARAMETER_TOL_M,
        ));
        checks.push(Check::at_most("rms residual (m)", solution.rms_residual, EXACT_RMS_TOL_M));
    } else {
        let dof = (3 * solution.n_points - model.unknowns()) as f64;
        let ratio = solution.rms_residual / opts.noise;
        checks.push(Check::at_most(
            "|rms/noise - 1|",
            (ratio - 1.0).abs(),
            NOISY_SIGMAS / (2.0 * dof).sqrt(),
        ));
        let (est, tru) = (estimate.to_array(), truth.to_array());
        for slot in 9..15 {
            if let Some(se) = solution.std_errors[slot] {
                checks.push(Check::at_most(
                    format!("offset slot {slot} error in standard errors"),
                    (est[slot] - tru[slot]).abs() / se,
                    NOISY_SIGMAS,
                ));
            }
        }
    }

    let pass = checks.iter().all(|c| c.pass);
    let verdict = Verdict {
        verdict: if pass { "pass" } else { "fail" },
        seed: opts.seed,
        n: opts.n,
        noise_m: opts.noise,
        constant_heading: opts.constant_heading,
        model,
        expected_error,
        truth,
        estimate,
        checks,
    };
    let fixture_inputs: Vec<_> = ["reference.csv", "eval.nmea"]
        .iter()
        .zip(["ref", "eval"])
        .map(|(name, role)| InputFile::read(role, &out.join(name)).map(|f| f.digest()))
        .collect::<Result<_, _>>()?;
    let doc = SelftestDoc {
        provenance: Provenance::new("selftest", &run_cfg, fixture_inputs),
        verdict: &verdict,
    };
    let mut outputs = Outputs::default();
    outputs.add("selftest.json", json_bytes(&doc));
    outputs.commit(out)?;
    println!("{}", serde_json::to_string(&verdict).expect("verdict serializes"));

    if pass {
        Ok(())
    } else {
        let failed: Vec<String> = verdict
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("{} = {:e} exceeds {:e}", c.name, c.value, c.limit))
            .collect();
        Err(CliError::Check(failed.join("; ")))
    }
}
