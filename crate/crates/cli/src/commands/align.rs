use serde::Serialize;

use gnssbench::align::{align_observations, observations, AlignmentSolution};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{json_bytes, Outputs, Provenance};
use crate::pipeline::{prepare, PairingReport};

#[derive(Serialize)]
struct AlignmentDoc<'a> {
    #[serde(flatten)]
    provenance: Provenance<'a>,
    pairing: &'a PairingReport,
    solution: &'a AlignmentSolution,
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg.require_out()?;
    let prepared = prepare(cfg)?;
    let solution = align_observations(&observations(&prepared.pairs), cfg.model)?;
    for w in &solution.warnings {
        eprintln!("warning: {w}");
    }

    let doc = AlignmentDoc {
        provenance: Provenance::new(
            "align",
            cfg,
            prepared.inputs.iter().map(|f| f.digest()).collect(),
        ),
        pairing: &prepared.report,
        solution: &solution,
    };
    let mut outputs = Outputs::default();
    outputs.add("alignment.json", json_bytes(&doc));
    outputs.commit(out)?;

    println!("model: {}", solution.model);
    println!("pairs: {}", solution.n_points);
    println!("heading span: {:.1} deg", solution.heading_span_deg);
    println!("condition number: {:.3e}", solution.condition_number);
    println!("rms residual: {:.6e} m", solution.rms_residual);
    Ok(())
}
