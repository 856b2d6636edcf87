use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use gnssbench::align::compute_residuals;
use gnssbench::perfmap::{aggregate_cells, bin_epochs, cells_csv, export_geojson, CellSize};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{json_bytes, Outputs, Provenance};
use crate::pipeline::{load_alignment, load_quality_stream, prepare, Source};

#[derive(Serialize)]
struct MapDoc<'a> {
    #[serde(flatten)]
    provenance: Provenance<'a>,
    source: Source,
    epochs: usize,
    binned: usize,
    excluded: usize,
    epochs_with_lateral_error: usize,
    cells: usize,
}

pub fn run(cfg: &RunConfig, source: Option<Source>, alignment: Option<&Path>) -> Result<(), CliError> {
    let out = cfg.require_out()?;
    let cell_size = CellSize::new(cfg.cell_size, cfg.cell_size_lon)?;
    let mut stream = load_quality_stream(cfg, source)?;
    let mut digests: Vec<_> = stream.inputs.iter().map(|f| f.digest()).collect();

    let mut with_error = 0;
    if let Some(path) = alignment {
        let (file, solution) = load_alignment(path)?;
        let prepared = prepare(cfg)?;
        for f in &prepared.inputs {
            if !digests.iter().any(|d| d.role == f.role) {
                digests.push(f.digest());
            }
        }
        digests.push(file.digest());
        let errors = compute_residuals(&prepared.pairs, &solution, cfg.rotation_source);
        let by_time: HashMap<u64, f64> = errors.iter().map(|e| (e.t.to_bits(), e.lateral.abs())).collect();
        for s in &mut stream.samples {
            s.lateral_error = by_time.get(&s.t.to_bits()).copied();
            with_error += usize::from(s.lateral_error.is_some());
        }
    }

    let binning = bin_epochs(&stream.samples, cell_size);
    let cells = aggregate_cells(&binning);
    let mut outputs = Outputs::default();
    outputs.add("perfmap.geojson", export_geojson(&cells));
    outputs.add("perfmap_cells.csv", cells_csv(&cells));
    let doc = MapDoc {
        provenance: Provenance::new("map", cfg, digests),
        source: stream.source,
        epochs: stream.samples.len(),
        binned: binning.binned(),
        excluded: binning.excluded,
        epochs_with_lateral_error: with_error,
        cells: cells.len(),
    };
    outputs.add("map.json", json_bytes(&doc));
    outputs.commit(out)?;

    println!("epochs binned: {} of {}", doc.binned, doc.epochs);
    println!("cells: {}", doc.cells);
    Ok(())
}
