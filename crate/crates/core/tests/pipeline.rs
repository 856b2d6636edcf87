//! End-to-end flows through the library: generated fixtures written to disk,
//! parsed back, paired and analysed.

use std::fs::File;
use std::io::BufReader;

use gnssbench::align::{
    align_pairs, compute_residuals, error_summary, observations, position_scale, select_confident_pairs,
    AlignmentModel, RotationSource,
};
use gnssbench::continuity::{
    continuity_table, labelled, mode_class_predicates, outage_accounting, make_condition, sats_predicates,
};
use gnssbench::ingest::{parse_ref_csv, read_nmea, synchronize, QualitySample};
use gnssbench::perfmap::{aggregate_cells, bin_epochs, CellSize};
use gnssbench::synth::{first_date, generate, write_eval_nmea, write_reference_csv, GeneratorConfig, ModeMix};

fn through_files(cfg: &GeneratorConfig) -> (gnssbench::synth::SyntheticRun, Vec<gnssbench::ingest::PairedEpoch>) {
    let run = generate(cfg);
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("ref.csv");
    let e = dir.path().join("eval.nmea");
    write_reference_csv(&run, &r).unwrap();
    write_eval_nmea(&run, &e).unwrap();
    let refs = parse_ref_csv(File::open(&r).unwrap()).unwrap();
    let evals = read_nmea(BufReader::new(File::open(&e).unwrap()), first_date(&run).unwrap()).unwrap();
    assert_eq!(refs.diagnostics.total_failures(), 0);
    assert_eq!(evals.diagnostics.total_failures(), 0);
    assert_eq!(refs.epochs.len(), cfg.n);
    let sync = synchronize(&refs.epochs, &evals.epochs, &run.frame, 0.5);
    assert_eq!(sync.stats.paired, cfg.n);
    (run, sync.pairs)
}

#[test]
fn noise_free_files_recover_the_generator_transform() {
    for seed in [2, 5] {
        let cfg = GeneratorConfig {
            seed,
            n: 600,
            ..GeneratorConfig::default()
        };
        let (run, pairs) = through_files(&cfg);
        let pairs = select_confident_pairs(pairs, 0.1);
        let solution = align_pairs(&pairs, AlignmentModel::Full15).unwrap();
        let scale = position_scale(&observations(&pairs));
        let err = solution.parameters(RotationSource::Raw).equivalent_error_m(&run.truth, scale);
        assert!(err < 1e-6, "seed {seed}: {err}");
        assert!(solution.rms_residual < 1e-8);
    }
}

#[test]
fn residuals_reproduce_the_solver_rms() {
    let cfg = GeneratorConfig {
        seed: 4,
        n: 2000,
        noise_sigma_m: 0.05,
        ..GeneratorConfig::default()
    };
    let (_, pairs) = through_files(&cfg);
    let solution = align_pairs(&pairs, AlignmentModel::Full15).unwrap();
    let errors = compute_residuals(&pairs, &solution, RotationSource::Raw);
    assert_eq!(errors.len(), pairs.len());
    let ss: f64 = errors.iter().map(|e| e.epsilon_ned.norm().powi(2)).sum();
    let rms = (ss / (3 * errors.len()) as f64).sqrt();
    assert!((rms - solution.rms_residual).abs() < 1e-9 * rms, "{rms} vs {}", solution.rms_residual);
    // Each body component of isotropic 5 cm noise has 68% of its mass
    // within about one sigma.
    let summary = error_summary(&errors).unwrap();
    assert!((summary.lateral.p68 - 0.05).abs() < 0.005, "{:?}", summary.lateral);
}

#[test]
fn continuity_table_matches_per_predicate_brute_force() {
    let run = generate(&GeneratorConfig {
        seed: 8,
        n: 3000,
        mode_mix: Some(ModeMix::urban_highway()),
        ..GeneratorConfig::default()
    });
    let samples: Vec<QualitySample> = run.refs.iter().map(QualitySample::from).collect();
    let mut predicates = mode_class_predicates();
    predicates.extend(labelled(sats_predicates(&[10, 14])));
    let windows = [1.0, 4.0, 15.0];
    let table = continuity_table(&samples, &predicates, &windows).unwrap();
    for (col, (_, p)) in predicates.iter().enumerate() {
        let flags: Vec<bool> = samples.iter().map(|s| p.holds(s)).collect();
        let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
        let t_last = *t.last().unwrap();
        for (row, &w) in windows.iter().enumerate() {
            let (mut trials, mut losses) = (0usize, 0usize);
            for i in 0..t.len() {
                if flags[i] && t[i] + w <= t_last {
                    trials += 1;
                    if (i + 1..t.len()).any(|j| t[j] <= t[i] + w && !flags[j]) {
                        losses += 1;
                    }
                }
            }
            let want = (trials > 0).then(|| losses as f64 / trials as f64);
            assert_eq!(table.cells[row][col], want, "{} at {w} s", table.columns[col]);
            assert_eq!(table.trials[row][col], trials);
        }
        let acc = outage_accounting(&make_condition(&samples, p).unwrap());
        let total = acc.outage_s + acc.in_service_s + acc.gap_s;
        assert!((total - acc.span_s).abs() < 1e-9);
    }
}

#[test]
fn perfmap_cells_partition_the_positioned_epochs() {
    let run = generate(&GeneratorConfig {
        seed: 3,
        n: 5000,
        speed_mps: 20.0,
        mode_mix: Some(ModeMix::urban_highway()),
        ..GeneratorConfig::default()
    });
    let samples: Vec<QualitySample> = run.evals.iter().map(QualitySample::from).collect();
    let size = CellSize::new(0.001, 0.0015).unwrap();
    let binning = bin_epochs(&samples, size);
    let cells = aggregate_cells(&binning);
    let positioned = samples.iter().filter(|s| s.position.is_some()).count();
    assert_eq!(binning.excluded, samples.len() - positioned);
    assert_eq!(cells.iter().map(|c| c.epoch_count).sum::<usize>(), positioned);
    for s in samples.iter().filter_map(|s| s.position) {
        let key = (
            (s.latitude / 0.001).floor() as i64,
            (s.longitude / 0.0015).floor() as i64,
        );
        assert!(cells.iter().any(|c| (c.cell_lat_index, c.cell_lon_index) == key));
    }
    for c in &cells {
        assert!((0.0..=1.0).contains(&c.metrics.rtk_fixed_availability));
    }
}
